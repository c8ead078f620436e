//! Stable serialization: exact rationals as `"num/den"`, big integers as
//! decimal strings, sorted keys, atomic file writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::ser::SerializeMap;
use serde::Serializer;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::interval::Interval;

/// Always `num/den`, even for integers, so a reader never has to guess the type.
pub fn rational_string(x: &BigRational) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

pub fn ser_rat<S: Serializer>(x: &BigRational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&rational_string(x))
}

pub fn ser_opt_rat<S: Serializer>(x: &Option<BigRational>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(x) => s.serialize_str(&rational_string(x)),
        None => s.serialize_none(),
    }
}

pub fn ser_int<S: Serializer>(x: &BigInt, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

pub fn ser_interval<S: Serializer>(x: &Interval, s: S) -> Result<S::Ok, S::Error> {
    let mut m = s.serialize_map(Some(2))?;
    m.serialize_entry("hi", &rational_string(x.hi()))?;
    m.serialize_entry("lo", &rational_string(x.lo()))?;
    m.end()
}

pub fn ser_opt_interval<S: Serializer>(x: &Option<Interval>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(x) => ser_interval(x, s),
        None => s.serialize_none(),
    }
}

pub fn interval_value(x: &Interval) -> Value {
    serde_json::json!({ "lo": rational_string(x.lo()), "hi": rational_string(x.hi()) })
}

/// Pretty JSON with keys sorted at every level. `serde_json::Value` keeps
/// objects in a `BTreeMap` unless `preserve_order` is enabled.
pub fn to_canonical_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("Value always serializes");
    s.push('\n');
    s
}

/// Lowercase sha256 hex of the canonical rendering of `config`.
pub fn config_hash(config: &Value) -> String {
    let canon = serde_json::to_string(config).expect("Value always serializes");
    hex::encode(Sha256::digest(canon.as_bytes()))
}

/// Minimal CSV writer. Fields containing separators or quotes are quoted.
pub fn to_csv(header: &[&str], rows: &[Vec<String>]) -> String {
    fn field(f: &str) -> String {
        if f.contains([',', '"', '\n']) {
            format!("\"{}\"", f.replace('"', "\"\""))
        } else {
            f.to_string()
        }
    }
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.iter().map(|f| field(f)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

/// Writes to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}
