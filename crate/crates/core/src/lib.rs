//! Exact arithmetic for Mahler product series `f(z) = prod_t P(z^{-d^t})` and
//! `g(z) = z^{-1} f(z)`.
//!
//! Layers, bottom up:
//!
//! * [`series`]: the instance `(d, u)` and the integer coefficients of `g`.
//! * [`cf`]: continued fractions over `Q((z^-1))`.
//! * [`hankel`]: Hankel determinants and integer convergents with height bounds.
//! * [`tower`]: convergents of `g(b)` built from the functional equation, and
//!   certified checks of the smallness and sandwich inequalities.
//! * [`audit`]: certified enclosures of `g(b)`, its real continued fraction and
//!   the irrationality-measure audit.
//! * [`cli`]: the `mahler` command.

pub mod error;
pub mod interval;
pub mod poly;
pub mod report;
pub mod series;
pub mod cf;
pub mod hankel;
pub mod enclosure;
pub mod tower;
pub mod audit;
pub mod cli;

pub use error::{Error, Result};
