fn main() {
    std::process::exit(mahler_core::cli::main_with_args(std::env::args_os()));
}
