//! Command-line front end (under construction).

/// Entry point used by the `mkf` binary.
pub fn run<I: IntoIterator<Item = String>>(_argv: I) -> i32 {
    2
}
