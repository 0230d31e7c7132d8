fn main() {
    let code = mikado_flows::cli::run(std::env::args());
    std::process::exit(code);
}
