fn main() {
    std::process::exit(mllsgd::cli::run_cli(std::env::args()));
}
