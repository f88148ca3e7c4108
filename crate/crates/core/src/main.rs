fn main() {
    std::process::exit(proba::cli::run_cli(std::env::args_os()));
}
