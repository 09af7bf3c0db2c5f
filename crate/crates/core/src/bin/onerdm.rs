fn main() {
    std::process::exit(onerdm::cli::run_cli(std::env::args_os()));
}
