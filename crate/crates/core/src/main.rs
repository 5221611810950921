fn main() {
    std::process::exit(qrl_core::io::cli::run_cli(std::env::args_os()));
}
