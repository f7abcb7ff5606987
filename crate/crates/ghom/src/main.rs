fn main() {
    std::process::exit(ghom::cli::run_cli(std::env::args_os()));
}
