fn main() {
    std::process::exit(omit_cli::run_from(std::env::args_os()));
}
