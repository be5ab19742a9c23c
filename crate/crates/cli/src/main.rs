fn main() {
    std::process::exit(mgsp_cli::run(std::env::args_os()));
}
