fn main() {
    std::process::exit(gradate_cli::run(std::env::args_os()));
}
