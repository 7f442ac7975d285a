fn main() {
    std::process::exit(cote_cli::run(std::env::args_os()));
}
