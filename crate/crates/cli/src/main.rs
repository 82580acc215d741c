fn main() {
    std::process::exit(chns_cli::run(std::env::args_os()));
}
