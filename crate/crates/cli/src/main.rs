fn main() {
    std::process::exit(combtrack_cli::run(std::env::args_os()));
}
