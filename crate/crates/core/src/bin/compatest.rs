fn main() {
    std::process::exit(compatest::cli::run(std::env::args_os()));
}
