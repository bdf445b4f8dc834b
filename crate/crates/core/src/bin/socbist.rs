fn main() {
    std::process::exit(socbist::cli::run(std::env::args_os()));
}
