fn main() {
    std::process::exit(cmalab::cli::run(std::env::args_os()));
}
