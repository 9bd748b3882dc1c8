fn main() {
    std::process::exit(dbarlab::cli::run(std::env::args_os()));
}
