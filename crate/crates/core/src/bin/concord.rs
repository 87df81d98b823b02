fn main() {
    std::process::exit(concord::cli::run(std::env::args_os()));
}
