fn main() {
    std::process::exit(concavity::cli::run(std::env::args_os()));
}
