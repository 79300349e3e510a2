fn main() {
    std::process::exit(tworeg::cli::run(std::env::args_os()));
}
