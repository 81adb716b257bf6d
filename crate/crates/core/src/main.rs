fn main() {
    std::process::exit(ellipgen::cli::run(std::env::args_os()));
}
