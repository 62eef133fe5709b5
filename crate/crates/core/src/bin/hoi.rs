fn main() {
    std::process::exit(hoi::cli::run(std::env::args_os()));
}
