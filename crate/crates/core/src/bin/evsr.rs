fn main() {
    std::process::exit(evsr::cli::run(std::env::args_os()));
}
