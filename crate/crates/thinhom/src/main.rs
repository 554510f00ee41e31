fn main() {
    std::process::exit(thinhom::cli::run(std::env::args_os()));
}
