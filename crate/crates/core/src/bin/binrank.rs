fn main() {
    std::process::exit(binrank::cli::run(std::env::args_os()));
}
