fn main() {
    std::process::exit(colordesc::cli::run(std::env::args_os()));
}
