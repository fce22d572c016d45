fn main() {
    std::process::exit(truncount::cli::run(std::env::args_os()));
}
