fn main() {
    std::process::exit(arbx::cli::run(std::env::args_os()));
}
