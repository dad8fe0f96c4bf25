fn main() {
    std::process::exit(elastocavity::cli::main_with_args(std::env::args_os()));
}
