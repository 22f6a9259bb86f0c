fn main() {
    std::process::exit(uncertainty_kit::cli::main_with_args(std::env::args_os()));
}
