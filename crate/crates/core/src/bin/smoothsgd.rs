fn main() {
    std::process::exit(smoothsgd::cli::main_with_args(std::env::args_os()));
}
