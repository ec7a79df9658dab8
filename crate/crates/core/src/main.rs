fn main() {
    std::process::exit(mtve::cli::main_with_args(std::env::args_os()));
}
