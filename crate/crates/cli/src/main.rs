fn main() {
    std::process::exit(facta_cli::main_with_args(std::env::args_os()));
}
