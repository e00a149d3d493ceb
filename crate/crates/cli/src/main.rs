fn main() {
    std::process::exit(eit_cli::main_with_args(std::env::args_os()));
}
