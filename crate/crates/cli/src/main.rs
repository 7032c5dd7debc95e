fn main() {
    std::process::exit(pebo_cli::main_with_args(std::env::args_os()));
}
