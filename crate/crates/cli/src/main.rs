fn main() {
    std::process::exit(tmat_cli::main_with_args(std::env::args_os()));
}
