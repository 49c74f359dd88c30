fn main() {
    std::process::exit(multirate::cli::main_with_args(std::env::args_os()));
}
