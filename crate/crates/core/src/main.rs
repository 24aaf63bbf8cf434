fn main() {
    std::process::exit(htr_core::cli::main_with_args(std::env::args_os()));
}
