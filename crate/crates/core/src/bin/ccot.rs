fn main() {
    std::process::exit(ccot::cli::main_with_args(std::env::args_os()));
}
