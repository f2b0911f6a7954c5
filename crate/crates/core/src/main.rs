fn main() {
    std::process::exit(ethlab::cli::main_with_args(std::env::args_os()));
}
