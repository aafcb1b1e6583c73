fn main() {
    std::process::exit(plap::cli::main_with_args(std::env::args_os()));
}
