fn main() {
    std::process::exit(kacmoment::cli::main_with_args(std::env::args_os()));
}
