fn main() {
    std::process::exit(periodic_turnpike::cli::main_with_args(std::env::args_os()));
}
