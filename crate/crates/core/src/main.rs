fn main() {
    std::process::exit(leakage_rb::cli::main_with_args(std::env::args_os()));
}
