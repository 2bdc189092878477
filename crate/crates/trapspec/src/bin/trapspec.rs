fn main() {
    std::process::exit(trapspec::cli::run_from(std::env::args_os()));
}
