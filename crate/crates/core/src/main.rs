fn main() {
    std::process::exit(nloc::cli::run_command(std::env::args_os()));
}
