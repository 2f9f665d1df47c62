fn main() {
    std::process::exit(coalflow::cli::run_command(std::env::args()));
}
