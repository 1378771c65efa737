fn main() {
    std::process::exit(junction_control::cli::run(std::env::args_os()));
}
