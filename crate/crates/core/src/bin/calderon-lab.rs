fn main() {
    std::process::exit(calderon_lab::cli::run(std::env::args_os()));
}
