fn main() {
    std::process::exit(vstrata::cli::run(std::env::args_os()));
}
