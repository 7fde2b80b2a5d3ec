fn main() {
    std::process::exit(fracsob::cli::run(std::env::args_os()));
}
