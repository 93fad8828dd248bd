fn main() {
    std::process::exit(cpimodel::cli::run(std::env::args_os()));
}
