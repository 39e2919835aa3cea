fn main() {
    std::process::exit(legalnli::cli::run(std::env::args_os()));
}
