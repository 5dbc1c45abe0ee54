fn main() {
    std::process::exit(trimodal::cli::run(std::env::args_os()));
}
