fn main() {
    std::process::exit(hbb::cli::run(std::env::args_os()));
}
