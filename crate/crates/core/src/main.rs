fn main() {
    std::process::exit(sdgtag::cli::run(std::env::args_os()));
}
