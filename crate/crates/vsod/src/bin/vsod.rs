fn main() {
    std::process::exit(vsod::cli::run(std::env::args().skip(1)));
}
