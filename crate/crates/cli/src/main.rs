fn main() {
    std::process::exit(enn_cli::run(std::env::args().skip(1)));
}
