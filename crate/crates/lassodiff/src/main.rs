fn main() {
    std::process::exit(lassodiff::cli::run(std::env::args_os()));
}
