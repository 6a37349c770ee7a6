fn main() {
    std::process::exit(bwpred::cli::run(std::env::args_os()));
}
