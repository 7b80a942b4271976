fn main() {
    std::process::exit(degseq::cli::run(std::env::args_os()));
}
