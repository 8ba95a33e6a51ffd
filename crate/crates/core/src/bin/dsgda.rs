fn main() {
    std::process::exit(dsgda::harness::cli::run(std::env::args_os()));
}
