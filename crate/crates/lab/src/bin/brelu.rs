fn main() {
    std::process::exit(brelu_lab::cli::run(std::env::args_os()));
}
