fn main() {
    std::process::exit(pslqe_cli::run(std::env::args_os()));
}
