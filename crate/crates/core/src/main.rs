fn main() {
    std::process::exit(cablequad::evaluation::cli::cli_main(std::env::args_os()));
}
