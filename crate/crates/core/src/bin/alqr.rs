fn main() {
    std::process::exit(alqr::harness::cli::cli_main(std::env::args_os()));
}
