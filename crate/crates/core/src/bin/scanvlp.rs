fn main() {
    std::process::exit(scanvlp::cli::cli_main(std::env::args_os()));
}
