fn main() {
    std::process::exit(olp::cli::cli_main(std::env::args_os()));
}
