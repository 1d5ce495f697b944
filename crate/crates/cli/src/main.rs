fn main() {
    std::process::exit(batchcal_cli::run(std::env::args_os()));
}
