fn main() {
    std::process::exit(fbcast::cli::run(std::env::args_os()));
}
