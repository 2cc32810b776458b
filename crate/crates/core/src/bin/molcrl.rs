fn main() {
    std::process::exit(molcrl::cli::run(std::env::args_os().collect()));
}
