fn main() {
    env_logger::init();
    std::process::exit(ampdx::cli::run(std::env::args_os()));
}
