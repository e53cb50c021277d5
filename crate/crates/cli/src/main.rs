fn main() {
    env_logger::init();
    std::process::exit(definetti_cli::run(std::env::args_os()));
}
