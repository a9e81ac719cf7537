fn main() {
    env_logger::init();
    std::process::exit(memlab::cli::main(std::env::args_os()));
}
