fn main() {
    std::process::exit(belief_store_server::cli::main(std::env::args_os()));
}
