fn main() {
    std::process::exit(flowcover::cli::main(std::env::args_os()));
}
