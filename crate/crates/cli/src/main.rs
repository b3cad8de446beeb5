fn main() {
    std::process::exit(copolymer_cli::main_with_args(std::env::args_os()));
}
