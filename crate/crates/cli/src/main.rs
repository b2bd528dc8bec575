fn main() {
    std::process::exit(fracsource_cli::main_with(std::env::args_os()));
}
