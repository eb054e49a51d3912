fn main() {
    std::process::exit(smart_cli::main_with(std::env::args_os()));
}
