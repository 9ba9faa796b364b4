fn main() {
    std::process::exit(adfair::main_with_args(std::env::args_os()));
}
