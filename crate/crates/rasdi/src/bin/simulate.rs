fn main() {
    std::process::exit(rasdi::cli::main_with_args(std::env::args_os()));
}
