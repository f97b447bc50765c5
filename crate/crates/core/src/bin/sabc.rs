fn main() {
    std::process::exit(sabc::cli::main_with_args(std::env::args_os()));
}
