fn main() {
    std::process::exit(assist_tomo::cli::main_with_args(std::env::args_os()));
}
