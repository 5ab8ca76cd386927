fn main() {
    std::process::exit(horizon_fv::cli::main_with_args(std::env::args_os()));
}
