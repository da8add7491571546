fn main() {
    std::process::exit(sde_asympt::cli::main_with_args(std::env::args_os()));
}
