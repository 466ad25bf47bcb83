fn main() {
    std::process::exit(photon_distill::cli::main_with_args(std::env::args_os()));
}
