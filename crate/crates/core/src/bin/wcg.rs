fn main() {
    std::process::exit(wcg_core::cli::run(std::env::args_os()));
}
