fn main() {
    std::process::exit(mcgc_core::cli::dispatch(std::env::args_os()));
}
