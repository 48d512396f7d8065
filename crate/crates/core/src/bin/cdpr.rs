fn main() {
    std::process::exit(cdpr_core::cli::run(std::env::args_os()));
}
