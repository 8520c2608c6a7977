fn main() {
    std::process::exit(gsvd_iter::cli::run(std::env::args_os()));
}
