fn main() {
    std::process::exit(mixsurv::cli::run(std::env::args_os()));
}
