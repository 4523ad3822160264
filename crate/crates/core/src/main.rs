fn main() {
    std::process::exit(navacl::harness::cli::run(std::env::args_os()));
}
