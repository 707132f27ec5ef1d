fn main() {
    std::process::exit(mayerkit::cli::run(std::env::args_os()));
}
