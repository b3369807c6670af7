fn main() {
    std::process::exit(densefuse::cli::run(std::env::args_os()));
}
