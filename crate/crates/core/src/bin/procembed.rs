fn main() {
    std::process::exit(procembed::cli::run(std::env::args_os()));
}
