fn main() {
    std::process::exit(ringflow::cli::run(std::env::args_os()));
}
