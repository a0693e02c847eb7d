fn main() {
    std::process::exit(geomflow::cli::run(std::env::args_os()));
}
