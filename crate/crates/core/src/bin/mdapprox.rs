fn main() {
    std::process::exit(mdapprox::cli::run(std::env::args_os()));
}
