fn main() {
    std::process::exit(truncgeo::cli::run_cli(std::env::args_os()));
}
