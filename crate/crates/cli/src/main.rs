fn main() {
    std::process::exit(treerep_cli::run(std::env::args_os()));
}
