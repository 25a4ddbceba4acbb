fn main() {
    std::process::exit(vpl_cli::run(std::env::args_os()));
}
