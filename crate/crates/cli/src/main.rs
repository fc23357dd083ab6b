fn main() {
    std::process::exit(vforge_cli::run(std::env::args_os()));
}
