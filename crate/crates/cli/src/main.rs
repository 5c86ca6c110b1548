fn main() {
    std::process::exit(wuglab_cli::run_cli(std::env::args_os()));
}
