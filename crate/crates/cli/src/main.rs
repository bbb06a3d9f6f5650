fn main() {
    std::process::exit(slbvp_cli::run(std::env::args_os()));
}
