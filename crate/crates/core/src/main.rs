fn main() {
    std::process::exit(fairgan::cli::run(std::env::args_os()));
}
