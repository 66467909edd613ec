fn main() {
    std::process::exit(trapkit_cli::run_from_env());
}
