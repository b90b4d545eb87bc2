fn main() {
    std::process::exit(polygibbs::cli::run_from_env());
}
