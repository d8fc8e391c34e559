fn main() {
    std::process::exit(dyadsense::cli::main_from_env());
}
