fn main() {
    std::process::exit(tensile_bayes::cli::main_with(std::env::args_os()));
}
