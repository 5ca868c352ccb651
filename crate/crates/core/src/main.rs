fn main() { std::process::exit(cavity_bell::cli::run()) }
