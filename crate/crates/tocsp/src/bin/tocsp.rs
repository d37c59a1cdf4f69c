fn main() { std::process::exit(tocsp::cli::run()); }
