fn main() { std::process::exit(sle_gff::cli::entry()); }
