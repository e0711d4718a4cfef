fn main() {
    std::process::exit(pmeans::cli::main());
}
