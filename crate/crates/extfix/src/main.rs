fn main() {
    std::process::exit(extfix::cli::main());
}
