fn main() {
    std::process::exit(knowsearch::cli::main());
}
