fn main() {
    std::process::exit(stabilitykit::cli::main());
}
