fn main() {
    std::process::exit(crashcast::cli::main());
}
