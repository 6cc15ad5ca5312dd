fn main() {
    std::process::exit(pseudo_rehearsal::cli::main());
}
