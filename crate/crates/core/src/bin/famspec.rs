fn main() {
    std::process::exit(famspec::cli::run());
}
