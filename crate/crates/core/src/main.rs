fn main() {
    std::process::exit(coper::cli::run());
}
