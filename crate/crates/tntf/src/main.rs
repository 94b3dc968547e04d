fn main() {
    std::process::exit(tntf::cli::run());
}
