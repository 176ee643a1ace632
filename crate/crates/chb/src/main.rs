fn main() {
    std::process::exit(chb::cli::run());
}
