fn main() {
    std::process::exit(cleot::cli::run());
}
