fn main() {
    std::process::exit(donor_dot::cli::run());
}
