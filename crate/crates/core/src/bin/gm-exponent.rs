fn main() {
    std::process::exit(gm_exponent::cli::run());
}
