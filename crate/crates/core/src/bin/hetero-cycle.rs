fn main() {
    std::process::exit(hetero_cycle::cli::run(std::env::args_os()));
}
