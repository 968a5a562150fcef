fn main() {
    std::process::exit(qfunc::cli::run(std::env::args_os()));
}
