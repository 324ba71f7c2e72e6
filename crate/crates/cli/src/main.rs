fn main() {
    std::process::exit(collapse_lab::run(std::env::args_os()));
}
