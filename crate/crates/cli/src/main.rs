fn main() {
    std::process::exit(ftn::run(std::env::args_os()));
}
