fn main() {
    std::process::exit(pedcall::cli::run(std::env::args_os()));
}
