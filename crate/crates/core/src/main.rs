fn main() {
    std::process::exit(ncrecon::pipeline::cli::run(std::env::args_os()));
}
