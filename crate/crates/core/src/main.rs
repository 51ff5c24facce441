fn main() {
    std::process::exit(wavesys::cli::main_with(std::env::args_os()));
}
