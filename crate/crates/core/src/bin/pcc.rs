fn main() {
    std::process::exit(prosody_nn::cli::run(std::env::args_os()));
}
