fn main() {
    std::process::exit(rnn_orbits::cli::run(std::env::args_os()));
}
