fn main() {
    std::process::exit(torus_vrep::cli::run(std::env::args_os()));
}
