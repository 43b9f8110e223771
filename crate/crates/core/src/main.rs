fn main() {
    std::process::exit(sidelrm::cli::run(std::env::args_os()));
}
