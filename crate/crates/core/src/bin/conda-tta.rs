fn main() {
    std::process::exit(conda_tta::cli::run(std::env::args_os()));
}
