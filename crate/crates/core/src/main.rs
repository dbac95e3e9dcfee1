fn main() {
    std::process::exit(sinkhorn_mirror::cli::run(std::env::args_os()));
}
