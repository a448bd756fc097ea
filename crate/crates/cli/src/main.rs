fn main() {
    std::process::exit(trajectory_guard_cli::run(std::env::args_os()));
}
