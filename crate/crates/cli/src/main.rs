fn main() -> std::process::ExitCode {
    gnar_cli::run(std::env::args_os())
}
