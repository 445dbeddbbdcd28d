fn main() -> std::process::ExitCode {
    lclab::cli::main_with_args(std::env::args_os())
}
