fn main() -> std::process::ExitCode {
    recov::cli::main_with_args(std::env::args_os())
}
