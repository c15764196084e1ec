fn main() -> std::process::ExitCode {
    dynlab::cli::main_with_args(std::env::args_os())
}
