use std::process::ExitCode;

fn main() -> ExitCode {
    w5cat::cli::run(std::env::args_os())
}
