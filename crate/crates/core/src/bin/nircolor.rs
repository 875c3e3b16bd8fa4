use std::process::ExitCode;

fn main() -> ExitCode {
    nircolor::cli::main_with_args(std::env::args_os())
}
