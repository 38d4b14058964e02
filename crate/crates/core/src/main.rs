use std::process::ExitCode;

fn main() -> ExitCode {
    tsfc::cli::main_with_args(std::env::args_os())
}
