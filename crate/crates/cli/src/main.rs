use std::process::ExitCode;

fn main() -> ExitCode {
    mergedse_cli::main(std::env::args_os())
}
