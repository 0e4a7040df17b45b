use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(edca_cli::run(std::env::args_os()))
}
