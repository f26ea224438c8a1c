use std::process::ExitCode;

fn main() -> ExitCode {
    let code = bellcom_cli::run_command(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr());
    ExitCode::from(code as u8)
}
