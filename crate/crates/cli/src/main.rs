use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(sslstm_cli::run(std::env::args_os()) as u8)
}
