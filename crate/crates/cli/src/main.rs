use std::io::{self, Write};
use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv: Vec<String> = std::env::args().collect();
    let result = dnt_cli::run(&argv, &mut io::stdin().lock());
    // a closed pipe downstream is not our error
    let _ = io::stdout().write_all(result.stdout.as_bytes());
    let _ = io::stderr().write_all(result.stderr.as_bytes());
    ExitCode::from(result.exit_code as u8)
}
