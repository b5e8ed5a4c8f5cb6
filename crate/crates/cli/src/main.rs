use std::process::ExitCode;

use freelens_cli::{parse_args, run, threads_from_env, CliError};

fn main() -> ExitCode {
    let config = match threads_from_env().and_then(|threads| {
        if let Some(n) = threads {
            freelens::par::init_global_threads(n);
        }
        parse_args(std::env::args_os().skip(1))
    }) {
        Ok(c) => c,
        Err(CliError::Help(text)) => {
            print!("{text}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("freelens: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    ExitCode::from(run(&config) as u8)
}
