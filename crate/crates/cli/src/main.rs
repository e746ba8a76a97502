use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).target(env_logger::Target::Stderr).init();

    if let Ok(v) = std::env::var("SMAE_THREADS") {
        match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("smae: cannot size the worker pool: {e}");
                }
            }
            _ => {
                eprintln!("smae: SMAE_THREADS must be a positive integer, got '{v}'");
                return ExitCode::from(smae_cli::EXIT_USAGE as u8);
            }
        }
    }

    ExitCode::from(smae_cli::run_command(std::env::args_os()) as u8)
}
