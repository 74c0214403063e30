use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::new()
        .filter_level(log::LevelFilter::Warn)
        .parse_default_env()
        .format_timestamp(None)
        .init();
    let threads = std::env::var("CPTSIM_THREADS").ok();
    if let Err(msg) = cptsim_cli::configure_threads(threads.as_deref()) {
        eprintln!("error[config]: {msg}");
        return ExitCode::from(cptsim_cli::EXIT_INVALID as u8);
    }
    let code = cptsim_cli::run_command(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr());
    ExitCode::from(code as u8)
}
