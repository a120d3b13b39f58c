use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TERRA_LOG", "warn")).init();
    ExitCode::from(terra_client::cli::run(std::env::args_os().collect()))
}
