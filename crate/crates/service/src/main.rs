use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use terra_service::{Service, ServiceConfig};

fn usage() -> ExitCode {
    eprintln!("usage: terra-server [CONFIG.toml]\n\nenvironment: TERRA_STORE, TERRA_GAZETTEER, TERRA_BIND, TERRA_TEST_MODE, TERRA_LOG");
    ExitCode::from(1)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TERRA_LOG", "warn")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let config_path = match args.as_slice() {
        [] => std::env::var_os("TERRA_CONFIG").map(PathBuf::from),
        [flag] if flag == "-h" || flag == "--help" => return usage(),
        [path] => Some(PathBuf::from(path)),
        _ => return usage(),
    };
    let config = match ServiceConfig::load(config_path.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("terra-server: {e}");
            return ExitCode::from(1);
        }
    };
    let service = match Service::from_config(&config) {
        Ok(s) => Arc::new(s),
        Err(e) => {
            eprintln!("terra-server: {e}");
            return ExitCode::from(1);
        }
    };
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("terra-server: {e}");
            return ExitCode::from(1);
        }
    };
    let result = runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&config.bind).await?;
        eprintln!("terra-server listening on http://{}", listener.local_addr()?);
        terra_service::http::serve(listener, service, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("terra-server: {e}");
            ExitCode::from(1)
        }
    }
}
