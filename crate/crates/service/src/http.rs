//! HTTP transport for [`Service`].

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Body;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Query, State};
use axum::http::{header, HeaderValue, Method, StatusCode, Uri};
use axum::response::Response;
use axum::Router;

use crate::error::{ErrorCode, ServiceError};
use crate::params::Params;
use crate::service::{Reply, Service};

/// Response header naming the error code of a failed request whose body
/// is an image.
pub const ERROR_HEADER: &str = "x-terra-error";

pub fn router(service: Arc<Service>) -> Router {
    Router::new().fallback(dispatch).with_state(service)
}

fn to_response(reply: Reply) -> Response {
    let mut resp = Response::new(Body::from(reply.body));
    *resp.status_mut() = StatusCode::from_u16(reply.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    let headers = resp.headers_mut();
    if let Ok(ct) = HeaderValue::from_str(&reply.content_type) {
        headers.insert(header::CONTENT_TYPE, ct);
    }
    headers.insert(header::ACCESS_CONTROL_ALLOW_ORIGIN, HeaderValue::from_static("*"));
    if let Some(code) = reply.error {
        headers.insert(ERROR_HEADER, HeaderValue::from_static(code.as_str()));
    }
    resp
}

async fn dispatch(
    State(service): State<Arc<Service>>,
    method: Method,
    uri: Uri,
    query: Result<Query<Vec<(String, String)>>, QueryRejection>,
) -> Response {
    if method != Method::GET && method != Method::HEAD {
        let err = ServiceError::validation("method", format!("{method} is not supported; use GET"));
        let mut resp = to_response(Reply::error(&err));
        *resp.status_mut() = StatusCode::METHOD_NOT_ALLOWED;
        return resp;
    }
    let Ok(Query(pairs)) = query else {
        return to_response(Reply::error(&ServiceError::validation("query", "malformed query string")));
    };
    let path = uri.path().to_string();
    let params = Params::new(pairs);
    let reply = tokio::task::spawn_blocking(move || service.handle(&path, &params)).await;
    match reply {
        Ok(r) => to_response(r),
        Err(e) => {
            log::error!("handler panicked: {e}");
            to_response(Reply::error(&ServiceError::new(ErrorCode::Internal, "internal error")))
        }
    }
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    service: Arc<Service>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(service)).with_graceful_shutdown(shutdown).await
}

/// A server on its own runtime thread, stopped on drop. Used by tests
/// and embedding callers that have no async runtime.
pub struct BackgroundServer {
    addr: SocketAddr,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl BackgroundServer {
    pub fn start(service: Arc<Service>, bind: &str) -> std::io::Result<Self> {
        let std_listener = std::net::TcpListener::bind(bind)?;
        std_listener.set_nonblocking(true)?;
        let addr = std_listener.local_addr()?;
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
        let thread = std::thread::spawn(move || {
            runtime.block_on(async move {
                let listener = match tokio::net::TcpListener::from_std(std_listener) {
                    Ok(l) => l,
                    Err(e) => {
                        log::error!("cannot adopt listener: {e}");
                        return;
                    }
                };
                if let Err(e) = serve(listener, service, async {
                    let _ = rx.await;
                })
                .await
                {
                    log::error!("server stopped: {e}");
                }
            });
        });
        Ok(BackgroundServer { addr, stop: Some(tx), thread: Some(thread) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for BackgroundServer {
    fn drop(&mut self) {
        self.shutdown();
    }
}
