//! Local HTTP service over loaded profiles: export documents for the three
//! view shapes, diffs, aggregates with histograms, correlation, search,
//! hover data and confined source reads for code links.

mod routes;
mod session;

use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

pub use routes::handle;
pub use session::{Entry, Session};

/// Page served at `/` when no UI asset directory is configured.
pub const INDEX_HTML: &str = "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>profcct</title></head>\n<body><p>profcct server is running. The JSON API lives under <code>/api/</code>; see <a href=\"/api/profiles\">/api/profiles</a>.</p></body></html>\n";

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {message}")]
    Bind { addr: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub status: u16,
    pub content_type: &'static str,
    pub body: Vec<u8>,
}

impl Response {
    pub fn json(status: u16, value: &serde_json::Value) -> Self {
        Response {
            status,
            content_type: "application/json",
            body: serde_json::to_vec(value).expect("JSON values always serialize"),
        }
    }

    pub fn text(status: u16, content_type: &'static str, body: Vec<u8>) -> Self {
        Response {
            status,
            content_type,
            body,
        }
    }
}

/// A running server. Dropping it does not stop the workers; call
/// [`Server::shutdown`].
pub struct Server {
    http: Arc<tiny_http::Server>,
    addr: SocketAddr,
    workers: Vec<JoinHandle<()>>,
}

impl Server {
    /// Binds `addr` (use port 0 for an ephemeral port) and starts `threads`
    /// workers sharing `session`.
    pub fn start(session: Arc<Session>, addr: &str, threads: usize) -> Result<Server, ServeError> {
        let http = tiny_http::Server::http(addr).map_err(|e| ServeError::Bind {
            addr: addr.to_string(),
            message: e.to_string(),
        })?;
        let local = http.server_addr().to_ip().ok_or_else(|| ServeError::Bind {
            addr: addr.to_string(),
            message: "not an IP socket".to_string(),
        })?;
        let http = Arc::new(http);
        let workers = (0..threads.max(1))
            .map(|_| {
                let http = Arc::clone(&http);
                let session = Arc::clone(&session);
                std::thread::spawn(move || {
                    for request in http.incoming_requests() {
                        respond(&session, request);
                    }
                })
            })
            .collect();
        Ok(Server {
            http,
            addr: local,
            workers,
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Blocks until the workers exit.
    pub fn join(self) {
        for w in self.workers {
            let _ = w.join();
        }
    }

    pub fn shutdown(self) {
        for _ in &self.workers {
            self.http.unblock();
        }
        self.join();
    }
}

fn respond(session: &Session, request: tiny_http::Request) {
    let method = request.method().as_str().to_string();
    let r = handle(session, &method, request.url());
    let header = tiny_http::Header::from_bytes(&b"Content-Type"[..], r.content_type.as_bytes())
        .expect("static header is valid");
    let body = if method == "HEAD" { Vec::new() } else { r.body };
    let response = tiny_http::Response::from_data(body)
        .with_status_code(r.status)
        .with_header(header);
    // A client that hung up is not an error worth surfacing.
    let _ = request.respond(response);
}
