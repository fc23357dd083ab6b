//! HTTP front end of the annotation store.
//!
//! | method | path                          | body / query                         |
//! |--------|-------------------------------|--------------------------------------|
//! | GET    | `/api/tasks/next`             | `?annotator=ID`                      |
//! | POST   | `/api/annotators`             | `{annotator_id}`                     |
//! | POST   | `/api/labels`                 | `{task_id, annotator_id, verdict}`   |
//! | GET    | `/api/agreement`              | `?kind=veracity` (default)           |
//! | GET    | `/api/export`                 | `?kind=veracity` (default)           |
//! | GET    | `/api/stats`                  |                                      |
//!
//! Anything else under GET is served from the static directory, if set.

use std::collections::HashMap;
use std::io::Read;
use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::thread::{self, JoinHandle};

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;
use tiny_http::{Header, Request, Response, Server};

use crate::annotation::{AnnotationError, AnnotationStore, TaskKind, Verdict};

pub const PORT_VAR: &str = "VFORGE_PORT";
pub const DEFAULT_PORT: u16 = 8471;
const MAX_BODY: u64 = 1 << 20;

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {message}")]
    Bind { addr: String, message: String },
}

/// Status, content type and body of a reply.
#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    pub status: u16,
    pub content_type: &'static str,
    pub body: Vec<u8>,
}

impl Reply {
    fn json<T: Serialize>(status: u16, value: &T) -> Self {
        Reply {
            status,
            content_type: "application/json",
            body: serde_json::to_vec(value).expect("reply serializes"),
        }
    }

    fn error(status: u16, message: impl std::fmt::Display) -> Self {
        Reply::json(status, &json!({ "error": message.to_string() }))
    }
}

fn status_of(e: &AnnotationError) -> u16 {
    match e {
        AnnotationError::UnknownAnnotator(_) | AnnotationError::UnknownTask(_) => 404,
        AnnotationError::DuplicateSubmission { .. } | AnnotationError::NoOverlap => 409,
        AnnotationError::BadVerdict { .. } => 422,
        _ => 500,
    }
}

#[derive(Deserialize)]
struct LabelBody {
    task_id: String,
    annotator_id: String,
    verdict: String,
}

#[derive(Deserialize)]
struct RegisterBody {
    annotator_id: String,
}

/// Shared service state.
#[derive(Debug, Clone)]
pub struct Service {
    store: Arc<RwLock<AnnotationStore>>,
    static_dir: Option<PathBuf>,
}

impl Service {
    pub fn new(store: AnnotationStore, static_dir: Option<PathBuf>) -> Self {
        Service {
            store: Arc::new(RwLock::new(store)),
            static_dir,
        }
    }

    pub fn store(&self) -> &RwLock<AnnotationStore> {
        &self.store
    }

    pub fn handle(&self, method: &str, url: &str, body: &[u8]) -> Reply {
        let (path, query) = url.split_once('?').unwrap_or((url, ""));
        let query: HashMap<String, String> = form_urlencoded::parse(query.as_bytes())
            .into_owned()
            .collect();
        let kind = || match query.get("kind") {
            None => Ok(TaskKind::Veracity),
            Some(k) => TaskKind::parse(k)
                .ok_or_else(|| Reply::error(400, format!("unknown task kind {k:?}"))),
        };
        match (method, path) {
            ("GET", "/api/tasks/next") => {
                let Some(annotator) = query.get("annotator") else {
                    return Reply::error(400, "missing annotator parameter");
                };
                let mut store = self.store.write().expect("store lock");
                match store.next_task(annotator) {
                    Ok(task) => Reply::json(200, &json!({ "task": task })),
                    Err(e) => Reply::error(status_of(&e), e),
                }
            }
            ("POST", "/api/annotators") => {
                let body: RegisterBody = match serde_json::from_slice(body) {
                    Ok(b) => b,
                    Err(e) => return Reply::error(400, e),
                };
                let mut store = self.store.write().expect("store lock");
                match store.register(&body.annotator_id) {
                    Ok(created) => Reply::json(
                        if created { 201 } else { 200 },
                        &json!({ "annotator_id": body.annotator_id }),
                    ),
                    Err(AnnotationError::UnknownAnnotator(_)) => {
                        Reply::error(400, "empty annotator id")
                    }
                    Err(e) => Reply::error(status_of(&e), e),
                }
            }
            ("POST", "/api/labels") => {
                let body: LabelBody = match serde_json::from_slice(body) {
                    Ok(b) => b,
                    Err(e) => return Reply::error(400, e),
                };
                let Ok(verdict) = serde_json::from_value::<Verdict>(json!(body.verdict)) else {
                    return Reply::error(422, format!("unknown verdict {:?}", body.verdict));
                };
                let mut store = self.store.write().expect("store lock");
                match store.submit(&body.task_id, &body.annotator_id, verdict) {
                    Ok(record) => Reply::json(201, &record),
                    Err(e) => Reply::error(status_of(&e), e),
                }
            }
            ("GET", "/api/agreement") => match kind() {
                Ok(k) => match self.store.read().expect("store lock").state().agreement(k) {
                    Ok(report) => Reply::json(200, &report),
                    Err(e) => Reply::error(status_of(&e), e),
                },
                Err(r) => r,
            },
            ("GET", "/api/export") => match kind() {
                Ok(k) => Reply::json(
                    200,
                    &self.store.read().expect("store lock").state().export(k),
                ),
                Err(r) => r,
            },
            ("GET", "/api/stats") => {
                Reply::json(200, &self.store.read().expect("store lock").state().stats())
            }
            (_, p) if p.starts_with("/api/") => {
                Reply::error(404, format!("no route for {method} {p}"))
            }
            ("GET", p) => self.static_file(p),
            _ => Reply::error(405, "method not allowed"),
        }
    }

    fn static_file(&self, path: &str) -> Reply {
        let Some(root) = &self.static_dir else {
            return Reply::error(404, "not found");
        };
        let rel = path.trim_start_matches('/');
        let rel = if rel.is_empty() { "index.html" } else { rel };
        let rel = Path::new(rel);
        if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
            return Reply::error(404, "not found");
        }
        match std::fs::read(root.join(rel)) {
            Ok(body) => Reply {
                status: 200,
                content_type: content_type(rel),
                body,
            },
            Err(_) => Reply::error(404, "not found"),
        }
    }
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js") | Some("mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        _ => "application/octet-stream",
    }
}

fn respond(service: &Service, mut request: Request) {
    let mut body = Vec::new();
    let method = request.method().to_string();
    let url = request.url().to_string();
    let reply = match request.as_reader().take(MAX_BODY).read_to_end(&mut body) {
        Ok(_) => service.handle(&method, &url, &body),
        Err(e) => Reply::error(400, e),
    };
    let header = Header::from_bytes("Content-Type", reply.content_type).expect("static header");
    let response = Response::from_data(reply.body)
        .with_status_code(reply.status)
        .with_header(header);
    let _ = request.respond(response);
}

/// A running server; dropped servers keep running until [`shutdown`](Self::shutdown).
pub struct RunningServer {
    server: Arc<Server>,
    workers: Vec<JoinHandle<()>>,
    addr: SocketAddr,
}

impl RunningServer {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn shutdown(self) {
        for _ in &self.workers {
            self.server.unblock();
        }
        for w in self.workers {
            let _ = w.join();
        }
    }

    /// Block until the worker threads exit.
    pub fn wait(self) {
        for w in self.workers {
            let _ = w.join();
        }
    }
}

pub fn start(service: Service, addr: &str, workers: usize) -> Result<RunningServer, ServeError> {
    let server = Server::http(addr).map_err(|e| ServeError::Bind {
        addr: addr.to_string(),
        message: e.to_string(),
    })?;
    let bound = server
        .server_addr()
        .to_ip()
        .ok_or_else(|| ServeError::Bind {
            addr: addr.to_string(),
            message: "not an IP listener".into(),
        })?;
    let server = Arc::new(server);
    let workers = (0..workers.max(1))
        .map(|_| {
            let server = Arc::clone(&server);
            let service = service.clone();
            thread::spawn(move || {
                while let Ok(request) = server.recv() {
                    respond(&service, request);
                }
            })
        })
        .collect();
    Ok(RunningServer {
        server,
        workers,
        addr: bound,
    })
}

pub fn port_from_env() -> u16 {
    std::env::var(PORT_VAR)
        .ok()
        .and_then(|p| p.parse().ok())
        .unwrap_or(DEFAULT_PORT)
}
