//! Scripted HTTP server for exercising the adapters without a model backend.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use tiny_http::{Header, Response, Server};

#[derive(Debug, Clone, PartialEq)]
pub struct MockRequest {
    pub method: String,
    pub path: String,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl MockRequest {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    pub fn json(&self) -> serde_json::Value {
        serde_json::from_str(&self.body).unwrap_or(serde_json::Value::Null)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MockReply {
    pub status: u16,
    pub body: String,
    /// Wait this long before answering.
    pub delay: Duration,
}

impl MockReply {
    pub fn json(body: serde_json::Value) -> Self {
        MockReply {
            status: 200,
            body: body.to_string(),
            delay: Duration::ZERO,
        }
    }

    pub fn status(status: u16) -> Self {
        MockReply {
            status,
            body: "{}".into(),
            delay: Duration::ZERO,
        }
    }

    pub fn raw(body: &str) -> Self {
        MockReply {
            status: 200,
            body: body.into(),
            delay: Duration::ZERO,
        }
    }

    pub fn after(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }
}

type Handler = dyn Fn(&MockRequest) -> MockReply + Send + Sync;

pub struct MockServer {
    server: Arc<Server>,
    workers: Vec<JoinHandle<()>>,
    addr: SocketAddr,
    log: Arc<Mutex<Vec<MockRequest>>>,
    in_flight: Arc<AtomicUsize>,
    peak: Arc<AtomicUsize>,
}

impl MockServer {
    /// Serve on an ephemeral local port with `workers` handler threads.
    pub fn start<F>(workers: usize, handler: F) -> Self
    where
        F: Fn(&MockRequest) -> MockReply + Send + Sync + 'static,
    {
        let server = Arc::new(Server::http("127.0.0.1:0").expect("bind mock server"));
        let addr = server.server_addr().to_ip().expect("ip listener");
        let handler: Arc<Handler> = Arc::new(handler);
        let log = Arc::new(Mutex::new(Vec::new()));
        let in_flight = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        let workers = (0..workers.max(1))
            .map(|_| {
                let (server, handler, log) =
                    (Arc::clone(&server), Arc::clone(&handler), Arc::clone(&log));
                let (in_flight, peak) = (Arc::clone(&in_flight), Arc::clone(&peak));
                thread::spawn(move || {
                    while let Ok(mut request) = server.recv() {
                        let now = in_flight.fetch_add(1, Ordering::SeqCst) + 1;
                        peak.fetch_max(now, Ordering::SeqCst);
                        let mut body = String::new();
                        let _ = request.as_reader().read_to_string(&mut body);
                        let req = MockRequest {
                            method: request.method().to_string(),
                            path: request.url().to_string(),
                            headers: request
                                .headers()
                                .iter()
                                .map(|h| (h.field.to_string(), h.value.to_string()))
                                .collect(),
                            body,
                        };
                        let reply = handler(&req);
                        log.lock().expect("log lock").push(req);
                        thread::sleep(reply.delay);
                        let header =
                            Header::from_bytes("Content-Type", "application/json").expect("header");
                        // Released before the reply is written so a client's next request
                        // cannot be counted alongside this one.
                        in_flight.fetch_sub(1, Ordering::SeqCst);
                        let _ = request.respond(
                            Response::from_string(reply.body)
                                .with_status_code(reply.status)
                                .with_header(header),
                        );
                    }
                })
            })
            .collect();
        MockServer {
            server,
            workers,
            addr,
            log,
            in_flight,
            peak,
        }
    }

    /// Answers every `POST /predict` with `fake` and score 0.99.
    pub fn always_fake() -> Self {
        MockServer::start(8, |_| {
            MockReply::json(serde_json::json!({ "label": "fake", "score": 0.99 }))
        })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn requests(&self) -> Vec<MockRequest> {
        self.log.lock().expect("log lock").clone()
    }

    pub fn request_count(&self) -> usize {
        self.log.lock().expect("log lock").len()
    }

    /// Most requests that were being handled at the same time.
    pub fn peak_in_flight(&self) -> usize {
        self.peak.load(Ordering::SeqCst)
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight.load(Ordering::SeqCst)
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        for _ in &self.workers {
            self.server.unblock();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}
