//! Minimal HTTP front end for the gateway.
//!
//! Two endpoints:
//!
//! - `GET /translate?q=<urlencoded>` →
//!   `{"t": string, "source": "cache"|"fast", "latency_ms": number}`
//! - `GET /stats` → the gateway counters as JSON
//!
//! One accept thread hands each connection to a short-lived handler
//! thread; `worker_count` background threads drain the slow queue.

use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use percent_encoding::percent_decode_str;

use crate::gateway::{Gateway, GatewayError, SlowStep};

pub struct ServerHandle {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stop accepting, stop the slow workers, and join all threads.
    pub fn shutdown(mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        // Unblock the accept loop.
        let _ = TcpStream::connect(self.addr);
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

/// Bind `addr` (port 0 picks a free port) and serve until shutdown.
pub fn serve<A: ToSocketAddrs>(gateway: Arc<Gateway>, addr: A) -> std::io::Result<ServerHandle> {
    let listener = TcpListener::bind(addr)?;
    let addr = listener.local_addr()?;
    let shutdown = Arc::new(AtomicBool::new(false));
    let mut threads = Vec::new();

    for _ in 0..gateway.config().worker_count {
        let gateway = Arc::clone(&gateway);
        let shutdown = Arc::clone(&shutdown);
        threads.push(std::thread::spawn(move || {
            while !shutdown.load(Ordering::SeqCst) {
                if matches!(gateway.slow_worker_step(), SlowStep::Empty) {
                    std::thread::sleep(Duration::from_millis(1));
                }
            }
        }));
    }

    {
        let gateway = Arc::clone(&gateway);
        let shutdown = Arc::clone(&shutdown);
        threads.push(std::thread::spawn(move || {
            for stream in listener.incoming() {
                if shutdown.load(Ordering::SeqCst) {
                    break;
                }
                if let Ok(stream) = stream {
                    let gateway = Arc::clone(&gateway);
                    std::thread::spawn(move || {
                        let _ = handle_connection(stream, &gateway);
                    });
                }
            }
        }));
    }

    Ok(ServerHandle {
        addr,
        shutdown,
        threads,
    })
}

fn handle_connection(stream: TcpStream, gateway: &Gateway) -> std::io::Result<()> {
    stream.set_read_timeout(Some(Duration::from_secs(10)))?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    // Drain headers; nothing in them matters for GET.
    loop {
        let mut header = String::new();
        if reader.read_line(&mut header)? == 0 || header == "\r\n" || header == "\n" {
            break;
        }
    }

    let mut parts = request_line.split_whitespace();
    let (method, target) = match (parts.next(), parts.next()) {
        (Some(m), Some(t)) => (m, t),
        _ => return respond(stream, 400, &error_json("malformed request line")),
    };
    if method != "GET" {
        return respond(stream, 405, &error_json("only GET is supported"));
    }

    let (path, query_string) = match target.split_once('?') {
        Some((p, qs)) => (p, Some(qs)),
        None => (target, None),
    };

    match path {
        "/translate" => {
            let raw_query = query_string.and_then(|qs| query_param(qs, "q"));
            let raw_query = match raw_query {
                Some(q) if !q.is_empty() => q,
                _ => return respond(stream, 400, &error_json("missing query parameter q")),
            };
            match gateway.handle(&raw_query) {
                Ok(result) => {
                    let body = serde_json::to_string(&result).expect("result serializes");
                    respond(stream, 200, &body)
                }
                Err(GatewayError::InvalidQuery) => respond(
                    stream,
                    400,
                    &error_json("query is empty after normalization"),
                ),
                Err(GatewayError::FastBackendUnavailable) => {
                    respond(stream, 503, &error_json("fast backend unavailable"))
                }
                Err(e) => respond(stream, 500, &error_json(&e.to_string())),
            }
        }
        "/stats" => {
            let body = serde_json::to_string(&gateway.stats()).expect("stats serialize");
            respond(stream, 200, &body)
        }
        _ => respond(stream, 404, &error_json("not found")),
    }
}

fn query_param(query_string: &str, name: &str) -> Option<String> {
    for pair in query_string.split('&') {
        let (key, value) = match pair.split_once('=') {
            Some(kv) => kv,
            None => (pair, ""),
        };
        if key == name {
            let plus_decoded = value.replace('+', " ");
            return percent_decode_str(&plus_decoded)
                .decode_utf8()
                .ok()
                .map(|cow| cow.into_owned());
        }
    }
    None
}

fn error_json(message: &str) -> String {
    serde_json::json!({ "error": message }).to_string()
}

fn respond(mut stream: TcpStream, status: u16, body: &str) -> std::io::Result<()> {
    let reason = match status {
        200 => "OK",
        400 => "Bad Request",
        404 => "Not Found",
        405 => "Method Not Allowed",
        503 => "Service Unavailable",
        _ => "Internal Server Error",
    };
    let response = format!(
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    stream.write_all(response.as_bytes())?;
    stream.flush()
}
