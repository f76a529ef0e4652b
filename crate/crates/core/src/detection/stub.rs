//! Minimal in-process HTTP server speaking the detection wire protocol.
//!
//! Used by the test suites and for local dry runs of the external-detector
//! path. Handles one request per connection.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use base64::Engine as _;
use serde::Deserialize;

use super::{detect_peaks_builtin, PeakDetectorConfig};
use crate::imaging::{jet, CsiImage};

/// Decoded body of a `/detect` request.
#[derive(Debug, Clone)]
pub struct StubRequest {
    pub image: CsiImage,
    pub prompt: String,
}

/// Status code and body sent back by a handler.
#[derive(Debug, Clone)]
pub struct StubReply {
    pub status: u16,
    pub body: String,
}

impl StubReply {
    pub fn json(body: impl Into<String>) -> Self {
        StubReply {
            status: 200,
            body: body.into(),
        }
    }
}

type Handler = dyn Fn(&StubRequest) -> StubReply + Send + Sync;

pub struct StubServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    requests: Arc<AtomicUsize>,
    thread: Option<JoinHandle<()>>,
}

#[derive(Deserialize)]
struct Body {
    image: String,
    prompt: String,
}

impl StubServer {
    /// Starts a server on an ephemeral localhost port.
    pub fn spawn<F>(handler: F) -> std::io::Result<Self>
    where
        F: Fn(&StubRequest) -> StubReply + Send + Sync + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let requests = Arc::new(AtomicUsize::new(0));
        let handler: Arc<Handler> = Arc::new(handler);
        let (stop_t, req_t) = (stop.clone(), requests.clone());
        let thread = std::thread::spawn(move || {
            for conn in listener.incoming() {
                if stop_t.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = conn else { continue };
                let h = handler.clone();
                let r = req_t.clone();
                std::thread::spawn(move || {
                    let _ = serve(stream, &*h, &r);
                });
            }
        });
        Ok(StubServer {
            addr,
            stop,
            requests,
            thread: Some(thread),
        })
    }

    /// Always answers with the same JSON body.
    pub fn fixed(body: &str) -> std::io::Result<Self> {
        let body = body.to_string();
        Self::spawn(move |_| StubReply::json(body.clone()))
    }

    /// Inverts the jet colouring of the submitted image and runs the built-in
    /// peak detector on it.
    pub fn peak_detector(cfg: PeakDetectorConfig) -> std::io::Result<Self> {
        Self::spawn(move |req| {
            let values = unjet(&req.image);
            let dets = detect_peaks_builtin(&values, &cfg).unwrap_or_default();
            let boxes: Vec<_> = dets
                .iter()
                .map(|d| {
                    let (w, h) = (d.center_w, d.center_h);
                    serde_json::json!({"bbox": [w - 1.0, h - 1.0, w + 1.0, h + 1.0], "score": d.confidence})
                })
                .collect();
            StubReply::json(serde_json::Value::Array(boxes).to_string())
        })
    }

    pub fn endpoint(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Number of `/detect` requests received so far.
    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect_timeout(&self.addr, Duration::from_millis(200));
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Nearest-colour inversion of [`jet`] back to `[0, 1]`.
pub fn unjet(image: &CsiImage) -> nalgebra::DMatrix<f64> {
    let table: Vec<(f64, [u8; 3])> = (0..=1020).map(|i| i as f64 / 1020.0).map(|x| (x, jet(x))).collect();
    nalgebra::DMatrix::from_fn(image.height, image.width, |h, w| {
        let p = image.pixel(h, w);
        let dist = |c: &[u8; 3]| -> i32 { (0..3).map(|k| (c[k] as i32 - p[k] as i32).pow(2)).sum() };
        table
            .iter()
            .min_by_key(|(_, c)| dist(c))
            .map(|(x, _)| *x)
            .unwrap_or(0.0)
    })
}

fn respond(stream: &mut TcpStream, status: u16, body: &str) -> std::io::Result<()> {
    let reason = match status {
        200 => "OK",
        400 => "Bad Request",
        404 => "Not Found",
        503 => "Service Unavailable",
        _ => "Status",
    };
    write!(
        stream,
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )?;
    stream.flush()
}

fn serve(mut stream: TcpStream, handler: &Handler, count: &AtomicUsize) -> std::io::Result<()> {
    stream.set_read_timeout(Some(Duration::from_secs(10)))?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    if reader.read_line(&mut request_line)? == 0 {
        return Ok(());
    }
    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 || line == "\r\n" || line == "\n" {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.trim().eq_ignore_ascii_case("content-length") {
                content_length = v.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;

    let mut parts = request_line.split_whitespace();
    let (method, path) = (parts.next().unwrap_or(""), parts.next().unwrap_or(""));
    match (method, path) {
        ("GET", "/health") => respond(&mut stream, 200, r#"{"status":"ok"}"#),
        ("POST", "/detect") => {
            count.fetch_add(1, Ordering::SeqCst);
            let parsed = serde_json::from_slice::<Body>(&body).ok().and_then(|b| {
                let png = base64::engine::general_purpose::STANDARD.decode(b.image).ok()?;
                let image = CsiImage::from_png(&png).ok()?;
                Some(StubRequest { image, prompt: b.prompt })
            });
            match parsed {
                Some(req) => {
                    let reply = handler(&req);
                    respond(&mut stream, reply.status, &reply.body)
                }
                None => respond(&mut stream, 400, r#"{"error":"malformed request"}"#),
            }
        }
        _ => respond(&mut stream, 404, r#"{"error":"not found"}"#),
    }
}
