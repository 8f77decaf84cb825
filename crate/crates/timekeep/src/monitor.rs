//! Read-only HTTP monitor.
//!
//! - `GET /timers` returns the exported snapshot document (JSON).
//! - `GET /report` returns the rendered text report.
//!
//! Every request takes a fresh snapshot. Each connection is handled on its
//! own thread and closed after one response.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use timekeep_core::harness::Experiment;
use timekeep_core::report::render_report;
use timekeep_core::schedule::ScheduleLayout;
use timekeep_core::TimerSnapshot;

use crate::export::export_snapshot;

/// Anything the monitor can take snapshots of.
pub trait SnapshotSource: Send + Sync + 'static {
    /// `None` if no consistent snapshot can be taken (answered with 503).
    fn snapshot(&self) -> Option<(TimerSnapshot, ScheduleLayout)>;
}

impl SnapshotSource for Mutex<Experiment> {
    fn snapshot(&self) -> Option<(TimerSnapshot, ScheduleLayout)> {
        let exp = self.lock().ok()?;
        Some((exp.snapshot(), exp.layout()))
    }
}

/// A running monitor. Dropping it leaves the server running until the
/// process exits; call [`Monitor::shutdown`] to stop it.
pub struct Monitor {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl Monitor {
    /// Binds `addr` and starts serving. Bind errors are returned; nothing
    /// is served in that case.
    pub fn bind(addr: &str, source: Arc<dyn SnapshotSource>) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let thread = thread::Builder::new()
            .name("timekeep-monitor".into())
            .spawn(move || accept_loop(listener, source, flag))?;
        Ok(Self {
            addr,
            stop,
            thread: Some(thread),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Wake the blocking accept.
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

fn accept_loop(listener: TcpListener, source: Arc<dyn SnapshotSource>, stop: Arc<AtomicBool>) {
    for stream in listener.incoming() {
        if stop.load(Ordering::SeqCst) {
            break;
        }
        let Ok(stream) = stream else { continue };
        let source = source.clone();
        let _ = thread::Builder::new()
            .name("timekeep-monitor-conn".into())
            .spawn(move || {
                let _ = stream.set_read_timeout(Some(Duration::from_secs(5)));
                let _ = handle(stream, source.as_ref());
            });
    }
}

fn handle(stream: TcpStream, source: &dyn SnapshotSource) -> io::Result<()> {
    let mut reader = BufReader::new(&stream);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    // Drain headers; requests have no body.
    let mut line = String::new();
    while reader.read_line(&mut line)? > 2 {
        line.clear();
    }

    let mut parts = request_line.split_whitespace();
    let (method, target) = (parts.next().unwrap_or(""), parts.next().unwrap_or(""));
    let path = target.split('?').next().unwrap_or("");
    let mut out = &stream;
    if method != "GET" {
        return respond(&mut out, 405, "text/plain", "method not allowed\n");
    }
    match path {
        "/timers" | "/report" => match source.snapshot() {
            Some((snap, layout)) if path == "/timers" => respond(
                &mut out,
                200,
                "application/json",
                &export_snapshot(&snap, Some(&layout)),
            ),
            Some((snap, layout)) => respond(
                &mut out,
                200,
                "text/plain; charset=utf-8",
                &render_report(&snap, &layout),
            ),
            None => respond(&mut out, 503, "text/plain", "snapshot unavailable\n"),
        },
        _ => respond(&mut out, 404, "text/plain", "not found\n"),
    }
}

fn respond(out: &mut impl Write, status: u16, content_type: &str, body: &str) -> io::Result<()> {
    let reason = match status {
        200 => "OK",
        404 => "Not Found",
        405 => "Method Not Allowed",
        _ => "Service Unavailable",
    };
    write!(
        out,
        "HTTP/1.1 {status} {reason}\r\nContent-Type: {content_type}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )?;
    out.flush()
}
