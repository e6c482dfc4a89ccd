use std::io::{self, BufRead, BufReader};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use super::ingest::Ingestor;
use crate::error::Result;
use crate::model::SessionRecording;

const POLL: Duration = Duration::from_millis(5);

enum Feed {
    Line(Vec<u8>),
    Closed,
}

/// Result of one served session.
#[derive(Debug)]
pub struct SessionOutcome {
    pub recording: Result<SessionRecording<f64>>,
    pub diagnostics: Vec<String>,
    /// `false` when the session ended by shutdown rather than `END`.
    pub ended_by_client: bool,
}

/// Line-protocol server. Each connection gets a reader thread; every line
/// funnels through one channel into a single [`Ingestor`].
pub struct Server {
    listener: TcpListener,
    shutdown: Arc<AtomicBool>,
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs) -> io::Result<Server> {
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        Ok(Server {
            listener,
            shutdown: Arc::new(AtomicBool::new(false)),
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Setting the flag makes [`Server::serve_session`] return.
    pub fn shutdown_handle(&self) -> Arc<AtomicBool> {
        Arc::clone(&self.shutdown)
    }

    /// Serves one session: accepts connections until a client sends `END`
    /// (or shutdown is requested), then returns the final recording.
    /// Malformed lines become diagnostics; `on_diagnostic` sees each one as
    /// it happens.
    pub fn serve_session(
        &self,
        mut ingestor: Ingestor,
        mut on_diagnostic: impl FnMut(&str),
    ) -> io::Result<SessionOutcome> {
        let (tx, rx) = mpsc::channel::<Feed>();
        let mut reported = 0usize;
        let session_over = Arc::new(AtomicBool::new(false));
        let mut ended_by_client = false;
        loop {
            if self.shutdown.load(Ordering::SeqCst) {
                break;
            }
            match self.listener.accept() {
                Ok((stream, _)) => {
                    let tx = tx.clone();
                    let over = Arc::clone(&session_over);
                    thread::spawn(move || read_connection(stream, tx, over));
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => {}
                Err(e) => return Err(e),
            }
            match rx.recv_timeout(POLL) {
                Ok(Feed::Line(line)) => {
                    let _ = ingestor.handle_line(&line);
                }
                Ok(Feed::Closed) | Err(RecvTimeoutError::Timeout) => {}
                Err(RecvTimeoutError::Disconnected) => {}
            }
            // Drain whatever else is queued without waiting.
            while !ingestor.is_closed() {
                match rx.try_recv() {
                    Ok(Feed::Line(line)) => {
                        let _ = ingestor.handle_line(&line);
                    }
                    Ok(Feed::Closed) => {}
                    Err(_) => break,
                }
            }
            for d in &ingestor.diagnostics()[reported..] {
                on_diagnostic(d);
            }
            reported = ingestor.diagnostics().len();
            if ingestor.is_closed() {
                ended_by_client = true;
                break;
            }
        }
        session_over.store(true, Ordering::SeqCst);
        let (recording, diagnostics) = ingestor.finish();
        for d in &diagnostics[reported.min(diagnostics.len())..] {
            on_diagnostic(d);
        }
        Ok(SessionOutcome {
            recording,
            diagnostics,
            ended_by_client,
        })
    }
}

fn read_connection(stream: TcpStream, tx: mpsc::Sender<Feed>, over: Arc<AtomicBool>) {
    let _ = stream.set_nonblocking(false);
    let _ = stream.set_read_timeout(Some(Duration::from_millis(50)));
    let mut reader = BufReader::new(stream);
    let mut buf = Vec::new();
    loop {
        if over.load(Ordering::SeqCst) {
            break;
        }
        match reader.read_until(b'\n', &mut buf) {
            Ok(0) => break,
            Ok(_) => {
                if buf.last() == Some(&b'\n') {
                    buf.pop();
                    let line = std::mem::take(&mut buf);
                    if tx.send(Feed::Line(line)).is_err() {
                        return;
                    }
                }
            }
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(_) => break,
        }
    }
    if !buf.is_empty() {
        let _ = tx.send(Feed::Line(buf));
    }
    let _ = tx.send(Feed::Closed);
}
