use std::io::{self, BufWriter, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::{Duration, Instant};

use super::ingest::Ingestor;
use super::protocol::{Message, ProtocolError, WireEvent};
use crate::model::SessionRecording;

/// Client id used for replayed sessions.
pub const REPLAY_CLIENT: &str = "replay";

/// The messages that reproduce `rec` on a server: handshake with zero
/// offset, session description, every event in time order, then `END`.
pub fn replay_plan(rec: &SessionRecording<f64>, client_id: &str) -> Vec<Message> {
    let client = || client_id.to_string();
    let mut out = vec![
        Message::Hello {
            client_id: client(),
            offset: 0.0,
        },
        Message::Method {
            client_id: client(),
            method: rec.method(),
        },
    ];
    out.extend(rec.metadata().iter().map(|(k, v)| Message::Meta {
        client_id: client(),
        key: k.clone(),
        value: v.clone(),
    }));
    out.extend(rec.agents().into_iter().map(|a| Message::Agent {
        client_id: client(),
        agent: a.id,
        kind: a.kind,
    }));
    out.extend(rec.iterations().iter().enumerate().map(|(i, w)| Message::Iteration {
        client_id: client(),
        index: i,
        start: w.start,
        end: w.end,
    }));
    out.extend(
        rec.events_in_time_order()
            .into_iter()
            .enumerate()
            .map(|(seq, e)| {
                Message::Event(WireEvent {
                    client_id: client(),
                    seq: seq as u64 + 1,
                    agent: e.agent.id,
                    event: e.event,
                    t_client: e.t,
                })
            }),
    );
    out.push(Message::End { client_id: client() });
    out
}

/// Sleeps so that event times map onto wall-clock time divided by `speed`.
struct Pacer {
    speed: f64,
    start: Instant,
    t0: Option<f64>,
}

impl Pacer {
    fn new(speed: f64) -> io::Result<Pacer> {
        if !(speed > 0.0) {
            return Err(io::Error::new(
                io::ErrorKind::InvalidInput,
                format!("replay speed must be positive, got {speed}"),
            ));
        }
        Ok(Pacer {
            speed,
            start: Instant::now(),
            t0: None,
        })
    }

    fn wait_for(&mut self, msg: &Message) {
        let Message::Event(we) = msg else { return };
        if self.speed.is_infinite() {
            return;
        }
        let t0 = *self.t0.get_or_insert_with(|| {
            self.start = Instant::now();
            we.t_client
        });
        let due = self.start + Duration::from_secs_f64(((we.t_client - t0) / self.speed).max(0.0));
        let now = Instant::now();
        if due > now {
            std::thread::sleep(due - now);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplayStats {
    pub lines: usize,
    pub events: usize,
    pub elapsed: Duration,
}

/// Writes the replay plan to `out`, one line per message, paced by `speed`
/// (`f64::INFINITY` for no pacing).
pub fn replay_to_writer<W: Write>(
    rec: &SessionRecording<f64>,
    speed: f64,
    out: W,
) -> io::Result<ReplayStats> {
    let mut pacer = Pacer::new(speed)?;
    let started = Instant::now();
    let mut out = BufWriter::new(out);
    let plan = replay_plan(rec, REPLAY_CLIENT);
    let mut events = 0;
    for msg in &plan {
        pacer.wait_for(msg);
        writeln!(out, "{msg}")?;
        if let Message::Event(_) = msg {
            events += 1;
            if !speed.is_infinite() {
                out.flush()?;
            }
        }
    }
    out.flush()?;
    Ok(ReplayStats {
        lines: plan.len(),
        events,
        elapsed: started.elapsed(),
    })
}

/// Connects to a server and replays `rec` over the connection.
pub fn replay_to_addr(
    addr: impl ToSocketAddrs,
    rec: &SessionRecording<f64>,
    speed: f64,
) -> io::Result<ReplayStats> {
    let stream = TcpStream::connect(addr)?;
    stream.set_nodelay(true)?;
    let stats = replay_to_writer(rec, speed, &stream)?;
    stream.shutdown(std::net::Shutdown::Write)?;
    Ok(stats)
}

/// Replays through an in-process ingestor, going through the same text
/// encoding and parser a network client would.
pub fn replay_into(
    rec: &SessionRecording<f64>,
    speed: f64,
    ingestor: &mut Ingestor,
) -> io::Result<Vec<ProtocolError>> {
    let mut pacer = Pacer::new(speed)?;
    let mut errors = Vec::new();
    for msg in replay_plan(rec, REPLAY_CLIENT) {
        pacer.wait_for(&msg);
        if let Err(e) = ingestor.handle_line(msg.to_string().as_bytes()) {
            errors.push(e);
        }
    }
    Ok(errors)
}
