use std::fmt;

use thiserror::Error;

use crate::model::{AgentKind, EventType, Method};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("malformed line: {0:?}")]
    MalformedLine(String),
    #[error("unknown event name `{0}`")]
    UnknownEventName(String),
    #[error("client `{client}` sent seq {seq} after {last}")]
    NonMonotoneSeq { client: String, seq: u64, last: u64 },
    #[error("client `{0}` has not completed the handshake")]
    UnknownClient(String),
    #[error("rejected: {0}")]
    Rejected(String),
}

/// An event as submitted by a client, on the client's clock.
#[derive(Debug, Clone, PartialEq)]
pub struct WireEvent {
    pub client_id: String,
    pub seq: u64,
    pub agent: u32,
    pub event: EventType,
    pub t_client: f64,
}

/// One line of the wire protocol.
///
/// ```text
/// HELLO  <client> <offset_seconds>
/// EV     <client> <seq> <agent_id> <event_name> <t_client>
/// AGENT  <client> <agent_id> human|robot
/// ITER   <client> <index> <start> <end>
/// METHOD <client> SIA|ECA|HumansOnly
/// META   <client> ["key","value"]
/// END    <client>
/// ```
#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Hello { client_id: String, offset: f64 },
    Event(WireEvent),
    Agent { client_id: String, agent: u32, kind: AgentKind },
    Iteration { client_id: String, index: usize, start: f64, end: f64 },
    Method { client_id: String, method: Method },
    Meta { client_id: String, key: String, value: String },
    End { client_id: String },
}

impl Message {
    pub fn client_id(&self) -> &str {
        match self {
            Message::Hello { client_id, .. }
            | Message::Agent { client_id, .. }
            | Message::Iteration { client_id, .. }
            | Message::Method { client_id, .. }
            | Message::Meta { client_id, .. }
            | Message::End { client_id } => client_id,
            Message::Event(we) => &we.client_id,
        }
    }
}

fn number<T: std::str::FromStr>(tok: &str, line: &str) -> Result<T, ProtocolError> {
    tok.parse().map_err(|_| ProtocolError::MalformedLine(line.to_string()))
}

fn finite(tok: &str, line: &str) -> Result<f64, ProtocolError> {
    let v: f64 = number(tok, line)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ProtocolError::MalformedLine(line.to_string()))
    }
}

/// Parses one line without its terminator. A trailing `\r` is tolerated.
pub fn parse_line(raw: &[u8]) -> Result<Message, ProtocolError> {
    let line = std::str::from_utf8(raw)
        .map_err(|_| ProtocolError::MalformedLine(String::from_utf8_lossy(raw).into_owned()))?;
    let line = line.strip_suffix('\r').unwrap_or(line);
    let malformed = || ProtocolError::MalformedLine(line.to_string());
    let mut it = line.split_whitespace();
    let verb = it.next().ok_or_else(malformed)?;
    let client_id = it.next().ok_or_else(malformed)?.to_string();

    if verb == "META" {
        let rest = line
            .trim_start()
            .strip_prefix("META")
            .and_then(|r| r.trim_start().strip_prefix(client_id.as_str()))
            .ok_or_else(malformed)?;
        let (key, value): (String, String) =
            serde_json::from_str(rest.trim()).map_err(|_| malformed())?;
        return Ok(Message::Meta { client_id, key, value });
    }

    let toks: Vec<&str> = it.collect();
    let msg = match (verb, toks.as_slice()) {
        ("HELLO", [offset]) => Message::Hello {
            client_id,
            offset: finite(offset, line)?,
        },
        ("EV", [seq, agent, name, t]) => {
            let seq = number(seq, line)?;
            let agent = number(agent, line)?;
            let t_client = finite(t, line)?;
            let event = name
                .parse()
                .map_err(|_| ProtocolError::UnknownEventName(name.to_string()))?;
            Message::Event(WireEvent {
                client_id,
                seq,
                agent,
                event,
                t_client,
            })
        }
        ("AGENT", [agent, kind]) => Message::Agent {
            client_id,
            agent: number(agent, line)?,
            kind: kind.parse().map_err(|_| malformed())?,
        },
        ("ITER", [index, start, end]) => Message::Iteration {
            client_id,
            index: number(index, line)?,
            start: finite(start, line)?,
            end: finite(end, line)?,
        },
        ("METHOD", [m]) => Message::Method {
            client_id,
            method: m.parse().map_err(|_| malformed())?,
        },
        ("END", []) => Message::End { client_id },
        _ => return Err(malformed()),
    };
    Ok(msg)
}

impl fmt::Display for Message {
    /// Canonical line form. Floats use the shortest representation that
    /// parses back to the same value.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Message::Hello { client_id, offset } => write!(f, "HELLO {client_id} {offset:?}"),
            Message::Event(we) => write!(
                f,
                "EV {} {} {} {} {:?}",
                we.client_id,
                we.seq,
                we.agent,
                we.event.token(),
                we.t_client
            ),
            Message::Agent {
                client_id,
                agent,
                kind,
            } => write!(f, "AGENT {client_id} {agent} {}", kind.token()),
            Message::Iteration {
                client_id,
                index,
                start,
                end,
            } => write!(f, "ITER {client_id} {index} {start:?} {end:?}"),
            Message::Method { client_id, method } => write!(f, "METHOD {client_id} {method}"),
            Message::Meta {
                client_id,
                key,
                value,
            } => {
                let kv = serde_json::to_string(&(key, value)).map_err(|_| fmt::Error)?;
                write!(f, "META {client_id} {kv}")
            }
            Message::End { client_id } => write!(f, "END {client_id}"),
        }
    }
}
