//! Line-delimited JSON wire contract for out-of-process backends.
//!
//! On connect the server writes one handshake line, then answers each
//! request line with exactly one response line:
//!
//! ```text
//! server: {"protocol":"ccot-wire/1","backend":"faithful","emits_reasoning":true,"deterministic":true,"concurrent_safe":true}
//! client: {"id":"test-000001/reasoning","messages":[{"role":"user","content":"X: [0.923, 0.252]"}]}
//! server: {"id":"test-000001/reasoning","content":"0,0,0,1,1,1,0,0"}
//! ```
//!
//! Failures answer `{"id": ..., "error": "..."}`; a line that is not a valid
//! request answers with `"id": null` and the offending line number.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{check_alternation, Backend, BackendDescriptor, BackendError, BackendRequest, ChatMessage};

pub const PROTOCOL: &str = "ccot-wire/1";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Handshake {
    pub protocol: String,
    pub backend: String,
    pub emits_reasoning: bool,
    pub deterministic: bool,
    pub concurrent_safe: bool,
}

impl Handshake {
    pub fn new(d: &BackendDescriptor) -> Self {
        Self {
            protocol: PROTOCOL.to_string(),
            backend: d.name.clone(),
            emits_reasoning: d.emits_reasoning,
            deterministic: d.deterministic,
            concurrent_safe: d.concurrent_safe,
        }
    }

    pub fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor {
            name: self.backend.clone(),
            emits_reasoning: self.emits_reasoning,
            deterministic: self.deterministic,
            concurrent_safe: self.concurrent_safe,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireRequest {
    pub id: String,
    pub messages: Vec<ChatMessage>,
}

/// Exactly one of `content` and `error` is present.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WireResponse {
    Content { id: String, content: String },
    Error { id: Option<String>, error: String },
}

/// Answers one raw request line. `line_no` is 1-based.
pub fn respond<B: Backend + ?Sized>(backend: &B, line: &str, line_no: usize) -> WireResponse {
    let request: WireRequest = match serde_json::from_str(line) {
        Ok(r) => r,
        Err(e) => {
            let id = serde_json::from_str::<serde_json::Value>(line)
                .ok()
                .and_then(|v| v.get("id").and_then(|id| id.as_str()).map(str::to_string));
            return WireResponse::Error {
                id,
                error: format!("line {line_no}: {e}"),
            };
        }
    };
    if let Err(e) = check_alternation(&request.messages) {
        return WireResponse::Error {
            id: Some(request.id),
            error: format!("line {line_no}: {e}"),
        };
    }
    let call = BackendRequest {
        id: request.id.clone(),
        messages: request.messages,
    };
    match std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| backend.complete(&call))) {
        Ok(Ok(content)) => WireResponse::Content { id: request.id, content },
        Ok(Err(e)) => WireResponse::Error {
            id: Some(request.id),
            error: e.0,
        },
        Err(_) => WireResponse::Error {
            id: Some(request.id),
            error: "backend panicked".into(),
        },
    }
}

/// Serves one connection until the peer closes it.
pub fn serve_connection<B: Backend + ?Sized>(backend: &B, stream: TcpStream) -> std::io::Result<()> {
    let mut writer = stream.try_clone()?;
    serde_json::to_writer(&mut writer, &Handshake::new(&backend.descriptor()))?;
    writer.write_all(b"\n")?;
    writer.flush()?;
    for (i, line) in BufReader::new(stream).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        serde_json::to_writer(&mut writer, &respond(backend, &line, i + 1))?;
        writer.write_all(b"\n")?;
        writer.flush()?;
    }
    Ok(())
}

/// Accepts connections forever. Concurrent-safe backends get a thread per
/// connection; others are served one connection at a time.
pub fn serve<B: Backend + 'static>(listener: TcpListener, backend: Arc<B>) -> std::io::Result<()> {
    let concurrent = backend.descriptor().concurrent_safe;
    for stream in listener.incoming() {
        let stream = stream?;
        if concurrent {
            let backend = Arc::clone(&backend);
            std::thread::spawn(move || {
                let _ = serve_connection(backend.as_ref(), stream);
            });
        } else {
            let _ = serve_connection(backend.as_ref(), stream);
        }
    }
    Ok(())
}

/// A backend reached over the wire. Each call opens its own connection.
#[derive(Clone, Debug)]
pub struct RemoteBackend {
    address: String,
    timeout: Duration,
    descriptor: BackendDescriptor,
}

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

impl RemoteBackend {
    /// Reads the server's handshake to learn its capabilities. An unreachable
    /// server still yields a backend (every call then fails) with
    /// conservative flags, so batch runs record the failures.
    pub fn connect(address: &str, timeout: Duration) -> Self {
        let address = address.trim_start_matches("tcp://").to_string();
        let descriptor = match open(&address, timeout) {
            Ok((_, hs)) => hs.descriptor(),
            Err(_) => BackendDescriptor {
                name: format!("remote:{address}"),
                emits_reasoning: true,
                deterministic: false,
                concurrent_safe: false,
            },
        };
        Self {
            address,
            timeout,
            descriptor,
        }
    }

    pub fn address(&self) -> &str {
        &self.address
    }
}

fn open(address: &str, timeout: Duration) -> Result<(BufReader<TcpStream>, Handshake), String> {
    let addr = address
        .to_socket_addrs()
        .map_err(|e| format!("cannot resolve {address}: {e}"))?
        .next()
        .ok_or_else(|| format!("cannot resolve {address}"))?;
    let stream = TcpStream::connect_timeout(&addr, timeout).map_err(|e| format!("connect {address}: {e}"))?;
    stream.set_read_timeout(Some(timeout)).map_err(|e| e.to_string())?;
    stream.set_write_timeout(Some(timeout)).map_err(|e| e.to_string())?;
    let mut reader = BufReader::new(stream);
    let mut line = String::new();
    reader.read_line(&mut line).map_err(|e| format!("handshake: {e}"))?;
    let hs: Handshake = serde_json::from_str(&line).map_err(|e| format!("handshake: {e}"))?;
    if hs.protocol != PROTOCOL {
        return Err(format!("server speaks {:?}, expected {PROTOCOL:?}", hs.protocol));
    }
    Ok((reader, hs))
}

impl Backend for RemoteBackend {
    fn descriptor(&self) -> BackendDescriptor {
        self.descriptor.clone()
    }

    fn complete(&self, request: &BackendRequest) -> Result<String, BackendError> {
        let (mut reader, _) = open(&self.address, self.timeout).map_err(BackendError)?;
        let wire = WireRequest {
            id: request.id.clone(),
            messages: request.messages.clone(),
        };
        let mut line = serde_json::to_string(&wire).map_err(|e| BackendError(e.to_string()))?;
        line.push('\n');
        reader
            .get_mut()
            .write_all(line.as_bytes())
            .map_err(|e| BackendError(format!("send: {e}")))?;
        let mut reply = String::new();
        reader
            .read_line(&mut reply)
            .map_err(|e| BackendError(format!("receive: {e}")))?;
        match serde_json::from_str::<WireResponse>(&reply) {
            Ok(WireResponse::Content { id, content }) if id == request.id => Ok(content),
            Ok(WireResponse::Content { id, .. }) => Err(BackendError(format!(
                "response id {id:?} does not match request {:?}",
                request.id
            ))),
            Ok(WireResponse::Error { error, .. }) => Err(BackendError(error)),
            Err(e) => Err(BackendError(format!("malformed response: {e}"))),
        }
    }
}
