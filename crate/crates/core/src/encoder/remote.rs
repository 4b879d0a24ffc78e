use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::sync::Mutex;
use std::time::Duration;

use crate::encoder::{Embedding, TextEncoder, TextInput};
use crate::error::{Error, Result};

/// Texts written before reading their responses back.
const CHUNK: usize = 64;

struct Connection {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

/// Client for an external embedding service speaking a line protocol over a
/// persistent TCP stream: one text per request line, one line of
/// space-separated floats per response. The first response fixes the
/// dimension for the rest of the session.
pub struct RemoteEncoder {
    endpoint: String,
    conn: Mutex<Connection>,
    dim: Mutex<Option<usize>>,
}

impl std::fmt::Debug for RemoteEncoder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteEncoder")
            .field("endpoint", &self.endpoint)
            .finish_non_exhaustive()
    }
}

fn unavailable(endpoint: &str, e: std::io::Error) -> Error {
    Error::RemoteEncoderUnavailable(format!("{endpoint}: {e}"))
}

impl RemoteEncoder {
    pub fn connect(endpoint: &str) -> Result<Self> {
        Self::connect_with_timeout(endpoint, Duration::from_secs(30))
    }

    pub fn connect_with_timeout(endpoint: &str, timeout: Duration) -> Result<Self> {
        let writer = TcpStream::connect(endpoint).map_err(|e| unavailable(endpoint, e))?;
        writer
            .set_read_timeout(Some(timeout))
            .and_then(|_| writer.set_nodelay(true))
            .map_err(|e| unavailable(endpoint, e))?;
        let reader = BufReader::new(writer.try_clone().map_err(|e| unavailable(endpoint, e))?);
        Ok(Self {
            endpoint: endpoint.to_string(),
            conn: Mutex::new(Connection { reader, writer }),
            dim: Mutex::new(None),
        })
    }

    pub fn dim(&self) -> Option<usize> {
        *self.dim.lock().expect("dimension lock poisoned")
    }

    /// Encodes `texts` in order. Vectors are re-normalized locally.
    pub fn remote_encode(&self, texts: &[&str]) -> Result<Vec<Embedding>> {
        let mut conn = self.conn.lock().expect("connection lock poisoned");
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(CHUNK) {
            let mut request = String::new();
            for text in chunk {
                // the protocol is line framed
                request.extend(text.chars().map(|c| if c == '\n' || c == '\r' { ' ' } else { c }));
                request.push('\n');
            }
            conn.writer
                .write_all(request.as_bytes())
                .and_then(|_| conn.writer.flush())
                .map_err(|e| unavailable(&self.endpoint, e))?;

            for _ in chunk {
                let mut line = String::new();
                let n = conn
                    .reader
                    .read_line(&mut line)
                    .map_err(|e| unavailable(&self.endpoint, e))?;
                if n == 0 {
                    return Err(Error::RemoteEncoderUnavailable(format!(
                        "{}: connection closed mid-batch",
                        self.endpoint
                    )));
                }
                out.push(self.parse_vector(&line)?);
            }
        }
        Ok(out)
    }

    fn parse_vector(&self, line: &str) -> Result<Embedding> {
        let values = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::ProtocolViolation(format!("bad float {tok:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.is_empty() {
            return Err(Error::ProtocolViolation("empty response line".into()));
        }
        let mut dim = self.dim.lock().expect("dimension lock poisoned");
        match *dim {
            None => *dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::ProtocolViolation(format!(
                    "response dimension {} differs from session dimension {d}",
                    values.len()
                )))
            }
            Some(_) => {}
        }
        Embedding::normalize(values)
    }
}

impl TextEncoder for RemoteEncoder {
    fn encode_batch(&self, inputs: &[TextInput<'_>]) -> Result<Vec<Embedding>> {
        let texts: Vec<&str> = inputs.iter().map(|i| i.text).collect();
        self.remote_encode(&texts)
    }
}
