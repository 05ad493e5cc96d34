//! Oracles reached over a child process's stdio or over HTTP.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use log::debug;
use pixattack_core::{Concurrency, Image, Oracle, OracleError, OracleResponse, Shape};

use crate::wire;

fn check_shape(expected: Option<Shape>, image: &Image) -> Result<(), OracleError> {
    match expected {
        Some(s) if s != image.shape() => Err(OracleError::ShapeMismatch {
            expected: s,
            found: image.shape(),
        }),
        _ => Ok(()),
    }
}

struct Pipe {
    child: Child,
    stdin: Option<ChildStdin>,
    stdout: BufReader<ChildStdout>,
    next_id: u64,
}

/// A long-running child process speaking the line protocol: one request
/// line on stdin, one reply line on stdout. Strictly one query at a time.
pub struct SubprocessOracle {
    pipe: Mutex<Pipe>,
    shape: Option<Shape>,
}

impl SubprocessOracle {
    /// Starts `command` through `sh -c`.
    pub fn spawn(command: &str, shape: Option<Shape>) -> Result<Self, OracleError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| OracleError::Transport(format!("cannot start `{command}`: {e}")))?;
        let stdin = child.stdin.take().expect("stdin was piped");
        let stdout = BufReader::new(child.stdout.take().expect("stdout was piped"));
        Ok(SubprocessOracle {
            pipe: Mutex::new(Pipe {
                child,
                stdin: Some(stdin),
                stdout,
                next_id: 0,
            }),
            shape,
        })
    }
}

impl Oracle for SubprocessOracle {
    fn classify(&self, image: &Image) -> Result<OracleResponse, OracleError> {
        check_shape(self.shape, image)?;
        let mut pipe = self
            .pipe
            .lock()
            .map_err(|_| OracleError::Transport("subprocess handle poisoned".into()))?;
        let id = pipe.next_id;
        pipe.next_id += 1;
        let start = Instant::now();
        let mut line = wire::encode_request(id, image);
        line.push('\n');
        let stdin = pipe.stdin.as_mut().expect("stdin open until drop");
        stdin
            .write_all(line.as_bytes())
            .and_then(|()| stdin.flush())
            .map_err(|e| OracleError::Transport(format!("writing request: {e}")))?;
        let mut reply = String::new();
        let n = pipe
            .stdout
            .read_line(&mut reply)
            .map_err(|e| OracleError::Transport(format!("reading reply: {e}")))?;
        if n == 0 {
            return Err(OracleError::Transport("subprocess closed its output".into()));
        }
        if !reply.ends_with('\n') {
            return Err(OracleError::Malformed("truncated message: reply line has no newline".into()));
        }
        Ok(wire::decode_reply(&reply, id)?.with_latency(start.elapsed()))
    }

    fn input_shape(&self) -> Option<Shape> {
        self.shape
    }

    fn concurrency(&self) -> Concurrency {
        Concurrency::Serial
    }
}

impl Drop for SubprocessOracle {
    fn drop(&mut self) {
        let Ok(pipe) = self.pipe.get_mut() else { return };
        // closing stdin asks the child to exit; kill it if it lingers
        drop(pipe.stdin.take());
        for _ in 0..50 {
            if let Ok(Some(_)) = pipe.child.try_wait() {
                return;
            }
            std::thread::sleep(Duration::from_millis(10));
        }
        let _ = pipe.child.kill();
        let _ = pipe.child.wait();
    }
}

/// POSTs each request body to `<base>/classify`.
pub struct HttpOracle {
    agent: ureq::Agent,
    url: String,
    shape: Option<Shape>,
    max_in_flight: usize,
    next_id: AtomicU64,
}

impl HttpOracle {
    pub fn new(base_url: &str, shape: Option<Shape>, max_in_flight: usize, timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build();
        HttpOracle {
            agent: config.new_agent(),
            url: format!("{}/classify", base_url.trim_end_matches('/')),
            shape,
            max_in_flight: max_in_flight.max(1),
            next_id: AtomicU64::new(0),
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl Oracle for HttpOracle {
    fn classify(&self, image: &Image) -> Result<OracleResponse, OracleError> {
        check_shape(self.shape, image)?;
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let start = Instant::now();
        let mut response = self
            .agent
            .post(&self.url)
            .content_type("application/json")
            .send(wire::encode_request(id, image))
            .map_err(|e| OracleError::Transport(format!("POST {}: {e}", self.url)))?;
        let status = response.status();
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| OracleError::Transport(format!("reading reply: {e}")))?;
        if !status.is_success() {
            debug!("HTTP {status} from {}: {body}", self.url);
            // the server may still have sent a structured error
            if let Err(e @ OracleError::Remote(_)) = wire::decode_reply(&body, id) {
                return Err(e);
            }
            return Err(OracleError::Transport(format!("HTTP {status} from {}", self.url)));
        }
        Ok(wire::decode_reply(&body, id)?.with_latency(start.elapsed()))
    }

    fn input_shape(&self) -> Option<Shape> {
        self.shape
    }

    fn concurrency(&self) -> Concurrency {
        Concurrency::Parallel {
            max_in_flight: self.max_in_flight,
        }
    }
}
