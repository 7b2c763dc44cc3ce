//! Running extraction adapters.
//!
//! Subprocess adapters are started with `sh -c <endpoint>` and speak
//! line-delimited JSON: the first stdout line is the handshake, then one
//! response line per request line written to stdin. HTTP adapters expose
//! `GET /handshake` and `POST /extract` with the same JSON bodies.
//!
//! With parallelism `k`, `k` independent connections are opened (for
//! subprocess adapters, `k` processes) and records are handed out from a
//! shared counter. Wall-clock latency is measured here around each
//! request/response exchange.

use std::io::{BufRead, BufReader, Write};
use std::os::unix::process::CommandExt;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use log::{debug, warn};
use skillbench_core::{
    AdapterManifest, ExtractionRequest, ExtractionResponse, Handshake, Transport, UsageRecord,
    VacancyId, VacancyRecord, PROTOCOL_VERSION,
};

#[derive(Debug, thiserror::Error)]
pub enum AdapterError {
    #[error("adapter {name}: cannot start: {reason}")]
    Start { name: String, reason: String },
    #[error("adapter {name}: handshake failed: {reason}")]
    Handshake { name: String, reason: String },
    #[error("adapter {name}: invalid manifest: {reason}")]
    Manifest { name: String, reason: String },
}

/// Why a single attempt failed.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AttemptError {
    #[error("timed out after {0:?}")]
    Timeout(Duration),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("response id {got} does not match request id {expected}")]
    IdMismatch { expected: String, got: String },
    #[error("adapter reported: {message}")]
    Reported { message: String, retryable: bool },
    #[error("transport: {0}")]
    Transport(String),
    #[error("adapter process exited")]
    Exited,
}

impl AttemptError {
    /// Failures after which the byte stream can no longer be trusted.
    fn poisons_connection(&self) -> bool {
        !matches!(self, AttemptError::Reported { .. })
    }
}

#[derive(Debug, Clone)]
pub enum RecordOutcome {
    Done {
        response: ExtractionResponse,
        usage: UsageRecord,
        attempts: u32,
    },
    Failed {
        id: VacancyId,
        attempts: u32,
        error: String,
    },
}

impl RecordOutcome {
    pub fn id(&self) -> &VacancyId {
        match self {
            RecordOutcome::Done { response, .. } => &response.id,
            RecordOutcome::Failed { id, .. } => id,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdapterRun {
    pub handshake: Handshake,
    /// One entry per input record, in input order.
    pub outcomes: Vec<RecordOutcome>,
}

impl AdapterRun {
    pub fn failures(&self) -> usize {
        self.outcomes
            .iter()
            .filter(|o| matches!(o, RecordOutcome::Failed { .. }))
            .count()
    }
}

trait Connection: Send {
    fn handshake(&self) -> &Handshake;
    fn exchange(&mut self, req: &ExtractionRequest) -> Result<ExtractionResponse, AttemptError>;
}

fn parse_handshake(name: &str, line: &str) -> Result<Handshake, AdapterError> {
    let hs: Handshake = serde_json::from_str(line.trim()).map_err(|e| AdapterError::Handshake {
        name: name.into(),
        reason: format!("{e}: {line:?}"),
    })?;
    if hs.protocol != PROTOCOL_VERSION {
        return Err(AdapterError::Handshake {
            name: name.into(),
            reason: format!("protocol {:?}, expected {PROTOCOL_VERSION:?}", hs.protocol),
        });
    }
    Ok(hs)
}

fn parse_response(line: &str) -> Result<ExtractionResponse, AttemptError> {
    serde_json::from_str(line.trim()).map_err(|e| AttemptError::Malformed(format!("{e}: {line:?}")))
}

struct Subprocess {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
    handshake: Handshake,
}

impl Subprocess {
    fn start(m: &AdapterManifest) -> Result<Self, AdapterError> {
        let timeout = Duration::from_secs_f64(m.timeout_sec);
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&m.endpoint)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .process_group(0)
            .spawn()
            .map_err(|e| AdapterError::Start {
                name: m.name.clone(),
                reason: e.to_string(),
            })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let first = match lines.recv_timeout(timeout) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => {
                kill_group(&mut child);
                return Err(AdapterError::Handshake {
                    name: m.name.clone(),
                    reason: e.to_string(),
                });
            }
            Err(RecvTimeoutError::Timeout) => {
                kill_group(&mut child);
                return Err(AdapterError::Handshake {
                    name: m.name.clone(),
                    reason: format!("no handshake within {timeout:?}"),
                });
            }
            Err(RecvTimeoutError::Disconnected) => {
                kill_group(&mut child);
                return Err(AdapterError::Handshake {
                    name: m.name.clone(),
                    reason: "adapter exited before its handshake".into(),
                });
            }
        };
        let handshake = match parse_handshake(&m.name, &first) {
            Ok(h) => h,
            Err(e) => {
                kill_group(&mut child);
                return Err(e);
            }
        };
        Ok(Self {
            child,
            stdin,
            lines,
            timeout,
            handshake,
        })
    }
}

impl Connection for Subprocess {
    fn handshake(&self) -> &Handshake {
        &self.handshake
    }

    fn exchange(&mut self, req: &ExtractionRequest) -> Result<ExtractionResponse, AttemptError> {
        let mut line = serde_json::to_vec(req).expect("request serializes");
        line.push(b'\n');
        self.stdin
            .write_all(&line)
            .and_then(|_| self.stdin.flush())
            .map_err(|_| AttemptError::Exited)?;
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => parse_response(&line),
            Ok(Err(e)) => Err(AttemptError::Transport(e.to_string())),
            Err(RecvTimeoutError::Timeout) => Err(AttemptError::Timeout(self.timeout)),
            Err(RecvTimeoutError::Disconnected) => Err(AttemptError::Exited),
        }
    }
}

/// Kills the adapter's whole process group: `sh -c` may fork the real
/// adapter rather than exec it.
fn kill_group(child: &mut Child) {
    // SAFETY: kill(2) with a negative pid only signals that process group.
    unsafe {
        libc::kill(-(child.id() as libc::pid_t), libc::SIGKILL);
    }
    let _ = child.wait();
}

impl Drop for Subprocess {
    fn drop(&mut self) {
        kill_group(&mut self.child);
    }
}

struct Http {
    agent: ureq::Agent,
    extract_url: String,
    handshake: Handshake,
}

impl Http {
    fn start(m: &AdapterManifest) -> Result<Self, AdapterError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(m.timeout_sec)))
            .http_status_as_error(false)
            .build()
            .into();
        let base = m.endpoint.trim_end_matches('/');
        let fail = |reason: String| AdapterError::Handshake {
            name: m.name.clone(),
            reason,
        };
        let mut resp = agent
            .get(&format!("{base}/handshake"))
            .call()
            .map_err(|e| fail(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(fail(format!("HTTP {}", resp.status())));
        }
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| fail(e.to_string()))?;
        let handshake = parse_handshake(&m.name, &body)?;
        Ok(Self {
            agent,
            extract_url: format!("{base}/extract"),
            handshake,
        })
    }
}

impl Connection for Http {
    fn handshake(&self) -> &Handshake {
        &self.handshake
    }

    fn exchange(&mut self, req: &ExtractionRequest) -> Result<ExtractionResponse, AttemptError> {
        let mut resp = self
            .agent
            .post(&self.extract_url)
            .send_json(req)
            .map_err(|e| match e {
                ureq::Error::Timeout(_) => AttemptError::Timeout(Duration::ZERO),
                other => AttemptError::Transport(other.to_string()),
            })?;
        let status = resp.status();
        let body = resp
            .body_mut()
            .with_config()
            .limit(64 << 20)
            .read_to_string()
            .map_err(|e| AttemptError::Transport(e.to_string()))?;
        if !status.is_success() {
            // Adapters may still send a protocol error body with a non-2xx status.
            if let Ok(r) = parse_response(&body) {
                if r.error.is_some() {
                    return Ok(r);
                }
            }
            return Err(AttemptError::Transport(format!("HTTP {status}")));
        }
        parse_response(&body)
    }
}

fn connect(m: &AdapterManifest) -> Result<Box<dyn Connection>, AdapterError> {
    Ok(match m.transport {
        Transport::Subprocess => Box::new(Subprocess::start(m)?),
        Transport::Http => Box::new(Http::start(m)?),
    })
}

fn run_record(
    m: &AdapterManifest,
    conn: &mut Option<Box<dyn Connection>>,
    record: &VacancyRecord,
) -> RecordOutcome {
    let req = ExtractionRequest::from(record);
    let mut last = String::new();
    let mut attempts = 0;
    while attempts <= m.max_retries {
        attempts += 1;
        if conn.is_none() {
            match connect(m) {
                Ok(c) => *conn = Some(c),
                Err(e) => {
                    last = e.to_string();
                    continue;
                }
            }
        }
        let c = conn.as_mut().expect("connected above");
        let start = Instant::now();
        let result = c.exchange(&req);
        let wall = start.elapsed().as_secs_f64();
        let err = match result {
            Ok(resp) if resp.id.key() != req.id.key() => AttemptError::IdMismatch {
                expected: req.id.key(),
                got: resp.id.key(),
            },
            Ok(resp) => match &resp.error {
                Some(message) => AttemptError::Reported {
                    message: message.clone(),
                    retryable: resp.retryable.unwrap_or(true),
                },
                None => {
                    let usage = UsageRecord::account(req.id.clone(), wall, &resp, m.pricing());
                    return RecordOutcome::Done {
                        response: resp,
                        usage,
                        attempts,
                    };
                }
            },
            Err(e) => e,
        };
        warn!(
            "adapter {}: vacancy {} attempt {attempts}: {err}",
            m.name, req.id
        );
        if err.poisons_connection() {
            *conn = None;
        }
        last = err.to_string();
        if matches!(
            err,
            AttemptError::Reported {
                retryable: false,
                ..
            }
        ) {
            break;
        }
    }
    RecordOutcome::Failed {
        id: req.id,
        attempts,
        error: last,
    }
}

/// Sends every record to the adapter and collects responses in input order.
///
/// Only a failed initial handshake is an error; per-record failures past
/// the retry budget come back as [`RecordOutcome::Failed`].
pub fn run_adapter(
    manifest: &AdapterManifest,
    records: &[VacancyRecord],
    parallelism: usize,
) -> Result<AdapterRun, AdapterError> {
    manifest.validate().map_err(|e| AdapterError::Manifest {
        name: manifest.name.clone(),
        reason: e.to_string(),
    })?;
    let workers = parallelism.max(1).min(records.len().max(1));
    let mut first: Vec<Option<Box<dyn Connection>>> = Vec::with_capacity(workers);
    for _ in 0..workers {
        first.push(Some(connect(manifest)?));
    }
    let handshake = first[0].as_ref().expect("connected").handshake().clone();
    if handshake.kind != manifest.kind {
        warn!(
            "adapter {}: handshake kind {} differs from manifest kind {}",
            manifest.name,
            handshake.kind.as_str(),
            manifest.kind.as_str()
        );
    }
    debug!(
        "adapter {}: {} worker(s), handshake {:?}",
        manifest.name, workers, handshake
    );

    let next = AtomicUsize::new(0);
    let mut collected: Vec<(usize, RecordOutcome)> = thread::scope(|s| {
        let handles: Vec<_> = first
            .into_iter()
            .map(|mut conn| {
                let next = &next;
                s.spawn(move || {
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= records.len() {
                            break;
                        }
                        done.push((i, run_record(manifest, &mut conn, &records[i])));
                    }
                    done
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("adapter worker panicked"))
            .collect()
    });
    collected.sort_by_key(|(i, _)| *i);
    Ok(AdapterRun {
        handshake,
        outcomes: collected.into_iter().map(|(_, o)| o).collect(),
    })
}
