//! Oracle endpoints: the in-process stub, a child process speaking the wire
//! protocol over stdio, and an HTTP endpoint taking one request per POST.

use std::collections::{BTreeMap, VecDeque};
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use log::{debug, warn};
use natrank_core::masking::MaskedVariant;
use natrank_core::oracle::{self, PredictionRecord, StubVocab, VariantRef};

use crate::protocol::{self, ReplyError, Request, Response, VERSION};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleSpec {
    Stub,
    /// Shell command started with `sh -c`.
    Command(String),
    /// URL receiving one request per POST.
    Http(String),
}

impl FromStr for OracleSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "stub" {
            Ok(OracleSpec::Stub)
        } else if let Some(cmd) = s.strip_prefix("cmd:") {
            if cmd.trim().is_empty() {
                return Err("empty oracle command".into());
            }
            Ok(OracleSpec::Command(cmd.to_string()))
        } else if let Some(url) = s.strip_prefix("http:") {
            // Accept both `http:host:port/path` and `http://host...`.
            let url = if url.starts_with("//") {
                format!("http:{url}")
            } else {
                format!("http://{url}")
            };
            Ok(OracleSpec::Http(url))
        } else {
            Err(format!("oracle must be stub, cmd:COMMAND or http:URL, got {s:?}"))
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error(transparent)]
    Reply(#[from] ReplyError),
    #[error("oracle replied with id {0:?}, which is not in flight")]
    StrayId(String),
    #[error("request {id} failed after {attempts} attempts: {last}")]
    GaveUp {
        id: String,
        attempts: usize,
        last: String,
    },
    #[error("oracle transport: {0}")]
    Transport(String),
    #[error(transparent)]
    Core(#[from] natrank_core::Error),
}

#[derive(Debug, Clone, Copy)]
pub struct ClientConfig {
    /// Requests in flight at once.
    pub in_flight: usize,
    /// Longest wait for any reply before the in-flight requests are retried.
    pub timeout: Duration,
    /// Extra attempts per request after a transport failure.
    pub retries: usize,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            in_flight: 4,
            timeout: Duration::from_secs(60),
            retries: 2,
        }
    }
}

pub trait Oracle: Send {
    /// One record per variant, in variant order.
    fn query(&mut self, variants: &[MaskedVariant], k: usize, embeddings: bool) -> Result<Vec<PredictionRecord>, OracleError>;
}

pub struct StubOracle {
    pub vocab: StubVocab,
}

impl Oracle for StubOracle {
    fn query(&mut self, variants: &[MaskedVariant], k: usize, embeddings: bool) -> Result<Vec<PredictionRecord>, OracleError> {
        Ok(oracle::stub_query(variants, k, embeddings, &self.vocab)?)
    }
}

fn request_for(id: String, v: &MaskedVariant, k: usize, embeddings: bool) -> Request {
    Request {
        id,
        window: v.window.clone(),
        k,
        embeddings,
        v: VERSION,
    }
}

/// Extracts the id of a reply line even when the rest does not parse.
fn loose_id(line: &str) -> Option<String> {
    let v: serde_json::Value = serde_json::from_str(line).ok()?;
    v.get("id")?.as_str().map(str::to_string)
}

struct Running {
    child: Child,
    stdin: ChildStdin,
    /// Reply lines; `None` once stdout closed.
    lines: Receiver<Option<String>>,
}

impl Running {
    fn spawn(cmd: &str) -> Result<Self, OracleError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(cmd)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| OracleError::Transport(format!("cannot start {cmd:?}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                match line {
                    Ok(l) => {
                        if tx.send(Some(l)).is_err() {
                            return;
                        }
                    }
                    Err(_) => break,
                }
            }
            let _ = tx.send(None);
        });
        Ok(Running {
            child,
            stdin,
            lines: rx,
        })
    }

    fn stop(mut self) {
        drop(self.stdin);
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Child process speaking the protocol on stdin/stdout.
pub struct ProcessOracle {
    cmd: String,
    cfg: ClientConfig,
    running: Option<Running>,
    next_id: u64,
}

impl ProcessOracle {
    pub fn new(cmd: impl Into<String>, cfg: ClientConfig) -> Self {
        ProcessOracle {
            cmd: cmd.into(),
            cfg,
            running: None,
            next_id: 0,
        }
    }

    fn restart(&mut self) {
        if let Some(r) = self.running.take() {
            r.stop();
        }
    }
}

impl Drop for ProcessOracle {
    fn drop(&mut self) {
        if let Some(mut r) = self.running.take() {
            drop(r.stdin);
            // Give a well-behaved oracle a moment to exit on EOF.
            for _ in 0..20 {
                if matches!(r.child.try_wait(), Ok(Some(_))) {
                    return;
                }
                thread::sleep(Duration::from_millis(5));
            }
            let _ = r.child.kill();
            let _ = r.child.wait();
        }
    }
}

impl Oracle for ProcessOracle {
    fn query(&mut self, variants: &[MaskedVariant], k: usize, embeddings: bool) -> Result<Vec<PredictionRecord>, OracleError> {
        oracle::check_k(k)?;
        let reqs: Vec<Request> = variants
            .iter()
            .map(|v| {
                self.next_id += 1;
                request_for(self.next_id.to_string(), v, k, embeddings)
            })
            .collect();
        let mut results: Vec<Option<PredictionRecord>> = vec![None; reqs.len()];
        let mut attempts = vec![0usize; reqs.len()];
        let mut pending: VecDeque<usize> = (0..reqs.len()).collect();
        let mut in_flight: BTreeMap<&str, usize> = BTreeMap::new();
        let mut done = 0;
        let cap = self.cfg.in_flight.max(1);

        while done < reqs.len() {
            if self.running.is_none() {
                self.running = Some(Running::spawn(&self.cmd)?);
            }
            let mut failure: Option<String> = None;
            {
                let running = self.running.as_mut().expect("spawned above");
                while in_flight.len() < cap {
                    let Some(i) = pending.pop_front() else { break };
                    attempts[i] += 1;
                    in_flight.insert(reqs[i].id.as_str(), i);
                    let line = serde_json::to_string(&reqs[i]).expect("request serializes") + "\n";
                    if let Err(e) = running.stdin.write_all(line.as_bytes()).and_then(|_| running.stdin.flush()) {
                        failure = Some(format!("write failed: {e}"));
                        break;
                    }
                }
                if failure.is_none() {
                    match running.lines.recv_timeout(self.cfg.timeout) {
                        Ok(Some(line)) => {
                            let resp: Response = match protocol::parse_response(&line) {
                                Ok(r) => r,
                                Err(msg) => {
                                    return Err(match loose_id(&line) {
                                        Some(id) => ReplyError::Malformed { id, msg }.into(),
                                        None => OracleError::Transport(msg),
                                    })
                                }
                            };
                            if resp.v != VERSION {
                                return Err(ReplyError::Version(resp.v).into());
                            }
                            let Some(i) = in_flight.remove(resp.id.as_str()) else {
                                return Err(OracleError::StrayId(resp.id));
                            };
                            let vref = VariantRef::of(&variants[i].site);
                            results[i] = Some(protocol::to_record(&reqs[i], resp, vref)?);
                            done += 1;
                        }
                        Ok(None) | Err(RecvTimeoutError::Disconnected) => {
                            failure = Some("oracle process exited".into());
                        }
                        Err(RecvTimeoutError::Timeout) => {
                            failure = Some(format!("no reply within {:?}", self.cfg.timeout));
                        }
                    }
                }
            }
            if let Some(msg) = failure {
                warn!("oracle failure ({msg}); restarting with {} requests in flight", in_flight.len());
                self.restart();
                let mut back: Vec<usize> = in_flight.values().copied().collect();
                in_flight.clear();
                back.sort_unstable();
                for &i in back.iter().rev() {
                    if attempts[i] > self.cfg.retries {
                        return Err(OracleError::GaveUp {
                            id: reqs[i].id.clone(),
                            attempts: attempts[i],
                            last: msg,
                        });
                    }
                    pending.push_front(i);
                }
            }
        }
        debug!("oracle answered {} requests", reqs.len());
        Ok(results.into_iter().map(|r| r.expect("all answered")).collect())
    }
}

/// HTTP endpoint: each request body is POSTed, the reply body is one response.
pub struct HttpOracle {
    url: String,
    cfg: ClientConfig,
    agent: ureq::Agent,
    next_id: u64,
}

impl HttpOracle {
    pub fn new(url: impl Into<String>, cfg: ClientConfig) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(cfg.timeout).build();
        HttpOracle {
            url: url.into(),
            cfg,
            agent,
            next_id: 0,
        }
    }

    fn post(&self, req: &Request) -> Result<String, String> {
        let body = serde_json::to_string(req).expect("request serializes");
        match self
            .agent
            .post(&self.url)
            .set("Content-Type", "application/json")
            .send_string(&body)
        {
            Ok(resp) => resp.into_string().map_err(|e| e.to_string()),
            Err(ureq::Error::Status(code, resp)) if code < 500 => {
                // Client errors carry a protocol error body worth surfacing.
                Ok(resp.into_string().unwrap_or_default())
            }
            Err(e) => Err(e.to_string()),
        }
    }

    fn one(&self, req: &Request, variant: &MaskedVariant) -> Result<PredictionRecord, OracleError> {
        let mut last = String::new();
        for _ in 0..=self.cfg.retries {
            match self.post(req) {
                Ok(text) => {
                    let resp = protocol::parse_response(text.trim()).map_err(|msg| ReplyError::Malformed {
                        id: req.id.clone(),
                        msg,
                    })?;
                    if resp.v != VERSION {
                        return Err(ReplyError::Version(resp.v).into());
                    }
                    if resp.id != req.id {
                        return Err(OracleError::StrayId(resp.id));
                    }
                    return Ok(protocol::to_record(req, resp, VariantRef::of(&variant.site))?);
                }
                Err(e) => {
                    warn!("oracle request {} failed: {e}", req.id);
                    last = e;
                }
            }
        }
        Err(OracleError::GaveUp {
            id: req.id.clone(),
            attempts: self.cfg.retries + 1,
            last,
        })
    }
}

impl Oracle for HttpOracle {
    fn query(&mut self, variants: &[MaskedVariant], k: usize, embeddings: bool) -> Result<Vec<PredictionRecord>, OracleError> {
        oracle::check_k(k)?;
        let reqs: Vec<Request> = variants
            .iter()
            .map(|v| {
                self.next_id += 1;
                request_for(self.next_id.to_string(), v, k, embeddings)
            })
            .collect();
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<Result<PredictionRecord, OracleError>>>> =
            Mutex::new((0..reqs.len()).map(|_| None).collect());
        let this = &*self;
        thread::scope(|s| {
            for _ in 0..this.cfg.in_flight.max(1).min(reqs.len().max(1)) {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= reqs.len() {
                        return;
                    }
                    let r = this.one(&reqs[i], &variants[i]);
                    let failed = r.is_err();
                    slots.lock().expect("no panics while held")[i] = Some(r);
                    if failed {
                        // Stop handing out work; the first error is reported.
                        next.store(reqs.len(), Ordering::Relaxed);
                        return;
                    }
                });
            }
        });
        let slots = slots.into_inner().expect("workers joined");
        let mut out = Vec::with_capacity(reqs.len());
        for slot in slots {
            match slot {
                Some(Ok(r)) => out.push(r),
                Some(Err(e)) => return Err(e),
                None => {}
            }
        }
        if out.len() != reqs.len() {
            return Err(OracleError::Transport("oracle requests abandoned after an earlier failure".into()));
        }
        Ok(out)
    }
}
