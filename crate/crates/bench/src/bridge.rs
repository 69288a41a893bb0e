//! Client for external learners speaking the `alp-bridge/1` protocol.
//!
//! The adapter is a child process exchanging one JSON object per line over
//! stdin/stdout, strictly alternating request and response. The engine owns
//! the fit time cap: if a fit response does not arrive in time the child is
//! killed and the fit fails. Every probability matrix coming back is
//! re-checked for shape and row-stochasticity.

use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use alp_core::clock::Deadline;
use alp_core::learners::{ConstantModel, FittedModel, Fitter, LearnerKind, LearnerSpec, NativeFitter};
use alp_core::rng::RngStream;
use alp_core::{Error, Matrix, Result};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

pub const PROTOCOL: &str = "alp-bridge/1";

/// Tolerance on bridged probability rows.
pub const PROBA_TOLERANCE: f64 = 1e-6;

const HELLO_TIMEOUT: Duration = Duration::from_secs(60);
const SHUTDOWN_GRACE: Duration = Duration::from_secs(2);
const STDERR_KEEP: usize = 4096;

struct Rows<'a>(&'a Matrix);

impl Serialize for Rows<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.0.rows()))?;
        for row in self.0.iter_rows() {
            seq.serialize_element(row)?;
        }
        seq.end()
    }
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Request<'a> {
    Hello {
        protocol: &'a str,
    },
    Fit {
        x: Rows<'a>,
        y: &'a [usize],
        n_classes: usize,
        seed: u64,
        time_cap: f64,
    },
    PredictProba {
        x: Rows<'a>,
    },
    Embed {
        x: Rows<'a>,
    },
    Shutdown,
}

#[derive(Debug, Default, Deserialize)]
struct Response {
    ok: bool,
    #[serde(default)]
    error: Option<String>,
    #[serde(default)]
    protocol: Option<String>,
    #[serde(default)]
    capabilities: Vec<String>,
    #[serde(default)]
    proba: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    embedding: Option<Vec<Vec<f64>>>,
}

enum Failure {
    Timeout,
    Other(String),
}

struct Adapter {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    stderr: Arc<Mutex<String>>,
    alive: bool,
}

impl Adapter {
    fn spawn(command: &[String]) -> Result<Self> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| Error::Config("external learner needs a command line".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Learner(format!("cannot start `{program}`: {e}")))?;
        let stdout = child.stdout.take().expect("piped");
        let stderr_pipe = child.stderr.take().expect("piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        let stderr = Arc::new(Mutex::new(String::new()));
        let sink = Arc::clone(&stderr);
        thread::spawn(move || {
            let mut buf = [0u8; 1024];
            let mut pipe = stderr_pipe;
            while let Ok(n) = pipe.read(&mut buf) {
                if n == 0 {
                    break;
                }
                let mut s = sink.lock().unwrap_or_else(|e| e.into_inner());
                s.push_str(&String::from_utf8_lossy(&buf[..n]));
                if s.len() > STDERR_KEEP {
                    let cut = s.len() - STDERR_KEEP;
                    let cut = (cut..s.len()).find(|&i| s.is_char_boundary(i)).unwrap_or(s.len());
                    s.drain(..cut);
                }
            }
        });
        Ok(Self {
            stdin: child.stdin.take(),
            child,
            lines: rx,
            stderr,
            alive: true,
        })
    }

    fn diagnostics(&self) -> String {
        let s = self.stderr.lock().unwrap_or_else(|e| e.into_inner());
        let s = s.trim();
        if s.is_empty() {
            String::new()
        } else {
            format!(" (adapter stderr: {s})")
        }
    }

    fn kill(&mut self) {
        if self.alive {
            let _ = self.child.kill();
            let _ = self.child.wait();
            self.alive = false;
        }
    }

    fn exchange(&mut self, request: &Request<'_>, timeout: Option<Duration>) -> std::result::Result<Response, Failure> {
        if !self.alive {
            return Err(Failure::Other("adapter process is no longer running".into()));
        }
        let mut line = serde_json::to_string(request).map_err(|e| Failure::Other(e.to_string()))?;
        line.push('\n');
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| Failure::Other("adapter stdin closed".into()))?;
        if let Err(e) = stdin.write_all(line.as_bytes()).and_then(|_| stdin.flush()) {
            self.kill();
            return Err(Failure::Other(format!("writing to adapter: {e}")));
        }
        let received = match timeout {
            Some(t) => self.lines.recv_timeout(t),
            None => self.lines.recv().map_err(|_| RecvTimeoutError::Disconnected),
        };
        match received {
            Ok(Ok(text)) => serde_json::from_str::<Response>(&text).map_err(|e| {
                self.kill();
                Failure::Other(format!(
                    "protocol desync: unparsable response `{}`: {e}",
                    truncate(&text)
                ))
            }),
            Ok(Err(e)) => {
                self.kill();
                Err(Failure::Other(format!("reading from adapter: {e}")))
            }
            Err(RecvTimeoutError::Timeout) => {
                self.kill();
                Err(Failure::Timeout)
            }
            Err(RecvTimeoutError::Disconnected) => {
                let status = self.child.wait().ok();
                self.alive = false;
                Err(Failure::Other(format!(
                    "adapter exited{}",
                    status.map(|s| format!(" with {s}")).unwrap_or_default()
                )))
            }
        }
    }
}

impl Drop for Adapter {
    fn drop(&mut self) {
        if self.alive {
            if let Some(stdin) = self.stdin.as_mut() {
                let _ = serde_json::to_string(&Request::Shutdown).map(|mut l| {
                    l.push('\n');
                    let _ = stdin.write_all(l.as_bytes()).and_then(|_| stdin.flush());
                });
            }
            self.stdin = None;
            let _ = self.lines.recv_timeout(SHUTDOWN_GRACE);
            self.kill();
        }
    }
}

fn truncate(s: &str) -> &str {
    match s.char_indices().nth(200) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

fn to_matrix(rows: Vec<Vec<f64>>, expect_rows: usize, expect_cols: Option<usize>, what: &str) -> Result<Matrix> {
    if rows.len() != expect_rows {
        return Err(Error::Learner(format!(
            "{what}: {} rows returned, expected {expect_rows}",
            rows.len()
        )));
    }
    let cols = match (expect_cols, rows.first()) {
        (Some(c), _) => c,
        (None, Some(r)) => r.len(),
        (None, None) => 0,
    };
    if let Some(r) = rows.iter().find(|r| r.len() != cols) {
        return Err(Error::Learner(format!(
            "{what}: row of width {}, expected {cols}",
            r.len()
        )));
    }
    let m = Matrix::from_vec(expect_rows, cols, rows.into_iter().flatten().collect());
    if !m.all_finite() {
        return Err(Error::Learner(format!("{what}: non-finite value")));
    }
    Ok(m)
}

/// A fitted model living in an adapter process.
pub struct BridgeModel {
    n_classes: usize,
    can_embed: bool,
    child: Mutex<Adapter>,
}

impl BridgeModel {
    /// Spawns the adapter, negotiates the protocol and fits under `deadline`.
    pub fn fit(
        command: &[String],
        x: &Matrix,
        y: &[usize],
        n_classes: usize,
        seed: u64,
        deadline: Deadline<'_>,
    ) -> Result<Self> {
        let mut child = Adapter::spawn(command)?;
        let hello = child
            .exchange(&Request::Hello { protocol: PROTOCOL }, Some(HELLO_TIMEOUT))
            .map_err(|f| failure(&child, f, "hello"))?;
        if !hello.ok || hello.protocol.as_deref() != Some(PROTOCOL) {
            let diag = child.diagnostics();
            return Err(Error::Learner(format!(
                "adapter rejected protocol {PROTOCOL} (answered {:?}, error {:?}){diag}",
                hello.protocol, hello.error
            )));
        }
        if !hello.capabilities.iter().any(|c| c == "proba") {
            return Err(Error::Learner("adapter does not offer `proba`".into()));
        }
        let can_embed = hello.capabilities.iter().any(|c| c == "embed");
        let cap = deadline.remaining();
        let timeout = cap.is_finite().then(|| Duration::from_secs_f64(cap));
        let request = Request::Fit {
            x: Rows(x),
            y,
            n_classes,
            seed,
            time_cap: cap,
        };
        let resp = match child.exchange(&request, timeout) {
            Ok(r) => r,
            Err(Failure::Timeout) => {
                return Err(Error::Fit(format!("timeout: external fit exceeded its {cap} s cap")));
            }
            Err(f) => return Err(failure(&child, f, "fit")),
        };
        if !resp.ok {
            return Err(Error::Fit(format!(
                "adapter fit failed: {}{}",
                resp.error.unwrap_or_default(),
                child.diagnostics()
            )));
        }
        Ok(Self {
            n_classes,
            can_embed,
            child: Mutex::new(child),
        })
    }
}

fn failure(child: &Adapter, f: Failure, stage: &str) -> Error {
    match f {
        Failure::Timeout => Error::Learner(format!(
            "adapter did not answer `{stage}` in time{}",
            child.diagnostics()
        )),
        Failure::Other(msg) => Error::Learner(format!("{stage}: {msg}{}", child.diagnostics())),
    }
}

impl FittedModel for BridgeModel {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        let mut child = self.child.lock().unwrap_or_else(|e| e.into_inner());
        let resp = child
            .exchange(&Request::PredictProba { x: Rows(x) }, None)
            .map_err(|f| failure(&child, f, "predict_proba"))?;
        if !resp.ok {
            return Err(Error::Learner(format!(
                "adapter predict_proba failed: {}",
                resp.error.unwrap_or_default()
            )));
        }
        let rows = resp
            .proba
            .ok_or_else(|| Error::Learner("predict_proba response without `proba`".into()))?;
        let m = to_matrix(rows, x.rows(), Some(self.n_classes), "predict_proba")?;
        if !m.is_row_stochastic(PROBA_TOLERANCE) {
            return Err(Error::Learner(
                "predict_proba: probability invariant violated (rows must be non-negative and sum to 1)".into(),
            ));
        }
        Ok(m)
    }

    /// Falls back to the raw features when the adapter has no representation.
    fn embed(&self, x: &Matrix) -> Result<Matrix> {
        if !self.can_embed {
            return Ok(x.clone());
        }
        let mut child = self.child.lock().unwrap_or_else(|e| e.into_inner());
        let resp = child
            .exchange(&Request::Embed { x: Rows(x) }, None)
            .map_err(|f| failure(&child, f, "embed"))?;
        match resp.embedding {
            Some(rows) if resp.ok => to_matrix(rows, x.rows(), None, "embed"),
            _ => Ok(x.clone()),
        }
    }
}

/// Fits external learners through the bridge and everything else natively.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExternalFitter;

impl Fitter for ExternalFitter {
    fn fit(
        &self,
        spec: &LearnerSpec,
        x: &Matrix,
        y: &[usize],
        n_classes: usize,
        rng: &mut RngStream,
        deadline: Deadline<'_>,
    ) -> Result<Box<dyn FittedModel>> {
        let LearnerKind::External { command } = &spec.kind else {
            return NativeFitter.fit(spec, x, y, n_classes, rng, deadline);
        };
        spec.validate()?;
        if x.rows() == 0 || x.rows() != y.len() || y.iter().any(|&c| c >= n_classes) || !x.all_finite() {
            return Err(Error::Fit("invalid training data for external learner".into()));
        }
        if y.iter().all(|&c| c == y[0]) {
            return Ok(Box::new(ConstantModel::single_class(y[0], y.len(), n_classes)));
        }
        let seed = rng.next_u64();
        Ok(Box::new(BridgeModel::fit(command, x, y, n_classes, seed, deadline)?))
    }
}
