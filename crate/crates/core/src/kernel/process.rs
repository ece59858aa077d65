use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicBool, AtomicI64, AtomicU32, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::time::{Duration, Instant};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use tracing::{debug, warn};

use super::protocol::{ShimMessage, WireStatus, PROTOCOL_VERSION};
use super::{truncate_output, Artifact, ExecStatus, ExecuteResult, KernelConfig, SHIM_SOURCE, TIMEOUT_TRACEBACK};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelState {
    Starting,
    Ready,
    Busy,
    Dead,
}

struct Proc {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<String>,
}

impl Proc {
    fn spawn(python: &str, shim: &Path, working_dir: &Path, session_id: &str) -> Result<Proc> {
        let mut child = Command::new(python)
            .arg(shim)
            .current_dir(working_dir)
            .env("PYTHONUNBUFFERED", "1")
            .env("PYTHONDONTWRITEBYTECODE", "1")
            .env("MPLBACKEND", "Agg")
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::KernelStart(format!("cannot spawn {python}: {e}")))?;
        let stdout = child.stdout.take().expect("stdout piped");
        let stderr = child.stderr.take().expect("stderr piped");
        let (tx, lines) = mpsc::channel();
        std::thread::Builder::new()
            .name(format!("kernel-out-{session_id}"))
            .spawn(move || {
                for line in BufReader::new(stdout).lines() {
                    let Ok(line) = line else { break };
                    if tx.send(line).is_err() {
                        break;
                    }
                }
            })?;
        let sid = session_id.to_string();
        std::thread::Builder::new()
            .name(format!("kernel-diag-{session_id}"))
            .spawn(move || {
                for line in BufReader::new(stderr).lines().map_while(std::result::Result::ok) {
                    debug!(session = %sid, "{line}");
                }
            })?;
        let stdin = child.stdin.take();
        Ok(Proc { child, stdin, lines })
    }

    fn handshake(&self, timeout: Duration) -> Result<()> {
        let line = self.lines.recv_timeout(timeout).map_err(|e| match e {
            RecvTimeoutError::Timeout => Error::KernelStart(format!("no hello within {timeout:?}")),
            RecvTimeoutError::Disconnected => Error::KernelStart("shim exited before hello".into()),
        })?;
        match ShimMessage::parse(&line) {
            Ok(ShimMessage::Hello { version }) if version == PROTOCOL_VERSION => Ok(()),
            Ok(other) => Err(Error::KernelStart(format!("unexpected first message: {other:?}"))),
            Err(e) => Err(Error::KernelStart(format!("malformed hello {line:?}: {e}"))),
        }
    }

    fn pid(&self) -> u32 {
        self.child.id()
    }

    fn wait_for_exit(&mut self, budget: Duration) -> bool {
        let deadline = Instant::now() + budget;
        loop {
            if matches!(self.child.try_wait(), Ok(Some(_))) {
                return true;
            }
            if Instant::now() >= deadline {
                return false;
            }
            std::thread::sleep(Duration::from_millis(10));
        }
    }

    fn kill(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }

    /// Closes stdin, then escalates to SIGTERM and SIGKILL within `budget`.
    fn terminate(&mut self, budget: Duration) {
        self.stdin.take();
        if self.wait_for_exit(budget.mul_f64(0.4)) {
            return;
        }
        signal(self.pid(), Signal::Term);
        if self.wait_for_exit(budget.mul_f64(0.3)) {
            return;
        }
        self.kill();
    }
}

#[derive(Clone, Copy)]
enum Signal {
    Interrupt,
    Term,
}

#[cfg(unix)]
fn signal(pid: u32, sig: Signal) {
    let sig = match sig {
        Signal::Interrupt => libc::SIGINT,
        Signal::Term => libc::SIGTERM,
    };
    // SAFETY: kill(2) has no memory-safety preconditions.
    unsafe {
        libc::kill(pid as libc::pid_t, sig);
    }
}

#[cfg(not(unix))]
fn signal(_pid: u32, _sig: Signal) {}

fn fnv1a(data: &[u8]) -> u64 {
    data.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(*b)).wrapping_mul(0x0100_0000_01b3))
}

/// Writes the embedded shim to the temp directory (once per content hash).
fn materialize_shim() -> Result<PathBuf> {
    let path = std::env::temp_dir().join(format!("dataloop-shim-{:016x}.py", fnv1a(SHIM_SOURCE.as_bytes())));
    if std::fs::read_to_string(&path).is_ok_and(|s| s == SHIM_SOURCE) {
        return Ok(path);
    }
    let tmp = path.with_extension(format!("py.{}.tmp", std::process::id()));
    std::fs::write(&tmp, SHIM_SOURCE)?;
    std::fs::rename(&tmp, &path)?;
    Ok(path)
}

/// One live shim process bound to a session's working directory.
///
/// At most one execute runs at a time; a second concurrent call is rejected
/// rather than queued. [`Kernel::shutdown`] may be called while an execute
/// is in flight and interrupts it.
pub struct Kernel {
    session_id: String,
    working_dir: PathBuf,
    config: KernelConfig,
    shim: PathBuf,
    state: Mutex<KernelState>,
    proc: Mutex<Option<Proc>>,
    pid: AtomicU32,
    next_id: AtomicI64,
    shutting_down: AtomicBool,
    restarts: AtomicU32,
}

impl std::fmt::Debug for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Kernel")
            .field("session_id", &self.session_id)
            .field("working_dir", &self.working_dir)
            .field("state", &self.state())
            .finish()
    }
}

impl Kernel {
    pub fn start(session_id: &str, working_dir: impl Into<PathBuf>, config: KernelConfig) -> Result<Kernel> {
        let working_dir = working_dir.into();
        if !working_dir.is_dir() {
            return Err(Error::KernelStart(format!("working dir {} does not exist", working_dir.display())));
        }
        let shim = match &config.shim_path {
            Some(p) => p.clone(),
            None => materialize_shim().map_err(|e| Error::KernelStart(format!("cannot write shim: {e}")))?,
        };
        let kernel = Kernel {
            session_id: session_id.to_string(),
            working_dir,
            config,
            shim,
            state: Mutex::new(KernelState::Starting),
            proc: Mutex::new(None),
            pid: AtomicU32::new(0),
            next_id: AtomicI64::new(1),
            shutting_down: AtomicBool::new(false),
            restarts: AtomicU32::new(0),
        };
        let proc = kernel.spawn_ready()?;
        *kernel.proc.lock() = Some(proc);
        *kernel.state.lock() = KernelState::Ready;
        Ok(kernel)
    }

    fn spawn_ready(&self) -> Result<Proc> {
        let mut proc = Proc::spawn(&self.config.python, &self.shim, &self.working_dir, &self.session_id)?;
        if let Err(e) = proc.handshake(self.config.handshake_timeout) {
            proc.kill();
            return Err(e);
        }
        self.pid.store(proc.pid(), Ordering::SeqCst);
        Ok(proc)
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn working_dir(&self) -> &Path {
        &self.working_dir
    }

    pub fn state(&self) -> KernelState {
        *self.state.lock()
    }

    /// Number of restarts after timeouts, crashes or protocol faults.
    /// Execute requests sent to the shim so far.
    pub fn execution_count(&self) -> u64 {
        (self.next_id.load(Ordering::SeqCst) - 1) as u64
    }

    pub fn restart_count(&self) -> u32 {
        self.restarts.load(Ordering::SeqCst)
    }

    fn restart(&self, slot: &mut Option<Proc>) -> Result<()> {
        if let Some(mut old) = slot.take() {
            old.kill();
        }
        self.restarts.fetch_add(1, Ordering::SeqCst);
        warn!(session = %self.session_id, "restarting kernel");
        match self.spawn_ready() {
            Ok(p) => {
                *slot = Some(p);
                Ok(())
            }
            Err(e) => Err(Error::Kernel(format!("kernel could not be restarted: {e}"))),
        }
    }

    fn failure(&self, traceback: String, started: Instant, restarted: bool) -> ExecuteResult {
        ExecuteResult {
            status: ExecStatus::Error,
            stdout: String::new(),
            stderr: String::new(),
            traceback: Some(traceback),
            wall_time: started.elapsed(),
            new_artifacts: Vec::new(),
            kernel_restarted: restarted,
        }
    }

    /// Runs `code` in the persistent namespace.
    pub fn execute(&self, code: &str, timeout: Duration) -> Result<ExecuteResult> {
        {
            let mut state = self.state.lock();
            match *state {
                KernelState::Ready => *state = KernelState::Busy,
                other => return Err(Error::Precondition(format!("kernel is {other:?}, not ready"))),
            }
        }
        let mut slot = self.proc.lock();
        let outcome = self.execute_locked(&mut slot, code, timeout);
        let dead = slot.is_none() || self.shutting_down.load(Ordering::SeqCst);
        *self.state.lock() = if dead { KernelState::Dead } else { KernelState::Ready };
        outcome
    }

    fn execute_locked(&self, slot: &mut Option<Proc>, code: &str, timeout: Duration) -> Result<ExecuteResult> {
        let started = Instant::now();
        let id = self.next_id.fetch_add(1, Ordering::SeqCst);
        let line = ShimMessage::Execute { id, code: code.to_string() }.to_line();
        let proc = slot.as_mut().ok_or_else(|| Error::Kernel("kernel process missing".into()))?;
        let wrote = proc
            .stdin
            .as_mut()
            .map(|stdin| stdin.write_all(line.as_bytes()).and_then(|()| stdin.flush()))
            .unwrap_or_else(|| Err(std::io::ErrorKind::BrokenPipe.into()));

        let received = match wrote {
            Ok(()) => proc.lines.recv_timeout(timeout),
            Err(_) => Err(RecvTimeoutError::Disconnected),
        };
        match received {
            Ok(line) => match ShimMessage::parse(&line) {
                Ok(ShimMessage::Result { id: got, status, stdout, stderr, traceback, new_files }) if got == id => {
                    let limit = self.config.output_limit;
                    let status = match status {
                        WireStatus::Success => ExecStatus::Success,
                        WireStatus::Error => ExecStatus::Error,
                    };
                    let traceback = match status {
                        ExecStatus::Error => Some(traceback.unwrap_or_else(|| "error (no traceback)".into())),
                        ExecStatus::Success => None,
                    };
                    Ok(ExecuteResult {
                        status,
                        stdout: truncate_output(stdout, limit),
                        stderr: truncate_output(stderr, limit),
                        traceback,
                        wall_time: started.elapsed(),
                        new_artifacts: new_files.iter().map(|f| Artifact::new(&self.working_dir, f)).collect(),
                        kernel_restarted: false,
                    })
                }
                other => {
                    let detail = match other {
                        Ok(msg) => format!("unexpected message for request {id}: {msg:?}"),
                        Err(e) => format!("unparseable line {:?}: {e}", truncate_output(line, 200)),
                    };
                    self.restart(slot)?;
                    Err(Error::KernelProtocol(detail))
                }
            },
            Err(RecvTimeoutError::Timeout) => {
                if let Some(mut p) = slot.take() {
                    p.kill();
                }
                let mut result = self.failure(
                    format!("{TIMEOUT_TRACEBACK}: execution exceeded {:.1}s; the kernel was restarted and its state reset", timeout.as_secs_f64()),
                    started,
                    true,
                );
                self.restart(slot)?;
                result.kernel_restarted = true;
                Ok(result)
            }
            Err(RecvTimeoutError::Disconnected) => {
                if let Some(mut p) = slot.take() {
                    p.kill();
                }
                if self.shutting_down.load(Ordering::SeqCst) {
                    return Err(Error::Kernel("kernel shut down during execution".into()));
                }
                let result = self.failure(
                    "KernelDied: the kernel process exited during execution; it was restarted and its state reset".into(),
                    started,
                    true,
                );
                self.restart(slot)?;
                Ok(result)
            }
        }
    }

    /// Terminates the shim within the configured shutdown budget. Idempotent.
    pub fn shutdown(&self) {
        if self.shutting_down.swap(true, Ordering::SeqCst) && self.state() == KernelState::Dead {
            return;
        }
        let budget = self.config.shutdown_timeout;
        let mut slot = match self.proc.try_lock() {
            Some(guard) => guard,
            None => {
                // Busy: interrupt the running cell, then escalate.
                let pid = self.pid.load(Ordering::SeqCst);
                signal(pid, Signal::Interrupt);
                match self.proc.try_lock_for(budget.mul_f64(0.3)) {
                    Some(guard) => guard,
                    None => {
                        signal(pid, Signal::Term);
                        match self.proc.try_lock_for(budget.mul_f64(0.2)) {
                            Some(guard) => guard,
                            None => {
                                #[cfg(unix)]
                                // SAFETY: kill(2) has no memory-safety preconditions.
                                unsafe {
                                    libc::kill(pid as libc::pid_t, libc::SIGKILL);
                                }
                                self.proc.lock()
                            }
                        }
                    }
                }
            }
        };
        if let Some(mut p) = slot.take() {
            p.terminate(budget.mul_f64(0.5));
        }
        *self.state.lock() = KernelState::Dead;
    }
}

impl Drop for Kernel {
    fn drop(&mut self) {
        if let Some(mut p) = self.proc.get_mut().take() {
            p.kill();
        }
    }
}
