//! Low-level process execution: spawn, feed stdin, drain output with caps,
//! and kill the whole process group on deadline or overflow.

use std::io::Read;
use std::os::unix::process::CommandExt;
use std::path::Path;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use super::SandboxError;

/// Knobs for one subprocess invocation.
pub(super) struct RunSpec {
    pub wall: Duration,
    /// Address-space rlimit in bytes; `None` leaves memory unbounded.
    pub memory_rlimit: Option<u64>,
    /// Per-stream cap on captured output bytes.
    pub output_cap: usize,
    /// RLIMIT_FSIZE in bytes, bounding files the program writes itself.
    pub file_size_cap: Option<u64>,
}

/// Raw subprocess outcome, before status classification.
pub(super) struct RawExec {
    pub exit_ok: bool,
    pub timed_out: bool,
    pub overflowed: bool,
    pub stdout: Vec<u8>,
    pub stderr: Vec<u8>,
    pub wall_ms: u64,
}

/// Read a stream to EOF, keeping at most `cap` bytes. Producing more than
/// `cap` raises the shared overflow flag (which the supervisor answers by
/// killing the process group); the excess is drained and discarded so the
/// writer never blocks on a full pipe.
fn capped_drain(
    mut reader: impl Read + Send + 'static,
    cap: usize,
    overflow: Arc<AtomicBool>,
) -> thread::JoinHandle<Vec<u8>> {
    thread::spawn(move || {
        let mut kept = Vec::new();
        let mut total = 0usize;
        let mut chunk = [0u8; 16 * 1024];
        loop {
            match reader.read(&mut chunk) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    total += n;
                    if kept.len() < cap {
                        let take = n.min(cap - kept.len());
                        kept.extend_from_slice(&chunk[..take]);
                    }
                    if total > cap {
                        overflow.store(true, Ordering::SeqCst);
                    }
                }
            }
        }
        kept
    })
}

fn kill_group(pid: u32) {
    // setsid in pre_exec made the child a process-group leader, so the
    // negative pid sweeps the whole group, grandchildren included.
    unsafe {
        libc::kill(-(pid as i32), libc::SIGKILL);
    }
}

/// Run `argv` to completion (or death) under `spec`, with `stdin_bytes` on
/// standard input and `cwd` as working directory.
pub(super) fn run_command(
    argv: &[String],
    stdin_bytes: &[u8],
    spec: &RunSpec,
    cwd: &Path,
) -> Result<RawExec, SandboxError> {
    let (program, args) = argv
        .split_first()
        .ok_or_else(|| SandboxError::InvalidLimits("empty command".into()))?;
    let mut command = Command::new(program);
    command
        .args(args)
        .current_dir(cwd)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());

    let memory_rlimit = spec.memory_rlimit;
    let file_size_cap = spec.file_size_cap;
    unsafe {
        command.pre_exec(move || {
            // Own session and process group: one SIGKILL reaches everything
            // the program spawns.
            libc::setsid();
            // Best-effort network denial; failure is ignored when
            // unprivileged.
            libc::unshare(libc::CLONE_NEWNET);
            if let Some(bytes) = memory_rlimit {
                let lim = libc::rlimit {
                    rlim_cur: bytes,
                    rlim_max: bytes,
                };
                libc::setrlimit(libc::RLIMIT_AS, &lim);
            }
            if let Some(bytes) = file_size_cap {
                let lim = libc::rlimit {
                    rlim_cur: bytes,
                    rlim_max: bytes,
                };
                libc::setrlimit(libc::RLIMIT_FSIZE, &lim);
            }
            Ok(())
        });
    }

    let start = Instant::now();
    let mut child = command
        .spawn()
        .map_err(|e| SandboxError::io(format!("spawning {program:?}"), e))?;
    let pid = child.id();

    // Feed stdin from its own thread; a program that never reads (EPIPE)
    // must not wedge the supervisor.
    let stdin_handle = child.stdin.take().map(|mut pipe| {
        let payload = stdin_bytes.to_vec();
        thread::spawn(move || {
            use std::io::Write;
            let _ = pipe.write_all(&payload);
        })
    });

    let overflow = Arc::new(AtomicBool::new(false));
    let stdout_handle = capped_drain(
        child.stdout.take().expect("stdout piped"),
        spec.output_cap,
        Arc::clone(&overflow),
    );
    let stderr_handle = capped_drain(
        child.stderr.take().expect("stderr piped"),
        spec.output_cap,
        Arc::clone(&overflow),
    );

    let deadline = start + spec.wall;
    let mut timed_out = false;
    let mut killed_for_overflow = false;
    let status = loop {
        if let Some(status) = child
            .try_wait()
            .map_err(|e| SandboxError::io("waiting for child", e))?
        {
            break status;
        }
        if overflow.load(Ordering::SeqCst) && !killed_for_overflow {
            killed_for_overflow = true;
            kill_group(pid);
        } else if Instant::now() >= deadline && !timed_out {
            timed_out = true;
            kill_group(pid);
        }
        thread::sleep(Duration::from_millis(2));
    };
    // Sweep stragglers that would hold the output pipes open forever.
    kill_group(pid);

    let stdout = stdout_handle.join().expect("stdout drain panicked");
    let stderr = stderr_handle.join().expect("stderr drain panicked");
    if let Some(handle) = stdin_handle {
        let _ = handle.join();
    }

    Ok(RawExec {
        exit_ok: status.success() && !timed_out && !killed_for_overflow,
        timed_out,
        overflowed: overflow.load(Ordering::SeqCst),
        stdout,
        stderr,
        wall_ms: start.elapsed().as_millis() as u64,
    })
}
