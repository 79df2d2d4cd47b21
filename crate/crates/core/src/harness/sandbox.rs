//! Running candidate programs against test suites in a separate Python
//! process, with a wall-clock limit, an output cap and rlimits.

use std::io::{Read, Write};
use std::os::unix::process::CommandExt;
use std::process::{Child, Command, ExitStatus, Stdio};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cf_gen::{TestKind, TestSuite};

const DRIVER: &str = include_str!("driver.py");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    Timeout,
    RuntimeError,
    SandboxError,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Timeout => "timeout",
            Status::RuntimeError => "runtime-error",
            Status::SandboxError => "sandbox-error",
        }
    }

    fn parse(s: &str) -> Status {
        match s {
            "pass" => Status::Pass,
            "fail" => Status::Fail,
            "timeout" => Status::Timeout,
            "runtime-error" => Status::RuntimeError,
            _ => Status::SandboxError,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseOutcome {
    pub status: Status,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub status: Status,
    pub per_case: Vec<CaseOutcome>,
    /// Not serialized: timing would make record files nondeterministic.
    #[serde(skip)]
    pub wall_time_ms: u64,
    /// Captured standard output (concatenated over io cases).
    #[serde(skip)]
    pub stdout: String,
}

impl ExecutionResult {
    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    fn sandbox_error(detail: impl Into<String>) -> Self {
        ExecutionResult {
            status: Status::SandboxError,
            per_case: vec![CaseOutcome {
                status: Status::SandboxError,
                detail: detail.into(),
            }],
            wall_time_ms: 0,
            stdout: String::new(),
        }
    }
}

#[derive(Debug, Error)]
pub enum SandboxError {
    #[error("sandbox setup failed: {0}")]
    Setup(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SandboxPolicy {
    pub python: String,
    /// Overrides the suite's own limit when set.
    pub time_limit_s: Option<f64>,
    pub memory_mb: u64,
    pub output_cap: usize,
    pub workers: usize,
}

impl Default for SandboxPolicy {
    fn default() -> Self {
        SandboxPolicy {
            python: "python3".into(),
            time_limit_s: None,
            memory_mb: 2048,
            output_cap: 1 << 20,
            workers: 8,
        }
    }
}

/// Counting semaphore bounding concurrent interpreter processes.
#[derive(Debug)]
struct Permits {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Permits);

impl Permits {
    fn acquire(&self) -> Permit<'_> {
        let mut n = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *n == 0 {
            n = self.cv.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

/// Shared executor: clones share the same concurrency limit.
#[derive(Debug, Clone)]
pub struct Sandbox {
    pub policy: SandboxPolicy,
    permits: Arc<Permits>,
}

impl Sandbox {
    pub fn new(policy: SandboxPolicy) -> Self {
        let n = policy.workers.max(1);
        Sandbox {
            policy,
            permits: Arc::new(Permits {
                free: Mutex::new(n),
                cv: Condvar::new(),
            }),
        }
    }

    /// Run `program` against `suite`. Infrastructure failures are reported
    /// as [`Status::SandboxError`], never as a candidate failure.
    pub fn run_tests(&self, program: &str, suite: &TestSuite) -> ExecutionResult {
        let limit = Duration::from_secs_f64(self.policy.time_limit_s.unwrap_or(suite.time_limit_s).max(0.01));
        let started = Instant::now();
        let mut res = match &suite.kind {
            TestKind::Assert { setup, cases } => {
                let payload = serde_json::json!({
                    "mode": "assert",
                    "program": program,
                    "setup": setup,
                    "cases": cases,
                });
                match self.run_once(&payload, "", limit) {
                    Err(e) => ExecutionResult::sandbox_error(e.to_string()),
                    Ok(run) => assert_result(run, cases.len()),
                }
            }
            TestKind::Io { cases } => {
                let payload = serde_json::json!({"mode": "io", "program": program});
                let mut per_case = Vec::new();
                let mut stdout = String::new();
                for c in cases {
                    let outcome = match self.run_once(&payload, &c.input, limit) {
                        Err(e) => CaseOutcome {
                            status: Status::SandboxError,
                            detail: e.to_string(),
                        },
                        Ok(run) => {
                            stdout.push_str(&run.stdout);
                            io_outcome(&run, &c.output)
                        }
                    };
                    let stop = outcome.status != Status::Pass;
                    per_case.push(outcome);
                    // Later cases cannot change a failing verdict.
                    if stop {
                        break;
                    }
                }
                ExecutionResult {
                    status: overall(&per_case),
                    per_case,
                    wall_time_ms: 0,
                    stdout,
                }
            }
        };
        res.wall_time_ms = started.elapsed().as_millis() as u64;
        res
    }

    fn run_once(&self, payload: &serde_json::Value, stdin: &str, limit: Duration) -> Result<RawRun, SandboxError> {
        let _permit = self.permits.acquire();
        let dir = tempfile::Builder::new().prefix("cfprobe-").tempdir()?;
        let nonce: u64 = rand::thread_rng().gen();
        let result_name = format!("result-{nonce:016x}.json");
        std::fs::write(dir.path().join("driver.py"), DRIVER)?;
        std::fs::write(dir.path().join("payload.json"), serde_json::to_vec(payload).map_err(std::io::Error::other)?)?;
        let mut cmd = Command::new(&self.policy.python);
        cmd.arg("-s")
            .arg("-B")
            .arg("driver.py")
            .arg("payload.json")
            .arg(&result_name)
            .current_dir(dir.path())
            .env_clear()
            .env("PATH", std::env::var_os("PATH").unwrap_or_default())
            .env("HOME", dir.path())
            .env("PYTHONHASHSEED", "0")
            .env("PYTHONIOENCODING", "utf-8")
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null());
        let mem = self.policy.memory_mb.saturating_mul(1 << 20);
        let fsize = (self.policy.output_cap as u64).max(1 << 20) * 16;
        // SAFETY: only async-signal-safe libc calls between fork and exec.
        unsafe {
            cmd.pre_exec(move || {
                libc::setpgid(0, 0);
                set_limit(libc::RLIMIT_AS, mem);
                set_limit(libc::RLIMIT_FSIZE, fsize);
                set_limit(libc::RLIMIT_CORE, 0);
                Ok(())
            });
        }
        let mut child = cmd.spawn()?;
        let cap = self.policy.output_cap;
        let reader = child.stdout.take().map(|mut out| {
            thread::spawn(move || {
                let mut kept = Vec::new();
                let mut buf = [0u8; 8192];
                loop {
                    match out.read(&mut buf) {
                        Ok(0) | Err(_) => break,
                        Ok(n) => {
                            let room = cap.saturating_sub(kept.len());
                            kept.extend_from_slice(&buf[..n.min(room)]);
                        }
                    }
                }
                kept
            })
        });
        let writer = child.stdin.take().map(|mut inp| {
            let data = stdin.as_bytes().to_vec();
            thread::spawn(move || {
                let _ = inp.write_all(&data);
            })
        });
        let (status, timed_out) = wait_with_limit(&mut child, limit)?;
        if let Some(w) = writer {
            let _ = w.join();
        }
        let stdout = reader.and_then(|r| r.join().ok()).unwrap_or_default();
        let result = std::fs::read(dir.path().join(&result_name)).ok();
        Ok(RawRun {
            timed_out,
            exit: status,
            result: result.and_then(|b| serde_json::from_slice(&b).ok()),
            stdout: String::from_utf8_lossy(&stdout).into_owned(),
        })
    }

    /// Whether the configured interpreter can be started at all.
    pub fn check_interpreter(&self) -> Result<(), SandboxError> {
        let st = Command::new(&self.policy.python)
            .arg("-c")
            .arg("pass")
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .status()?;
        if st.success() {
            Ok(())
        } else {
            Err(SandboxError::Setup(std::io::Error::other("interpreter exited with failure")))
        }
    }
}

fn set_limit(res: libc::__rlimit_resource_t, value: u64) {
    let lim = libc::rlimit {
        rlim_cur: value as libc::rlim_t,
        rlim_max: value as libc::rlim_t,
    };
    // SAFETY: plain syscall on a stack value.
    unsafe {
        libc::setrlimit(res, &lim);
    }
}

fn wait_with_limit(child: &mut Child, limit: Duration) -> Result<(Option<ExitStatus>, bool), SandboxError> {
    let start = Instant::now();
    let pid = child.id() as libc::pid_t;
    let mut sleep = Duration::from_millis(1);
    loop {
        if let Some(st) = child.try_wait()? {
            // Reap anything the candidate left behind in its group.
            // SAFETY: signalling our own child's process group.
            unsafe {
                libc::killpg(pid, libc::SIGKILL);
            }
            return Ok((Some(st), false));
        }
        if start.elapsed() >= limit {
            // SAFETY: as above.
            unsafe {
                libc::killpg(pid, libc::SIGKILL);
            }
            let _ = child.kill();
            let _ = child.wait();
            return Ok((None, true));
        }
        thread::sleep(sleep);
        sleep = (sleep * 2).min(Duration::from_millis(20));
    }
}

struct RawRun {
    timed_out: bool,
    exit: Option<ExitStatus>,
    result: Option<DriverResult>,
    stdout: String,
}

#[derive(Deserialize)]
struct DriverResult {
    program: String,
    #[serde(default)]
    detail: String,
    #[serde(default)]
    cases: Vec<DriverCase>,
}

#[derive(Deserialize)]
struct DriverCase {
    status: String,
    #[serde(default)]
    detail: String,
}

fn overall(cases: &[CaseOutcome]) -> Status {
    cases.iter().map(|c| c.status).find(|s| *s != Status::Pass).unwrap_or(Status::Pass)
}

fn assert_result(run: RawRun, n_cases: usize) -> ExecutionResult {
    let stdout = run.stdout;
    let (status, per_case) = if run.timed_out {
        (
            Status::Timeout,
            vec![CaseOutcome {
                status: Status::Timeout,
                detail: String::new(),
            }],
        )
    } else {
        match run.result {
            None => (
                Status::RuntimeError,
                vec![CaseOutcome {
                    status: Status::RuntimeError,
                    detail: format!("interpreter exited without a result ({:?})", run.exit),
                }],
            ),
            Some(r) if r.program != "pass" => {
                let st = Status::parse(&r.program);
                (st, vec![CaseOutcome { status: st, detail: r.detail }])
            }
            Some(r) => {
                let cases: Vec<CaseOutcome> = r
                    .cases
                    .into_iter()
                    .map(|c| CaseOutcome {
                        status: Status::parse(&c.status),
                        detail: c.detail,
                    })
                    .collect();
                if cases.len() != n_cases {
                    (Status::RuntimeError, cases)
                } else {
                    (overall(&cases), cases)
                }
            }
        }
    };
    ExecutionResult {
        status,
        per_case,
        wall_time_ms: 0,
        stdout,
    }
}

fn io_outcome(run: &RawRun, expected: &str) -> CaseOutcome {
    if run.timed_out {
        return CaseOutcome {
            status: Status::Timeout,
            detail: String::new(),
        };
    }
    match &run.result {
        None => CaseOutcome {
            status: Status::RuntimeError,
            detail: format!("interpreter exited without a result ({:?})", run.exit),
        },
        Some(r) if r.program != "pass" => CaseOutcome {
            status: Status::parse(&r.program),
            detail: r.detail.clone(),
        },
        Some(_) if normalize_output(&run.stdout) == normalize_output(expected) => CaseOutcome {
            status: Status::Pass,
            detail: String::new(),
        },
        Some(_) => CaseOutcome {
            status: Status::Fail,
            detail: "output mismatch".into(),
        },
    }
}

/// Strip trailing whitespace from every line and drop trailing blank lines.
pub fn normalize_output(s: &str) -> String {
    let mut lines: Vec<&str> = s.lines().map(str::trim_end).collect();
    while lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    lines.join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cf_gen::IoCase;

    fn assert_suite(cases: &[&str]) -> TestSuite {
        TestSuite {
            kind: TestKind::Assert {
                setup: String::new(),
                cases: cases.iter().map(|s| s.to_string()).collect(),
            },
            time_limit_s: 5.0,
        }
    }

    fn sandbox() -> Sandbox {
        Sandbox::new(SandboxPolicy {
            workers: 2,
            ..SandboxPolicy::default()
        })
    }

    #[test]
    fn statuses() {
        let sb = sandbox();
        let prog = "def f(x):\n    return x + 1\n";
        assert_eq!(sb.run_tests(prog, &assert_suite(&["assert f(1) == 2"])).status, Status::Pass);
        let r = sb.run_tests(prog, &assert_suite(&["assert f(1) == 2", "assert f(1) == 3"]));
        assert_eq!(r.status, Status::Fail);
        assert_eq!(r.per_case.len(), 2);
        assert_eq!(sb.run_tests(prog, &assert_suite(&["assert g(1)"])).status, Status::RuntimeError);
        assert_eq!(sb.run_tests("def f(:\n", &assert_suite(&["assert True"])).status, Status::RuntimeError);
        let slow = TestSuite {
            time_limit_s: 0.5,
            ..assert_suite(&["f()"])
        };
        let r = sb.run_tests("def f():\n    while True:\n        pass\n", &slow);
        assert_eq!(r.status, Status::Timeout);
    }

    #[test]
    fn io_cases_normalize_trailing_whitespace() {
        let sb = sandbox();
        let suite = TestSuite {
            kind: TestKind::Io {
                cases: vec![IoCase {
                    input: "3\n".into(),
                    output: "1".into(),
                }],
            },
            time_limit_s: 5.0,
        };
        let r = sb.run_tests("n = int(input())\nprint(n - 2)\n", &suite);
        assert_eq!(r.status, Status::Pass, "{r:?}");
        assert_eq!(r.stdout, "1\n");
        let r = sb.run_tests("print(0)\n", &suite);
        assert_eq!(r.status, Status::Fail);
    }

    #[test]
    fn missing_interpreter_is_sandbox_error() {
        let sb = Sandbox::new(SandboxPolicy {
            python: "/nonexistent/python".into(),
            ..SandboxPolicy::default()
        });
        let r = sb.run_tests("x = 1\n", &assert_suite(&["assert x == 1"]));
        assert_eq!(r.status, Status::SandboxError);
    }

    #[test]
    fn writes_outside_are_denied() {
        let sb = sandbox();
        let outside = tempfile::tempdir().unwrap();
        let target = outside.path().join("owned.txt");
        let prog = format!("open({:?}, 'w').write('x')\n", target.to_str().unwrap());
        let r = sb.run_tests(&prog, &assert_suite(&["assert True"]));
        assert_eq!(r.status, Status::RuntimeError);
        assert!(!target.exists());
        let r = sb.run_tests("import os\nos.system('true')\n", &assert_suite(&["assert True"]));
        assert_eq!(r.status, Status::RuntimeError);
        let r = sb.run_tests("open('local.txt', 'w').write('ok')\n", &assert_suite(&["assert open('local.txt').read() == 'ok'"]));
        assert_eq!(r.status, Status::Pass);
    }

    #[test]
    fn output_is_capped() {
        let sb = Sandbox::new(SandboxPolicy {
            output_cap: 1000,
            ..SandboxPolicy::default()
        });
        let r = sb.run_tests("print('x' * 100000)\n", &assert_suite(&["assert True"]));
        assert_eq!(r.status, Status::Pass);
        assert_eq!(r.stdout.len(), 1000);
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_output("1  \n2\t\n\n\n"), "1\n2");
        assert_eq!(normalize_output("1"), normalize_output("1\n"));
    }
}
