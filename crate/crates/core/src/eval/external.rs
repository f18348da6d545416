//! Evaluation by running an external command, typically a short proxy
//! training job. The last non-empty line of standard output is the metric.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::Duration;

use wait_timeout::ChildExt;

use super::{EvalError, Evaluator};
use crate::record::{Direction, Measurement};
use crate::space::NCode;

pub const PLACEHOLDER: &str = "{ncode}";

#[derive(Debug, Clone)]
pub struct ExternalCommand {
    template: String,
    timeout: Duration,
    workdir: Option<PathBuf>,
    metric: String,
    direction: Direction,
}

impl ExternalCommand {
    pub fn new(
        template: &str,
        timeout: Duration,
        workdir: Option<PathBuf>,
        metric: &str,
        direction: Direction,
    ) -> Self {
        Self {
            template: template.to_string(),
            timeout,
            workdir,
            metric: metric.to_string(),
            direction,
        }
    }

    fn command_line(&self, code: &NCode) -> String {
        self.template.replace(PLACEHOLDER, &code.to_string())
    }
}

fn drain<R: Read + Send + 'static>(stream: Option<R>) -> std::thread::JoinHandle<String> {
    std::thread::spawn(move || {
        let mut buf = String::new();
        if let Some(mut s) = stream {
            let _ = s.read_to_string(&mut buf);
        }
        buf
    })
}

impl Evaluator for ExternalCommand {
    fn measure(&self, code: &NCode) -> Result<Measurement, EvalError> {
        let mut cmd = Command::new("sh");
        cmd.arg("-c")
            .arg(self.command_line(code))
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        if let Some(dir) = &self.workdir {
            cmd.current_dir(dir);
        }
        let spawn_err = |source| EvalError::Spawn {
            code: code.clone(),
            source,
        };
        let mut child = cmd.spawn().map_err(spawn_err)?;
        let stdout = drain(child.stdout.take());
        let stderr = drain(child.stderr.take());

        let status = match child.wait_timeout(self.timeout).map_err(spawn_err)? {
            Some(status) => status,
            None => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(EvalError::Timeout {
                    code: code.clone(),
                    secs: self.timeout.as_secs_f64(),
                });
            }
        };
        let out = stdout.join().unwrap_or_default();
        let err = stderr.join().unwrap_or_default();
        if !status.success() {
            let tail: Vec<&str> = err.lines().rev().take(5).collect();
            return Err(EvalError::NonZeroExit {
                code: code.clone(),
                status: status.to_string(),
                stderr: tail.into_iter().rev().collect::<Vec<_>>().join("\n"),
            });
        }
        let last = out.lines().map(str::trim).rfind(|l| !l.is_empty()).unwrap_or("");
        let raw = last
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| EvalError::Unparseable {
                code: code.clone(),
                line: last.to_string(),
            })?;
        Ok(Measurement::new(
            raw,
            self.direction,
            BTreeMap::from([(self.metric.clone(), raw)]),
        )?)
    }

    fn direction(&self) -> Direction {
        self.direction
    }

    fn metric_name(&self) -> &str {
        &self.metric
    }

    fn is_deterministic(&self) -> bool {
        false
    }
}

#[cfg(all(test, unix))]
mod tests {
    use super::*;

    fn run(template: &str, timeout_ms: u64) -> Result<Measurement, EvalError> {
        ExternalCommand::new(
            template,
            Duration::from_millis(timeout_ms),
            None,
            "acc",
            Direction::Maximize,
        )
        .measure(&NCode::from_digits(vec![3, 3, 3, 1, 2, 3]))
    }

    #[test]
    fn parses_last_stdout_line() {
        let m = run("echo training {ncode}; echo 91.45; echo", 5_000).unwrap();
        assert_eq!(m.raw, 91.45);
    }

    #[test]
    fn substitutes_code() {
        let m = run("echo {ncode}", 5_000).unwrap();
        assert_eq!(m.raw, 333123.0);
    }

    #[test]
    fn failures_are_distinct() {
        assert!(
            matches!(run("echo oops >&2; exit 3", 5_000), Err(EvalError::NonZeroExit { ref stderr, .. }) if stderr == "oops")
        );
        assert!(matches!(
            run("echo not-a-number", 5_000),
            Err(EvalError::Unparseable { .. })
        ));
        assert!(matches!(run("sleep 5", 100), Err(EvalError::Timeout { .. })));
    }

    #[test]
    fn honours_workdir() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("score.txt"), "0.75\n").unwrap();
        let cmd = ExternalCommand::new(
            "cat score.txt",
            Duration::from_secs(5),
            Some(dir.path().to_path_buf()),
            "acc",
            Direction::Maximize,
        );
        assert_eq!(cmd.measure(&NCode::from_digits(vec![0])).unwrap().raw, 0.75);
    }
}
