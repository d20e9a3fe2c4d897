use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use super::wire::{PredictRequest, PredictResponse};
use super::{with_retries, BlackBox, Probe};
use crate::error::{contract, BlackBoxError, Result};

struct Channel {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl Drop for Channel {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// External classifier speaking the line protocol on stdin/stdout.
///
/// The process is started once and reused; if a request fails at the
/// transport level the process is restarted before the next attempt.
/// Calls are serialized.
pub struct SubprocessBlackBox {
    program: String,
    args: Vec<String>,
    retries: usize,
    state: Mutex<State>,
}

struct State {
    channel: Option<Channel>,
    next_id: u64,
}

impl SubprocessBlackBox {
    /// Splits `cmdline` on whitespace into program and arguments and
    /// launches it.
    pub fn spawn(cmdline: &str, retries: usize) -> Result<Self> {
        let mut parts = cmdline.split_whitespace().map(str::to_owned);
        let Some(program) = parts.next() else {
            return contract("subprocess command line is empty");
        };
        let bb = Self {
            program,
            args: parts.collect(),
            retries,
            state: Mutex::new(State {
                channel: None,
                next_id: 0,
            }),
        };
        let channel = bb.launch().map_err(crate::Error::BlackBox)?;
        bb.state.lock().expect("fresh mutex").channel = Some(channel);
        Ok(bb)
    }

    fn launch(&self) -> Result<Channel, BlackBoxError> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| transport(format!("cannot start `{}`: {e}", self.program)))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(Channel { child, stdin, stdout })
    }

    fn exchange(channel: &mut Channel, request: &PredictRequest) -> Result<Vec<f64>, BlackBoxError> {
        let mut line = serde_json::to_vec(request).map_err(|e| transport(e.to_string()))?;
        line.push(b'\n');
        channel
            .stdin
            .write_all(&line)
            .and_then(|()| channel.stdin.flush())
            .map_err(|e| transport(format!("write to classifier failed: {e}")))?;
        let mut reply = String::new();
        let n = channel
            .stdout
            .read_line(&mut reply)
            .map_err(|e| transport(format!("read from classifier failed: {e}")))?;
        if n == 0 {
            return Err(transport("classifier closed its output".into()));
        }
        let response: PredictResponse = serde_json::from_str(&reply).map_err(|e| BlackBoxError::Malformed {
            batch: 0,
            message: format!("{e}: {}", reply.trim_end()),
        })?;
        if response.id != Some(request.id) {
            return Err(BlackBoxError::Malformed {
                batch: 0,
                message: format!("response id {:?} does not match request id {}", response.id, request.id),
            });
        }
        Ok(response.predictions)
    }
}

fn transport(message: String) -> BlackBoxError {
    BlackBoxError::Transport { batch: 0, message }
}

impl BlackBox for SubprocessBlackBox {
    fn predict(&self, batch: &[Probe<'_>]) -> Result<Vec<f64>, BlackBoxError> {
        let mut state = self
            .state
            .lock()
            .map_err(|_| transport("classifier channel poisoned".into()))?;
        let id = state.next_id;
        state.next_id += 1;
        let request = PredictRequest::from_instances(id, batch.iter().map(|p| p.instance))
            .map_err(|e| BlackBoxError::Unsupported(e.to_string()))?;
        with_retries(self.retries, |_| {
            if state.channel.is_none() {
                state.channel = Some(self.launch()?);
            }
            let channel = state.channel.as_mut().expect("channel present");
            let result = Self::exchange(channel, &request);
            if result.as_ref().is_err_and(BlackBoxError::is_transient) {
                state.channel = None;
            }
            result
        })
    }

    fn describe(&self) -> String {
        format!("subprocess:{} {}", self.program, self.args.join(" "))
    }
}
