//! Out-of-process objectives speaking newline-delimited JSON.
//!
//! Request: `{"id": 7, "candidate": {"neurons": 120, "layers": 3}}`.
//! Reply: `{"id": 7, "cost": 0.13}`. A reply carrying `accuracy` instead of
//! `cost` is turned into `1 - accuracy`.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use llm_pso_core::{Objective, ObjectiveError, SearchSpace};
use serde::{Deserialize, Serialize};
use serde_json::{Number, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExternalConfig {
    pub timeout_ms: u64,
    /// Extra attempts after a timeout or transport failure.
    pub retries: usize,
    /// Allow concurrent requests against the endpoint.
    pub reentrant: bool,
}

impl Default for ExternalConfig {
    fn default() -> Self {
        ExternalConfig {
            timeout_ms: 30_000,
            retries: 1,
            reentrant: false,
        }
    }
}

impl ExternalConfig {
    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }
}

/// One answered request.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub candidate: Vec<i64>,
    pub cost: f64,
    pub wall_time: Duration,
}

/// Encode one request line (without the trailing newline).
pub fn encode_request(id: u64, space: &SearchSpace, candidate: &[f64]) -> Result<String, ObjectiveError> {
    if candidate.len() != space.dims() {
        return Err(ObjectiveError::Dimension {
            expected: space.dims(),
            got: candidate.len(),
        });
    }
    let mut fields = Vec::with_capacity(candidate.len());
    for (axis, &x) in space.axes.iter().zip(candidate) {
        let value = if axis.integral {
            Value::from(x.round() as i64)
        } else {
            Number::from_f64(x)
                .map(Value::Number)
                .ok_or(ObjectiveError::NonFinite { value: x })?
        };
        fields.push(format!("{}:{value}", Value::from(axis.name.as_str())));
    }
    Ok(format!("{{\"id\":{id},\"candidate\":{{{}}}}}", fields.join(",")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    pub id: Option<u64>,
    pub cost: f64,
}

fn protocol(message: impl Into<String>, raw: &str) -> ObjectiveError {
    ObjectiveError::Protocol {
        message: message.into(),
        raw: raw.to_string(),
    }
}

/// Decode one reply body. The id is optional here; the caller decides
/// whether it must be present.
pub fn decode_reply(raw: &str) -> Result<Reply, ObjectiveError> {
    let value: Value = serde_json::from_str(raw.trim()).map_err(|e| protocol(format!("invalid JSON: {e}"), raw))?;
    let obj = value.as_object().ok_or_else(|| protocol("reply is not a JSON object", raw))?;
    let id = match obj.get("id") {
        None => None,
        Some(v) => Some(v.as_u64().ok_or_else(|| protocol("`id` is not a non-negative integer", raw))?),
    };
    let cost = match (obj.get("cost"), obj.get("accuracy")) {
        (Some(c), _) => c.as_f64().ok_or_else(|| protocol("`cost` is not a number", raw))?,
        (None, Some(a)) => 1.0 - a.as_f64().ok_or_else(|| protocol("`accuracy` is not a number", raw))?,
        (None, None) => return Err(protocol("reply has neither `cost` nor `accuracy`", raw)),
    };
    if !cost.is_finite() {
        return Err(ObjectiveError::NonFinite { value: cost });
    }
    Ok(Reply { id, cost })
}

fn integer_candidate(candidate: &[f64]) -> Vec<i64> {
    candidate.iter().map(|x| x.round() as i64).collect()
}

struct ProcessState {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
    next_id: u64,
}

/// Child process launched through `sh -c`, one request at a time.
pub struct ProcessObjective {
    command: String,
    space: SearchSpace,
    config: ExternalConfig,
    state: Mutex<ProcessState>,
}

impl ProcessObjective {
    pub fn spawn(command: &str, space: SearchSpace, config: ExternalConfig) -> std::io::Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("stdin is piped");
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if line.trim().is_empty() {
                    continue;
                }
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(ProcessObjective {
            command: command.to_string(),
            space,
            config,
            state: Mutex::new(ProcessState {
                child,
                stdin,
                lines: rx,
                next_id: 0,
            }),
        })
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    /// Send one candidate and wait for its reply.
    pub fn request(&self, candidate: &[f64]) -> Result<Evaluation, ObjectiveError> {
        let mut state = self.state.lock().unwrap_or_else(|p| p.into_inner());
        let started = Instant::now();
        let mut last = None;
        for attempt in 0..=self.config.retries {
            let id = state.next_id;
            state.next_id += 1;
            let line = encode_request(id, &self.space, candidate)?;
            if let Err(e) = writeln!(state.stdin, "{line}").and_then(|_| state.stdin.flush()) {
                return Err(ObjectiveError::Evaluation(format!("writing to evaluator `{}`: {e}", self.command)));
            }
            match self.await_reply(&state, id) {
                Ok(cost) => {
                    return Ok(Evaluation {
                        candidate: integer_candidate(candidate),
                        cost,
                        wall_time: started.elapsed(),
                    })
                }
                Err(Wait::Timeout) => {
                    log::warn!("evaluator request {id} timed out (attempt {})", attempt + 1);
                    last = Some(ObjectiveError::Evaluation(format!(
                        "no reply within {} ms after {} attempt(s)",
                        self.config.timeout_ms,
                        attempt + 1
                    )));
                }
                Err(Wait::Failed(e)) => return Err(e),
            }
        }
        Err(last.expect("at least one attempt"))
    }

    fn await_reply(&self, state: &ProcessState, id: u64) -> Result<f64, Wait> {
        let deadline = Instant::now() + self.config.timeout();
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            let raw = match state.lines.recv_timeout(left) {
                Ok(raw) => raw,
                Err(RecvTimeoutError::Timeout) => return Err(Wait::Timeout),
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(Wait::Failed(ObjectiveError::Evaluation(format!(
                        "evaluator `{}` closed its output",
                        self.command
                    ))))
                }
            };
            let reply = decode_reply(&raw).map_err(Wait::Failed)?;
            match reply.id {
                Some(got) if got == id => return Ok(reply.cost),
                // late answer to a request that already timed out
                Some(got) if got < id => continue,
                Some(got) => {
                    return Err(Wait::Failed(protocol(format!("reply id {got} does not match request id {id}"), &raw)))
                }
                None => return Err(Wait::Failed(protocol("reply has no `id`", &raw))),
            }
        }
    }
}

enum Wait {
    Timeout,
    Failed(ObjectiveError),
}

impl Drop for ProcessObjective {
    fn drop(&mut self) {
        let state = self.state.get_mut().unwrap_or_else(|p| p.into_inner());
        let _ = state.child.kill();
        let _ = state.child.wait();
    }
}

impl Objective for ProcessObjective {
    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn evaluate(&self, candidate: &[f64]) -> Result<f64, ObjectiveError> {
        self.request(candidate).map(|e| e.cost)
    }
}

/// `POST <base>/evaluate` with the same request and reply bodies.
pub struct HttpObjective {
    url: String,
    space: SearchSpace,
    config: ExternalConfig,
    agent: ureq::Agent,
    next_id: Mutex<u64>,
}

impl HttpObjective {
    pub fn new(base: &str, space: SearchSpace, config: ExternalConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout()))
            .http_status_as_error(false)
            .build()
            .into();
        HttpObjective {
            url: format!("{}/evaluate", base.trim_end_matches('/')),
            space,
            config,
            agent,
            next_id: Mutex::new(0),
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    pub fn request(&self, candidate: &[f64]) -> Result<Evaluation, ObjectiveError> {
        let started = Instant::now();
        let mut last = None;
        for _ in 0..=self.config.retries {
            let id = {
                let mut next = self.next_id.lock().unwrap_or_else(|p| p.into_inner());
                *next += 1;
                *next - 1
            };
            let body = encode_request(id, &self.space, candidate)?;
            let response = self
                .agent
                .post(&self.url)
                .header("Content-Type", "application/json")
                .send(body.as_str());
            let mut response = match response {
                Ok(r) => r,
                Err(e) => {
                    log::warn!("POST {} failed: {e}", self.url);
                    last = Some(ObjectiveError::Evaluation(format!("POST {}: {e}", self.url)));
                    continue;
                }
            };
            let status = response.status();
            let raw = response
                .body_mut()
                .read_to_string()
                .map_err(|e| ObjectiveError::Evaluation(format!("reading reply from {}: {e}", self.url)))?;
            if !status.is_success() {
                if status.is_server_error() {
                    last = Some(ObjectiveError::Evaluation(format!("{} answered {status}", self.url)));
                    continue;
                }
                return Err(protocol(format!("status {status}"), &raw));
            }
            let reply = decode_reply(&raw)?;
            if let Some(got) = reply.id {
                if got != id {
                    return Err(protocol(format!("reply id {got} does not match request id {id}"), &raw));
                }
            }
            return Ok(Evaluation {
                candidate: integer_candidate(candidate),
                cost: reply.cost,
                wall_time: started.elapsed(),
            });
        }
        Err(last.expect("at least one attempt"))
    }
}

impl Objective for HttpObjective {
    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn evaluate(&self, candidate: &[f64]) -> Result<f64, ObjectiveError> {
        self.request(candidate).map(|e| e.cost)
    }

    fn reentrant(&self) -> bool {
        self.config.reentrant
    }
}

/// Backend for [`external_evaluate`].
pub enum ExternalBackend<'a> {
    Process(&'a ProcessObjective),
    Http(&'a HttpObjective),
}

/// Evaluate one integer candidate against an external backend.
pub fn external_evaluate(candidate: &[i64], backend: ExternalBackend<'_>) -> Result<Evaluation, ObjectiveError> {
    let point: Vec<f64> = candidate.iter().map(|&x| x as f64).collect();
    match backend {
        ExternalBackend::Process(p) => p.request(&point),
        ExternalBackend::Http(h) => h.request(&point),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_keeps_axis_order_and_integers() {
        let line = encode_request(4, &SearchSpace::neurons_layers(), &[150.0, 3.0]).unwrap();
        assert_eq!(line, r#"{"id":4,"candidate":{"neurons":150,"layers":3}}"#);
    }

    #[test]
    fn continuous_axes_stay_real() {
        let line = encode_request(0, &SearchSpace::rastrigin(2), &[0.5, -1.25]).unwrap();
        assert_eq!(line, r#"{"id":0,"candidate":{"x0":0.5,"x1":-1.25}}"#);
    }

    #[test]
    fn decodes_cost_and_accuracy() {
        assert_eq!(decode_reply(r#"{"id": 3, "cost": 0.1343}"#).unwrap(), Reply { id: Some(3), cost: 0.1343 });
        let r = decode_reply(r#"{"id": 1, "accuracy": 0.85}"#).unwrap();
        assert!((r.cost - 0.15).abs() < 1e-12);
    }

    #[test]
    fn string_cost_is_protocol_error_with_payload() {
        match decode_reply(r#"{"cost": "abc"}"#) {
            Err(ObjectiveError::Protocol { raw, .. }) => assert_eq!(raw, r#"{"cost": "abc"}"#),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(decode_reply("not json"), Err(ObjectiveError::Protocol { .. })));
        assert!(matches!(decode_reply(r#"{"id": 1}"#), Err(ObjectiveError::Protocol { .. })));
        assert!(matches!(decode_reply(r#"{"id": -1, "cost": 1}"#), Err(ObjectiveError::Protocol { .. })));
    }

    #[test]
    fn process_round_trip_with_shell_stub() {
        let cmd = r#"while read line; do id=$(echo "$line" | sed 's/.*"id":\([0-9]*\).*/\1/'); echo "{\"id\": $id, \"cost\": 0.25}"; done"#;
        let p = ProcessObjective::spawn(cmd, SearchSpace::neurons_layers(), ExternalConfig::default()).unwrap();
        let e = external_evaluate(&[3, 150], ExternalBackend::Process(&p)).unwrap();
        assert_eq!(e.cost, 0.25);
        assert_eq!(e.candidate, vec![3, 150]);
        assert_eq!(p.evaluate(&[120.0, 3.0]).unwrap(), 0.25);
    }

    #[test]
    fn silent_process_times_out_after_retries() {
        let config = ExternalConfig {
            timeout_ms: 50,
            retries: 2,
            reentrant: false,
        };
        let p = ProcessObjective::spawn("cat > /dev/null", SearchSpace::neurons_layers(), config).unwrap();
        let started = Instant::now();
        let err = p.evaluate(&[120.0, 3.0]).unwrap_err();
        assert!(matches!(err, ObjectiveError::Evaluation(ref m) if m.contains("3 attempt")), "{err}");
        assert!(started.elapsed() >= Duration::from_millis(150));
    }

    #[test]
    fn exited_process_is_evaluation_error() {
        let p = ProcessObjective::spawn("true", SearchSpace::neurons_layers(), ExternalConfig::default()).unwrap();
        assert!(matches!(p.evaluate(&[120.0, 3.0]), Err(ObjectiveError::Evaluation(_))));
    }
}
