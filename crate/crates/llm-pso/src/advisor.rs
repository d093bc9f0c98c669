//! Networked and file-backed advisors, plus the JSON-lines audit log.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use llm_pso_core::{AdvisorBackend, AdvisorError, AdvisorInfo, ScriptedAdvisor, SwarmSnapshot};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};

pub const API_KEY_ENV: &str = "ADVISOR_API_KEY";
pub const DEFAULT_TEMPERATURE: f64 = 0.7;
pub const DEFAULT_MODEL: &str = "gpt-3.5-turbo";

/// OpenAI-style chat-completion client: `POST <base>/v1/chat/completions`.
pub struct HttpAdvisor {
    url: String,
    model: String,
    temperature: f64,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpAdvisor {
    /// The API key is read from `ADVISOR_API_KEY` when set.
    pub fn new(base: &str, model: &str, temperature: f64, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpAdvisor {
            url: format!("{}/v1/chat/completions", base.trim_end_matches('/')),
            model: model.to_string(),
            temperature,
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            agent,
        }
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    pub fn request_body(&self, prompt: &str) -> Value {
        json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
        })
    }
}

/// Pull `choices[0].message.content` out of a chat-completion body.
pub fn completion_content(raw: &str) -> std::result::Result<String, AdvisorError> {
    let protocol = |message: &str| AdvisorError::Protocol {
        message: message.to_string(),
        raw: raw.to_string(),
    };
    let value: Value = serde_json::from_str(raw).map_err(|_| protocol("body is not JSON"))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| protocol("missing choices[0].message.content"))
}

impl AdvisorBackend for HttpAdvisor {
    fn info(&self) -> AdvisorInfo {
        AdvisorInfo {
            backend: "http".to_string(),
            model: Some(self.model.clone()),
            temperature: Some(self.temperature),
        }
    }

    fn complete(&mut self, prompt: &str, _snapshot: &SwarmSnapshot) -> std::result::Result<String, AdvisorError> {
        let mut request = self.agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", format!("Bearer {key}"));
        }
        let body = self.request_body(prompt).to_string();
        let mut response = request
            .send(body.as_str())
            .map_err(|e| AdvisorError::Transport(format!("POST {}: {e}", self.url)))?;
        let status = response.status();
        let raw = response
            .body_mut()
            .read_to_string()
            .map_err(|e| AdvisorError::Transport(format!("reading body from {}: {e}", self.url)))?;
        if !status.is_success() {
            return Err(AdvisorError::Transport(format!("{} answered {status}: {raw}", self.url)));
        }
        completion_content(&raw)
    }
}

/// Read a transcript: one response body per line, consumed in order.
///
/// A line that is a JSON string literal is decoded, which lets a single
/// line carry a multi-line body. Blank lines are skipped.
pub fn load_transcript(path: &Path) -> Result<ScriptedAdvisor> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut bodies = Vec::new();
    for line in text.lines() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if line.starts_with('"') {
            if let Ok(decoded) = serde_json::from_str::<String>(line) {
                bodies.push(decoded);
                continue;
            }
        }
        bodies.push(line.to_string());
    }
    Ok(ScriptedAdvisor::new(bodies))
}

#[derive(Debug, Serialize)]
struct AuditEntry<'a> {
    run: &'a str,
    call: usize,
    backend: &'a str,
    prompt: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    response: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

/// Append-only JSON-lines file shared by every run of an experiment.
#[derive(Debug, Clone)]
pub struct AuditLog {
    path: PathBuf,
    file: Arc<Mutex<File>>,
}

impl AuditLog {
    pub fn open(path: &Path) -> Result<Self> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(AuditLog {
            path: path.to_path_buf(),
            file: Arc::new(Mutex::new(file)),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn append(&self, entry: &AuditEntry<'_>) {
        let mut line = serde_json::to_string(entry).expect("audit entry serializes");
        line.push('\n');
        let mut file = self.file.lock().unwrap_or_else(|p| p.into_inner());
        if let Err(e) = file.write_all(line.as_bytes()) {
            log::error!("audit log {}: {e}", self.path.display());
        }
    }
}

/// Backend wrapper that records every prompt and response.
pub struct Audited<B> {
    inner: B,
    log: AuditLog,
    run: String,
    calls: usize,
}

impl<B> Audited<B> {
    pub fn new(inner: B, log: AuditLog, run: impl Into<String>) -> Self {
        Audited {
            inner,
            log,
            run: run.into(),
            calls: 0,
        }
    }

    pub fn into_inner(self) -> B {
        self.inner
    }
}

impl<B: AdvisorBackend> AdvisorBackend for Audited<B> {
    fn info(&self) -> AdvisorInfo {
        self.inner.info()
    }

    fn complete(&mut self, prompt: &str, snapshot: &SwarmSnapshot) -> std::result::Result<String, AdvisorError> {
        let result = self.inner.complete(prompt, snapshot);
        let backend = self.inner.info().backend;
        self.log.append(&AuditEntry {
            run: &self.run,
            call: self.calls,
            backend: &backend,
            prompt,
            response: result.as_ref().ok().map(String::as_str),
            error: result.as_ref().err().map(ToString::to_string),
        });
        self.calls += 1;
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extracts_content() {
        let raw = r#"{"choices":[{"message":{"role":"assistant","content":"120, 3, 1, 0"}}]}"#;
        assert_eq!(completion_content(raw).unwrap(), "120, 3, 1, 0");
    }

    #[test]
    fn malformed_envelope_is_protocol_error() {
        for raw in ["{}", "nope", r#"{"choices":[]}"#, r#"{"choices":[{"message":{"content":7}}]}"#] {
            assert!(matches!(completion_content(raw), Err(AdvisorError::Protocol { .. })), "{raw}");
        }
    }

    #[test]
    fn request_body_shape() {
        let a = HttpAdvisor::new("http://localhost:1/", "m", 0.7, Duration::from_secs(1));
        assert_eq!(a.url(), "http://localhost:1/v1/chat/completions");
        let body = a.request_body("hi");
        assert_eq!(body["model"], "m");
        assert_eq!(body["messages"][0]["role"], "user");
        assert_eq!(body["messages"][0]["content"], "hi");
        assert_eq!(body["temperature"], 0.7);
    }

    #[test]
    fn transcript_lines_and_json_strings() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.txt");
        std::fs::write(&path, "120, 3, 1, 0\n\n\"a\\nb\"\n").unwrap();
        let s = load_transcript(&path).unwrap();
        assert_eq!(s.remaining(), 2);
    }

    #[test]
    fn unreachable_server_is_transport_error() {
        let mut a = HttpAdvisor::new("http://127.0.0.1:9", "m", 0.7, Duration::from_millis(500));
        let snap = SwarmSnapshot::new(
            llm_pso_core::SearchSpace::neurons_layers(),
            vec![llm_pso_core::prompt::ParticleRecord {
                position: vec![120.0, 3.0],
                velocity: vec![0.0, 0.0],
                cost: 0.13,
            }],
        )
        .unwrap();
        assert!(matches!(a.complete("p", &snap), Err(AdvisorError::Transport(_))));
    }
}
