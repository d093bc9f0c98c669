#![allow(dead_code)]

use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};

use serde_json::{json, Value};
use tiny_http::{Header, Response, Server};

pub const STUB: &str = env!("CARGO_BIN_EXE_pso-stub-evaluator");
pub const CLI: &str = env!("CARGO_BIN_EXE_llm-pso");

#[derive(Debug, Clone)]
pub struct Recorded {
    pub url: String,
    pub body: String,
    pub authorization: Option<String>,
}

/// Local HTTP server answering every request through `respond`, which gets
/// the request and its 0-based index and returns (status, body).
pub struct StubServer {
    pub base: String,
    pub requests: Arc<Mutex<Vec<Recorded>>>,
    server: Arc<Server>,
    handle: Option<JoinHandle<()>>,
}

impl StubServer {
    pub fn start<F>(respond: F) -> Self
    where
        F: Fn(&Recorded, usize) -> (u16, String) + Send + 'static,
    {
        let server = Arc::new(Server::http("127.0.0.1:0").expect("bind stub server"));
        let port = server.server_addr().to_ip().expect("ip listener").port();
        let requests = Arc::new(Mutex::new(Vec::new()));
        let (srv, log) = (Arc::clone(&server), Arc::clone(&requests));
        let handle = thread::spawn(move || {
            for mut req in srv.incoming_requests() {
                let mut body = String::new();
                let _ = req.as_reader().read_to_string(&mut body);
                let authorization = req
                    .headers()
                    .iter()
                    .find(|h| h.field.equiv("Authorization"))
                    .map(|h| h.value.to_string());
                let rec = Recorded {
                    url: req.url().to_string(),
                    body,
                    authorization,
                };
                let index = {
                    let mut log = log.lock().unwrap();
                    log.push(rec.clone());
                    log.len() - 1
                };
                let (status, text) = respond(&rec, index);
                let header = Header::from_bytes("Content-Type", "application/json").unwrap();
                let _ = req.respond(Response::from_string(text).with_status_code(status).with_header(header));
            }
        });
        StubServer {
            base: format!("http://127.0.0.1:{port}"),
            requests,
            server,
            handle: Some(handle),
        }
    }

    pub fn count(&self) -> usize {
        self.requests.lock().unwrap().len()
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

pub fn chat_completion(content: &str) -> String {
    json!({
        "id": "cmpl-1",
        "object": "chat.completion",
        "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}]
    })
    .to_string()
}

/// Chat endpoint that always answers with `content`.
pub fn canned_chat(content: &'static str) -> StubServer {
    StubServer::start(move |_, _| (200, chat_completion(content)))
}

/// `/evaluate` endpoint scoring the synthetic landscape.
pub fn synthetic_evaluator() -> StubServer {
    StubServer::start(|rec, _| {
        let req: Value = serde_json::from_str(&rec.body).unwrap();
        let layers = req["candidate"]["layers"].as_i64().unwrap();
        let neurons = req["candidate"]["neurons"].as_i64().unwrap();
        let cost = llm_pso_core::synthetic_landscape(layers, neurons).unwrap();
        (200, json!({"id": req["id"], "cost": cost}).to_string())
    })
}

/// Five compliant suggestions, four numbers each.
pub const COMPLIANT: &str = "118, 3, 2, 0, 120, 3, 1, 0, 125, 3, -1, 0, 100, 4, 3, 1, 140, 2, 0.5, 0";
