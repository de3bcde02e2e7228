#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde_json::Value;

use calltriage::service::{http, AppState, Pipeline, ServiceConfig};

pub fn manifest() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
}

pub fn config(toml: &str) -> ServiceConfig {
    ServiceConfig::from_toml_str(toml, std::iter::empty::<(&str, &str)>(), manifest()).expect("test config")
}

/// A service on an ephemeral loopback port. Dropping it stops the runtime.
pub struct TestServer {
    pub addr: SocketAddr,
    pub state: Arc<AppState>,
    agent: ureq::Agent,
    _rt: tokio::runtime::Runtime,
}

impl TestServer {
    pub fn start(cfg: ServiceConfig) -> Self {
        let pipeline = Pipeline::from_config(&cfg).expect("pipeline");
        Self::with_pipeline(cfg, pipeline)
    }

    pub fn with_pipeline(cfg: ServiceConfig, pipeline: Pipeline) -> Self {
        let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build().unwrap();
        let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
        let addr = listener.local_addr().unwrap();
        let state = rt.block_on(async { AppState::new(cfg, pipeline) });
        rt.spawn(http::serve_on(state.clone(), listener, None));
        let agent = ureq::Agent::config_builder().http_status_as_error(false).build().new_agent();
        Self { addr, state, agent, _rt: rt }
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{path}", self.addr)
    }

    pub fn get(&self, path: &str) -> (u16, Value) {
        let mut r = self.agent.get(&self.url(path)).call().unwrap();
        let status = r.status().as_u16();
        (status, r.body_mut().read_json().unwrap_or(Value::Null))
    }

    pub fn post(&self, path: &str, body: &str) -> (u16, Value) {
        let mut r = self.agent.post(&self.url(path)).content_type("application/json").send(body).unwrap();
        let status = r.status().as_u16();
        (status, r.body_mut().read_json().unwrap_or(Value::Null))
    }

    pub fn put(&self, path: &str, body: &str) -> (u16, Value) {
        let mut r = self.agent.put(&self.url(path)).content_type("application/json").send(body).unwrap();
        let status = r.status().as_u16();
        (status, r.body_mut().read_json().unwrap_or(Value::Null))
    }

    pub fn simulate(&self, body: Value) -> String {
        let (status, ticket) = self.post("/simulate", &body.to_string());
        assert_eq!(status, 202, "simulate rejected: {ticket}");
        ticket["session_id"].as_str().unwrap().to_string()
    }

    /// Poll until every listed call reports `closed`.
    pub fn wait_closed(&self, ids: &[String]) {
        let deadline = Instant::now() + Duration::from_secs(20);
        for id in ids {
            loop {
                let (_, v) = self.get(&format!("/calls/{id}"));
                if v["state"] == "closed" {
                    break;
                }
                assert!(Instant::now() < deadline, "{id} never closed: {v}");
                std::thread::sleep(Duration::from_millis(10));
            }
        }
    }

    pub fn ws(&self, path: &str) -> tungstenite::WebSocket<tungstenite::stream::MaybeTlsStream<std::net::TcpStream>> {
        let (socket, _) = tungstenite::connect(format!("ws://{}{path}", self.addr)).expect("ws connect");
        socket
    }
}
