//! Start the service on a free port, launch two simulated calls and read the queue.

use std::path::Path;
use std::time::{Duration, Instant};

use calltriage::service::{http, runtime, ServiceConfig};
use serde_json::{json, Value};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let base = Path::new(env!("CARGO_MANIFEST_DIR"));
    let cfg = ServiceConfig::from_toml_str("", std::iter::empty::<(&str, &str)>(), base)?;
    let rt = tokio::runtime::Runtime::new()?;
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))?;
    let addr = listener.local_addr()?;
    let state = rt.block_on(async { runtime::build_state(cfg) })?;
    rt.spawn(http::serve_on(state, listener, None));

    let url = |p: &str| format!("http://{addr}{p}");
    let mut ids = Vec::new();
    for scenario in ["noise", "fire"] {
        let ticket: Value =
            ureq::post(&url("/simulate")).send_json(json!({"scenario": scenario, "seed": 7}))?.body_mut().read_json()?;
        ids.push(ticket["session_id"].as_str().unwrap_or_default().to_string());
    }

    let deadline = Instant::now() + Duration::from_secs(10);
    loop {
        let closed = ids.iter().all(|id| {
            ureq::get(&url(&format!("/calls/{id}")))
                .call()
                .ok()
                .and_then(|mut r| r.body_mut().read_json::<Value>().ok())
                .is_some_and(|v| v["state"] == "closed")
        });
        if closed || Instant::now() > deadline {
            break;
        }
        std::thread::sleep(Duration::from_millis(50));
    }

    let queue: Value = ureq::get(&url("/calls")).call()?.body_mut().read_json()?;
    for e in queue.as_array().into_iter().flatten() {
        println!("{} {} P={:.3}", e["session_id"], e["severity_level"], e["priority"].as_f64().unwrap_or(0.0));
    }
    Ok(())
}

fn main() {
    run_example().expect("service example");
}
