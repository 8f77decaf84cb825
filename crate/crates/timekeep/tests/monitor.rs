use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;

use timekeep::monitor::{Monitor, SnapshotSource};
use timekeep_core::checkpoint::CheckpointPolicy;
use timekeep_core::harness::{Experiment, ExperimentConfig, WorkloadModel};
use timekeep_core::schedule::SIMULATION_TOTAL;

fn get(addr: SocketAddr, path: &str) -> (u16, String) {
    let mut s = TcpStream::connect(addr).unwrap();
    write!(s, "GET {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").unwrap();
    let mut resp = String::new();
    s.read_to_string(&mut resp).unwrap();
    let status = resp.split_whitespace().nth(1).unwrap().parse().unwrap();
    let body = resp
        .split_once("\r\n\r\n")
        .map(|(_, b)| b.to_owned())
        .unwrap_or_default();
    (status, body)
}

fn serving() -> (Monitor, Arc<Mutex<Experiment>>) {
    let model = WorkloadModel::constant(1_000_000, 5_000_000, 100);
    let config = ExperimentConfig::new(model, CheckpointPolicy::fixed_interval(10).unwrap());
    let mut exp = Experiment::new(config).unwrap();
    exp.run_until(30).unwrap();
    let shared = Arc::new(Mutex::new(exp));
    let m = Monitor::bind("127.0.0.1:0", shared.clone() as Arc<dyn SnapshotSource>).unwrap();
    (m, shared)
}

#[test]
fn timers_endpoint() {
    let (m, _exp) = serving();
    let (status, body) = get(m.local_addr(), "/timers");
    assert_eq!(status, 200);
    let doc: serde_json::Value = serde_json::from_str(&body).unwrap();
    let timers = doc["timers"].as_array().unwrap();
    assert!(timers.iter().any(|t| t["name"] == SIMULATION_TOTAL));
    assert!(timers.iter().any(|t| t["name"] == "Total time for CCTK_CHECKPOINT"));
    m.shutdown();
}

#[test]
fn report_and_unknown_paths() {
    let (m, _exp) = serving();
    let (status, body) = get(m.local_addr(), "/report");
    assert_eq!(status, 200);
    assert!(body.contains("Scheduled routine in time bin"), "{body}");
    assert_eq!(get(m.local_addr(), "/unknown").0, 404);
    m.shutdown();
}

#[test]
fn concurrent_requests_while_running() {
    let (m, exp) = serving();
    let addr = m.local_addr();
    let stepper = {
        let exp = exp.clone();
        thread::spawn(move || while !exp.lock().unwrap().step().unwrap() {})
    };
    let clients: Vec<_> = (0..2).map(|_| thread::spawn(move || get(addr, "/timers"))).collect();
    for c in clients {
        let (status, body) = c.join().unwrap();
        assert_eq!(status, 200);
        serde_json::from_str::<serde_json::Value>(&body).unwrap();
    }
    stepper.join().unwrap();
    assert!(exp.lock().unwrap().is_finished());
    m.shutdown();
}
