mod common;

use std::io::Cursor;
use std::time::{Duration, Instant};

use qflsim::data::Builtin;
use qflsim::federate::{DatasetRef, SimulationConfig};
use qflsim::interface::server::{bind, ServerConfig, DEFAULT_BIND};
use reqwest::blocking::{multipart, Client};
use serde_json::{json, Value};

use common::{parse_sse, TestServer};

fn client() -> Client {
    Client::builder().timeout(Duration::from_secs(120)).build().unwrap()
}

fn blobs(rounds: usize) -> SimulationConfig {
    SimulationConfig {
        dataset: DatasetRef::Builtin(Builtin::SyntheticBlobs {
            num_classes: 2,
            feature_dim: 4,
            num_samples: 120,
            seed: 4,
        }),
        num_qubits: Some(2),
        num_layers: Some(1),
        num_clients: 3,
        global_rounds: rounds,
        ..SimulationConfig::default()
    }
}

/// Minutes of work; used to observe RUNNING and PENDING states.
fn long_run() -> SimulationConfig {
    SimulationConfig {
        dataset: DatasetRef::Builtin(Builtin::Digits8x8),
        num_qubits: Some(6),
        num_layers: Some(10),
        global_rounds: 2000,
        ..SimulationConfig::default()
    }
}

fn create(http: &Client, server: &TestServer, config: &SimulationConfig) -> Value {
    let resp = http.post(server.url("/api/simulations")).json(config).send().unwrap();
    assert_eq!(resp.status(), 201, "{:?}", resp.text());
    resp.json().unwrap()
}

fn status_of(http: &Client, server: &TestServer, id: &str) -> Value {
    http.get(server.url(&format!("/api/simulations/{id}")))
        .send()
        .unwrap()
        .json()
        .unwrap()
}

fn wait_for(http: &Client, server: &TestServer, id: &str, want: &str) -> Value {
    let deadline = Instant::now() + Duration::from_secs(120);
    loop {
        let h = status_of(http, server, id);
        if h["status"] == want {
            return h;
        }
        assert!(Instant::now() < deadline, "run {id} stuck at {}", h["status"]);
        std::thread::sleep(Duration::from_millis(20));
    }
}

fn post_json(http: &Client, server: &TestServer, body: &str) -> (u16, Value) {
    let resp = http
        .post(server.url("/api/simulations"))
        .header("content-type", "application/json")
        .body(body.to_string())
        .send()
        .unwrap();
    (resp.status().as_u16(), resp.json().unwrap())
}

fn error_fields(body: &Value) -> Vec<String> {
    body["errors"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["field"].as_str().unwrap().to_string())
        .collect()
}

#[test]
fn health_and_placeholder_root() {
    assert_eq!(DEFAULT_BIND, "127.0.0.1:5000");
    let server = TestServer::start();
    let http = client();
    let health: Value = http.get(server.url("/api/health")).send().unwrap().json().unwrap();
    assert_eq!(health["status"], "ok");
    let root = http.get(server.url("/")).send().unwrap();
    assert_eq!(root.status(), 200);
    assert!(root.text().unwrap().contains("/api"));
}

#[test]
fn serves_static_assets() {
    let assets = tempfile::tempdir().unwrap();
    std::fs::write(assets.path().join("index.html"), "<p>dashboard</p>").unwrap();
    std::fs::write(assets.path().join("app.js"), "console.log(1)").unwrap();
    let dir = assets.path().to_path_buf();
    let server = TestServer::start_with(move |c| c.assets_dir = Some(dir));
    let http = client();
    assert_eq!(http.get(server.url("/")).send().unwrap().text().unwrap(), "<p>dashboard</p>");
    assert_eq!(http.get(server.url("/app.js")).send().unwrap().status(), 200);
    let health: Value = http.get(server.url("/api/health")).send().unwrap().json().unwrap();
    assert_eq!(health["status"], "ok");
}

#[test]
fn second_bind_on_same_port_fails() {
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let runs = tempfile::tempdir().unwrap();
    let config = ServerConfig {
        bind: taken.local_addr().unwrap(),
        runs_dir: runs.path().to_path_buf(),
        ..ServerConfig::default()
    };
    let rt = tokio::runtime::Runtime::new().unwrap();
    assert!(rt.block_on(bind(&config)).is_err());
}

#[test]
fn create_echoes_config() {
    let server = TestServer::start();
    let http = client();
    let config = blobs(2);
    let handle = create(&http, &server, &config);
    assert!(handle["id"].as_str().is_some_and(|s| !s.is_empty()));
    assert!(["PENDING", "RUNNING", "COMPLETED"].contains(&handle["status"].as_str().unwrap()));
    assert!(handle["created_at"].as_str().is_some());
    let echoed: SimulationConfig = serde_json::from_value(handle["config"].clone()).unwrap();
    assert_eq!(echoed, config);

    let id = handle["id"].as_str().unwrap();
    let done = wait_for(&http, &server, id, "COMPLETED");
    assert_eq!(done["rounds_completed"], 2);
    let listed: Vec<Value> = http.get(server.url("/api/simulations")).send().unwrap().json().unwrap();
    assert_eq!(listed.len(), 1);
}

#[test]
fn invalid_configs_name_fields() {
    let server = TestServer::start();
    let http = client();

    let (code, body) = post_json(&http, &server, r#"{"framework": "QFL", "num_qubits": null}"#);
    assert_eq!(code, 422);
    assert_eq!(error_fields(&body), ["num_qubits"]);

    let (code, body) = post_json(&http, &server, r#"{"num_qubitz": 3}"#);
    assert_eq!(code, 422);
    assert_eq!(error_fields(&body), ["num_qubitz"]);

    let (code, body) = post_json(
        &http,
        &server,
        r#"{"framework": "CLASSICAL_FL", "num_qubits": 3, "num_layers": 1}"#,
    );
    assert_eq!(code, 422);
    assert_eq!(error_fields(&body), ["num_qubits", "num_layers"]);

    let (code, body) = post_json(&http, &server, "not json");
    assert_eq!(code, 422);
    assert!(!error_fields(&body).is_empty());
}

#[test]
fn too_many_classes_for_qubits() {
    let server = TestServer::start();
    let http = client();
    let rows: String = (0..200).map(|i| format!("{},{},{}\n", i % 7, i % 3, i % 100)).collect();
    let form = multipart::Form::new().part(
        "file",
        multipart::Part::bytes(format!("a,b,label\n{rows}").into_bytes()).file_name("hundred.csv"),
    );
    let up: Value = http.post(server.url("/api/datasets")).multipart(form).send().unwrap().json().unwrap();
    assert_eq!(up["num_classes"], 100);
    let body = json!({
        "dataset": {"source": "uploaded", "id": up["id"]},
        "num_qubits": 2,
        "num_layers": 1,
    });
    let (code, body) = post_json(&http, &server, &body.to_string());
    assert_eq!(code, 422);
    assert_eq!(error_fields(&body), ["num_qubits"]);
    let msg = body["errors"][0]["message"].as_str().unwrap();
    assert!(msg.contains("num_classes 100 exceeds 2^Q = 4"), "{msg}");
}

#[test]
fn unknown_ids_are_404() {
    let server = TestServer::start();
    let http = client();
    for path in ["", "/events", "/export"] {
        let resp = http.get(server.url(&format!("/api/simulations/nope{path}"))).send().unwrap();
        assert_eq!(resp.status(), 404, "{path}");
    }
    let resp = http.post(server.url("/api/simulations/nope/cancel")).send().unwrap();
    assert_eq!(resp.status(), 404);
}

#[test]
fn events_follow_a_live_run_and_resume() {
    let server = TestServer::start();
    let http = client();
    let handle = create(&http, &server, &blobs(5));
    let id = handle["id"].as_str().unwrap();
    let events = parse_sse(
        &http
            .get(server.url(&format!("/api/simulations/{id}/events")))
            .send()
            .unwrap()
            .text()
            .unwrap(),
    );
    assert_eq!(events.len(), 6);
    for (i, ev) in events[..5].iter().enumerate() {
        assert_eq!(ev.event, "round");
        assert_eq!(ev.id.as_deref(), Some((i + 1).to_string().as_str()));
        let m: Value = serde_json::from_str(&ev.data).unwrap();
        assert_eq!(m["round"], i + 1);
        assert_eq!(m["per_client_epoch_losses"].as_array().unwrap().len(), 3);
    }
    assert_eq!(events[5].event, "status");

    let resumed = parse_sse(
        &http
            .get(server.url(&format!("/api/simulations/{id}/events?from=3")))
            .send()
            .unwrap()
            .text()
            .unwrap(),
    );
    let ids: Vec<_> = resumed.iter().map(|e| e.id.clone()).collect();
    assert_eq!(ids, [Some("4".into()), Some("5".into()), None]);

    let by_header = parse_sse(
        &http
            .get(server.url(&format!("/api/simulations/{id}/events")))
            .header("Last-Event-ID", "4")
            .send()
            .unwrap()
            .text()
            .unwrap(),
    );
    assert_eq!(by_header.len(), 2);
}

#[test]
fn export_bundle_has_four_entries() {
    let server = TestServer::start();
    let http = client();
    let handle = create(&http, &server, &blobs(3));
    let id = handle["id"].as_str().unwrap();
    wait_for(&http, &server, id, "COMPLETED");
    let resp = http.get(server.url(&format!("/api/simulations/{id}/export"))).send().unwrap();
    assert_eq!(resp.status(), 200);
    assert_eq!(resp.headers()["content-type"], "application/zip");
    let bytes = resp.bytes().unwrap();
    let mut zip = zip::ZipArchive::new(Cursor::new(bytes.to_vec())).unwrap();
    let mut names: Vec<String> = zip.file_names().map(String::from).collect();
    names.sort();
    assert_eq!(names, ["config.json", "metrics.csv", "parameters.json", "run.log"]);
    let mut csv = String::new();
    std::io::Read::read_to_string(&mut zip.by_name("metrics.csv").unwrap(), &mut csv).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3);
    assert!(csv.starts_with("round,test_loss,test_accuracy,mean_client_loss,wall_time_ms\n"));

    let again = http.post(server.url(&format!("/api/simulations/{id}/cancel"))).send().unwrap();
    assert_eq!(again.status(), 409);
}

#[test]
fn cancel_running_and_pending_runs() {
    let server = TestServer::start_with(|c| c.max_concurrent_runs = 1);
    let http = client();
    let running = create(&http, &server, &long_run());
    let running_id = running["id"].as_str().unwrap().to_string();
    wait_for(&http, &server, &running_id, "RUNNING");

    let export = http
        .get(server.url(&format!("/api/simulations/{running_id}/export")))
        .send()
        .unwrap();
    assert_eq!(export.status(), 409);

    let queued = create(&http, &server, &blobs(3));
    let queued_id = queued["id"].as_str().unwrap().to_string();
    assert_eq!(status_of(&http, &server, &queued_id)["status"], "PENDING");
    let cancelled: Value = http
        .post(server.url(&format!("/api/simulations/{queued_id}/cancel")))
        .send()
        .unwrap()
        .json()
        .unwrap();
    assert_eq!(cancelled["status"], "CANCELLED");
    assert_eq!(cancelled["rounds_completed"], 0);
    let events = parse_sse(
        &http
            .get(server.url(&format!("/api/simulations/{queued_id}/events")))
            .send()
            .unwrap()
            .text()
            .unwrap(),
    );
    assert_eq!(events.len(), 1);
    assert_eq!(events[0].event, "status");

    let resp = http
        .post(server.url(&format!("/api/simulations/{running_id}/cancel")))
        .send()
        .unwrap();
    assert_eq!(resp.status(), 202);
    let done = wait_for(&http, &server, &running_id, "CANCELLED");
    let rounds = done["rounds_completed"].as_u64().unwrap() as usize;
    assert!(rounds < 2000);

    let bundle = http
        .get(server.url(&format!("/api/simulations/{running_id}/export")))
        .send()
        .unwrap();
    assert_eq!(bundle.status(), 200);
    let mut zip = zip::ZipArchive::new(Cursor::new(bundle.bytes().unwrap().to_vec())).unwrap();
    let mut csv = String::new();
    std::io::Read::read_to_string(&mut zip.by_name("metrics.csv").unwrap(), &mut csv).unwrap();
    assert_eq!(csv.lines().count(), 1 + rounds);
}

#[test]
fn full_queue_is_429() {
    let server = TestServer::start_with(|c| {
        c.max_concurrent_runs = 1;
        c.max_pending_runs = 1;
    });
    let http = client();
    let first = create(&http, &server, &long_run());
    let first_id = first["id"].as_str().unwrap().to_string();
    wait_for(&http, &server, &first_id, "RUNNING");
    let second = create(&http, &server, &blobs(2));
    let resp = http.post(server.url("/api/simulations")).json(&blobs(2)).send().unwrap();
    assert_eq!(resp.status(), 429);

    http.post(server.url(&format!("/api/simulations/{first_id}/cancel"))).send().unwrap();
    wait_for(&http, &server, second["id"].as_str().unwrap(), "COMPLETED");
}

#[test]
fn runs_survive_restart() {
    let runs = tempfile::tempdir().unwrap();
    let dir = runs.path().to_path_buf();
    let id = {
        let d = dir.clone();
        let server = TestServer::start_with(move |c| c.runs_dir = d);
        let http = client();
        let handle = create(&http, &server, &blobs(3));
        let id = handle["id"].as_str().unwrap().to_string();
        wait_for(&http, &server, &id, "COMPLETED");
        id
    };
    let server = TestServer::start_with(move |c| c.runs_dir = dir);
    let http = client();
    let h = status_of(&http, &server, &id);
    assert_eq!(h["status"], "COMPLETED");
    assert_eq!(h["rounds_completed"], 3);
    let events = parse_sse(
        &http
            .get(server.url(&format!("/api/simulations/{id}/events")))
            .send()
            .unwrap()
            .text()
            .unwrap(),
    );
    assert_eq!(events.len(), 4);
    let resp = http.get(server.url(&format!("/api/simulations/{id}/export"))).send().unwrap();
    assert_eq!(resp.status(), 200);
}

#[test]
fn upload_summarizes_csv() {
    let server = TestServer::start();
    let http = client();
    let csv = "x1,x2,label\n0.1,0.2,cat\n0.3,0.1,dog\n0.5,0.9,cat\n0.7,0.4,dog\n";
    let form = multipart::Form::new().part("file", multipart::Part::text(csv).file_name("pets.csv"));
    let resp = http.post(server.url("/api/datasets")).multipart(form).send().unwrap();
    assert_eq!(resp.status(), 201);
    let body: Value = resp.json().unwrap();
    assert_eq!(body["feature_dim"], 2);
    assert_eq!(body["num_classes"], 2);
    assert_eq!(body["rows"], 4);
    assert_eq!(body["label_names"], json!(["cat", "dog"]));

    let config = json!({
        "dataset": {"source": "uploaded", "id": body["id"]},
        "num_qubits": 1,
        "num_layers": 1,
        "num_clients": 2,
        "global_rounds": 2,
        "test_fraction": 0.25,
    });
    let (code, handle) = post_json(&http, &server, &config.to_string());
    assert_eq!(code, 201, "{handle}");
    wait_for(&http, &server, handle["id"].as_str().unwrap(), "COMPLETED");
}

#[test]
fn upload_label_column_by_index() {
    let server = TestServer::start();
    let http = client();
    let csv = "1,0.5,0.1\n0,0.2,0.3\n1,0.9,0.8\n";
    let form = multipart::Form::new()
        .text("label_column", "0")
        .part("file", multipart::Part::text(csv).file_name("plain.csv"));
    let body: Value = http.post(server.url("/api/datasets")).multipart(form).send().unwrap().json().unwrap();
    assert_eq!(body["feature_dim"], 2);
    assert_eq!(body["label_column"], 0);
}

#[test]
fn ragged_upload_reports_line() {
    let server = TestServer::start();
    let http = client();
    let csv = "a,b,label\n1,2,0\n3,4,1\n5,1\n";
    let form = multipart::Form::new().part("file", multipart::Part::text(csv).file_name("bad.csv"));
    let resp = http.post(server.url("/api/datasets")).multipart(form).send().unwrap();
    assert_eq!(resp.status(), 422);
    let body: Value = resp.json().unwrap();
    assert_eq!(body["line"], 4);

    let csv = "a,b,label\n1,2,0\n3,x,1\n";
    let form = multipart::Form::new().part("file", multipart::Part::text(csv).file_name("bad.csv"));
    let body: Value = http.post(server.url("/api/datasets")).multipart(form).send().unwrap().json().unwrap();
    assert_eq!((body["line"].as_u64(), body["column"].as_u64()), (Some(3), Some(2)));
}

#[test]
fn oversize_upload_is_413() {
    let server = TestServer::start();
    let http = client();
    let row = "0.123456,0.654321,1\n";
    let big = row.repeat(60 * 1024 * 1024 / row.len());
    let form = multipart::Form::new().part("file", multipart::Part::bytes(big.into_bytes()).file_name("big.csv"));
    let resp = http.post(server.url("/api/datasets")).multipart(form).send().unwrap();
    let status = resp.status();
    assert_eq!(status, 413, "{}", resp.text().unwrap());
}
