use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use solarsite_core::pipeline::{self, LoadOptions, ScenarioConfig, SynthSpec};
use solarsite_service::{router, AppState};

struct Reply {
    status: StatusCode,
    content_type: Option<String>,
    bytes: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.bytes)))
    }

    fn text(&self) -> String {
        String::from_utf8_lossy(&self.bytes).into_owned()
    }
}

async fn call(state: &Arc<AppState>, method: &str, uri: &str, body: Option<String>) -> Reply {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let content_type = resp
        .headers()
        .get("content-type")
        .map(|v| v.to_str().unwrap().to_string());
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply {
        status,
        content_type,
        bytes,
    }
}

async fn evaluate(state: &Arc<AppState>, body: Value) -> Reply {
    call(state, "POST", "/api/ahp/evaluate", Some(body.to_string())).await
}

struct Fixture {
    _tmp: tempfile::TempDir,
    data: std::path::PathBuf,
    state: Arc<AppState>,
}

fn fixture() -> Fixture {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let spec = SynthSpec {
        rows: 40,
        cols: 44,
        seed: 11,
        ..SynthSpec::default()
    };
    pipeline::write_dataset(&pipeline::synth_dataset(&spec).unwrap(), &data).unwrap();
    let state = AppState::new(&data, &tmp.path().join("runs"), 1).unwrap();
    Fixture { _tmp: tmp, data, state }
}

fn config_json(data: &Path, approach: usize) -> Value {
    let cfg = ScenarioConfig::from_file(data.join(format!("approach{approach}.toml"))).unwrap();
    serde_json::to_value(cfg).unwrap()
}

async fn create(state: &Arc<AppState>, cfg: &Value) -> Reply {
    call(state, "POST", "/api/scenarios", Some(cfg.to_string())).await
}

async fn wait_done(state: &Arc<AppState>, id: &str) -> Value {
    for _ in 0..1200 {
        let r = call(state, "GET", &format!("/api/scenarios/{id}"), None).await;
        assert_eq!(r.status, StatusCode::OK);
        let v = r.json();
        match v["status"].as_str().unwrap() {
            "done" | "failed" => return v,
            _ => tokio::time::sleep(Duration::from_millis(50)).await,
        }
    }
    panic!("scenario {id} did not finish");
}

#[tokio::test]
async fn identity_matrix_gives_uniform_weights() {
    let f = fixture();
    let r = evaluate(&f.state, json!([[1, 1, 1], [1, 1, 1], [1, 1, 1]])).await;
    assert_eq!(r.status, StatusCode::OK);
    let v = r.json();
    for w in v["weights"].as_array().unwrap() {
        assert!((w.as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }
    assert_eq!(v["cr"].as_f64(), Some(0.0));
    assert_eq!(v["consistent"].as_bool(), Some(true));
    // At least 12 significant digits survive serialization.
    assert!(r.text().contains("0.333333333333"), "{}", r.text());
}

#[tokio::test]
async fn consistent_matrix_recovers_its_weights() {
    let f = fixture();
    let w = [0.5, 0.3, 0.2];
    let m: Vec<Vec<f64>> = w.iter().map(|a| w.iter().map(|b| a / b).collect()).collect();
    let r = evaluate(&f.state, json!({ "matrix": m })).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text());
    let v = r.json();
    for (got, want) in v["weights"].as_array().unwrap().iter().zip(w) {
        assert!((got.as_f64().unwrap() - want).abs() < 1e-12);
    }
    assert!(v["cr"].as_f64().unwrap().abs() < 1e-12);
}

#[tokio::test]
async fn fraction_strings_and_saaty_ratio() {
    let f = fixture();
    let r = evaluate(&f.state, json!([[1, 3, 3], ["1/3", 1, 2], ["1/3", "1/2", 1]])).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text());
    let v = r.json();
    assert!((v["lambda_max"].as_f64().unwrap() - 3.0537).abs() < 1e-3, "{v}");

    let r = evaluate(&f.state, json!([[1, 2, 4], ["1/2", 1, 3], ["1/4", "1/3", 1]])).await;
    let v = r.json();
    assert!((v["cr"].as_f64().unwrap() - 0.0158).abs() < 1e-3, "{v}");
}

#[tokio::test]
async fn invalid_cells_are_reported_individually() {
    let f = fixture();
    let r = evaluate(&f.state, json!([[1, 3, 12], ["1/3", 2, 1], ["1/12", 1, 1]])).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    let v = r.json();
    let cells: Vec<(u64, u64)> = v["violations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| (x["row"].as_u64().unwrap(), x["col"].as_u64().unwrap()))
        .collect();
    assert!(cells.contains(&(0, 2)), "{v}");
    assert!(cells.contains(&(1, 1)), "{v}");

    let r = evaluate(&f.state, json!([[1, "x/2"], ["1/2", 1]])).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["violations"][0]["kind"], "parse");

    let r = call(&f.state, "POST", "/api/ahp/evaluate", Some("{not json".into())).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);

    let r = evaluate(&f.state, json!([[1, 2], [0.5]])).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn oversized_matrix_is_refused() {
    let f = fixture();
    let m = vec![vec![1; 16]; 16];
    let r = evaluate(&f.state, json!(m)).await;
    assert_eq!(r.status, StatusCode::PAYLOAD_TOO_LARGE);
    let m = vec![vec![1; 15]; 15];
    assert_eq!(evaluate(&f.state, json!(m)).await.status, StatusCode::OK);
}

#[tokio::test]
async fn unknown_ids_are_not_found() {
    let f = fixture();
    for (method, path) in [
        ("GET", "/api/scenarios/nope"),
        ("POST", "/api/scenarios/nope/run"),
        ("GET", "/api/scenarios/nope/map"),
        ("GET", "/api/scenarios/nope/sensitivity"),
    ] {
        let r = call(&f.state, method, path, None).await;
        assert_eq!(r.status, StatusCode::NOT_FOUND, "{method} {path}");
    }
}

#[tokio::test]
async fn invalid_configs_are_unprocessable() {
    let f = fixture();
    let mut escaping = config_json(&f.data, 1);
    escaping["criteria"][0]["source"]["path"] = json!("../../etc/passwd");
    let r = create(&f.state, &escaping).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);

    let mut missing = config_json(&f.data, 1);
    missing["criteria"][0]["source"]["path"] = json!("nope.asc");
    assert_eq!(
        create(&f.state, &missing).await.status,
        StatusCode::UNPROCESSABLE_ENTITY
    );

    let mut unknown = config_json(&f.data, 1);
    unknown["colour"] = json!("red");
    assert_eq!(
        create(&f.state, &unknown).await.status,
        StatusCode::UNPROCESSABLE_ENTITY
    );

    let mut cyclic = config_json(&f.data, 1);
    let criteria = cyclic["criteria"].as_array_mut().unwrap();
    criteria.truncate(3);
    for c in criteria.iter_mut() {
        c.as_object_mut().unwrap().remove("weight");
    }
    cyclic["matrix"] = json!([[1, 9, "1/9"], ["1/9", 1, 9], [9, "1/9", 1]]);
    let r = create(&f.state, &cyclic).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    let v = r.json();
    assert!(v["cr"].as_f64().unwrap() > 0.05, "{v}");
    assert!(v["error"].as_str().unwrap().contains("CR ="));
}

#[tokio::test]
async fn run_lifecycle_matches_direct_pipeline() {
    let f = fixture();
    let r = create(&f.state, &config_json(&f.data, 1)).await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", r.text());
    let id = r.json()["id"].as_str().unwrap().to_string();
    assert_eq!(r.json()["status"], "draft");

    let r = call(&f.state, "GET", &format!("/api/scenarios/{id}/map"), None).await;
    assert_eq!(r.status, StatusCode::CONFLICT);

    let r = call(&f.state, "POST", &format!("/api/scenarios/{id}/run"), None).await;
    assert_eq!(r.status, StatusCode::ACCEPTED);
    let r = call(&f.state, "POST", &format!("/api/scenarios/{id}/run"), None).await;
    assert_eq!(r.status, StatusCode::CONFLICT);

    let done = wait_done(&f.state, &id).await;
    assert_eq!(done["status"], "done", "{done}");

    // Same config through the library path the command line uses.
    let cli_out = f.data.parent().unwrap().join("cli_run");
    let loaded = pipeline::load_scenario(f.data.join("approach1.toml"), &LoadOptions::default()).unwrap();
    let direct = pipeline::run(&loaded, &cli_out).unwrap();

    let service_summary = solarsite_service::summary_of(&f.state, &id).unwrap();
    assert_eq!(service_summary.classes.len(), direct.summary.classes.len());
    for (s, d) in service_summary.classes.iter().zip(&direct.summary.classes) {
        assert_eq!(s.full_km2, d.full_km2);
        assert_eq!(s.exploitable_km2, d.exploitable_km2);
        assert!((s.gp_full_twh - d.gp_full_twh).abs() <= 1e-9);
        assert!((s.gp_exploitable_twh - d.gp_exploitable_twh).abs() <= 1e-9);
    }
    let json_classes = done["summary"]["classes"].as_array().unwrap();
    for (j, d) in json_classes.iter().zip(&direct.summary.classes) {
        assert_eq!(j["full_km2"].as_f64().unwrap(), d.full_km2);
        assert!((j["gp_exploitable_twh"].as_f64().unwrap() - d.gp_exploitable_twh).abs() <= 1e-9);
    }

    let service_out = solarsite_service::output_dir_of(&f.state, &id).unwrap();
    for file in [
        "score.asc",
        "classes.asc",
        "classes_exploitable.asc",
        "areas.csv",
        "sensitivity.csv",
        "class_map.png",
    ] {
        assert_eq!(
            std::fs::read(service_out.join(file)).unwrap(),
            std::fs::read(cli_out.join(file)).unwrap(),
            "{file} differs"
        );
    }

    let r = call(&f.state, "GET", &format!("/api/scenarios/{id}/map"), None).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.content_type.as_deref(), Some("image/png"));
    assert_eq!(&r.bytes[1..4], b"PNG");

    let r = call(&f.state, "GET", &format!("/api/scenarios/{id}/sensitivity"), None).await;
    assert_eq!(r.status, StatusCode::OK);
    let v = r.json();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r["excluded"] != "GHI"));

    // Finished scenarios are immutable.
    let r = call(&f.state, "POST", &format!("/api/scenarios/{id}/run"), None).await;
    assert_eq!(r.status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn approaches_differ_in_best_class() {
    let f = fixture();
    let mut best = Vec::new();
    for k in [1, 3] {
        let id = create(&f.state, &config_json(&f.data, k)).await.json()["id"]
            .as_str()
            .unwrap()
            .to_string();
        call(&f.state, "POST", &format!("/api/scenarios/{id}/run"), None).await;
        let v = wait_done(&f.state, &id).await;
        best.push(v["summary"]["classes"].clone());
    }
    assert_ne!(best[0], best[1]);
}
