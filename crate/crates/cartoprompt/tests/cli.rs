mod common;

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use common::{chat_reply, fixture, golden_preprompt, mock_server, validate_geojson, MockReply};
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_cartoprompt");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env("CARTOPROMPT_LOG", "warn")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// A config in `dir` pointing at the golden fixture.
fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let p = dir.join("cartoprompt.toml");
    let body = format!(
        "[data]\nosm_files = [{:?}]\nstore = \"store.json\"\n\n[service]\nembeddings_path = \"layer.geojson\"\n{extra}",
        fixture("golden_fatih.osm").display().to_string()
    );
    std::fs::write(&p, body).unwrap();
    p
}

fn ingested(dir: &Path, extra: &str) -> String {
    let cfg = write_config(dir, extra);
    let cfg = cfg.to_str().unwrap().to_string();
    let o = run(&["--config", &cfg, "ingest"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    cfg
}

#[test]
fn no_subcommand_prints_usage_and_exits_1() {
    let o = run(&[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn unknown_flag_exits_1() {
    let o = run(&["describe", "--lat", "1", "--lon", "2", "--frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    let o = run(&["teleport"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn help_and_version_exit_0() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}

#[test]
fn runtime_failure_exits_2() {
    let o = run(&["--config", "/nonexistent/cartoprompt.toml", "ingest"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("error:"));
    assert!(!err.contains("panicked"));
}

#[test]
fn split_200_lines() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("data.jsonl");
    let body: String = (0..200).map(|i| format!("{{\"text\":\"line {i}\"}}\n")).collect();
    std::fs::write(&input, &body).unwrap();
    let o = run(&["split", "--input", input.to_str().unwrap(), "--fraction", "0.99", "--seed", "7"]);
    assert!(o.status.success());
    let train = std::fs::read_to_string(dir.path().join("data.train.jsonl")).unwrap();
    let val = std::fs::read_to_string(dir.path().join("data.val.jsonl")).unwrap();
    assert_eq!((train.lines().count(), val.lines().count()), (198, 2));
    let mut all: Vec<&str> = train.lines().chain(val.lines()).collect();
    all.sort();
    let mut orig: Vec<&str> = body.lines().collect();
    orig.sort();
    assert_eq!(all, orig);
    let again = run(&["split", "--input", input.to_str().unwrap(), "--fraction", "0.99", "--seed", "7"]);
    assert!(again.status.success());
    assert_eq!(std::fs::read_to_string(dir.path().join("data.val.jsonl")).unwrap(), val);
}

#[test]
fn describe_golden_center() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ingested(dir.path(), "");
    assert!(dir.path().join("store.json").exists());
    let rejects = std::fs::read_to_string(dir.path().join("store.rejects.jsonl")).unwrap();
    assert_eq!(rejects.lines().count(), 1);

    let o = run(&["--config", &cfg, "describe", "--lat", "41.01", "--lon", "28.96"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains(&golden_preprompt()));
    let (json_part, text_part) = out.trim_end().rsplit_once('\n').unwrap();
    assert_eq!(text_part, golden_preprompt());
    let v: Value = serde_json::from_str(json_part).unwrap();
    assert_eq!(v["preprompt"], golden_preprompt());
}

#[test]
fn describe_outside_data_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ingested(dir.path(), "");
    let o = run(&["--config", &cfg, "describe", "--lat", "-33.9", "--lon", "18.4"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn preprompts_then_embed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ingested(dir.path(), "");
    let centers = dir.path().join("centers.csv");
    let mut csv = String::from("lat,lon,id\n");
    for i in 0..9 {
        for j in 0..9 {
            let lat = 41.01 + (i as f64 - 4.0) * 0.0008;
            let lon = 28.96 + (j as f64 - 4.0) * 0.0008;
            csv.push_str(&format!("{lat},{lon},g{i}{j}\n"));
        }
    }
    csv.push_str("0.5,0.5,nowhere\n");
    std::fs::write(&centers, csv).unwrap();
    let pre = dir.path().join("preprompts.jsonl");
    let o = run(&["--config", &cfg, "preprompts", "--centers", centers.to_str().unwrap(), "--out", pre.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(summary["written"], 81);
    assert_eq!(summary["skipped"], 1);
    let lines = std::fs::read_to_string(&pre).unwrap();
    let g44: Value = serde_json::from_str(lines.lines().nth(40).unwrap()).unwrap();
    assert_eq!(g44["preprompt_id"], "g44");
    assert_eq!(g44["preprompt"], golden_preprompt());

    let o = run(&[
        "--config", &cfg, "embed",
        "--preprompts", pre.to_str().unwrap(),
        "--vectors", fixture("mini_vectors.txt").to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let layer: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("layer.geojson")).unwrap()).unwrap();
    assert_eq!(validate_geojson(&layer), Ok(81));
    let cache = std::fs::read_to_string(dir.path().join("layer.projection.jsonl")).unwrap();
    assert_eq!(cache.lines().count(), 81);
    let row: Value = serde_json::from_str(cache.lines().next().unwrap()).unwrap();
    assert!(row.get("vector").is_none());
    assert!(row["color"].as_str().unwrap().starts_with('#'));
}

#[tokio::test(flavor = "multi_thread")]
async fn curate_against_mock_teacher() {
    let reply = chat_reply(r#"[{"prompt": "Is it busy?", "answer": "Yes, it has 43 restaurants."}, {"prompt": "Any rail?", "answer": "289 meters of platform rail."}]"#);
    let mock = mock_server(move |_, _| MockReply::ok(reply.clone())).await;
    let dir = tempfile::tempdir().unwrap();
    let extra = format!(
        "\n[curation]\nrequests_per_minute = 60000.0\nbackoff_base_ms = 1\n\n[curation.teacher]\nurl = \"{}\"\nmodel = \"mock-teacher\"\n",
        mock.url("/v1/chat/completions")
    );
    let cfg = write_config(dir.path(), &extra);
    let pre = dir.path().join("pre.jsonl");
    std::fs::write(
        &pre,
        format!(
            "{{\"preprompt_id\":\"p1\",\"lat\":41.01,\"lon\":28.96,\"preprompt\":{}}}\n",
            serde_json::to_string(&golden_preprompt()).unwrap()
        ),
    )
    .unwrap();
    let out = dir.path().join("data.jsonl");
    let args: Vec<String> = ["--config", cfg.to_str().unwrap(), "curate", "--preprompts", pre.to_str().unwrap(), "--out", out.to_str().unwrap()]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let o = tokio::task::spawn_blocking(move || {
        let a: Vec<&str> = args.iter().map(String::as_str).collect();
        run(&a)
    })
    .await
    .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let data = std::fs::read_to_string(&out).unwrap();
    assert_eq!(data.lines().count(), 2);
    let first: Value = serde_json::from_str(data.lines().next().unwrap()).unwrap();
    assert_eq!(
        first["text"],
        format!("Area : {} Question : Is it busy? Answer : Yes, it has 43 restaurants.", golden_preprompt())
    );
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("data.report.json")).unwrap()).unwrap();
    assert_eq!(report["model"], "mock-teacher");
    assert_eq!(report["temperature"], 1.0);
    assert_eq!(report["preprompts"][0]["kept"], 2);
}

#[tokio::test(flavor = "multi_thread")]
async fn serve_matches_describe() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ingested(dir.path(), "");
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let bind = format!("127.0.0.1:{port}");
    let mut child = Command::new(BIN)
        .args(["--config", &cfg, "serve", "--bind", &bind])
        .env("CARTOPROMPT_LOG", "warn")
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let client = reqwest::Client::new();
    let url = format!("http://{bind}/v1/preprompt?lat=41.01&lon=28.96");
    let started = Instant::now();
    let body = loop {
        match client.get(&url).send().await {
            Ok(r) => break r.text().await.unwrap(),
            Err(_) if started.elapsed() < Duration::from_secs(20) => {
                tokio::time::sleep(Duration::from_millis(100)).await
            }
            Err(e) => {
                let _ = child.kill();
                let mut err = String::new();
                child.stderr.take().unwrap().read_to_string(&mut err).unwrap();
                panic!("service did not come up: {e}\n{err}");
            }
        }
    };
    let _ = child.kill();
    let _ = child.wait();
    let o = run(&["--config", &cfg, "describe", "--lat", "41.01", "--lon", "28.96"]);
    let out = stdout(&o);
    let (json_part, _) = out.trim_end().rsplit_once('\n').unwrap();
    assert_eq!(json_part, body);
}
