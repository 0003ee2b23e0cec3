mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use cartoprompt::curation::{read_dataset, run_curation, CurationPaths};
use cartoprompt_core::curate::{
    split_datapoint, CurationJob, CurationReport, PrepromptRecord, PrepromptStatus, TemplateId,
};
use common::{chat_reply, mock_server, MockReply};
use serde_json::Value;

const THREE: &str = r#"Sure! Here are the pairs:
```python
[{'prompt': 'Is this area residential?', 'answer': 'Yes, it has many residential roads.'},
 {'prompt': 'Are there cafes?', 'answer': 'Yes, 18 cafes.'},
 {"question": "Is there a tram line?", "response": "No tram rail is listed.",},
]
```"#;

const FIVE_ONE_REFUSAL: &str = r#"[
 {"prompt": "Q1?", "answer": "A1."},
 {"prompt": "Q2?", "answer": "The preprompt does not provide sufficient info."},
 {"prompt": "Q3?", "answer": "A3."},
 {"prompt": "Q4?", "answer": "A4."},
 {"prompt": "Q5?", "answer": "A5."}
]"#;

fn records(ids: &[&str]) -> Vec<PrepromptRecord> {
    ids.iter()
        .map(|id| PrepromptRecord {
            preprompt_id: id.to_string(),
            lat: 41.0,
            lon: 29.0,
            preprompt: format!("This is area {id}."),
        })
        .collect()
}

fn job(url: String) -> CurationJob {
    let mut j = CurationJob::default();
    j.teacher.url = url;
    j.teacher.token_env = "CARTOPROMPT_IT_UNSET_TOKEN".into();
    j.requests_per_minute = 60_000.0;
    j.backoff_base_ms = 5;
    j
}

fn paths(dir: &tempfile::TempDir) -> CurationPaths {
    CurationPaths::new(&dir.path().join("data.jsonl"), &dir.path().join("report.json"))
}

fn saved_report(p: &CurationPaths) -> CurationReport {
    serde_json::from_slice(&std::fs::read(&p.report).unwrap()).unwrap()
}

const TIMEOUT: Duration = Duration::from_secs(5);

#[tokio::test]
async fn three_pairs_for_two_preprompts_gives_six() {
    let mock = mock_server(|_, _| MockReply::ok(chat_reply(THREE))).await;
    let dir = tempfile::tempdir().unwrap();
    let p = paths(&dir);
    let rep = run_curation(&job(mock.url("/v1/chat/completions")), &records(&["a", "b"]), &p, TIMEOUT)
        .await
        .unwrap();
    assert_eq!(rep.total_kept(), 6);
    assert_eq!(saved_report(&p).total_kept(), 6);
    let data = read_dataset(&p.dataset).unwrap();
    assert_eq!(data.len(), 6);
    for d in &data {
        let (pre, q, a) = split_datapoint(&d.text).unwrap();
        assert_eq!(pre, format!("This is area {}.", d.preprompt_id));
        assert!(!q.is_empty() && !a.is_empty());
    }
    assert_eq!(
        data[2].text,
        "Area : This is area a. Question : Is there a tram line? Answer : No tram rail is listed."
    );
    let indexes: Vec<usize> = data.iter().map(|d| d.pair_index).collect();
    assert_eq!(indexes, [0, 1, 2, 0, 1, 2]);
}

#[tokio::test]
async fn one_refusal_among_five_keeps_four() {
    let mock = mock_server(|_, _| MockReply::ok(chat_reply(FIVE_ONE_REFUSAL))).await;
    let dir = tempfile::tempdir().unwrap();
    let p = paths(&dir);
    let rep = run_curation(&job(mock.url("/")), &records(&["a", "b"]), &p, TIMEOUT)
        .await
        .unwrap();
    for r in &rep.preprompts {
        assert_eq!((r.parsed, r.filtered, r.kept), (5, 1, 4));
    }
    assert_eq!(read_dataset(&p.dataset).unwrap().len(), 8);
}

#[tokio::test]
async fn two_failures_then_success_counts_two_retries() {
    let mock = mock_server(|n, _| {
        if n < 2 {
            MockReply::status(500)
        } else {
            MockReply::ok(chat_reply(THREE))
        }
    })
    .await;
    let dir = tempfile::tempdir().unwrap();
    let rep = run_curation(&job(mock.url("/")), &records(&["a"]), &paths(&dir), TIMEOUT)
        .await
        .unwrap();
    let r = &rep.preprompts[0];
    assert_eq!(r.status, PrepromptStatus::Ok);
    assert_eq!((r.requests, r.retries, r.kept), (3, 2, 3));
}

#[tokio::test]
async fn backoff_grows_between_retries() {
    let mock = mock_server(|n, _| {
        if n < 3 {
            MockReply::status(503)
        } else {
            MockReply::ok(chat_reply(THREE))
        }
    })
    .await;
    let dir = tempfile::tempdir().unwrap();
    let mut j = job(mock.url("/"));
    j.backoff_base_ms = 40;
    let t0 = Instant::now();
    run_curation(&j, &records(&["a"]), &paths(&dir), TIMEOUT).await.unwrap();
    assert!(t0.elapsed() >= Duration::from_millis(40 + 80 + 160));
}

#[tokio::test]
async fn exhausted_retries_fail_one_preprompt_and_continue() {
    let mock = mock_server(|_, body| {
        if body.contains("area b.") {
            MockReply::status(503)
        } else {
            MockReply::ok(chat_reply(THREE))
        }
    })
    .await;
    let dir = tempfile::tempdir().unwrap();
    let p = paths(&dir);
    let rep = run_curation(&job(mock.url("/")), &records(&["a", "b", "c"]), &p, TIMEOUT)
        .await
        .unwrap();
    let status: Vec<_> = rep.preprompts.iter().map(|r| r.status).collect();
    assert_eq!(status, [PrepromptStatus::Ok, PrepromptStatus::Failed, PrepromptStatus::Ok]);
    let b = &rep.preprompts[1];
    assert_eq!((b.requests, b.retries, b.kept), (4, 3, 0));
    assert!(b.error.as_deref().unwrap().contains("503"));
    let ids: BTreeSet<String> = read_dataset(&p.dataset).unwrap().into_iter().map(|d| d.preprompt_id).collect();
    assert_eq!(ids, BTreeSet::from(["a".to_string(), "c".to_string()]));
}

#[tokio::test]
async fn client_errors_are_not_retried() {
    let mock = mock_server(|_, _| MockReply::status(401)).await;
    let dir = tempfile::tempdir().unwrap();
    let rep = run_curation(&job(mock.url("/")), &records(&["a"]), &paths(&dir), TIMEOUT)
        .await
        .unwrap();
    assert_eq!(rep.preprompts[0].requests, 1);
    assert_eq!(rep.preprompts[0].status, PrepromptStatus::Failed);
}

#[tokio::test]
async fn rerun_resumes_only_unfinished_preprompts() {
    let dir = tempfile::tempdir().unwrap();
    let p = paths(&dir);
    let flaky = mock_server(|_, body| {
        if body.contains("area b.") {
            MockReply::status(503)
        } else {
            MockReply::ok(chat_reply(THREE))
        }
    })
    .await;
    let recs = records(&["a", "b", "c"]);
    run_curation(&job(flaky.url("/")), &recs, &p, TIMEOUT).await.unwrap();

    // a crash between the dataset append and the report write leaves orphans
    let orphan = r#"{"text":"Area : This is area b. Question : Q Answer : A","preprompt_id":"b","pair_index":0}"#;
    let mut text = std::fs::read_to_string(&p.dataset).unwrap();
    text.push_str(orphan);
    text.push('\n');
    std::fs::write(&p.dataset, text).unwrap();

    let healthy = mock_server(|_, _| MockReply::ok(chat_reply(THREE))).await;
    let rep = run_curation(&job(healthy.url("/")), &recs, &p, TIMEOUT).await.unwrap();
    assert_eq!(healthy.calls(), 1);
    assert!(healthy.bodies()[0].contains("area b."));
    assert_eq!(rep.preprompts.len(), 3);
    assert!(rep.preprompts.iter().all(|r| r.status == PrepromptStatus::Ok));
    let data = read_dataset(&p.dataset).unwrap();
    assert_eq!(data.len(), 9);
    let texts: BTreeSet<&str> = data.iter().map(|d| d.text.as_str()).collect();
    assert_eq!(texts.len(), 9);

    let again = mock_server(|_, _| MockReply::ok(chat_reply(THREE))).await;
    run_curation(&job(again.url("/")), &recs, &p, TIMEOUT).await.unwrap();
    assert_eq!(again.calls(), 0);
    assert_eq!(read_dataset(&p.dataset).unwrap().len(), 9);
}

#[tokio::test]
async fn unparseable_reply_is_kept_for_audit() {
    let mock = mock_server(|_, _| MockReply::ok(chat_reply("I cannot produce a list today."))).await;
    let dir = tempfile::tempdir().unwrap();
    let p = paths(&dir);
    let rep = run_curation(&job(mock.url("/")), &records(&["a"]), &p, TIMEOUT).await.unwrap();
    assert_eq!(rep.preprompts[0].parse_errors, 1);
    assert_eq!(rep.preprompts[0].kept, 0);
    let audit = std::fs::read_to_string(&p.unparsed).unwrap();
    let line: Value = serde_json::from_str(audit.lines().next().unwrap()).unwrap();
    assert_eq!(line["raw"], "I cannot produce a list today.");
}

#[tokio::test]
async fn wire_format_and_bearer_token() {
    let mock = mock_server(|_, _| MockReply::ok(chat_reply(THREE))).await;
    let dir = tempfile::tempdir().unwrap();
    let mut j = job(mock.url("/v1/chat/completions"));
    j.teacher.token_env = "CARTOPROMPT_IT_TOKEN_SET".into();
    j.temperature = 0.7;
    j.templates = TemplateId::ALL.to_vec();
    std::env::set_var("CARTOPROMPT_IT_TOKEN_SET", "s3cret");
    run_curation(&j, &records(&["a"]), &paths(&dir), TIMEOUT).await.unwrap();
    let log = mock.log.lock().unwrap();
    assert_eq!(log.len(), 5);
    for r in log.iter() {
        assert_eq!(r.headers["authorization"], "Bearer s3cret");
        let body: Value = serde_json::from_str(&r.body).unwrap();
        assert_eq!(body["model"], "teacher");
        assert_eq!(body["temperature"], 0.7);
        let msgs = body["messages"].as_array().unwrap();
        assert!(msgs.iter().all(|m| m["role"].is_string() && m["content"].is_string()));
        assert!(msgs.iter().any(|m| m["content"].as_str().unwrap().contains("This is area a.")));
    }
}

#[tokio::test]
async fn no_token_means_no_auth_header() {
    let mock = mock_server(|_, _| MockReply::ok(chat_reply(THREE))).await;
    let dir = tempfile::tempdir().unwrap();
    run_curation(&job(mock.url("/")), &records(&["a"]), &paths(&dir), TIMEOUT).await.unwrap();
    assert!(!mock.log.lock().unwrap()[0].headers.contains_key("authorization"));
}

#[tokio::test]
async fn rate_limit_spaces_requests() {
    let mock = mock_server(|_, _| MockReply::ok(chat_reply(THREE))).await;
    let dir = tempfile::tempdir().unwrap();
    let mut j = job(mock.url("/"));
    j.requests_per_minute = 600.0;
    let t0 = Instant::now();
    run_curation(&j, &records(&["a", "b", "c"]), &paths(&dir), TIMEOUT).await.unwrap();
    assert!(t0.elapsed() >= Duration::from_millis(200));
}

#[tokio::test]
async fn duplicate_ids_are_rejected() {
    let mock = mock_server(|_, _| MockReply::ok(chat_reply(THREE))).await;
    let dir = tempfile::tempdir().unwrap();
    let err = run_curation(&job(mock.url("/")), &records(&["a", "a"]), &paths(&dir), TIMEOUT).await;
    assert!(err.is_err());
}
