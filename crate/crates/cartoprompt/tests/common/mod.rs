#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::IntoResponse;
use axum::Router;
use cartoprompt::store::FeatureStore;
use cartoprompt_core::curate::PrepromptRecord;
use cartoprompt_core::{DescriptorConfig, LatLon, VerbalizerRules};
use serde_json::{json, Value};

pub const GOLDEN_CENTER: (f64, f64) = (41.01, 28.96);

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn golden_preprompt() -> String {
    std::fs::read_to_string(fixture("golden_preprompt.txt"))
        .unwrap()
        .trim()
        .to_string()
}

pub fn golden_store() -> &'static FeatureStore {
    static STORE: OnceLock<FeatureStore> = OnceLock::new();
    STORE.get_or_init(|| FeatureStore::ingest_files(&[fixture("golden_fatih.osm")]).unwrap())
}

/// 81 centres on a 9×9 grid, 0.0008° apart, around the golden centre.
pub fn grid_records(store: &FeatureStore) -> Vec<PrepromptRecord> {
    let cfg = DescriptorConfig::default();
    let rules = VerbalizerRules::default();
    let mut out = Vec::new();
    for i in 0..9 {
        for j in 0..9 {
            let lat = GOLDEN_CENTER.0 + (i as f64 - 4.0) * 0.0008;
            let lon = GOLDEN_CENTER.1 + (j as f64 - 4.0) * 0.0008;
            let d = store
                .describe(LatLon::new(lat, lon), 300.0, &cfg, &rules)
                .unwrap();
            out.push(PrepromptRecord {
                preprompt_id: format!("g{i}{j}"),
                lat,
                lon,
                preprompt: d.preprompt,
            });
        }
    }
    out
}

/// A scripted reply from a mock upstream.
pub struct MockReply {
    pub status: u16,
    pub body: String,
    pub delay: Duration,
}

impl MockReply {
    pub fn ok(body: impl Into<String>) -> Self {
        Self {
            status: 200,
            body: body.into(),
            delay: Duration::ZERO,
        }
    }

    pub fn status(status: u16) -> Self {
        Self {
            status,
            body: json!({"error": "mock failure"}).to_string(),
            delay: Duration::ZERO,
        }
    }
}

pub struct Recorded {
    pub headers: HeaderMap,
    pub body: String,
}

type Responder = dyn Fn(usize, &str) -> MockReply + Send + Sync;

#[derive(Clone)]
struct MockState {
    calls: Arc<AtomicUsize>,
    log: Arc<Mutex<Vec<Recorded>>>,
    responder: Arc<Responder>,
}

pub struct Mock {
    pub addr: SocketAddr,
    pub calls: Arc<AtomicUsize>,
    pub log: Arc<Mutex<Vec<Recorded>>>,
}

impl Mock {
    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn bodies(&self) -> Vec<String> {
        self.log.lock().unwrap().iter().map(|r| r.body.clone()).collect()
    }
}

async fn mock_handler(State(s): State<MockState>, headers: HeaderMap, body: Bytes) -> impl IntoResponse {
    let n = s.calls.fetch_add(1, Ordering::SeqCst);
    let text = String::from_utf8_lossy(&body).into_owned();
    let reply = (s.responder)(n, &text);
    s.log.lock().unwrap().push(Recorded { headers, body: text });
    if !reply.delay.is_zero() {
        tokio::time::sleep(reply.delay).await;
    }
    (
        StatusCode::from_u16(reply.status).unwrap(),
        [("content-type", "application/json")],
        reply.body,
    )
}

/// Serves `responder` for every request on any path; it receives the call
/// index and the request body.
pub async fn mock_server<F>(responder: F) -> Mock
where
    F: Fn(usize, &str) -> MockReply + Send + Sync + 'static,
{
    let state = MockState {
        calls: Arc::new(AtomicUsize::new(0)),
        log: Arc::new(Mutex::new(Vec::new())),
        responder: Arc::new(responder),
    };
    let app = Router::new().fallback(mock_handler).with_state(state.clone());
    let addr = spawn(app).await;
    Mock {
        addr,
        calls: state.calls,
        log: state.log,
    }
}

pub async fn spawn(app: Router) -> SocketAddr {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        axum::serve(listener, app).await.unwrap();
    });
    addr
}

pub fn chat_reply(content: &str) -> String {
    json!({
        "id": "mock",
        "object": "chat.completion",
        "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}]
    })
    .to_string()
}

pub fn completion_reply(text: &str) -> String {
    json!({
        "id": "mock",
        "object": "text_completion",
        "choices": [{"index": 0, "text": text, "finish_reason": "stop"}]
    })
    .to_string()
}

/// Checks the RFC 7946 rules that apply to a FeatureCollection of Points,
/// plus the layer's property schema.
pub fn validate_geojson(v: &Value) -> Result<usize, String> {
    let obj = v.as_object().ok_or("top level is not an object")?;
    if obj.get("type") != Some(&json!("FeatureCollection")) {
        return Err("type is not FeatureCollection".into());
    }
    if obj.contains_key("crs") {
        return Err("crs member is not allowed".into());
    }
    let features = obj
        .get("features")
        .and_then(Value::as_array)
        .ok_or("features is not an array")?;
    for (i, f) in features.iter().enumerate() {
        let f = f.as_object().ok_or(format!("feature {i} is not an object"))?;
        if f.get("type") != Some(&json!("Feature")) {
            return Err(format!("feature {i}: type is not Feature"));
        }
        let props = f.get("properties").ok_or(format!("feature {i}: no properties member"))?;
        let g = f
            .get("geometry")
            .and_then(Value::as_object)
            .ok_or(format!("feature {i}: geometry is not an object"))?;
        if g.get("type") != Some(&json!("Point")) {
            return Err(format!("feature {i}: geometry is not a Point"));
        }
        let c = g
            .get("coordinates")
            .and_then(Value::as_array)
            .ok_or(format!("feature {i}: coordinates missing"))?;
        if !(2..=3).contains(&c.len()) {
            return Err(format!("feature {i}: position has {} elements", c.len()));
        }
        let nums: Vec<f64> = c
            .iter()
            .map(|x| x.as_f64().ok_or(format!("feature {i}: non-numeric coordinate")))
            .collect::<Result<_, _>>()?;
        if !(-180.0..=180.0).contains(&nums[0]) || !(-90.0..=90.0).contains(&nums[1]) {
            return Err(format!("feature {i}: position {:?} out of lon/lat range", nums));
        }
        let props = props
            .as_object()
            .ok_or(format!("feature {i}: properties is not an object"))?;
        if !props.get("preprompt_id").is_some_and(Value::is_string) {
            return Err(format!("feature {i}: preprompt_id missing"));
        }
        let color = props
            .get("color")
            .and_then(Value::as_str)
            .ok_or(format!("feature {i}: color missing"))?;
        let hex_ok = color.len() == 7
            && color.starts_with('#')
            && color[1..].chars().all(|ch| ch.is_ascii_digit() || ('A'..='F').contains(&ch));
        if !hex_ok {
            return Err(format!("feature {i}: color `{color}` is not #RRGGBB"));
        }
        for k in ["x2d", "y2d"] {
            if !props.get(k).and_then(Value::as_f64).is_some_and(f64::is_finite) {
                return Err(format!("feature {i}: {k} is not a finite number"));
            }
        }
    }
    Ok(features.len())
}
