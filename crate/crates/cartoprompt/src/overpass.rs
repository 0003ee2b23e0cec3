//! Overpass API client.

use std::time::Duration;

use cartoprompt_core::geo::unproject_local;
use cartoprompt_core::{CircleSpec, LatLon, Xy};

use crate::error::{Error, Result};

/// South, west, north, east in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bbox {
    pub south: f64,
    pub west: f64,
    pub north: f64,
    pub east: f64,
}

impl Bbox {
    /// Square box of side `2·half_side_m` centred on `center`.
    pub fn around(center: LatLon, half_side_m: f64) -> Result<Self> {
        let c = CircleSpec::new(center, half_side_m.max(1.0))?;
        let sw = unproject_local(&c, Xy::new(-half_side_m, -half_side_m));
        let ne = unproject_local(&c, Xy::new(half_side_m, half_side_m));
        Ok(Bbox {
            south: sw.lat,
            west: sw.lon,
            north: ne.lat,
            east: ne.lon,
        })
    }
}

/// Overpass QL for everything inside `bbox` plus the administrative
/// relations enclosing `center`, with all referenced ways and nodes.
pub fn area_query(center: LatLon, bbox: Bbox, timeout_s: u32) -> String {
    let b = format!(
        "{:.7},{:.7},{:.7},{:.7}",
        bbox.south, bbox.west, bbox.north, bbox.east
    );
    format!(
        "[out:json][timeout:{timeout_s}];\n\
         is_in({:.7},{:.7})->.enclosing;\n\
         (\n  nwr({b});\n  rel(pivot.enclosing)[\"boundary\"=\"administrative\"];\n);\n\
         (._;>;);\n\
         out body;\n",
        center.lat, center.lon
    )
}

/// POSTs `query` to an Overpass endpoint and returns the raw body.
pub async fn fetch_overpass(query: &str, endpoint: &str, timeout: Duration) -> Result<Vec<u8>> {
    let client = reqwest::Client::builder().timeout(timeout).build()?;
    let resp = client
        .post(endpoint)
        .header("content-type", "text/plain; charset=utf-8")
        .body(query.to_string())
        .send()
        .await
        .map_err(|e| classify(e, endpoint, timeout))?;
    let status = resp.status();
    let body = resp
        .bytes()
        .await
        .map_err(|e| classify(e, endpoint, timeout))?;
    if !status.is_success() {
        return Err(Error::HttpStatus {
            status: status.as_u16(),
            url: endpoint.to_string(),
            body: String::from_utf8_lossy(&body).chars().take(500).collect(),
        });
    }
    Ok(body.to_vec())
}

pub(crate) fn classify(e: reqwest::Error, url: &str, timeout: Duration) -> Error {
    if e.is_timeout() {
        Error::Timeout {
            url: url.to_string(),
            seconds: timeout.as_secs_f64(),
        }
    } else {
        Error::Transport(e.to_string())
    }
}
