//! Word-vector loading, the embedding batch job and its artifacts.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use cartoprompt_core::curate::PrepromptRecord;
use cartoprompt_core::embed::{
    colorize, embed_text, project_2d, EmbeddingPoint, Lexicon, ProjectionConfig,
};
use cartoprompt_core::LatLon;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};

/// Reads a `token v1 … vd` text file.
pub fn load_word_vectors(path: &Path) -> Result<Lexicon> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = Vec::new();
    for line in BufReader::new(file).lines() {
        lines.push(line.map_err(|e| Error::io(path, e))?);
    }
    Ok(Lexicon::from_lines(lines.iter().map(String::as_str))?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRun {
    pub points: Vec<EmbeddingPoint>,
    pub warnings: Vec<String>,
}

/// Embeds, projects and colours every record, in input order.
pub fn run_embedding(
    records: &[PrepromptRecord],
    lexicon: &Lexicon,
    cfg: &ProjectionConfig,
) -> Result<EmbeddingRun> {
    let mut warnings = Vec::new();
    let mut vectors = Vec::with_capacity(records.len());
    for r in records {
        let e = embed_text(lexicon, &r.preprompt);
        if e.all_oov() {
            warnings.push(format!(
                "{}: no token found in the lexicon, using the zero vector",
                r.preprompt_id
            ));
        }
        vectors.push(e.vector);
    }
    let projection = project_2d(&vectors, cfg)?;
    warnings.extend(projection.warnings);
    let colors = colorize(&projection.points);
    let points = records
        .iter()
        .zip(vectors)
        .zip(projection.points)
        .zip(colors)
        .map(|(((r, vector), xy2d), color)| EmbeddingPoint {
            preprompt_id: r.preprompt_id.clone(),
            location: LatLon::new(r.lat, r.lon),
            vector,
            xy2d,
            color,
        })
        .collect();
    Ok(EmbeddingRun { points, warnings })
}

/// RFC 7946 FeatureCollection of coloured points, coordinates `[lon, lat]`.
pub fn emit_geojson(points: &[EmbeddingPoint]) -> String {
    let features: Vec<Value> = points
        .iter()
        .map(|p| {
            json!({
                "type": "Feature",
                "geometry": {
                    "type": "Point",
                    "coordinates": [p.location.lon, p.location.lat],
                },
                "properties": {
                    "preprompt_id": p.preprompt_id,
                    "color": p.color.hex(),
                    "x2d": p.xy2d[0],
                    "y2d": p.xy2d[1],
                },
            })
        })
        .collect();
    let fc = json!({ "type": "FeatureCollection", "features": features });
    serde_json::to_string_pretty(&fc).expect("geojson serializes")
}

/// One line of the projection cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRow {
    pub preprompt_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vec<f64>>,
    pub x2d: f64,
    pub y2d: f64,
    pub color: String,
}

pub fn write_projection_cache<W: Write>(
    mut w: W,
    points: &[EmbeddingPoint],
    with_vectors: bool,
) -> std::io::Result<()> {
    for p in points {
        let row = CacheRow {
            preprompt_id: p.preprompt_id.clone(),
            vector: with_vectors.then(|| p.vector.clone()),
            x2d: p.xy2d[0],
            y2d: p.xy2d[1],
            color: p.color.hex(),
        };
        serde_json::to_writer(&mut w, &row)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_projection_cache(text: &str) -> Result<Vec<CacheRow>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| Error::Format(format!("projection cache line {}: {e}", i + 1)))
        })
        .collect()
}

/// Reads a JSONL file of [`PrepromptRecord`]s.
pub fn read_preprompts(path: &Path) -> Result<Vec<PrepromptRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| {
                Error::Format(format!("{} line {}: {e}", path.display(), i + 1))
            })
        })
        .collect()
}
