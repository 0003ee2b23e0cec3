//! Feature store: the assembled feature set of every ingested source, kept
//! as a versioned JSON snapshot so `describe` and `serve` skip re-parsing.

use std::fs;
use std::path::{Path, PathBuf};

use cartoprompt_core::osm::RejectRecord;
use cartoprompt_core::{
    assemble_features, build_descriptor, render_preprompt, AreaDescriptor, DescriptorConfig,
    FeatureSet, LatLon, OsmGraph, VerbalizerRules,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::osm_io::{parse_osm_auto, ParsedOsm};

pub const SNAPSHOT_VERSION: u32 = 1;

/// Smallest and largest radius accepted at the API boundary.
pub const RADIUS_CLAMP_M: (f64, f64) = (50.0, 2000.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStore {
    pub version: u32,
    pub sources: Vec<String>,
    pub features: FeatureSet,
    /// `[south-west, north-east]` of all feature vertices.
    pub bounds: Option<(LatLon, LatLon)>,
    pub rejects: Vec<RejectRecord>,
    pub unknown_elements: usize,
}

/// What `describe` prints and `/v1/preprompt` returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Description {
    pub descriptor: AreaDescriptor,
    pub preprompt: String,
}

impl Description {
    /// The exact bytes shared by the CLI and the HTTP endpoint.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("descriptor always serializes")
    }
}

/// Clamps a requested radius into [`RADIUS_CLAMP_M`], falling back to the
/// configured default.
pub fn effective_radius(requested: Option<f64>, default: f64) -> f64 {
    requested
        .unwrap_or(default)
        .clamp(RADIUS_CLAMP_M.0, RADIUS_CLAMP_M.1)
}

fn merge(into: &mut ParsedOsm, from: ParsedOsm) {
    into.rejects.extend(from.rejects);
    into.unknown_elements += from.unknown_elements;
    let OsmGraph {
        nodes,
        ways,
        relations,
    } = from.graph;
    for n in nodes.into_values() {
        if into.graph.nodes.get(&n.id) != Some(&n) {
            if let Err(r) = into.graph.insert_node(n) {
                into.rejects.push(r);
            }
        }
    }
    for mut w in ways.into_values() {
        w.incomplete = false;
        let same = into.graph.ways.get(&w.id).map(|o| (&o.nodes, &o.tags)) == Some((&w.nodes, &w.tags));
        if !same {
            if let Err(r) = into.graph.insert_way(w) {
                into.rejects.push(r);
            }
        }
    }
    for r in relations.into_values() {
        if into.graph.relations.get(&r.id) != Some(&r) {
            if let Err(rej) = into.graph.insert_relation(r) {
                into.rejects.push(rej);
            }
        }
    }
}

impl FeatureStore {
    /// Merges parsed sources into one graph (identical duplicates collapse,
    /// conflicting ones are rejected) and assembles it.
    pub fn from_parsed(sources: Vec<String>, parsed: Vec<ParsedOsm>) -> Self {
        let mut all = ParsedOsm::default();
        for p in parsed {
            merge(&mut all, p);
        }
        all.graph.resolve();
        let assembly = assemble_features(&all.graph);
        let mut rejects = all.rejects;
        rejects.extend(assembly.rejects);
        let features = assembly.features;
        FeatureStore {
            version: SNAPSHOT_VERSION,
            sources,
            bounds: features.bounds(),
            features,
            rejects,
            unknown_elements: all.unknown_elements,
        }
    }

    /// Reads and assembles OSM XML or Overpass JSON files.
    pub fn ingest_files(paths: &[PathBuf]) -> Result<Self> {
        let mut parsed = Vec::with_capacity(paths.len());
        for p in paths {
            let bytes = fs::read(p).map_err(|e| Error::io(p, e))?;
            let one = parse_osm_auto(&bytes).map_err(|e| match e {
                Error::Xml { offset, message } => Error::Xml {
                    offset,
                    message: format!("{}: {message}", p.display()),
                },
                other => other,
            })?;
            parsed.push(one);
        }
        Ok(Self::from_parsed(
            paths.iter().map(|p| p.display().to_string()).collect(),
            parsed,
        ))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec(self).map_err(|e| Error::Format(e.to_string()))?;
        write_atomic(path, &json)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let store: FeatureStore = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if store.version != SNAPSHOT_VERSION {
            return Err(Error::Format(format!(
                "{}: snapshot version {} is not supported (expected {SNAPSHOT_VERSION}); re-run `ingest`",
                path.display(),
                store.version
            )));
        }
        Ok(store)
    }

    /// Whether `p` lies inside the data bounding box.
    pub fn covers(&self, p: LatLon) -> bool {
        self.bounds.is_some_and(|(sw, ne)| {
            p.lat >= sw.lat && p.lat <= ne.lat && p.lon >= sw.lon && p.lon <= ne.lon
        })
    }

    pub fn describe(
        &self,
        center: LatLon,
        radius_m: f64,
        cfg: &DescriptorConfig,
        rules: &VerbalizerRules,
    ) -> Result<Description> {
        let circle = cartoprompt_core::CircleSpec::new(center, radius_m)?;
        let descriptor = build_descriptor(&self.features, &circle, cfg)?;
        let preprompt = render_preprompt(&descriptor, rules);
        Ok(Description {
            descriptor,
            preprompt,
        })
    }
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
