//! OSM element model and geometry assembly.
//!
//! [`OsmGraph`] holds nodes, ways and relations exactly as parsed. Call
//! [`assemble_features`] to turn it into a [`FeatureSet`] of tagged points,
//! polylines and polygons (multipolygon and administrative boundary
//! relations are stitched into rings with holes).

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::geo::{BboxXy, LatLon, Xy};

pub type ElementId = i64;
pub type Tags = BTreeMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    Node,
    Way,
    Relation,
}

impl ElementKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ElementKind::Node => "node",
            ElementKind::Way => "way",
            ElementKind::Relation => "relation",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "node" => Some(ElementKind::Node),
            "way" => Some(ElementKind::Way),
            "relation" => Some(ElementKind::Relation),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: ElementId,
    pub lat: f64,
    pub lon: f64,
    pub tags: Tags,
}

impl Node {
    pub fn pos(&self) -> LatLon {
        LatLon::new(self.lat, self.lon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Way {
    pub id: ElementId,
    pub nodes: Vec<ElementId>,
    pub tags: Tags,
    /// Set by [`OsmGraph::resolve`] when a referenced node is missing.
    #[serde(default)]
    pub incomplete: bool,
}

impl Way {
    pub fn is_closed(&self) -> bool {
        self.nodes.len() >= 4 && self.nodes.first() == self.nodes.last()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Member {
    pub kind: ElementKind,
    pub reference: ElementId,
    pub role: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relation {
    pub id: ElementId,
    pub members: Vec<Member>,
    pub tags: Tags,
}

/// One line of the rejects report: `{kind, id, reason}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectRecord {
    pub kind: ElementKind,
    pub id: ElementId,
    pub reason: String,
}

impl RejectRecord {
    pub fn new(kind: ElementKind, id: ElementId, reason: impl Into<String>) -> Self {
        Self {
            kind,
            id,
            reason: reason.into(),
        }
    }
}

/// Parsed OSM elements keyed by id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OsmGraph {
    pub nodes: BTreeMap<ElementId, Node>,
    pub ways: BTreeMap<ElementId, Way>,
    pub relations: BTreeMap<ElementId, Relation>,
}

impl OsmGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty() && self.ways.is_empty() && self.relations.is_empty()
    }

    pub fn element_count(&self) -> usize {
        self.nodes.len() + self.ways.len() + self.relations.len()
    }

    /// Inserts a node, rejecting out-of-range coordinates and duplicate ids.
    pub fn insert_node(&mut self, node: Node) -> Result<(), RejectRecord> {
        if !node.pos().is_valid() {
            return Err(RejectRecord::new(
                ElementKind::Node,
                node.id,
                format!("coordinate ({}, {}) out of range", node.lat, node.lon),
            ));
        }
        if self.nodes.contains_key(&node.id) {
            return Err(RejectRecord::new(ElementKind::Node, node.id, "duplicate id"));
        }
        self.nodes.insert(node.id, node);
        Ok(())
    }

    pub fn insert_way(&mut self, way: Way) -> Result<(), RejectRecord> {
        if self.ways.contains_key(&way.id) {
            return Err(RejectRecord::new(ElementKind::Way, way.id, "duplicate id"));
        }
        self.ways.insert(way.id, way);
        Ok(())
    }

    pub fn insert_relation(&mut self, rel: Relation) -> Result<(), RejectRecord> {
        if self.relations.contains_key(&rel.id) {
            return Err(RejectRecord::new(
                ElementKind::Relation,
                rel.id,
                "duplicate id",
            ));
        }
        self.relations.insert(rel.id, rel);
        Ok(())
    }

    /// Flags every way that references a node absent from the graph.
    pub fn resolve(&mut self) {
        let nodes = &self.nodes;
        for way in self.ways.values_mut() {
            way.incomplete = way.nodes.iter().any(|id| !nodes.contains_key(id));
        }
    }

    fn way_coords(&self, way: &Way) -> Option<Vec<LatLon>> {
        way.nodes
            .iter()
            .map(|id| self.nodes.get(id).map(Node::pos))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Geometry {
    Point {
        at: LatLon,
    },
    Polyline {
        vertices: Vec<LatLon>,
    },
    /// Closed rings (first vertex repeated last), outer ring has ≥ 4 vertices.
    Polygon {
        outer: Vec<LatLon>,
        holes: Vec<Vec<LatLon>>,
    },
}

impl Geometry {
    /// The node itself, or the vertex average of a polyline / outer ring
    /// (closing vertex excluded).
    pub fn representative_point(&self) -> LatLon {
        let verts: &[LatLon] = match self {
            Geometry::Point { at } => return *at,
            Geometry::Polyline { vertices } => vertices,
            Geometry::Polygon { outer, .. } => {
                if outer.len() > 1 && outer.first() == outer.last() {
                    &outer[..outer.len() - 1]
                } else {
                    outer
                }
            }
        };
        let n = verts.len().max(1) as f64;
        let (lat, lon) = verts
            .iter()
            .fold((0.0, 0.0), |(a, b), p| (a + p.lat, b + p.lon));
        LatLon::new(lat / n, lon / n)
    }

    pub fn vertices(&self) -> impl Iterator<Item = &LatLon> {
        let (a, b): (&[LatLon], &[Vec<LatLon>]) = match self {
            Geometry::Point { at } => (core::slice::from_ref(at), &[]),
            Geometry::Polyline { vertices } => (vertices, &[]),
            Geometry::Polygon { outer, holes } => (outer, holes),
        };
        a.iter().chain(b.iter().flatten())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SourceId {
    pub kind: ElementKind,
    pub id: ElementId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub geometry: Geometry,
    pub tags: Tags,
    pub source: SourceId,
}

impl Feature {
    pub fn tag(&self, key: &str) -> Option<&str> {
        self.tags.get(key).map(String::as_str)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub features: Vec<Feature>,
}

impl FeatureSet {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Feature> {
        self.features.iter()
    }

    /// Lat/lon bounding box `(south-west, north-east)` of all vertices.
    pub fn bounds(&self) -> Option<(LatLon, LatLon)> {
        let mut it = self.features.iter().flat_map(|f| f.geometry.vertices());
        let first = *it.next()?;
        let (mut sw, mut ne) = (first, first);
        for p in it {
            sw.lat = sw.lat.min(p.lat);
            sw.lon = sw.lon.min(p.lon);
            ne.lat = ne.lat.max(p.lat);
            ne.lon = ne.lon.max(p.lon);
        }
        Some((sw, ne))
    }
}

/// Result of [`assemble_features`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Assembly {
    pub features: FeatureSet,
    pub rejects: Vec<RejectRecord>,
}

const AREA_KEYS: [&str; 4] = ["building", "landuse", "leisure", "amenity"];

/// Whether a closed way is an area rather than a closed line.
pub fn implies_area(tags: &Tags) -> bool {
    match tags.get("area").map(String::as_str) {
        Some("yes") => return true,
        Some("no") => return false,
        _ => {}
    }
    AREA_KEYS
        .iter()
        .any(|k| tags.get(*k).is_some_and(|v| v != "no"))
}

fn is_area_relation(tags: &Tags) -> bool {
    matches!(tags.get("type").map(String::as_str), Some("multipolygon"))
        || matches!(
            tags.get("boundary").map(String::as_str),
            Some("administrative")
        )
}

/// Old-style multipolygon: the relation carries no tags besides `type`, so
/// the area tags live on the outer ways.
fn is_untagged_multipolygon(rel: &Relation) -> bool {
    rel.tags.get("type").map(String::as_str) == Some("multipolygon")
        && rel.tags.keys().all(|k| k == "type")
}

/// Builds tagged geometries from a parsed graph.
pub fn assemble_features(graph: &OsmGraph) -> Assembly {
    let mut out = Assembly::default();

    let mut suppressed: BTreeSet<ElementId> = BTreeSet::new();
    for rel in graph.relations.values() {
        if is_untagged_multipolygon(rel) {
            suppressed.extend(
                rel.members
                    .iter()
                    .filter(|m| m.kind == ElementKind::Way && is_outer_role(&m.role))
                    .map(|m| m.reference),
            );
        }
    }

    for node in graph.nodes.values() {
        if node.tags.is_empty() {
            continue;
        }
        out.features.features.push(Feature {
            geometry: Geometry::Point { at: node.pos() },
            tags: node.tags.clone(),
            source: SourceId {
                kind: ElementKind::Node,
                id: node.id,
            },
        });
    }

    for way in graph.ways.values() {
        if way.tags.is_empty() || suppressed.contains(&way.id) {
            continue;
        }
        let coords = match (way.incomplete, graph.way_coords(way)) {
            (false, Some(c)) => c,
            _ => {
                out.rejects.push(RejectRecord::new(
                    ElementKind::Way,
                    way.id,
                    "incomplete way: referenced node missing",
                ));
                continue;
            }
        };
        if coords.len() < 2 {
            out.rejects.push(RejectRecord::new(
                ElementKind::Way,
                way.id,
                "way has fewer than 2 nodes",
            ));
            continue;
        }
        let geometry = if way.is_closed() && implies_area(&way.tags) {
            Geometry::Polygon {
                outer: coords,
                holes: Vec::new(),
            }
        } else {
            Geometry::Polyline { vertices: coords }
        };
        out.features.features.push(Feature {
            geometry,
            tags: way.tags.clone(),
            source: SourceId {
                kind: ElementKind::Way,
                id: way.id,
            },
        });
    }

    for rel in graph.relations.values() {
        if is_area_relation(&rel.tags) {
            assemble_relation(graph, rel, &mut out);
        }
    }

    out
}

fn is_outer_role(role: &str) -> bool {
    role == "outer" || role.is_empty()
}

fn assemble_relation(graph: &OsmGraph, rel: &Relation, out: &mut Assembly) {
    let reject = |reason: String| RejectRecord::new(ElementKind::Relation, rel.id, reason);
    let mut outer_ways: Vec<&Way> = Vec::new();
    let mut inner_ways: Vec<&Way> = Vec::new();
    for m in rel.members.iter().filter(|m| m.kind == ElementKind::Way) {
        let inner = m.role == "inner";
        if !inner && !is_outer_role(&m.role) {
            continue;
        }
        match graph.ways.get(&m.reference) {
            Some(w) if !w.incomplete => {
                if inner {
                    inner_ways.push(w)
                } else {
                    outer_ways.push(w)
                }
            }
            Some(_) => {
                out.rejects.push(reject(format!(
                    "member way {} is incomplete",
                    m.reference
                )));
                return;
            }
            None => {
                out.rejects.push(reject(format!(
                    "member way {} missing; ring cannot be closed",
                    m.reference
                )));
                return;
            }
        }
    }
    if outer_ways.is_empty() {
        out.rejects.push(reject("no outer ring members".to_string()));
        return;
    }

    let outer_rings = match stitch_rings(&outer_ways) {
        Ok(r) => r,
        Err(e) => {
            out.rejects.push(reject(format!("unclosable outer ring: {e}")));
            return;
        }
    };
    let inner_rings = match stitch_rings(&inner_ways) {
        Ok(r) => r,
        Err(e) => {
            out.rejects.push(reject(format!("unclosable inner ring: {e}")));
            return;
        }
    };

    let to_coords = |ids: &[ElementId]| -> Vec<LatLon> {
        ids.iter().map(|id| graph.nodes[id].pos()).collect()
    };
    let outers: Vec<Vec<LatLon>> = outer_rings.iter().map(|r| to_coords(r)).collect();
    let mut holes: Vec<Vec<Vec<LatLon>>> = alloc::vec![Vec::new(); outers.len()];

    for ring in inner_rings.iter().map(|r| to_coords(r)) {
        let probe = ring[0];
        let rb = degree_bbox(&ring);
        let host = outers
            .iter()
            .enumerate()
            .filter(|(_, o)| degree_bbox(o).contains_bbox(&rb) && point_in_ring(probe, o))
            .min_by(|(_, a), (_, b)| {
                degree_area(a)
                    .partial_cmp(&degree_area(b))
                    .unwrap_or(core::cmp::Ordering::Equal)
            })
            .map(|(i, _)| i);
        match host {
            Some(i) => holes[i].push(ring),
            None => out
                .rejects
                .push(reject("inner ring not inside any outer ring; hole dropped".to_string())),
        }
    }

    let mut tags = Tags::new();
    for w in &outer_ways {
        tags.extend(w.tags.iter().map(|(k, v)| (k.clone(), v.clone())));
    }
    tags.extend(rel.tags.iter().map(|(k, v)| (k.clone(), v.clone())));

    for (outer, holes) in outers.into_iter().zip(holes) {
        out.features.features.push(Feature {
            geometry: Geometry::Polygon { outer, holes },
            tags: tags.clone(),
            source: SourceId {
                kind: ElementKind::Relation,
                id: rel.id,
            },
        });
    }
}

/// Joins way node sequences end to end into closed rings.
fn stitch_rings(ways: &[&Way]) -> Result<Vec<Vec<ElementId>>, String> {
    let mut pending: Vec<Vec<ElementId>> = ways
        .iter()
        .filter(|w| !w.nodes.is_empty())
        .map(|w| w.nodes.clone())
        .collect();
    let mut rings = Vec::new();
    while let Some(mut ring) = pending.pop() {
        while ring.first() != ring.last() || ring.len() < 2 {
            let tail = *ring.last().expect("nonempty");
            let pos = pending
                .iter()
                .position(|seg| seg.first() == Some(&tail) || seg.last() == Some(&tail));
            let Some(pos) = pos else {
                return Err(format!(
                    "no member continues the chain at node {tail}"
                ));
            };
            let mut seg = pending.swap_remove(pos);
            if seg.first() != Some(&tail) {
                seg.reverse();
            }
            ring.extend_from_slice(&seg[1..]);
        }
        if ring.len() < 4 {
            return Err(format!("ring with only {} nodes", ring.len()));
        }
        rings.push(ring);
    }
    // pop() reverses member order; restore it for stable output.
    rings.reverse();
    Ok(rings)
}

fn as_xy(p: LatLon) -> Xy {
    Xy::new(p.lon, p.lat)
}

fn degree_bbox(ring: &[LatLon]) -> BboxXy {
    let pts: Vec<Xy> = ring.iter().copied().map(as_xy).collect();
    BboxXy::of(&pts).expect("rings are nonempty")
}

fn degree_area(ring: &[LatLon]) -> f64 {
    let pts: Vec<Xy> = ring.iter().copied().map(as_xy).collect();
    libm::fabs(crate::geo::ring_signed_area(&pts))
}

/// Even-odd ray casting in lon/lat space.
pub(crate) fn point_in_ring(p: LatLon, ring: &[LatLon]) -> bool {
    let (x, y) = (p.lon, p.lat);
    let mut inside = false;
    let n = ring.len();
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = (ring[i].lon, ring[i].lat);
        let (xj, yj) = (ring[j].lon, ring[j].lat);
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}
