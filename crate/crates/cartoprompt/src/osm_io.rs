//! OSM XML v0.6 and Overpass JSON readers and writers, plus the rejects report.

use std::fmt::Write as _;
use std::io::Write;

use cartoprompt_core::osm::{ElementId, ElementKind, Member, Node, RejectRecord, Relation, Tags, Way};
use cartoprompt_core::OsmGraph;
use quick_xml::escape::escape;
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};

/// A parsed graph with everything that was dropped on the way in.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedOsm {
    pub graph: OsmGraph,
    pub rejects: Vec<RejectRecord>,
    /// Elements of a kind this reader does not know, skipped.
    pub unknown_elements: usize,
}

impl ParsedOsm {
    fn finish(mut self) -> Self {
        self.graph.resolve();
        self
    }

    fn add_node(&mut self, node: Node) {
        if let Err(r) = self.graph.insert_node(node) {
            self.rejects.push(r);
        }
    }

    fn add_way(&mut self, way: Way) {
        if let Err(r) = self.graph.insert_way(way) {
            self.rejects.push(r);
        }
    }

    fn add_relation(&mut self, rel: Relation) {
        if let Err(r) = self.graph.insert_relation(rel) {
            self.rejects.push(r);
        }
    }
}

const METADATA: [&str; 3] = ["bounds", "meta", "note"];

enum Open {
    Node(Node),
    Way(Way),
    Relation(Relation),
    Skipped,
}

struct Attrs(Vec<(String, String)>);

impl Attrs {
    fn read(e: &BytesStart<'_>, offset: u64) -> Result<Self> {
        let mut out = Vec::new();
        for a in e.attributes() {
            let a = a.map_err(|err| Error::Xml {
                offset,
                message: err.to_string(),
            })?;
            let key = String::from_utf8_lossy(a.key.as_ref()).into_owned();
            let value = a
                .unescape_value()
                .map_err(|err| Error::Xml {
                    offset,
                    message: err.to_string(),
                })?
                .into_owned();
            out.push((key, value));
        }
        Ok(Attrs(out))
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> std::result::Result<T, String> {
        let raw = self.get(key).ok_or_else(|| format!("missing {key}"))?;
        raw.trim().parse().map_err(|_| format!("invalid {key} `{raw}`"))
    }
}

fn element_id(kind: ElementKind, attrs: &Attrs) -> std::result::Result<ElementId, RejectRecord> {
    attrs.parse("id").map_err(|why| RejectRecord::new(kind, 0, why))
}

fn open_element(name: &str, attrs: &Attrs, out: &mut ParsedOsm) -> Open {
    let kind = match ElementKind::parse(name) {
        Some(k) => k,
        None => {
            if !METADATA.contains(&name) {
                out.unknown_elements += 1;
            }
            return Open::Skipped;
        }
    };
    let id = match element_id(kind, attrs) {
        Ok(id) => id,
        Err(r) => {
            out.rejects.push(r);
            return Open::Skipped;
        }
    };
    match kind {
        ElementKind::Node => {
            let coords = attrs
                .parse::<f64>("lat")
                .and_then(|lat| attrs.parse::<f64>("lon").map(|lon| (lat, lon)));
            match coords {
                Ok((lat, lon)) => Open::Node(Node {
                    id,
                    lat,
                    lon,
                    tags: Tags::new(),
                }),
                Err(why) => {
                    out.rejects.push(RejectRecord::new(kind, id, why));
                    Open::Skipped
                }
            }
        }
        ElementKind::Way => Open::Way(Way {
            id,
            nodes: Vec::new(),
            tags: Tags::new(),
            incomplete: false,
        }),
        ElementKind::Relation => Open::Relation(Relation {
            id,
            members: Vec::new(),
            tags: Tags::new(),
        }),
    }
}

/// Applies a child element (`tag`, `nd`, `member`) to the open element.
/// Returns a rejection reason when the child makes the element unusable.
fn apply_child(open: &mut Open, name: &str, attrs: &Attrs, unknown: &mut usize) -> Option<String> {
    match (open, name) {
        (Open::Skipped, _) => None,
        (Open::Node(Node { tags, .. }), "tag")
        | (Open::Way(Way { tags, .. }), "tag")
        | (Open::Relation(Relation { tags, .. }), "tag") => {
            match (attrs.get("k"), attrs.get("v")) {
                (Some(k), Some(v)) => {
                    tags.insert(k.to_string(), v.to_string());
                    None
                }
                _ => Some("tag without k or v".into()),
            }
        }
        (Open::Way(w), "nd") => match attrs.parse("ref") {
            Ok(r) => {
                w.nodes.push(r);
                None
            }
            Err(why) => Some(format!("nd: {why}")),
        },
        (Open::Relation(r), "member") => {
            let kind = attrs.get("type").and_then(ElementKind::parse);
            match (kind, attrs.parse::<ElementId>("ref")) {
                (Some(kind), Ok(reference)) => {
                    r.members.push(Member {
                        kind,
                        reference,
                        role: attrs.get("role").unwrap_or("").to_string(),
                    });
                    None
                }
                (None, _) => Some("member with unknown type".into()),
                (_, Err(why)) => Some(format!("member: {why}")),
            }
        }
        _ => {
            *unknown += 1;
            None
        }
    }
}

fn close(open: Open, rejected: Option<String>, out: &mut ParsedOsm) {
    let (kind, id) = match &open {
        Open::Node(n) => (ElementKind::Node, n.id),
        Open::Way(w) => (ElementKind::Way, w.id),
        Open::Relation(r) => (ElementKind::Relation, r.id),
        Open::Skipped => return,
    };
    if let Some(why) = rejected {
        out.rejects.push(RejectRecord::new(kind, id, why));
        return;
    }
    match open {
        Open::Node(n) => out.add_node(n),
        Open::Way(w) => out.add_way(w),
        Open::Relation(r) => out.add_relation(r),
        Open::Skipped => {}
    }
}

/// Parses an OSM XML v0.6 document.
pub fn parse_osm_xml(bytes: &[u8]) -> Result<ParsedOsm> {
    let mut reader = Reader::from_reader(bytes);
    let mut out = ParsedOsm::default();
    let mut depth = 0usize;
    let mut seen_root = false;
    let mut current: Option<(Open, Option<String>)> = None;

    loop {
        let offset = reader.buffer_position();
        let event = reader.read_event().map_err(|e| Error::Xml {
            offset: reader.error_position(),
            message: e.to_string(),
        })?;
        let (start, empty) = match &event {
            Event::Start(e) => (Some(e), false),
            Event::Empty(e) => (Some(e), true),
            Event::End(_) => {
                depth = depth.saturating_sub(1);
                if depth == 1 {
                    if let Some((open, why)) = current.take() {
                        close(open, why, &mut out);
                    }
                }
                continue;
            }
            Event::Eof => {
                if depth > 0 || !seen_root {
                    return Err(Error::Xml {
                        offset: reader.buffer_position(),
                        message: if seen_root {
                            "unexpected end of document".into()
                        } else {
                            "no <osm> root element".into()
                        },
                    });
                }
                break;
            }
            Event::Text(t) => {
                if depth == 0 && !t.iter().all(u8::is_ascii_whitespace) {
                    return Err(Error::Xml {
                        offset,
                        message: "text outside the root element".into(),
                    });
                }
                continue;
            }
            _ => continue,
        };
        let e = start.expect("start or empty event");
        let name = String::from_utf8_lossy(e.local_name().as_ref()).into_owned();
        let attrs = Attrs::read(e, offset)?;
        match depth {
            0 => {
                if seen_root {
                    return Err(Error::Xml {
                        offset,
                        message: "more than one root element".into(),
                    });
                }
                if name != "osm" {
                    return Err(Error::Format(format!("root element is <{name}>, expected <osm>")));
                }
                seen_root = true;
            }
            1 => {
                let open = open_element(&name, &attrs, &mut out);
                if empty {
                    close(open, None, &mut out);
                } else {
                    current = Some((open, None));
                }
            }
            2 => {
                if let Some((open, why)) = current.as_mut() {
                    if let Some(reason) = apply_child(open, &name, &attrs, &mut out.unknown_elements) {
                        why.get_or_insert(reason);
                    }
                }
            }
            _ => out.unknown_elements += 1,
        }
        if !empty {
            depth += 1;
        }
    }
    Ok(out.finish())
}

fn tags_of(v: &Value) -> std::result::Result<Tags, String> {
    match v.get("tags") {
        None | Some(Value::Null) => Ok(Tags::new()),
        Some(Value::Object(m)) => m
            .iter()
            .map(|(k, v)| match v {
                Value::String(s) => Ok((k.clone(), s.clone())),
                other => Ok((k.clone(), other.to_string())),
            })
            .collect(),
        Some(_) => Err("tags is not an object".into()),
    }
}

fn json_element(el: &Value, out: &mut ParsedOsm) {
    let Some(kind) = el.get("type").and_then(Value::as_str).and_then(ElementKind::parse) else {
        out.unknown_elements += 1;
        return;
    };
    let Some(id) = el.get("id").and_then(Value::as_i64) else {
        out.rejects.push(RejectRecord::new(kind, 0, "missing id"));
        return;
    };
    let tags = match tags_of(el) {
        Ok(t) => t,
        Err(why) => {
            out.rejects.push(RejectRecord::new(kind, id, why));
            return;
        }
    };
    match kind {
        ElementKind::Node => {
            let lat = el.get("lat").and_then(Value::as_f64);
            let lon = el.get("lon").and_then(Value::as_f64);
            match (lat, lon) {
                (Some(lat), Some(lon)) => out.add_node(Node { id, lat, lon, tags }),
                _ => out.rejects.push(RejectRecord::new(kind, id, "missing lat/lon")),
            }
        }
        ElementKind::Way => {
            let nodes: Option<Vec<ElementId>> = el
                .get("nodes")
                .and_then(Value::as_array)
                .map(|a| a.iter().map(Value::as_i64).collect())
                .unwrap_or(Some(Vec::new()));
            match nodes {
                Some(nodes) => out.add_way(Way {
                    id,
                    nodes,
                    tags,
                    incomplete: false,
                }),
                None => out.rejects.push(RejectRecord::new(kind, id, "invalid node list")),
            }
        }
        ElementKind::Relation => {
            let members: Option<Vec<Member>> = el
                .get("members")
                .and_then(Value::as_array)
                .map(|a| {
                    a.iter()
                        .map(|m| {
                            Some(Member {
                                kind: ElementKind::parse(m.get("type")?.as_str()?)?,
                                reference: m.get("ref")?.as_i64()?,
                                role: m.get("role").and_then(Value::as_str).unwrap_or("").to_string(),
                            })
                        })
                        .collect()
                })
                .unwrap_or(Some(Vec::new()));
            match members {
                Some(members) => out.add_relation(Relation { id, members, tags }),
                None => out.rejects.push(RejectRecord::new(kind, id, "invalid member list")),
            }
        }
    }
}

/// Parses an Overpass API JSON response (`{"elements": [...]}`).
pub fn parse_overpass_json(bytes: &[u8]) -> Result<ParsedOsm> {
    let doc: Value = serde_json::from_slice(bytes)
        .map_err(|e| Error::Format(format!("Overpass JSON: {e}")))?;
    let elements = doc
        .get("elements")
        .ok_or_else(|| Error::Format("Overpass JSON has no \"elements\" key".into()))?
        .as_array()
        .ok_or_else(|| Error::Format("\"elements\" is not an array".into()))?;
    let mut out = ParsedOsm::default();
    for el in elements {
        json_element(el, &mut out);
    }
    Ok(out.finish())
}

/// Picks the reader by content: a leading `{` means Overpass JSON.
pub fn parse_osm_auto(bytes: &[u8]) -> Result<ParsedOsm> {
    let first = bytes.iter().find(|b| !b.is_ascii_whitespace());
    if first == Some(&b'{') {
        parse_overpass_json(bytes)
    } else {
        parse_osm_xml(bytes)
    }
}

fn write_tags(s: &mut String, tags: &Tags) {
    for (k, v) in tags {
        let _ = writeln!(s, "    <tag k=\"{}\" v=\"{}\"/>", escape(k.as_str()), escape(v.as_str()));
    }
}

/// Serializes a graph as OSM XML v0.6. Elements are written in id order.
pub fn write_osm_xml(graph: &OsmGraph) -> String {
    let mut s = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<osm version=\"0.6\" generator=\"cartoprompt\">\n");
    for n in graph.nodes.values() {
        if n.tags.is_empty() {
            let _ = writeln!(s, "  <node id=\"{}\" lat=\"{}\" lon=\"{}\"/>", n.id, n.lat, n.lon);
        } else {
            let _ = writeln!(s, "  <node id=\"{}\" lat=\"{}\" lon=\"{}\">", n.id, n.lat, n.lon);
            write_tags(&mut s, &n.tags);
            s.push_str("  </node>\n");
        }
    }
    for w in graph.ways.values() {
        let _ = writeln!(s, "  <way id=\"{}\">", w.id);
        for r in &w.nodes {
            let _ = writeln!(s, "    <nd ref=\"{r}\"/>");
        }
        write_tags(&mut s, &w.tags);
        s.push_str("  </way>\n");
    }
    for r in graph.relations.values() {
        let _ = writeln!(s, "  <relation id=\"{}\">", r.id);
        for m in &r.members {
            let _ = writeln!(
                s,
                "    <member type=\"{}\" ref=\"{}\" role=\"{}\"/>",
                m.kind.as_str(),
                m.reference,
                escape(m.role.as_str())
            );
        }
        write_tags(&mut s, &r.tags);
        s.push_str("  </relation>\n");
    }
    s.push_str("</osm>\n");
    s
}

fn tags_json(tags: &Tags) -> Value {
    Value::Object(tags.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect::<Map<_, _>>())
}

/// Serializes a graph in the Overpass JSON shape.
pub fn write_overpass_json(graph: &OsmGraph) -> String {
    let mut elements = Vec::with_capacity(graph.element_count());
    for n in graph.nodes.values() {
        elements.push(json!({"type": "node", "id": n.id, "lat": n.lat, "lon": n.lon, "tags": tags_json(&n.tags)}));
    }
    for w in graph.ways.values() {
        elements.push(json!({"type": "way", "id": w.id, "nodes": w.nodes, "tags": tags_json(&w.tags)}));
    }
    for r in graph.relations.values() {
        let members: Vec<Value> = r
            .members
            .iter()
            .map(|m| json!({"type": m.kind.as_str(), "ref": m.reference, "role": m.role}))
            .collect();
        elements.push(json!({"type": "relation", "id": r.id, "members": members, "tags": tags_json(&r.tags)}));
    }
    serde_json::to_string_pretty(&json!({"version": 0.6, "generator": "cartoprompt", "elements": elements}))
        .expect("JSON values always serialize")
}

/// Writes the rejects report, one `{kind, id, reason}` object per line.
pub fn write_rejects<W: Write>(mut w: W, rejects: &[RejectRecord]) -> std::io::Result<()> {
    for r in rejects {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
