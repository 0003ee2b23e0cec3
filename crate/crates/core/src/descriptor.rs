//! Quantitative description of one circular area.
//!
//! Counting (amenities, buildings) uses representative-point membership;
//! coverage percentages use areas clipped to the circle polygon, divided by
//! the true circle area `πr²`. Every percentage and metre total is rounded
//! half away from zero.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{
    self, clip_polyline_circle, intersection_area, BboxXy, CircleSpec, GeoConfig, GeoError,
    LatLon, PolygonXy, Xy,
};
use crate::osm::{Feature, FeatureSet, Geometry};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DescriptorError {
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error("invalid descriptor config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DescriptorConfig {
    pub radius_m: f64,
    pub coverage_threshold: f64,
    pub province_admin_level: u8,
    pub district_admin_level: u8,
    pub road_key: String,
    pub rail_key: String,
    /// Landuse values left out of the coverage sentence.
    pub excluded_landuse: Vec<String>,
    pub geo: GeoConfig,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        Self {
            radius_m: 300.0,
            coverage_threshold: 0.02,
            province_admin_level: 4,
            district_admin_level: 6,
            road_key: "highway".to_string(),
            rail_key: "railway".to_string(),
            excluded_landuse: vec!["residential".to_string()],
            geo: GeoConfig::default(),
        }
    }
}

impl DescriptorConfig {
    pub fn validate(&self) -> Result<(), DescriptorError> {
        if !(self.coverage_threshold > 0.0 && self.coverage_threshold < 1.0) {
            return Err(DescriptorError::Config(alloc::format!(
                "coverage_threshold {} must lie in (0, 1)",
                self.coverage_threshold
            )));
        }
        if self.province_admin_level == self.district_admin_level {
            return Err(DescriptorError::Config(
                "province and district admin levels must differ".to_string(),
            ));
        }
        self.geo.validate()?;
        Ok(())
    }

    /// Smallest integer percentage that passes the coverage gate.
    pub fn min_coverage_pct(&self) -> u32 {
        round_half_away(100.0 * self.coverage_threshold) as u32
    }

    pub fn circle(&self, center: LatLon) -> Result<CircleSpec, DescriptorError> {
        Ok(CircleSpec::new(center, self.radius_m)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoverageCategory {
    Landuse,
    Leisure,
}

impl CoverageCategory {
    pub fn key(self) -> &'static str {
        match self {
            CoverageCategory::Landuse => "landuse",
            CoverageCategory::Leisure => "leisure",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageEntry {
    pub category: CoverageCategory,
    pub value: String,
    pub pct: u32,
}

/// Everything a preprompt says about one circular area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaDescriptor {
    pub center: LatLon,
    pub radius_m: f64,
    pub provinces: Vec<String>,
    pub districts: Vec<String>,
    pub amenity_counts: BTreeMap<String, u32>,
    pub building_count: u32,
    pub building_coverage_pct: u32,
    pub coverage_entries: Vec<CoverageEntry>,
    pub road_lengths_m: BTreeMap<String, u64>,
    pub rail_lengths_m: BTreeMap<String, u64>,
}

impl AreaDescriptor {
    pub fn empty(center: LatLon, radius_m: f64) -> Self {
        Self {
            center,
            radius_m,
            provinces: Vec::new(),
            districts: Vec::new(),
            amenity_counts: BTreeMap::new(),
            building_count: 0,
            building_coverage_pct: 0,
            coverage_entries: Vec::new(),
            road_lengths_m: BTreeMap::new(),
            rail_lengths_m: BTreeMap::new(),
        }
    }
}

pub(crate) fn round_half_away(x: f64) -> f64 {
    libm::round(x)
}

/// Order-independent sum: contributions are sorted before accumulation so a
/// permuted feature list gives bit-identical totals.
fn stable_sum(mut parts: Vec<f64>) -> f64 {
    parts.sort_by(f64::total_cmp);
    parts.into_iter().sum()
}

/// Study circle with its projection, clip polygon and planar bounding box.
struct Study {
    circle: CircleSpec,
    ngon: Vec<Xy>,
    bbox: BboxXy,
}

impl Study {
    fn new(circle: &CircleSpec, cfg: &GeoConfig) -> Result<Self, GeoError> {
        let r = circle.radius_m();
        Ok(Self {
            circle: *circle,
            ngon: geo::circle_ngon(circle, cfg)?,
            bbox: BboxXy {
                min: Xy::new(-r, -r),
                max: Xy::new(r, r),
            },
        })
    }

    fn contains(&self, p: LatLon) -> bool {
        self.circle.contains_xy(self.circle.project(p))
    }

    fn project_ring(&self, ring: &[LatLon]) -> Vec<Xy> {
        ring.iter().map(|p| self.circle.project(*p)).collect()
    }

    /// Clipped area of a polygon feature; 0 for other geometries.
    fn clipped_area(&self, feature: &Feature) -> Result<f64, GeoError> {
        let Geometry::Polygon { outer, holes } = &feature.geometry else {
            return Ok(0.0);
        };
        let outer_xy = self.project_ring(outer);
        match BboxXy::of(&outer_xy) {
            Some(b) if b.intersects(&self.bbox) => {}
            _ => return Ok(0.0),
        }
        let poly = PolygonXy::new(
            outer_xy,
            holes.iter().map(|h| self.project_ring(h)).collect(),
        );
        intersection_area(&poly, &self.ngon)
    }

    fn clipped_length(&self, feature: &Feature) -> f64 {
        let Geometry::Polyline { vertices } = &feature.geometry else {
            return 0.0;
        };
        let xy = self.project_ring(vertices);
        match BboxXy::of(&xy) {
            Some(b) if b.intersects(&self.bbox) => clip_polyline_circle(&xy, self.circle.radius_m()),
            _ => 0.0,
        }
    }

    fn pct(&self, parts: Vec<f64>) -> u32 {
        round_half_away(100.0 * stable_sum(parts) / self.circle.area_m2()) as u32
    }
}

/// Amenity counts by tag value, using representative-point membership.
pub fn count_amenities(features: &FeatureSet, circle: &CircleSpec) -> BTreeMap<String, u32> {
    let mut counts = BTreeMap::new();
    for f in features.iter() {
        let Some(value) = f.tag("amenity") else {
            continue;
        };
        let p = circle.project(f.geometry.representative_point());
        if circle.contains_xy(p) {
            *counts.entry(value.to_string()).or_insert(0) += 1;
        }
    }
    counts
}

/// Names of intersecting administrative areas.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AdminNames {
    pub provinces: Vec<String>,
    pub districts: Vec<String>,
    /// Intersecting boundaries skipped because they carry no `name`.
    pub unnamed: usize,
}

pub fn intersecting_admin(
    features: &FeatureSet,
    circle: &CircleSpec,
    cfg: &DescriptorConfig,
) -> Result<AdminNames, DescriptorError> {
    let study = Study::new(circle, &cfg.geo)?;
    let province = cfg.province_admin_level.to_string();
    let district = cfg.district_admin_level.to_string();
    let mut provinces = BTreeSet::new();
    let mut districts = BTreeSet::new();
    let mut unnamed = 0;
    for f in features.iter() {
        if f.tag("boundary") != Some("administrative") {
            continue;
        }
        let target = match f.tag("admin_level") {
            Some(l) if l == province => &mut provinces,
            Some(l) if l == district => &mut districts,
            _ => continue,
        };
        if study.clipped_area(f)? <= 0.0 {
            continue;
        }
        match f.tag("name") {
            Some(name) => {
                target.insert(name.to_string());
            }
            None => unnamed += 1,
        }
    }
    Ok(AdminNames {
        provinces: provinces.into_iter().collect(),
        districts: districts.into_iter().collect(),
        unnamed,
    })
}

fn is_building(f: &Feature) -> bool {
    matches!(f.geometry, Geometry::Polygon { .. }) && f.tag("building").is_some_and(|v| v != "no")
}

/// `(count, coverage_pct)` for building polygons.
pub fn building_stats(
    features: &FeatureSet,
    circle: &CircleSpec,
    cfg: &GeoConfig,
) -> Result<(u32, u32), DescriptorError> {
    let study = Study::new(circle, cfg)?;
    let mut count = 0;
    let mut areas = Vec::new();
    for f in features.iter().filter(|f| is_building(f)) {
        if study.contains(f.geometry.representative_point()) {
            count += 1;
        }
        let a = study.clipped_area(f)?;
        if a > 0.0 {
            areas.push(a);
        }
    }
    Ok((count, study.pct(areas)))
}

/// Landuse and leisure percentages at or above the configured gate.
/// Same-value polygons are aggregated before thresholding. Sorted by
/// descending percentage, then value, then category.
pub fn coverage_percentages(
    features: &FeatureSet,
    circle: &CircleSpec,
    cfg: &DescriptorConfig,
) -> Result<Vec<CoverageEntry>, DescriptorError> {
    let study = Study::new(circle, &cfg.geo)?;
    let mut parts: BTreeMap<(CoverageCategory, String), Vec<f64>> = BTreeMap::new();
    for f in features.iter() {
        if !matches!(f.geometry, Geometry::Polygon { .. }) {
            continue;
        }
        let mut keys = Vec::with_capacity(2);
        if let Some(v) = f.tag("landuse") {
            if !cfg.excluded_landuse.iter().any(|x| x == v) {
                keys.push((CoverageCategory::Landuse, v.to_string()));
            }
        }
        if let Some(v) = f.tag("leisure") {
            keys.push((CoverageCategory::Leisure, v.to_string()));
        }
        if keys.is_empty() {
            continue;
        }
        let a = study.clipped_area(f)?;
        if a <= 0.0 {
            continue;
        }
        for k in keys {
            parts.entry(k).or_default().push(a);
        }
    }
    let gate = cfg.min_coverage_pct();
    let mut entries: Vec<CoverageEntry> = parts
        .into_iter()
        .map(|((category, value), areas)| CoverageEntry {
            category,
            value,
            pct: study.pct(areas),
        })
        .filter(|e| e.pct >= gate)
        .collect();
    entries.sort_by(|a, b| {
        b.pct
            .cmp(&a.pct)
            .then_with(|| a.value.cmp(&b.value))
            .then_with(|| a.category.cmp(&b.category))
    });
    Ok(entries)
}

type LengthTables = (BTreeMap<String, u64>, BTreeMap<String, u64>);

/// Clipped road and rail lengths per tag value, in whole metres.
pub fn way_lengths(
    features: &FeatureSet,
    circle: &CircleSpec,
    cfg: &DescriptorConfig,
) -> Result<LengthTables, DescriptorError> {
    let study = Study::new(circle, &cfg.geo)?;
    let mut roads: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut rails: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for f in features.iter() {
        let road = f.tag(&cfg.road_key);
        let rail = f.tag(&cfg.rail_key);
        if road.is_none() && rail.is_none() {
            continue;
        }
        let len = study.clipped_length(f);
        if len <= 0.0 {
            continue;
        }
        if let Some(v) = road {
            roads.entry(v.to_string()).or_default().push(len);
        }
        if let Some(v) = rail {
            rails.entry(v.to_string()).or_default().push(len);
        }
    }
    let finish = |m: BTreeMap<String, Vec<f64>>| -> BTreeMap<String, u64> {
        m.into_iter()
            .map(|(k, v)| (k, round_half_away(stable_sum(v)) as u64))
            .filter(|(_, v)| *v > 0)
            .collect()
    };
    Ok((finish(roads), finish(rails)))
}

/// Computes the full descriptor for one circle.
pub fn build_descriptor(
    features: &FeatureSet,
    circle: &CircleSpec,
    cfg: &DescriptorConfig,
) -> Result<AreaDescriptor, DescriptorError> {
    cfg.validate()?;
    let admin = intersecting_admin(features, circle, cfg)?;
    let (building_count, building_coverage_pct) = building_stats(features, circle, &cfg.geo)?;
    let (road_lengths_m, rail_lengths_m) = way_lengths(features, circle, cfg)?;
    Ok(AreaDescriptor {
        center: circle.center(),
        radius_m: circle.radius_m(),
        provinces: admin.provinces,
        districts: admin.districts,
        amenity_counts: count_amenities(features, circle),
        building_count,
        building_coverage_pct,
        coverage_entries: coverage_percentages(features, circle, cfg)?,
        road_lengths_m,
        rail_lengths_m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::unproject_local;
    use crate::osm::{ElementKind, SourceId, Tags};

    fn circle() -> CircleSpec {
        CircleSpec::new(LatLon::new(41.0, 29.0), 300.0).unwrap()
    }

    fn tags(kv: &[(&str, &str)]) -> Tags {
        kv.iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    fn feature(geometry: Geometry, kv: &[(&str, &str)]) -> Feature {
        Feature {
            geometry,
            tags: tags(kv),
            source: SourceId {
                kind: ElementKind::Way,
                id: 1,
            },
        }
    }

    fn rect(c: &CircleSpec, x0: f64, y0: f64, x1: f64, y1: f64) -> Geometry {
        let pts = [(x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0)];
        Geometry::Polygon {
            outer: pts
                .iter()
                .map(|(x, y)| unproject_local(c, Xy::new(*x, *y)))
                .collect(),
            holes: Vec::new(),
        }
    }

    fn line(c: &CircleSpec, pts: &[(f64, f64)]) -> Geometry {
        Geometry::Polyline {
            vertices: pts
                .iter()
                .map(|(x, y)| unproject_local(c, Xy::new(*x, *y)))
                .collect(),
        }
    }

    fn point(c: &CircleSpec, x: f64, y: f64) -> Geometry {
        Geometry::Point {
            at: unproject_local(c, Xy::new(x, y)),
        }
    }

    fn set(features: Vec<Feature>) -> FeatureSet {
        FeatureSet { features }
    }

    #[test]
    fn no_amenities_gives_empty_map() {
        assert!(count_amenities(&FeatureSet::default(), &circle()).is_empty());
    }

    #[test]
    fn one_building_closed_form_pct() {
        let c = circle();
        let fs = set(vec![feature(rect(&c, -50.0, -50.0, 50.0, 50.0), &[("building", "yes")])]);
        assert_eq!(building_stats(&fs, &c, &GeoConfig::default()).unwrap(), (1, 4));
        assert_eq!(
            building_stats(&FeatureSet::default(), &c, &GeoConfig::default()).unwrap(),
            (0, 0)
        );
    }

    #[test]
    fn building_outside_centroid_still_covers() {
        let c = circle();
        // Centroid at x = 310 (outside); the part west of the 64-gon edge is inside.
        let fs = set(vec![feature(rect(&c, 250.0, -20.0, 370.0, 20.0), &[("building", "yes")])]);
        let (count, pct) = building_stats(&fs, &c, &GeoConfig::default()).unwrap();
        assert_eq!(count, 0);
        // ~50 m × 40 m inside, 0.70% → rounds to 1.
        assert_eq!(pct, 1);
    }

    #[test]
    fn coverage_gate_and_aggregation() {
        let c = circle();
        let area = c.area_m2();
        // 4% + 3% construction, 1.4% grass, 5.2% park.
        let w = |pct: f64| pct / 100.0 * area / 100.0;
        let fs = set(vec![
            feature(rect(&c, -200.0, 0.0, -200.0 + w(4.0), 100.0), &[("landuse", "construction")]),
            feature(rect(&c, 50.0, 0.0, 50.0 + w(3.0), 100.0), &[("landuse", "construction")]),
            feature(rect(&c, 0.0, -150.0, w(1.4), -50.0), &[("landuse", "grass")]),
            feature(rect(&c, -100.0, -250.0, -100.0 + w(5.2), -150.0), &[("leisure", "park")]),
            feature(rect(&c, -250.0, -100.0, 250.0, 100.0), &[("landuse", "residential")]),
        ]);
        let entries = coverage_percentages(&fs, &c, &DescriptorConfig::default()).unwrap();
        assert_eq!(
            entries,
            vec![
                CoverageEntry {
                    category: CoverageCategory::Landuse,
                    value: "construction".into(),
                    pct: 7
                },
                CoverageEntry {
                    category: CoverageCategory::Leisure,
                    value: "park".into(),
                    pct: 5
                },
            ]
        );
    }

    #[test]
    fn chord_road_length() {
        let c = circle();
        let fs = set(vec![
            feature(line(&c, &[(-500.0, 0.0), (500.0, 0.0)]), &[("highway", "residential")]),
            feature(line(&c, &[(400.0, 0.0), (400.0, 90.0)]), &[("highway", "service")]),
            feature(
                line(&c, &[(0.0, -100.0), (0.0, 100.0)]),
                &[("highway", "platform"), ("railway", "platform")],
            ),
        ]);
        let (roads, rails) = way_lengths(&fs, &c, &DescriptorConfig::default()).unwrap();
        assert_eq!(roads.get("residential"), Some(&600));
        assert!(!roads.contains_key("service"));
        assert_eq!(roads.get("platform"), Some(&200));
        assert_eq!(rails.get("platform"), Some(&200));
    }

    #[test]
    fn admin_names_sorted_and_filtered() {
        let c = circle();
        let admin = |g, level, name: Option<&str>| {
            let mut kv = vec![("boundary", "administrative"), ("admin_level", level)];
            if let Some(n) = name {
                kv.push(("name", n));
            }
            feature(g, &kv)
        };
        let fs = set(vec![
            admin(rect(&c, -5000.0, -5000.0, 5000.0, 5000.0), "4", Some("İstanbul")),
            admin(rect(&c, 0.0, -2000.0, 2000.0, 2000.0), "6", Some("Kadıköy")),
            admin(rect(&c, -2000.0, -2000.0, 0.0, 2000.0), "6", Some("Ataşehir")),
            admin(rect(&c, 1000.0, 1000.0, 2000.0, 2000.0), "6", Some("Maltepe")),
            admin(rect(&c, -100.0, -100.0, 100.0, 100.0), "8", Some("Mahalle")),
            admin(rect(&c, -100.0, -100.0, 100.0, 100.0), "6", None),
        ]);
        let names = intersecting_admin(&fs, &c, &DescriptorConfig::default()).unwrap();
        assert_eq!(names.provinces, vec!["İstanbul"]);
        assert_eq!(names.districts, vec!["Ataşehir", "Kadıköy"]);
        assert_eq!(names.unnamed, 1);
    }

    #[test]
    fn config_validation() {
        let mut cfg = DescriptorConfig::default();
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.min_coverage_pct(), 2);
        cfg.coverage_threshold = 1.0;
        assert!(cfg.validate().is_err());
        cfg.coverage_threshold = 0.02;
        cfg.district_admin_level = 4;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn empty_feature_set_descriptor() {
        let c = circle();
        let d = build_descriptor(&FeatureSet::default(), &c, &DescriptorConfig::default()).unwrap();
        assert_eq!(d, AreaDescriptor::empty(c.center(), 300.0));
    }

    #[test]
    fn amenity_on_polygon_uses_centroid() {
        let c = circle();
        let fs = set(vec![
            feature(point(&c, 10.0, 10.0), &[("amenity", "cafe")]),
            feature(rect(&c, 100.0, 100.0, 120.0, 120.0), &[("amenity", "school"), ("building", "yes")]),
            feature(rect(&c, 290.0, 0.0, 330.0, 20.0), &[("amenity", "parking")]),
        ]);
        let counts = count_amenities(&fs, &c);
        assert_eq!(counts.get("cafe"), Some(&1));
        assert_eq!(counts.get("school"), Some(&1));
        assert!(!counts.contains_key("parking"));
        // Multi-tagged element counted by both extractors.
        assert_eq!(building_stats(&fs, &c, &GeoConfig::default()).unwrap().0, 1);
    }
}
