//! Fixed-template English rendering of an [`AreaDescriptor`].
//!
//! Sentences, in order, each only when it has content (the first always):
//!
//! 1. `This is a circular area of radius of {r} meters that intersects province(s) of {provinces} and district(s) of {districts}.`
//! 2. `There are {n} {amenity}(s), ….`
//! 3. `There are {n} buildings which cover {pct}% of the total area.`
//! 4. `The area is covered by {pct}% {value}, ….`
//! 5. `It contains {m} meters of {value} rail, …, {m} meters of {value} road.`
//!
//! Tag values are emitted verbatim.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::descriptor::AreaDescriptor;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerbalizerRules {
    /// Between list items inside a sentence.
    pub list_separator: String,
    /// Between province or district names.
    pub name_joiner: String,
    /// Between sentences.
    pub sentence_separator: String,
}

impl Default for VerbalizerRules {
    fn default() -> Self {
        Self {
            list_separator: ", ".into(),
            name_joiner: ", ".into(),
            sentence_separator: " ".into(),
        }
    }
}

fn fmt_radius(r: f64) -> String {
    if libm::trunc(r) == r && libm::fabs(r) < 1e15 {
        format!("{}", r as i64)
    } else {
        format!("{r}")
    }
}

pub fn render_preprompt(d: &AreaDescriptor, rules: &VerbalizerRules) -> String {
    let mut sentences: Vec<String> = Vec::with_capacity(5);

    sentences.push(format!(
        "This is a circular area of radius of {} meters that intersects province(s) of {} and district(s) of {}.",
        fmt_radius(d.radius_m),
        d.provinces.join(&rules.name_joiner),
        d.districts.join(&rules.name_joiner),
    ));

    if !d.amenity_counts.is_empty() {
        let items: Vec<String> = d
            .amenity_counts
            .iter()
            .map(|(value, n)| format!("{n} {value}(s)"))
            .collect();
        sentences.push(format!("There are {}.", items.join(&rules.list_separator)));
    }

    if d.building_count > 0 {
        sentences.push(format!(
            "There are {} buildings which cover {}% of the total area.",
            d.building_count, d.building_coverage_pct
        ));
    }

    if !d.coverage_entries.is_empty() {
        let mut entries: Vec<_> = d.coverage_entries.iter().collect();
        entries.sort_by(|a, b| b.pct.cmp(&a.pct).then_with(|| a.value.cmp(&b.value)));
        let items: Vec<String> = entries
            .iter()
            .map(|e| format!("{}% {}", e.pct, e.value))
            .collect();
        sentences.push(format!(
            "The area is covered by {}.",
            items.join(&rules.list_separator)
        ));
    }

    if !d.rail_lengths_m.is_empty() || !d.road_lengths_m.is_empty() {
        let items: Vec<String> = d
            .rail_lengths_m
            .iter()
            .map(|(v, m)| format!("{m} meters of {v} rail"))
            .chain(
                d.road_lengths_m
                    .iter()
                    .map(|(v, m)| format!("{m} meters of {v} road")),
            )
            .collect();
        sentences.push(format!("It contains {}.", items.join(&rules.list_separator)));
    }

    let mut out = String::new();
    for (i, s) in sentences.iter().enumerate() {
        if i > 0 {
            out.push_str(&rules.sentence_separator);
        }
        let _ = out.write_str(s);
    }
    out
}

/// Collapses every whitespace run to a single space and trims the ends.
pub fn normalize_spaces(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}
