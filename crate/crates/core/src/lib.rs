//! Core of the cartoprompt engine.
//!
//! Everything in this crate is a pure transformation over in-memory data:
//! OSM element graphs are assembled into tagged geometries, measured against
//! a circular study area, rendered into a fixed-template English
//! "preprompt", turned into instruction-tuning datapoints, and embedded
//! into a 2D map of the city. IO, networking, file formats and the CLI live
//! in the `cartoprompt` companion crate.
//!
//! The crate is `no_std` and only needs an allocator.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod curate;
pub mod descriptor;
pub mod embed;
pub mod geo;
mod linalg;
pub mod osm;
pub mod verbalize;

pub use descriptor::{build_descriptor, AreaDescriptor, DescriptorConfig};
pub use geo::{CircleSpec, GeoConfig, LatLon, Xy};
pub use osm::{assemble_features, FeatureSet, OsmGraph};
pub use verbalize::{render_preprompt, VerbalizerRules};
