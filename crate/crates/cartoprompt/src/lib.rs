//! IO, file formats, networking and the command line around
//! [`cartoprompt_core`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod curation;
pub mod embed_io;
pub mod error;
pub mod logging;
pub mod osm_io;
pub mod overpass;
pub mod service;
pub mod store;
pub mod teacher;

pub use error::{Error, Result};
