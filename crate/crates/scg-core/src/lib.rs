//! Self-supervised clustering of traffic scenes.
//!
//! The pipeline turns object-list snapshots into semantic scene graphs
//! (nodes = traffic participants, typed edges = lane-topology relations),
//! augments scenes in Cartesian space to obtain positive pairs, trains a
//! Siamese message-passing encoder with a triplet loss and clusters the
//! resulting 2-D embeddings with DBSCAN.
//!
//! Modules follow the processing order: [`scene`] (data model and Frenet
//! geometry), [`augment`], [`graph`], [`encoder`], [`trainer`], [`cluster`]
//! and [`analysis`].

pub mod analysis;
pub mod augment;
pub mod cluster;
pub mod encoder;
pub mod error;
pub mod exec;
pub mod graph;
pub mod scene;
pub mod trainer;

pub use error::{Error, Result};
