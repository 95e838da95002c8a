//! Table-based fact verification with logic-level evidence.
//!
//! Given a table and a natural-language statement, this crate synthesizes
//! executable logical-form programs over the table, retrieves the ones
//! that hold as evidence, links them into a graph of functions and
//! entities, and classifies the statement as ENTAILED or REFUTED with a
//! graph attention verifier over that evidence graph.
//!
//! The pipeline stages are independent modules, usable on their own:
//!
//! - [`table`]: typed rectangular tables with exact-decimal cells
//! - [`dsl`]: the logical-form grammar, parser, and renderer
//! - [`exec`]: program execution against a table
//! - [`synth`]: entity linking and bottom-up program search
//! - [`retrieval`]: the select / decompose / filter evidence rules
//! - [`graph`]: the evidence graph and node-removal rewiring
//! - [`encoder`]: deterministic text encoding and node initialization
//! - [`verifier`]: the graph attention classifier and its trainer
//! - [`harness`]: datasets, end-to-end verification, evaluation
//!
//! With the default `parallel` feature, batch evaluation and training
//! fan out across a rayon pool; disabling it leaves a pure sequential
//! build. Both lanes produce identical results.

pub mod dsl;
pub mod encoder;
pub mod exec;
pub mod graph;
pub mod harness;
pub mod randgen;
pub mod retrieval;
pub mod synth;
pub mod table;
pub mod verifier;

pub(crate) mod batch;
