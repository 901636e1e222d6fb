//! Scenario files, experiment pipelines and deterministic output for the
//! `hyperdelay` command line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod envelope;
pub mod export;
pub mod fit;
pub mod pipeline;
pub mod scenario;
