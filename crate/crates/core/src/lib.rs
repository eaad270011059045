// SPDX-License-Identifier: Apache-2.0

//! Activity-driven full-cycle RTL simulation.
//!
//! The pipeline: [`frontend`] turns FIRRTL text into an [`graph::RtlGraph`];
//! [`opt`] and [`bitsplit`] rewrite it; [`partition`] groups nodes into
//! supernodes; [`engine`] compiles and runs the result. [`oracle`] is the
//! naive reference simulator every other path is checked against.

pub mod bitsplit;
pub mod corpus;
pub mod engine;
pub mod expr;
pub mod frontend;
pub mod graph;
pub mod model;
pub mod value;
pub mod opt;
pub mod oracle;
pub mod partition;
pub mod pipeline;
pub mod sim;
pub mod testbench;
pub mod vcd;
