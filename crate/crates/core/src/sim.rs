// SPDX-License-Identifier: Apache-2.0

//! Interface shared by the reference oracle and the optimized engine.

use crate::expr::NodeId;
use crate::graph::RtlGraph;
use crate::value::WideValue;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("unknown signal `{0}`")]
    UnknownSignal(String),
    #[error("`{0}` is not an input and cannot be poked")]
    NotAnInput(String),
    #[error("value {value} does not fit in {width}-bit signal `{name}`")]
    ValueTooWide { name: String, value: String, width: u32 },
}

pub trait Simulator {
    /// Drives an input; takes effect for the current cycle.
    fn poke(&mut self, name: &str, value: &WideValue) -> Result<(), SimError>;
    /// Value of a signal in the current cycle, after combinational settling.
    fn peek(&mut self, name: &str) -> Result<WideValue, SimError>;
    /// Advances one clock edge.
    fn step(&mut self);
    fn cycle(&self) -> u64;
    /// Width of a port, if it exists.
    fn port_width(&self, name: &str) -> Option<u32>;
    /// Names of all input ports, in declaration order.
    fn input_names(&self) -> Vec<String>;
    /// Names of all output ports, in declaration order.
    fn output_names(&self) -> Vec<String>;
    /// Inputs asserted by the testbench `reset` command.
    fn reset_names(&self) -> Vec<String>;
    /// The graph being simulated.
    fn graph(&self) -> &RtlGraph;
    /// Value of any live node of [`Simulator::graph`], after settling.
    fn probe(&mut self, id: NodeId) -> WideValue;
}

/// Checks that `value` fits `width` bits and returns it at that width.
pub fn fit_value(name: &str, value: &WideValue, width: u32) -> Result<WideValue, SimError> {
    if value.significant_bits() > width {
        return Err(SimError::ValueTooWide {
            name: name.to_string(),
            value: value.to_string(),
            width,
        });
    }
    Ok(value.resize(width, false))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cycle {cycle}: `{signal}` expected {expected}, got {actual}")]
pub struct Mismatch {
    pub cycle: u64,
    pub signal: String,
    pub expected: String,
    pub actual: String,
}

/// Drives both simulators with the same per-cycle pokes and compares every
/// output of `reference` before each clock edge.
pub fn lockstep(
    reference: &mut dyn Simulator,
    dut: &mut dyn Simulator,
    cycles: &[Vec<(String, WideValue)>],
) -> Result<(), Mismatch> {
    let outputs = reference.output_names();
    for pokes in cycles {
        for (name, v) in pokes {
            reference.poke(name, v).expect("stimulus names a reference input");
            dut.poke(name, v).expect("stimulus names a device input");
        }
        for o in &outputs {
            let want = reference.peek(o).expect("reference output");
            let got = dut.peek(o).map_err(|e| Mismatch {
                cycle: reference.cycle(),
                signal: o.clone(),
                expected: want.to_string(),
                actual: e.to_string(),
            })?;
            if want != got {
                return Err(Mismatch {
                    cycle: reference.cycle(),
                    signal: o.clone(),
                    expected: want.to_string(),
                    actual: got.to_string(),
                });
            }
        }
        reference.step();
        dut.step();
    }
    Ok(())
}
