// SPDX-License-Identifier: Apache-2.0

//! Line-oriented testbench scripts: `poke`, `step`, `expect`, `reset` and
//! `#` comments.

use crate::sim::{SimError, Simulator};
use crate::value::WideValue;
use std::time::{Duration, Instant};
use thiserror::Error;

/// Literal width used while parsing; values are fitted to the port later.
const LITERAL_BITS: u32 = 4096;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Command {
    Poke { signal: String, value: WideValue },
    Step(u64),
    Expect { signal: String, value: WideValue },
    /// Assert every reset input for this many cycles, then release.
    Reset(u64),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Testbench {
    /// Commands with their 1-based source line.
    pub commands: Vec<(usize, Command)>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}, cycle {cycle}: expect {signal} = {expected}, got {actual}")]
pub struct ExpectFailure {
    pub line: usize,
    pub cycle: u64,
    pub signal: String,
    pub expected: String,
    pub actual: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TestbenchError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Expect(#[from] ExpectFailure),
    #[error("line {line}: {err}")]
    Sim { line: usize, err: SimError },
}

impl Testbench {
    pub fn parse(text: &str) -> Result<Self, TestbenchError> {
        let mut commands = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("");
            let words: Vec<&str> = body.split_whitespace().collect();
            if words.is_empty() {
                continue;
            }
            let err = |msg: String| TestbenchError::Parse { line, msg };
            let count = |w: &str| w.parse::<u64>().map_err(|_| err(format!("bad cycle count `{w}`")));
            let value = |w: &str| WideValue::parse_unsigned(w, LITERAL_BITS).ok_or_else(|| err(format!("bad value `{w}`")));
            let cmd = match (words[0], &words[1..]) {
                ("poke", [s, v]) => Command::Poke {
                    signal: s.to_string(),
                    value: value(v)?,
                },
                ("expect", [s, v]) => Command::Expect {
                    signal: s.to_string(),
                    value: value(v)?,
                },
                ("step", []) => Command::Step(1),
                ("step", [n]) => Command::Step(count(n)?),
                ("reset", []) => Command::Reset(1),
                ("reset", [n]) => Command::Reset(count(n)?),
                ("poke" | "expect" | "step" | "reset", _) => {
                    return Err(err(format!("wrong number of arguments to `{}`", words[0])))
                }
                (other, _) => return Err(err(format!("unknown command `{other}`"))),
            };
            commands.push((line, cmd));
        }
        Ok(Self { commands })
    }

    /// Total clock cycles the script advances.
    pub fn cycles(&self) -> u64 {
        self.commands
            .iter()
            .map(|(_, c)| match c {
                Command::Step(n) | Command::Reset(n) => *n,
                _ => 0,
            })
            .sum()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOutcome {
    pub cycles: u64,
    pub expects: usize,
    /// Wall time spent inside clock steps only.
    pub step_time: Duration,
}

impl RunOutcome {
    pub fn cycles_per_sec(&self) -> f64 {
        let s = self.step_time.as_secs_f64();
        if s > 0.0 {
            self.cycles as f64 / s
        } else {
            0.0
        }
    }
}

/// Called once per cycle, before the clock edge, and once after the script.
pub type Observer<'a> = &'a mut dyn FnMut(&mut dyn Simulator);

/// Runs `tb` against `sim`, stopping at the first failed `expect`.
pub fn run_testbench(
    sim: &mut dyn Simulator,
    tb: &Testbench,
    mut observe: Option<Observer<'_>>,
) -> Result<RunOutcome, TestbenchError> {
    let mut out = RunOutcome::default();
    let resets = sim.reset_names();
    let mut steps = |sim: &mut dyn Simulator, n: u64, out: &mut RunOutcome| match observe.as_mut() {
        Some(f) => {
            for _ in 0..n {
                f(sim);
                let t = Instant::now();
                sim.step();
                out.step_time += t.elapsed();
            }
            out.cycles += n;
        }
        None => {
            let t = Instant::now();
            for _ in 0..n {
                sim.step();
            }
            out.step_time += t.elapsed();
            out.cycles += n;
        }
    };
    for (line, cmd) in &tb.commands {
        let line = *line;
        let sim_err = |err| TestbenchError::Sim { line, err };
        match cmd {
            Command::Poke { signal, value } => sim.poke(signal, value).map_err(sim_err)?,
            Command::Step(n) => steps(sim, *n, &mut out),
            Command::Reset(n) => {
                for r in &resets {
                    sim.poke(r, &WideValue::from_u64(1, 1)).map_err(sim_err)?;
                }
                steps(sim, *n, &mut out);
                for r in &resets {
                    sim.poke(r, &WideValue::zero(1)).map_err(sim_err)?;
                }
            }
            Command::Expect { signal, value } => {
                let actual = sim.peek(signal).map_err(sim_err)?;
                let width = actual.width();
                let matches = value.significant_bits() <= width && value.resize(width, false) == actual;
                out.expects += 1;
                if !matches {
                    return Err(ExpectFailure {
                        line,
                        cycle: sim.cycle(),
                        signal: signal.clone(),
                        expected: value.to_string(),
                        actual: actual.to_string(),
                    }
                    .into());
                }
            }
        }
    }
    if let Some(f) = observe.as_mut() {
        f(sim);
    }
    Ok(out)
}
