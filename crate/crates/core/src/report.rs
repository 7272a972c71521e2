//! Report documents shared by the verifier and the exact oracle.
//!
//! A report has a `deterministic` block, which is a pure function of the
//! scenario, the parameters and the seed, and an `execution` block holding
//! everything that depends on the machine or the schedule (worker count,
//! batching, timings). Determinism checks diff the first block bytewise.

use std::io;

use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: &str = "ppsv-report/1";

/// Composition of predicted profile and deviation used by the sampler.
pub const DEVIATION_COMPOSITION: &str = "additive";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Estimate { mean: f64, samples: u64 },
    Bot { samples: u64 },
    Exact { mean: f64 },
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Estimate { .. } => "estimate",
            Verdict::Bot { .. } => "bot",
            Verdict::Exact { .. } => "exact",
        }
    }

    pub fn mean(&self) -> Option<f64> {
        match *self {
            Verdict::Estimate { mean, .. } | Verdict::Exact { mean } => Some(mean),
            Verdict::Bot { .. } => None,
        }
    }

    pub fn samples(&self) -> Option<u64> {
        match *self {
            Verdict::Estimate { samples, .. } | Verdict::Bot { samples } => Some(samples),
            Verdict::Exact { .. } => None,
        }
    }
}

/// One `(state, power slot)` cell of a report table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub state: String,
    pub slot: usize,
    pub slot_lo_kw: f64,
    pub slot_hi_kw: f64,
    #[serde(flatten)]
    pub verdict: Verdict,
}

/// Sum of the non-⊥ values of one state's row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateCoverage {
    pub state: String,
    pub sum: f64,
    pub bot_entries: usize,
    /// Set when the row sums to less than `1 - ε` (verifier) or when some
    /// demand mass falls outside every slot (oracle).
    pub below_unity: bool,
}

/// Row sums over `entries`, which must be grouped by state.
pub fn coverage(entries: &[Entry], threshold: f64) -> Vec<StateCoverage> {
    let mut out: Vec<StateCoverage> = Vec::new();
    for e in entries {
        if out.last().is_none_or(|c| c.state != e.state) {
            out.push(StateCoverage {
                state: e.state.clone(),
                sum: 0.0,
                bot_entries: 0,
                below_unity: false,
            });
        }
        let c = out.last_mut().expect("pushed above");
        match e.verdict.mean() {
            Some(m) => c.sum += m,
            None => c.bot_entries += 1,
        }
    }
    for c in &mut out {
        c.below_unity = c.sum < threshold;
    }
    out
}

/// Flat CSV view: `state,slot_lo_kw,slot_hi_kw,verdict,mean,samples`.
pub fn write_csv<W: io::Write>(entries: &[Entry], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["state", "slot_lo_kw", "slot_hi_kw", "verdict", "mean", "samples"])?;
    for e in entries {
        w.write_record([
            e.state.clone(),
            e.slot_lo_kw.to_string(),
            e.slot_hi_kw.to_string(),
            e.verdict.label().to_owned(),
            e.verdict.mean().map(|m| m.to_string()).unwrap_or_default(),
            e.verdict.samples().map(|n| n.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
