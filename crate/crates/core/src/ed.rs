//! Relative-error (ε, δ) approximation of the mean of a `[0, 1]` random
//! variable by a sequential stopping rule, with a sample budget whose
//! exhaustion yields the ⊥ verdict.
//!
//! Samples `z_1, z_2, ...` are summed until `S_n >= Υ₁`, at which point the
//! estimate is `Υ₁ / n`. With
//!
//! ```text
//! Υ  = 4 (e - 2) ln(2/δ) / ε²
//! Υ₁ = 1 + (1 + ε) Υ
//! ```
//!
//! the estimate is within a factor `1 ± ε` of the true mean `μ` with
//! probability at least `1 - δ`, and the expected sample count is at most
//! `Υ₁ / μ`. If the sum is still below `Υ₁` after `M = ⌈Υ₁ / ε⌉` samples the
//! rule gives up and reports ⊥, meaning `μ < ε` with confidence `1 - δ`.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EdError {
    #[error("epsilon must lie in (0, 1), got {0}")]
    Epsilon(f64),
    #[error("delta must lie in (0, 1), got {0}")]
    Delta(f64),
    #[error("sample {index} is {value}, outside [0, 1]")]
    SampleOutOfRange { index: u64, value: f64 },
    #[error("sample stream ended after {consumed} samples without a decision")]
    StreamExhausted { consumed: u64 },
    #[error("stopping rule already decided; no further samples accepted")]
    AlreadyDecided,
}

/// Tolerance, confidence and the derived stopping-rule constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdParams {
    pub epsilon: f64,
    pub delta: f64,
    pub upsilon: f64,
    pub upsilon1: f64,
    pub cutoff: u64,
}

impl EdParams {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self, EdError> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(EdError::Epsilon(epsilon));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(EdError::Delta(delta));
        }
        let upsilon = 4.0 * (E - 2.0) * (2.0 / delta).ln() / (epsilon * epsilon);
        let upsilon1 = 1.0 + (1.0 + epsilon) * upsilon;
        let cutoff = (upsilon1 / epsilon).ceil() as u64;
        Ok(EdParams {
            epsilon,
            delta,
            upsilon,
            upsilon1,
            cutoff,
        })
    }

    /// Same tolerance with δ split evenly over `tasks` estimations.
    pub fn family_wise(&self, tasks: usize) -> Result<Self, EdError> {
        EdParams::new(self.epsilon, self.delta / tasks.max(1) as f64)
    }

    /// Smallest sample count at which an estimate is possible, `⌈Υ₁⌉`.
    pub fn min_samples(&self) -> u64 {
        self.upsilon1.ceil() as u64
    }
}

/// Convenience alias matching [`EdParams::new`].
pub fn make_params(epsilon: f64, delta: f64) -> Result<EdParams, EdError> {
    EdParams::new(epsilon, delta)
}

/// The sample budget `M` whose exhaustion produces ⊥.
pub fn required_cutoff(params: &EdParams) -> u64 {
    params.cutoff
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum EdOutcome {
    Estimate { mean: f64, samples_used: u64 },
    Bot { samples_used: u64 },
}

impl EdOutcome {
    pub fn samples_used(&self) -> u64 {
        match *self {
            EdOutcome::Estimate { samples_used, .. } | EdOutcome::Bot { samples_used } => samples_used,
        }
    }

    pub fn mean(&self) -> Option<f64> {
        match *self {
            EdOutcome::Estimate { mean, .. } => Some(mean),
            EdOutcome::Bot { .. } => None,
        }
    }

    pub fn is_bot(&self) -> bool {
        matches!(self, EdOutcome::Bot { .. })
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Incremental form of the stopping rule: a single consumer fed samples in
/// stream order.
#[derive(Debug, Clone)]
pub struct StoppingRule {
    params: EdParams,
    sum: CompensatedSum,
    consumed: u64,
    /// True while every sample so far was exactly 0 or 1, so the sum is an
    /// exact integer and bit blocks can be added in one step.
    integral: bool,
    outcome: Option<EdOutcome>,
}

impl StoppingRule {
    pub fn new(params: EdParams) -> Self {
        StoppingRule {
            params,
            sum: CompensatedSum::default(),
            consumed: 0,
            integral: true,
            outcome: None,
        }
    }

    pub fn params(&self) -> &EdParams {
        &self.params
    }

    pub fn consumed(&self) -> u64 {
        self.consumed
    }

    pub fn outcome(&self) -> Option<EdOutcome> {
        self.outcome
    }

    /// Samples still needed before the budget runs out.
    pub fn remaining_budget(&self) -> u64 {
        self.params.cutoff - self.consumed
    }

    pub fn push(&mut self, z: f64) -> Result<Option<EdOutcome>, EdError> {
        if self.outcome.is_some() {
            return Err(EdError::AlreadyDecided);
        }
        if !(0.0..=1.0).contains(&z) {
            return Err(EdError::SampleOutOfRange {
                index: self.consumed,
                value: z,
            });
        }
        if z != 0.0 && z != 1.0 {
            self.integral = false;
        }
        self.consumed += 1;
        self.sum.add(z);
        Ok(self.decide())
    }

    fn decide(&mut self) -> Option<EdOutcome> {
        if self.sum.value() >= self.params.upsilon1 {
            self.outcome = Some(EdOutcome::Estimate {
                mean: self.params.upsilon1 / self.consumed as f64,
                samples_used: self.consumed,
            });
        } else if self.consumed >= self.params.cutoff {
            self.outcome = Some(EdOutcome::Bot {
                samples_used: self.consumed,
            });
        }
        self.outcome
    }

    /// Feeds indicator bits in order, stopping at the deciding bit.
    ///
    /// Returns how many bits were consumed; bits after the deciding one are
    /// left untouched. The result is identical to pushing the bits one at a
    /// time.
    pub fn push_bits(&mut self, bits: &[bool]) -> Result<usize, EdError> {
        if self.outcome.is_some() {
            return Err(EdError::AlreadyDecided);
        }
        let mut taken = 0;
        if self.integral {
            // Whole block cannot decide: neither the sum nor the count can
            // reach its threshold within it.
            let len = bits.len() as u64;
            let ones = bits.iter().filter(|&&b| b).count() as u64;
            if self.sum.value() + (ones as f64) < self.params.upsilon1 && self.consumed + len < self.params.cutoff {
                self.sum.add(ones as f64);
                self.consumed += len;
                return Ok(bits.len());
            }
        }
        for &b in bits {
            taken += 1;
            if self.push(if b { 1.0 } else { 0.0 })?.is_some() {
                break;
            }
        }
        Ok(taken)
    }
}

/// Runs the stopping rule over `samples`, reading no further than the
/// deciding sample.
pub fn estimate_mean<I>(params: &EdParams, samples: I) -> Result<EdOutcome, EdError>
where
    I: IntoIterator<Item = f64>,
{
    let mut rule = StoppingRule::new(*params);
    for z in samples {
        if let Some(outcome) = rule.push(z)? {
            return Ok(outcome);
        }
    }
    Err(EdError::StreamExhausted {
        consumed: rule.consumed(),
    })
}
