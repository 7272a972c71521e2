//! Per-(state, slot) approximation of the demand distribution.
//!
//! Every cell of the `V_S × W` table gets its own independent stopping-rule
//! run over its own indicator stream. A cell is either an estimate within a
//! relative factor `1 ± ε` of the true probability (with confidence `1 - δ`)
//! or ⊥, meaning the probability is below `ε` with the same confidence.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ed::{EdError, EdOutcome, EdParams};
use crate::engine::{run_parallel, task_grid, EngineError, WorkPlan, DEFAULT_BATCH_SIZE};
use crate::report::{coverage, Entry, StateCoverage, Verdict, DEVIATION_COMPOSITION, SCHEMA_VERSION};
use crate::rng::{derive_stream_key, RngStream};
use crate::scenario::{validate, IndicatorSampler, SampleError, Scenario, SubstationState, Violation};

/// Name of the scheduling scheme recorded in reports.
pub const ENGINE_SCHEME: &str = "master-worker/speculative-ordered-batches";

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("scenario has {} violations", .0.len())]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Params(#[from] EdError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyOptions {
    pub workers: usize,
    pub batch_size: usize,
    /// Defaults to twice the worker count.
    pub lookahead: Option<usize>,
    /// Split δ evenly over all cells of the table.
    pub family_wise: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            workers: 1,
            batch_size: DEFAULT_BATCH_SIZE,
            lookahead: None,
            family_wise: false,
        }
    }
}

impl VerifyOptions {
    pub fn with_workers(workers: usize) -> Self {
        VerifyOptions {
            workers,
            ..Default::default()
        }
    }
}

/// One cell of the verification table.
#[derive(Debug, Clone, PartialEq)]
pub struct ApdEstimate {
    pub state: SubstationState,
    pub slot: usize,
    pub outcome: EdOutcome,
    pub samples_used: u64,
    pub wall_nanos: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportParams {
    pub epsilon: f64,
    pub delta: f64,
    pub upsilon: f64,
    pub upsilon1: f64,
    pub cutoff: u64,
    pub family_wise: bool,
    /// δ actually used per cell (equals `delta` unless family-wise).
    pub cell_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterministicBlock {
    pub scenario_digest: String,
    pub deviation_composition: String,
    pub engine: String,
    pub params: Option<ReportParams>,
    pub seed: Option<u64>,
    pub entries: Vec<Entry>,
    pub coverage: Vec<StateCoverage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionBlock {
    pub workers: usize,
    pub batch_size: usize,
    pub lookahead: usize,
    pub generated_batches: u64,
    pub discarded_batches: u64,
    pub total_wall_nanos: u64,
    /// Per-entry wall time, parallel to `deterministic.entries`.
    pub entry_wall_nanos: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema_version: String,
    pub kind: String,
    pub deterministic: DeterministicBlock,
    pub execution: ExecutionBlock,
}

impl VerificationReport {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Canonical bytes of the deterministic block.
    pub fn deterministic_json(&self) -> String {
        serde_json::to_string(&self.deterministic).expect("report serializes")
    }

    pub fn entries(&self) -> &[Entry] {
        &self.deterministic.entries
    }

    pub fn entry(&self, state: &str, slot: usize) -> Option<&Entry> {
        self.deterministic
            .entries
            .iter()
            .find(|e| e.state == state && e.slot == slot)
    }

    /// Cells as domain values, with their timings.
    pub fn estimates(&self) -> Vec<ApdEstimate> {
        self.deterministic
            .entries
            .iter()
            .zip(&self.execution.entry_wall_nanos)
            .map(|(e, &wall_nanos)| {
                let outcome = match e.verdict {
                    Verdict::Estimate { mean, samples } => EdOutcome::Estimate {
                        mean,
                        samples_used: samples,
                    },
                    Verdict::Bot { samples } => EdOutcome::Bot { samples_used: samples },
                    Verdict::Exact { .. } => unreachable!("verification reports hold no exact cells"),
                };
                ApdEstimate {
                    state: SubstationState(e.state.clone()),
                    slot: e.slot,
                    samples_used: outcome.samples_used(),
                    outcome,
                    wall_nanos,
                }
            })
            .collect()
    }
}

/// The indicator stream of cell `(v, w)`: element `i` is the Bernoulli
/// draw at rng address `(seed, v, w, i)`.
#[derive(Debug, Clone)]
pub struct IndicatorStream<'s, 'a> {
    sampler: &'s IndicatorSampler<'a>,
    state_index: usize,
    slot: usize,
    rng: RngStream,
    next: u64,
}

impl IndicatorStream<'_, '_> {
    /// Element `i`, independent of what was read before.
    pub fn element(&self, i: u64) -> bool {
        let mut rng = self.rng.clone();
        rng.seek(i);
        self.sampler.sample_by_index(self.state_index, self.slot, &mut rng)
    }
}

impl Iterator for IndicatorStream<'_, '_> {
    type Item = bool;

    fn next(&mut self) -> Option<bool> {
        self.rng.seek(self.next);
        self.next += 1;
        Some(self.sampler.sample_by_index(self.state_index, self.slot, &mut self.rng))
    }
}

pub fn estimand_stream<'s, 'a>(
    sampler: &'s IndicatorSampler<'a>,
    state: &SubstationState,
    slot: usize,
    seed: u64,
) -> Result<IndicatorStream<'s, 'a>, SampleError> {
    let state_index = sampler.state_index(state)?;
    if slot >= sampler.slot_count() {
        return Err(SampleError::SlotOutOfRange {
            slot,
            count: sampler.slot_count(),
        });
    }
    Ok(IndicatorStream {
        sampler,
        state_index,
        slot,
        rng: RngStream::new(derive_stream_key(seed, state_index as u32, slot as u32), 0),
        next: 0,
    })
}

pub fn verify(
    scenario: &Scenario,
    params: &EdParams,
    seed: u64,
    options: &VerifyOptions,
) -> Result<VerificationReport, VerifyError> {
    let start = Instant::now();
    let violations = validate(scenario);
    if !violations.is_empty() {
        return Err(VerifyError::Invalid(violations));
    }
    let sampler = IndicatorSampler::new(scenario).map_err(|e| match e {
        SampleError::InvalidScenario(v) => VerifyError::Invalid(v),
        other => unreachable!("sampler construction only fails on validation: {other}"),
    })?;
    let states = sampler.states();
    let slots = &scenario.slots;
    let tasks = task_grid(states.len(), slots.len());

    let cell_params = if options.family_wise {
        params.family_wise(tasks.len())?
    } else {
        *params
    };
    let plan = WorkPlan::new(
        tasks,
        options.batch_size,
        options.lookahead.unwrap_or(2 * options.workers.max(1)),
    )?;
    let results = run_parallel(&plan, &sampler, &cell_params, seed, options.workers)?;

    let mut entries = Vec::with_capacity(results.len());
    let mut entry_wall_nanos = Vec::with_capacity(results.len());
    let (mut generated, mut discarded) = (0, 0);
    for r in &results {
        let (lo, hi) = slots.bounds(r.task.slot);
        entries.push(Entry {
            state: states[r.task.state].0.clone(),
            slot: r.task.slot,
            slot_lo_kw: lo,
            slot_hi_kw: hi,
            verdict: match r.outcome {
                EdOutcome::Estimate { mean, samples_used } => Verdict::Estimate {
                    mean,
                    samples: samples_used,
                },
                EdOutcome::Bot { samples_used } => Verdict::Bot { samples: samples_used },
            },
        });
        entry_wall_nanos.push(r.wall_nanos);
        generated += r.generated_batches;
        discarded += r.discarded_batches;
    }
    let coverage = coverage(&entries, 1.0 - params.epsilon);

    Ok(VerificationReport {
        schema_version: SCHEMA_VERSION.to_owned(),
        kind: "verification".to_owned(),
        deterministic: DeterministicBlock {
            scenario_digest: scenario.digest(),
            deviation_composition: DEVIATION_COMPOSITION.to_owned(),
            engine: ENGINE_SCHEME.to_owned(),
            params: Some(ReportParams {
                epsilon: cell_params.epsilon,
                delta: params.delta,
                upsilon: cell_params.upsilon,
                upsilon1: cell_params.upsilon1,
                cutoff: cell_params.cutoff,
                family_wise: options.family_wise,
                cell_delta: cell_params.delta,
            }),
            seed: Some(seed),
            entries,
            coverage,
        },
        execution: ExecutionBlock {
            workers: options.workers,
            batch_size: plan.batch_size,
            lookahead: plan.lookahead,
            generated_batches: generated,
            discarded_batches: discarded,
            total_wall_nanos: start.elapsed().as_nanos() as u64,
            entry_wall_nanos,
        },
    })
}
