use thiserror::Error;

use super::{validate, Scenario, SubstationState, TimeSlotId, Violation};
use crate::rng::RngStream;

#[derive(Debug, Error, PartialEq)]
pub enum SampleError {
    #[error("scenario is invalid ({} violations)", .0.len())]
    InvalidScenario(Vec<Violation>),
    #[error("unknown substation state {0:?}")]
    UnknownState(String),
    #[error("power slot {slot} out of range (scenario has {count} slots)")]
    SlotOutOfRange { slot: usize, count: usize },
    #[error("time slot {slot} out of range (scenario has {count} time slots)")]
    TimeSlotOutOfRange { slot: usize, count: usize },
}

/// Draws one aggregated power demand observation for time slot `t`.
///
/// Consumes exactly one draw per user, in declared user order. The result is
/// accumulated left to right as `((0 + (e_1 + d_1)) + (e_2 + d_2)) + ...`.
pub fn sample_apd(scenario: &Scenario, t: TimeSlotId, rng: &mut RngStream) -> Result<f64, SampleError> {
    if t.0 >= scenario.time_slots {
        return Err(SampleError::TimeSlotOutOfRange {
            slot: t.0,
            count: scenario.time_slots,
        });
    }
    Ok(apd_unchecked(scenario, t.0, rng))
}

#[inline]
fn apd_unchecked(scenario: &Scenario, t: usize, rng: &mut RngStream) -> f64 {
    let mut total = 0.0;
    for user in &scenario.users {
        let u = rng.next_f64();
        total += user.epp_kw[t] + user.deviation_at(TimeSlotId(t)).sample_from_unit(u);
    }
    total
}

/// One-shot convenience over [`IndicatorSampler`].
pub fn sample_indicator(
    scenario: &Scenario,
    state: &SubstationState,
    slot: usize,
    rng: &mut RngStream,
) -> Result<bool, SampleError> {
    IndicatorSampler::new(scenario)?.sample(state, slot, rng)
}

/// Bernoulli trial whose mean is the probability that demand falls in a
/// power slot, for a time slot drawn uniformly from a state's class.
///
/// Built once per validated scenario; holds the states in label order and
/// their time-slot classes.
#[derive(Debug, Clone)]
pub struct IndicatorSampler<'a> {
    scenario: &'a Scenario,
    states: Vec<SubstationState>,
    classes: Vec<Vec<usize>>,
}

impl<'a> IndicatorSampler<'a> {
    pub fn new(scenario: &'a Scenario) -> Result<Self, SampleError> {
        let violations = validate(scenario);
        if !violations.is_empty() {
            return Err(SampleError::InvalidScenario(violations));
        }
        let states = scenario.states();
        let classes = states
            .iter()
            .map(|v| scenario.substation.class(v).into_iter().map(|t| t.0).collect())
            .collect();
        Ok(IndicatorSampler {
            scenario,
            states,
            classes,
        })
    }

    pub fn scenario(&self) -> &'a Scenario {
        self.scenario
    }

    /// States in label order; a state's position here is its index.
    pub fn states(&self) -> &[SubstationState] {
        &self.states
    }

    pub fn slot_count(&self) -> usize {
        self.scenario.slots.len()
    }

    pub fn state_index(&self, state: &SubstationState) -> Result<usize, SampleError> {
        self.states
            .binary_search(state)
            .map_err(|_| SampleError::UnknownState(state.0.clone()))
    }

    pub fn class(&self, state_index: usize) -> &[usize] {
        &self.classes[state_index]
    }

    pub fn sample(&self, state: &SubstationState, slot: usize, rng: &mut RngStream) -> Result<bool, SampleError> {
        let v = self.state_index(state)?;
        let count = self.slot_count();
        if slot >= count {
            return Err(SampleError::SlotOutOfRange { slot, count });
        }
        Ok(self.sample_by_index(v, slot, rng))
    }

    /// Draw 0 picks the time slot; draws `1..=|U|` are the user deviations.
    #[inline]
    pub fn sample_by_index(&self, state_index: usize, slot: usize, rng: &mut RngStream) -> bool {
        let class = &self.classes[state_index];
        let t = class[rng.next_index(class.len())];
        let apd = apd_unchecked(self.scenario, t, rng);
        self.scenario.slots.contains(slot, apd)
    }

    /// The time slot and demand behind one indicator draw, for diagnostics
    /// and replay tests.
    pub fn trace_by_index(&self, state_index: usize, rng: &mut RngStream) -> (TimeSlotId, f64) {
        let class = &self.classes[state_index];
        let t = class[rng.next_index(class.len())];
        (TimeSlotId(t), apd_unchecked(self.scenario, t, rng))
    }
}
