//! System model: users, substation profile and power slots.
//!
//! The in-memory types mirror the scenario file layout one-to-one, so a
//! scenario round-trips through JSON without a separate wire type.

mod deviation;
mod sample;
mod validate;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use deviation::DeviationModel;
pub use sample::{sample_apd, sample_indicator, IndicatorSampler, SampleError};
pub use validate::{validate, Violation};

/// Index of a time slot `t` in `0..time_slots`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TimeSlotId(pub usize);

impl fmt::Display for TimeSlotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={}", self.0)
    }
}

/// Label of a substation state `v`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubstationState(pub String);

impl SubstationState {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for SubstationState {
    fn from(s: &str) -> Self {
        SubstationState(s.to_owned())
    }
}

impl From<String> for SubstationState {
    fn from(s: String) -> Self {
        SubstationState(s)
    }
}

impl fmt::Display for SubstationState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Assignment of a substation state to every time slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubstationProfile {
    pub assignment: Vec<SubstationState>,
}

impl SubstationProfile {
    pub fn new<S: Into<SubstationState>>(labels: impl IntoIterator<Item = S>) -> Self {
        SubstationProfile {
            assignment: labels.into_iter().map(Into::into).collect(),
        }
    }

    /// Distinct states in label order.
    pub fn states(&self) -> Vec<SubstationState> {
        self.assignment
            .iter()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Time slots mapped to `state`, ascending.
    pub fn class(&self, state: &SubstationState) -> Vec<TimeSlotId> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, s)| *s == state)
            .map(|(t, _)| TimeSlotId(t))
            .collect()
    }

    pub fn state_at(&self, t: TimeSlotId) -> Option<&SubstationState> {
        self.assignment.get(t.0)
    }
}

/// Strictly increasing breakpoints `b_0 < ... < b_k`.
///
/// Slot `i` is `[b_i, b_{i+1})`, except the last slot which is closed on
/// both ends. Values outside `[b_0, b_k]` belong to no slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PowerSlotPartition {
    pub breakpoints: Vec<f64>,
}

impl PowerSlotPartition {
    pub fn new(breakpoints: Vec<f64>) -> Self {
        PowerSlotPartition { breakpoints }
    }

    /// Number of slots `k`.
    pub fn len(&self) -> usize {
        self.breakpoints.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bounds(&self, slot: usize) -> (f64, f64) {
        (self.breakpoints[slot], self.breakpoints[slot + 1])
    }

    pub fn contains(&self, slot: usize, power_kw: f64) -> bool {
        let (lo, hi) = self.bounds(slot);
        if slot + 1 == self.len() {
            lo <= power_kw && power_kw <= hi
        } else {
            lo <= power_kw && power_kw < hi
        }
    }

    /// The slot containing `power_kw`, if any.
    pub fn slot_of(&self, power_kw: f64) -> Option<usize> {
        let k = self.len();
        if k == 0 || !(self.breakpoints[0] <= power_kw && power_kw <= self.breakpoints[k]) {
            return None;
        }
        // First breakpoint strictly greater than the value closes its slot.
        let upper = self.breakpoints.partition_point(|&b| b <= power_kw);
        Some((upper - 1).min(k - 1))
    }
}

/// Per-time-slot replacement of a user's deviation model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationOverride {
    pub time_slot: TimeSlotId,
    pub deviation: DeviationModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct User {
    pub id: String,
    /// Predicted collaborative profile, one value per time slot.
    pub epp_kw: Vec<f64>,
    pub deviation: DeviationModel,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub deviation_overrides: Vec<DeviationOverride>,
}

impl User {
    /// Deviation model in force at `t`; the last override for `t` wins.
    pub fn deviation_at(&self, t: TimeSlotId) -> &DeviationModel {
        self.deviation_overrides
            .iter()
            .rev()
            .find(|o| o.time_slot == t)
            .map_or(&self.deviation, |o| &o.deviation)
    }

    pub fn deviation_models(&self) -> impl Iterator<Item = &DeviationModel> {
        std::iter::once(&self.deviation).chain(self.deviation_overrides.iter().map(|o| &o.deviation))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub time_slots: usize,
    #[serde(rename = "substation_profile")]
    pub substation: SubstationProfile,
    #[serde(rename = "power_slot_breakpoints_kw")]
    pub slots: PowerSlotPartition,
    pub users: Vec<User>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn states(&self) -> Vec<SubstationState> {
        self.substation.states()
    }

    /// SHA-256 over the compact JSON encoding.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(self).expect("scenario serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn all_discrete(&self) -> bool {
        self.users
            .iter()
            .all(|u| u.deviation_models().all(DeviationModel::is_discrete))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slot_lookup_half_open_with_closed_last() {
        let p = PowerSlotPartition::new(vec![0.0, 4.0, 6.0, 10.0]);
        assert_eq!(p.len(), 3);
        assert_eq!(p.slot_of(0.0), Some(0));
        assert_eq!(p.slot_of(3.999), Some(0));
        assert_eq!(p.slot_of(4.0), Some(1));
        assert_eq!(p.slot_of(6.0), Some(2));
        assert_eq!(p.slot_of(10.0), Some(2));
        assert_eq!(p.slot_of(10.000001), None);
        assert_eq!(p.slot_of(-0.1), None);
        assert_eq!(p.slot_of(f64::NAN), None);
        assert!(p.contains(1, 4.0));
        assert!(!p.contains(1, 6.0));
        assert!(p.contains(2, 10.0));
    }

    #[test]
    fn states_and_classes() {
        let prof = SubstationProfile::new(["b", "a", "b", "c", "a"]);
        assert_eq!(
            prof.states(),
            vec!["a".into(), "b".into(), "c".into()] as Vec<SubstationState>
        );
        assert_eq!(prof.class(&"b".into()), vec![TimeSlotId(0), TimeSlotId(2)]);
        assert!(prof.class(&"z".into()).is_empty());
    }

    #[test]
    fn override_wins_at_its_slot() {
        let u = User {
            id: "u".into(),
            epp_kw: vec![1.0, 2.0],
            deviation: DeviationModel::point(0.0),
            deviation_overrides: vec![DeviationOverride {
                time_slot: TimeSlotId(1),
                deviation: DeviationModel::point(3.0),
            }],
        };
        assert_eq!(u.deviation_at(TimeSlotId(0)), &DeviationModel::point(0.0));
        assert_eq!(u.deviation_at(TimeSlotId(1)), &DeviationModel::point(3.0));
    }

    #[test]
    fn parses_file_layout() {
        let text = r#"{
            "time_slots": 2,
            "substation_profile": ["low", "high"],
            "power_slot_breakpoints_kw": [0, 5, 10],
            "users": [
                {"id": "a", "epp_kw": [1, 2],
                 "deviation": {"type": "uniform", "lo_kw": -1, "hi_kw": 1},
                 "deviation_overrides": [
                    {"time_slot": 1, "deviation": {"type": "discrete", "support_kw": [0], "probabilities": [1]}}
                 ]}
            ]
        }"#;
        let s = Scenario::from_json(text).unwrap();
        assert_eq!(s.time_slots, 2);
        assert_eq!(s.slots.len(), 2);
        assert!(!s.all_discrete());
        assert!(validate(&s).is_empty());
        let again = Scenario::from_json(&s.to_json_pretty()).unwrap();
        assert_eq!(again, s);
        assert_eq!(again.digest(), s.digest());
    }
}
