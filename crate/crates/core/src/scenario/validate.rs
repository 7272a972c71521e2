use std::collections::HashSet;
use std::fmt;

use serde::Serialize;

use super::Scenario;

/// One broken invariant, located by a path into the scenario document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Violation {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Collects every invariant violation; an empty list means the scenario is
/// valid.
pub fn validate(scenario: &Scenario) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = scenario.time_slots;
    if n == 0 {
        out.push(Violation::new("time_slots", "at least one time slot is required"));
    }

    let assigned = scenario.substation.assignment.len();
    if assigned < n {
        let missing: Vec<String> = (assigned..n).map(|t| format!("t={t}")).collect();
        out.push(Violation::new(
            "substation_profile",
            format!("assignment incomplete: no state for {}", missing.join(", ")),
        ));
    } else if assigned > n {
        out.push(Violation::new(
            "substation_profile",
            format!("assignment has {assigned} entries but time_slots is {n}"),
        ));
    }
    for (t, s) in scenario.substation.assignment.iter().enumerate() {
        if s.0.is_empty() {
            out.push(Violation::new(format!("substation_profile[{t}]"), "empty state label"));
        }
    }

    let b = &scenario.slots.breakpoints;
    if b.len() < 2 {
        out.push(Violation::new(
            "power_slot_breakpoints_kw",
            "at least two breakpoints (one slot) are required",
        ));
    }
    if let Some(i) = b.iter().position(|x| !x.is_finite()) {
        out.push(Violation::new(
            format!("power_slot_breakpoints_kw[{i}]"),
            "breakpoint is not finite",
        ));
    }
    if let Some(i) = b.windows(2).position(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
        out.push(Violation::new(
            format!("power_slot_breakpoints_kw[{}]", i + 1),
            format!("breakpoints must strictly increase ({} then {})", b[i], b[i + 1]),
        ));
    }

    if scenario.users.is_empty() {
        out.push(Violation::new("users", "at least one user is required"));
    }
    let mut seen_ids = HashSet::new();
    for (i, user) in scenario.users.iter().enumerate() {
        let base = format!("users[{i}](id={})", user.id);
        if user.id.is_empty() {
            out.push(Violation::new(&base, "empty user id"));
        } else if !seen_ids.insert(user.id.as_str()) {
            out.push(Violation::new(&base, format!("duplicate user id {:?}", user.id)));
        }
        if user.epp_kw.len() != n {
            out.push(Violation::new(
                format!("{base}.epp_kw"),
                format!("profile has {} values, expected one per time slot ({n})", user.epp_kw.len()),
            ));
        }
        if let Some(t) = user.epp_kw.iter().position(|x| !x.is_finite()) {
            out.push(Violation::new(format!("{base}.epp_kw[{t}]"), "value is not finite"));
        }
        for msg in user.deviation.problems() {
            out.push(Violation::new(format!("{base}.deviation"), msg));
        }
        let mut overridden = HashSet::new();
        for (j, o) in user.deviation_overrides.iter().enumerate() {
            let path = format!("{base}.deviation_overrides[{j}]({})", o.time_slot);
            if o.time_slot.0 >= n {
                out.push(Violation::new(&path, format!("time slot out of range 0..{n}")));
            }
            if !overridden.insert(o.time_slot) {
                out.push(Violation::new(&path, "time slot overridden more than once"));
            }
            for msg in o.deviation.problems() {
                out.push(Violation::new(&path, msg));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{DeviationModel, PowerSlotPartition, SubstationProfile, User};

    fn two_users() -> Scenario {
        Scenario {
            time_slots: 4,
            substation: SubstationProfile::new(["a", "a", "b", "b"]),
            slots: PowerSlotPartition::new(vec![0.0, 5.0, 10.0]),
            users: vec![
                User {
                    id: "alice".into(),
                    epp_kw: vec![1.0, 2.0, 3.0, 4.0],
                    deviation: DeviationModel::discrete(&[(-1.0, 0.5), (1.0, 0.5)]),
                    deviation_overrides: vec![],
                },
                User {
                    id: "bob".into(),
                    epp_kw: vec![1.0, 1.0, 1.0, 1.0],
                    deviation: DeviationModel::Uniform {
                        lo_kw: -0.5,
                        hi_kw: 0.5,
                    },
                    deviation_overrides: vec![],
                },
            ],
        }
    }

    #[test]
    fn well_formed_is_clean() {
        assert!(validate(&two_users()).is_empty());
    }

    #[test]
    fn bad_mass_names_user() {
        let mut s = two_users();
        s.users[1].deviation = DeviationModel::discrete(&[(0.0, 0.5), (1.0, 0.4)]);
        let v = validate(&s);
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].path.contains("bob"));
        assert!(v[0].message.contains("sums to"));
    }

    #[test]
    fn missing_assignment() {
        let mut s = two_users();
        s.substation.assignment.pop();
        let v = validate(&s);
        assert_eq!(v.len(), 1);
        assert!(v[0].message.contains("assignment incomplete"));
        assert!(v[0].message.contains("t=3"));
    }

    #[test]
    fn override_errors_name_the_slot() {
        let mut s = two_users();
        s.users[0].deviation_overrides.push(crate::scenario::DeviationOverride {
            time_slot: crate::scenario::TimeSlotId(9),
            deviation: DeviationModel::discrete(&[(0.0, 0.9)]),
        });
        let v = validate(&s);
        assert_eq!(v.len(), 2, "{v:?}");
        assert!(v.iter().all(|x| x.path.contains("alice") && x.path.contains("t=9")));
    }

    #[test]
    fn structural_violations_accumulate() {
        let mut s = two_users();
        s.slots = PowerSlotPartition::new(vec![0.0, 0.0]);
        s.users[0].epp_kw.push(1.0);
        s.users[1].id = "alice".into();
        let v = validate(&s);
        assert_eq!(v.len(), 3, "{v:?}");
    }
}
