//! Test-only helpers: a brute-force enumeration oracle that shares no code
//! with the convolution engine, and small scenario builders.

#![allow(dead_code)]

use ppsv::scenario::{DeviationModel, PowerSlotPartition, Scenario, SubstationProfile, TimeSlotId, User};

/// Every `(value, probability)` outcome of the demand at `t`, one per tuple
/// of user deviations, values accumulated in user order.
pub fn enumerate_outcomes(scenario: &Scenario, t: usize) -> Vec<(f64, f64)> {
    let supports: Vec<(Vec<f64>, Vec<f64>)> = scenario
        .users
        .iter()
        .map(|u| match u.deviation_at(TimeSlotId(t)) {
            DeviationModel::Discrete {
                support_kw,
                probabilities,
            } => (support_kw.clone(), probabilities.clone()),
            _ => panic!("enumeration needs discrete models"),
        })
        .collect();
    let mut out = Vec::new();
    let mut idx = vec![0usize; supports.len()];
    loop {
        let mut value = 0.0;
        let mut prob = 1.0;
        for (u, &i) in idx.iter().enumerate() {
            value += scenario.users[u].epp_kw[t] + supports[u].0[i];
            prob *= supports[u].1[i];
        }
        out.push((value, prob));
        // Odometer increment.
        let mut pos = 0;
        loop {
            if pos == idx.len() {
                return out;
            }
            idx[pos] += 1;
            if idx[pos] < supports[pos].0.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

fn in_slot(breakpoints: &[f64], slot: usize, x: f64) -> bool {
    let last = slot + 2 == breakpoints.len();
    breakpoints[slot] <= x && (x < breakpoints[slot + 1] || (last && x == breakpoints[slot + 1]))
}

/// Brute-force probability of slot `w` for state `v`, over every
/// `(t, deviation tuple)`.
pub fn enumerate_psi(scenario: &Scenario, state: &str, slot: usize) -> f64 {
    let ts: Vec<usize> = (0..scenario.time_slots)
        .filter(|&t| scenario.substation.assignment[t].0 == state)
        .collect();
    let mut total = 0.0;
    for &t in &ts {
        for (x, p) in enumerate_outcomes(scenario, t) {
            if in_slot(&scenario.slots.breakpoints, slot, x) {
                total += p;
            }
        }
    }
    total / ts.len() as f64
}

/// Total variation between two lists of weighted points, matching points
/// within `tol`.
pub fn total_variation(a: &[(f64, f64)], b: &[(f64, f64)], tol: f64) -> f64 {
    let mut signed: Vec<(f64, f64)> = a.iter().copied().chain(b.iter().map(|&(x, p)| (x, -p))).collect();
    signed.sort_by(|l, r| l.0.partial_cmp(&r.0).unwrap());
    let mut tv = 0.0;
    let mut i = 0;
    while i < signed.len() {
        let anchor = signed[i].0;
        let mut net = 0.0;
        while i < signed.len() && signed[i].0 - anchor <= tol {
            net += signed[i].1;
            i += 1;
        }
        tv += net.abs();
    }
    0.5 * tv
}

pub fn user(id: &str, epp_kw: Vec<f64>, deviation: DeviationModel) -> User {
    User {
        id: id.into(),
        epp_kw,
        deviation,
        deviation_overrides: vec![],
    }
}

/// One user with constant profile `epp` over `slots` time slots, all in
/// state "v".
pub fn single_user(epp: f64, time_slots: usize, deviation: DeviationModel, breakpoints: Vec<f64>) -> Scenario {
    Scenario {
        time_slots,
        substation: SubstationProfile::new(vec!["v"; time_slots]),
        slots: PowerSlotPartition::new(breakpoints),
        users: vec![user("u", vec![epp; time_slots], deviation)],
    }
}

/// Scenario whose slot [-1, 1) has probability exactly `p`: the single
/// user draws 0 kW with probability `p` and 10 kW otherwise.
pub fn bernoulli_scenario(p: f64) -> Scenario {
    let deviation = if p >= 1.0 {
        DeviationModel::point(0.0)
    } else if p <= 0.0 {
        DeviationModel::point(10.0)
    } else {
        DeviationModel::discrete(&[(0.0, p), (10.0, 1.0 - p)])
    };
    single_user(0.0, 1, deviation, vec![-1.0, 1.0, 20.0])
}

pub fn pm_one() -> DeviationModel {
    DeviationModel::discrete(&[(-1.0, 0.5), (1.0, 0.5)])
}
