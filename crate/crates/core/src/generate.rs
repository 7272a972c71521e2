//! Seeded synthetic scenarios.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{DeviationModel, PowerSlotPartition, Scenario, SubstationProfile, User};

#[derive(Debug, Error, PartialEq)]
pub enum GenError {
    #[error("users must be at least 1")]
    Users,
    #[error("time_slots must be at least 1")]
    TimeSlots,
    #[error("states must be between 1 and time_slots ({time_slots}), got {states}")]
    States { states: usize, time_slots: usize },
    #[error("power_slots must be at least 1")]
    PowerSlots,
    #[error("magnitude must be finite and non-negative, got {0}")]
    Magnitude(f64),
    #[error("profile range must satisfy 0 <= min <= max, got [{0}, {1}]")]
    ProfileRange(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DeviationFamily {
    Discrete,
    Uniform,
    TruncatedGaussian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenParams {
    pub seed: u64,
    pub users: usize,
    pub time_slots: usize,
    pub states: usize,
    pub power_slots: usize,
    pub family: DeviationFamily,
    /// Deviation size relative to the user's mean predicted power
    /// (0.1 means ±10%).
    pub magnitude: f64,
    pub epp_min_kw: f64,
    pub epp_max_kw: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            seed: 1,
            users: 2,
            time_slots: 24,
            states: 2,
            power_slots: 4,
            family: DeviationFamily::Discrete,
            magnitude: 0.1,
            epp_min_kw: 0.5,
            epp_max_kw: 5.0,
        }
    }
}

fn round_milli(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

pub fn generate(params: &GenParams) -> Result<Scenario, GenError> {
    let p = params;
    if p.users == 0 {
        return Err(GenError::Users);
    }
    if p.time_slots == 0 {
        return Err(GenError::TimeSlots);
    }
    if p.states == 0 || p.states > p.time_slots {
        return Err(GenError::States {
            states: p.states,
            time_slots: p.time_slots,
        });
    }
    if p.power_slots == 0 {
        return Err(GenError::PowerSlots);
    }
    if !(p.magnitude.is_finite() && p.magnitude >= 0.0) {
        return Err(GenError::Magnitude(p.magnitude));
    }
    if !(p.epp_min_kw >= 0.0 && p.epp_min_kw <= p.epp_max_kw && p.epp_max_kw.is_finite()) {
        return Err(GenError::ProfileRange(p.epp_min_kw, p.epp_max_kw));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);

    // Every state gets at least one time slot.
    let mut labels: Vec<usize> = (0..p.time_slots)
        .map(|t| if t < p.states { t } else { rng.gen_range(0..p.states) })
        .collect();
    labels.shuffle(&mut rng);
    let substation = SubstationProfile::new(labels.iter().map(|s| format!("s{s}")));

    let mut users = Vec::with_capacity(p.users);
    let (mut apd_lo, mut apd_hi) = (0.0, 0.0);
    for i in 0..p.users {
        let epp_kw: Vec<f64> = (0..p.time_slots)
            .map(|_| round_milli(rng.gen_range(p.epp_min_kw..=p.epp_max_kw)))
            .collect();
        let mean = epp_kw.iter().sum::<f64>() / p.time_slots as f64;
        let spread = round_milli(p.magnitude * mean);
        let deviation = if spread == 0.0 {
            DeviationModel::point(0.0)
        } else {
            match p.family {
                DeviationFamily::Discrete => {
                    let w: [f64; 3] = [rng.gen_range(0.1..1.0), rng.gen_range(0.1..1.0), rng.gen_range(0.1..1.0)];
                    let total: f64 = w.iter().sum();
                    let p0 = round_milli(w[0] / total);
                    let p1 = round_milli(w[1] / total);
                    DeviationModel::discrete(&[(-spread, p0), (0.0, p1), (spread, 1.0 - p0 - p1)])
                }
                DeviationFamily::Uniform => DeviationModel::Uniform {
                    lo_kw: -spread,
                    hi_kw: spread,
                },
                DeviationFamily::TruncatedGaussian => DeviationModel::TruncatedGaussian {
                    mean_kw: 0.0,
                    stddev_kw: spread / 2.0,
                    lo_kw: -spread,
                    hi_kw: spread,
                },
            }
        };
        let lo = epp_kw.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = epp_kw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        apd_lo += lo - spread;
        apd_hi += hi + spread;
        users.push(User {
            id: format!("user-{i}"),
            epp_kw,
            deviation,
            deviation_overrides: vec![],
        });
    }

    // Even slots over the reachable demand range, padded so that no
    // support point sits on the outer breakpoints.
    let pad = 0.01 * (apd_hi - apd_lo) + 0.0005;
    let (lo, hi) = (apd_lo - pad, apd_hi + pad);
    // Breakpoints sit 0.1 W off the 1 W grid that profile and deviation
    // values live on.
    let width = ((hi - lo) / p.power_slots as f64).max(0.01);
    let breakpoints: Vec<f64> = (0..=p.power_slots)
        .map(|i| ((round_milli(lo + i as f64 * width) + 0.0001) * 10_000.0).round() / 10_000.0)
        .collect();

    Ok(Scenario {
        time_slots: p.time_slots,
        substation,
        slots: PowerSlotPartition::new(breakpoints),
        users,
    })
}
