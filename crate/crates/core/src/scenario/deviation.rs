use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Tolerance on the total probability mass of a discrete model.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Distribution of a user's additive deviation from its predicted profile.
///
/// Every family is sampled by inversion from exactly one uniform draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DeviationModel {
    Discrete {
        support_kw: Vec<f64>,
        probabilities: Vec<f64>,
    },
    Uniform {
        lo_kw: f64,
        hi_kw: f64,
    },
    TruncatedGaussian {
        mean_kw: f64,
        stddev_kw: f64,
        lo_kw: f64,
        hi_kw: f64,
    },
}

impl DeviationModel {
    /// Degenerate deviation concentrated on `value`.
    pub fn point(value: f64) -> Self {
        DeviationModel::Discrete {
            support_kw: vec![value],
            probabilities: vec![1.0],
        }
    }

    pub fn discrete(points: &[(f64, f64)]) -> Self {
        DeviationModel::Discrete {
            support_kw: points.iter().map(|p| p.0).collect(),
            probabilities: points.iter().map(|p| p.1).collect(),
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, DeviationModel::Discrete { .. })
    }

    pub fn family(&self) -> &'static str {
        match self {
            DeviationModel::Discrete { .. } => "discrete",
            DeviationModel::Uniform { .. } => "uniform",
            DeviationModel::TruncatedGaussian { .. } => "truncated_gaussian",
        }
    }

    /// Invariant violations of this model, as messages.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            DeviationModel::Discrete {
                support_kw,
                probabilities,
            } => {
                if support_kw.is_empty() {
                    out.push("discrete support is empty".to_owned());
                }
                if support_kw.len() != probabilities.len() {
                    out.push(format!(
                        "support has {} points but {} probabilities",
                        support_kw.len(),
                        probabilities.len()
                    ));
                }
                if let Some(i) = support_kw.iter().position(|d| !d.is_finite()) {
                    out.push(format!("support point {i} is not finite"));
                }
                for (i, &p) in probabilities.iter().enumerate() {
                    if !(p > 0.0 && p.is_finite()) {
                        out.push(format!("probability {i} is {p}, must be > 0"));
                    }
                }
                let total: f64 = probabilities.iter().sum();
                if (total - 1.0).abs() > MASS_TOLERANCE {
                    out.push(format!("probability mass sums to {total}, expected 1"));
                }
                let mut sorted = support_kw.clone();
                sorted.sort_by(f64::total_cmp);
                if sorted.windows(2).any(|w| w[0] == w[1]) {
                    out.push("support points are not distinct".to_owned());
                }
            }
            DeviationModel::Uniform { lo_kw, hi_kw } => {
                if !(lo_kw.is_finite() && hi_kw.is_finite()) {
                    out.push("uniform bounds must be finite".to_owned());
                } else if lo_kw > hi_kw {
                    out.push(format!("uniform bounds inverted: lo {lo_kw} > hi {hi_kw}"));
                }
            }
            DeviationModel::TruncatedGaussian {
                mean_kw,
                stddev_kw,
                lo_kw,
                hi_kw,
            } => {
                if !(mean_kw.is_finite() && lo_kw.is_finite() && hi_kw.is_finite()) {
                    out.push("truncated gaussian parameters must be finite".to_owned());
                }
                if !(*stddev_kw > 0.0 && stddev_kw.is_finite()) {
                    out.push(format!("stddev is {stddev_kw}, must be > 0"));
                }
                if lo_kw.partial_cmp(hi_kw) != Some(std::cmp::Ordering::Less) {
                    out.push(format!("truncation bounds need lo < hi, got [{lo_kw}, {hi_kw}]"));
                }
            }
        }
        out
    }

    /// Maps a uniform `u` in `[0, 1)` to a deviation by inversion.
    pub fn sample_from_unit(&self, u: f64) -> f64 {
        match self {
            DeviationModel::Discrete {
                support_kw,
                probabilities,
            } => {
                let mut cumulative = 0.0;
                for (&d, &p) in support_kw.iter().zip(probabilities) {
                    cumulative += p;
                    if u < cumulative {
                        return d;
                    }
                }
                // Mass summing to slightly below 1.
                *support_kw.last().expect("validated discrete support")
            }
            DeviationModel::Uniform { lo_kw, hi_kw } => lo_kw + u * (hi_kw - lo_kw),
            DeviationModel::TruncatedGaussian {
                mean_kw,
                stddev_kw,
                lo_kw,
                hi_kw,
            } => {
                let alpha = (lo_kw - mean_kw) / stddev_kw;
                let beta = (hi_kw - mean_kw) / stddev_kw;
                let z = truncated_standard_normal(alpha, beta, u);
                (mean_kw + stddev_kw * z).clamp(*lo_kw, *hi_kw)
            }
        }
    }
}

/// Inverse-CDF draw of a standard normal restricted to `[alpha, beta]`.
fn truncated_standard_normal(alpha: f64, beta: f64, u: f64) -> f64 {
    // Work in the lower tail, where the CDF keeps its relative precision.
    if alpha > 0.0 {
        return -truncated_standard_normal(-beta, -alpha, 1.0 - u);
    }
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    let pa = n.cdf(alpha);
    let pb = n.cdf(beta);
    let p = pa + u * (pb - pa);
    if p <= 0.0 {
        return alpha;
    }
    n.inverse_cdf(p.min(1.0)).clamp(alpha, beta)
}
