use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{StateSet, TabularPolicy};

use super::WeightDecomposition;

/// Popoviciu-style upper bound on the variance of a single SIS contribution,
/// `(h * r_max * rho_max^m_b)^2 / 4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub rho_max: f64,
    pub m_b: usize,
    pub r_max: f64,
    pub h: usize,
    pub bound: f64,
    /// Some return was negative, so `r_max` is being used as an absolute range rather
    /// than the upper end of `[0, r_max]`.
    pub heuristic: bool,
}

impl BoundReport {
    pub fn from_parts(rho_max: f64, m_b: usize, r_max: f64, h: usize, heuristic: bool) -> Self {
        let spread = h as f64 * r_max * rho_max.powi(m_b as i32);
        Self {
            rho_max,
            m_b,
            r_max,
            h,
            bound: spread * spread / 4.0,
            heuristic,
        }
    }
}

/// Largest `pi_e(a|s) / pi_b(a|s)` over `states`. Every action must have behaviour support.
pub fn max_ratio(pi_e: &TabularPolicy, pi_b: &TabularPolicy, states: &StateSet) -> Result<f64> {
    let mut rho_max: f64 = 0.0;
    for &s in states {
        for a in 0..pi_b.num_actions() {
            if pi_b.prob(s, a) <= 0.0 {
                return Err(Error::SupportViolation {
                    state: s,
                    action: a,
                });
            }
            rho_max = rho_max.max(pi_e.prob(s, a) / pi_b.prob(s, a));
        }
    }
    Ok(rho_max)
}

/// Bound for the decomposition's dropped set. `retained_states` should be the states outside
/// the dropped set; `m_b` is read off the decomposition's retained-visit counts.
pub fn variance_upper_bound(
    decomp: &WeightDecomposition,
    pi_e: &TabularPolicy,
    pi_b: &TabularPolicy,
    r_max: f64,
    h: usize,
    retained_states: &StateSet,
) -> Result<BoundReport> {
    let rho_max = max_ratio(pi_e, pi_b, retained_states)?;
    let heuristic = decomp.triples.iter().any(|t| t.g < 0.0);
    Ok(BoundReport::from_parts(
        rho_max,
        decomp.max_retained_visits(),
        r_max,
        h,
        heuristic,
    ))
}
