//! Return estimators over a batch of behaviour-policy trajectories.
//!
//! Every estimator produces one contribution per trajectory and reports their mean:
//!
//! * IS: `G * prod_t rho_t`
//! * PDIS: `sum_t r_t * rho_{1:t}`
//! * INCRIS: PDIS with all but the `k` most recent ratios dropped, `k` chosen per time
//!   step by estimated MSE (see [`incris`])
//! * SIS: `G * B`, where `B` is the product of the ratios at states outside the dropped
//!   set and `A` (the ratios at dropped states) is discarded
//!
//! Trajectories whose weight is zero stay in the mean.

mod bound;
pub mod incris;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{action_ratio, StateSet, TabularPolicy, Trajectory, TrajectoryBatch};
use crate::stats;

pub use bound::{max_ratio, variance_upper_bound, BoundReport};
pub use incris::estimate_incris;

/// Estimator-specific details attached to a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimateExtra {
    None,
    Dropped {
        dropped: Vec<usize>,
    },
    /// Number of most recent ratios kept at each time step `t = 1, 2, ...`.
    Incris {
        chosen_k: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimator_name: String,
    pub estimate: f64,
    #[serde(skip)]
    pub per_trajectory_contributions: Vec<f64>,
    /// Sample variance of the contributions divided by `n`.
    #[serde(rename = "variance_hat")]
    pub estimator_variance_hat: f64,
    pub n: usize,
    /// Trajectories that hit the horizon cap; they contribute their accumulated return.
    pub truncated: usize,
    pub extra: EstimateExtra,
}

impl EstimateReport {
    pub(crate) fn from_contributions(
        name: &str,
        contributions: Vec<f64>,
        batch: &TrajectoryBatch,
        extra: EstimateExtra,
    ) -> Self {
        let n = contributions.len();
        Self {
            estimator_name: name.to_string(),
            estimate: stats::mean(&contributions),
            estimator_variance_hat: stats::sample_variance(&contributions) / n as f64,
            per_trajectory_contributions: contributions,
            n,
            truncated: batch.truncated_count(),
            extra,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

fn ensure_nonempty(batch: &TrajectoryBatch) -> Result<()> {
    if batch.n() == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    Ok(())
}

/// Per-step ratios of one trajectory.
pub(crate) fn trajectory_ratios(
    t: &Trajectory,
    pi_e: &TabularPolicy,
    pi_b: &TabularPolicy,
) -> Result<Vec<f64>> {
    t.steps
        .iter()
        .map(|s| action_ratio(pi_e, pi_b, s.state, s.action))
        .collect()
}

pub fn estimate_is(
    batch: &TrajectoryBatch,
    pi_e: &TabularPolicy,
    pi_b: &TabularPolicy,
) -> Result<EstimateReport> {
    ensure_nonempty(batch)?;
    let contributions = batch
        .iter()
        .map(|t| {
            let weight = trajectory_ratios(t, pi_e, pi_b)?.iter().product::<f64>();
            Ok(t.total_return() * weight)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EstimateReport::from_contributions(
        "is",
        contributions,
        batch,
        EstimateExtra::None,
    ))
}

pub fn estimate_pdis(
    batch: &TrajectoryBatch,
    pi_e: &TabularPolicy,
    pi_b: &TabularPolicy,
) -> Result<EstimateReport> {
    ensure_nonempty(batch)?;
    let contributions = batch
        .iter()
        .map(|t| {
            let mut weight = 1.0;
            let mut total = 0.0;
            for (step, rho) in t.steps.iter().zip(trajectory_ratios(t, pi_e, pi_b)?) {
                weight *= rho;
                total += step.reward * weight;
            }
            Ok(total)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EstimateReport::from_contributions(
        "pdis",
        contributions,
        batch,
        EstimateExtra::None,
    ))
}

/// Factors of the IS weight of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightTriple {
    /// Product of ratios at dropped states (1 if none visited).
    pub a_weight: f64,
    /// Product of ratios at retained states (1 if none visited).
    pub b_weight: f64,
    /// Return.
    pub g: f64,
    /// Number of steps taken in retained states.
    pub retained_visits: usize,
}

impl WeightTriple {
    pub fn bg(&self) -> f64 {
        self.b_weight * self.g
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightDecomposition {
    pub dropped: StateSet,
    pub triples: Vec<WeightTriple>,
}

impl WeightDecomposition {
    pub fn n(&self) -> usize {
        self.triples.len()
    }

    pub fn a_weights(&self) -> Vec<f64> {
        self.triples.iter().map(|t| t.a_weight).collect()
    }

    pub fn bg(&self) -> Vec<f64> {
        self.triples.iter().map(WeightTriple::bg).collect()
    }

    /// Largest number of retained-state visits in any trajectory.
    pub fn max_retained_visits(&self) -> usize {
        self.triples
            .iter()
            .map(|t| t.retained_visits)
            .max()
            .unwrap_or(0)
    }
}

pub fn decompose_weights(
    batch: &TrajectoryBatch,
    pi_e: &TabularPolicy,
    pi_b: &TabularPolicy,
    dropped: &StateSet,
) -> Result<WeightDecomposition> {
    let triples = batch
        .iter()
        .map(|t| {
            let mut triple = WeightTriple {
                a_weight: 1.0,
                b_weight: 1.0,
                g: t.total_return(),
                retained_visits: 0,
            };
            for step in &t.steps {
                let rho = action_ratio(pi_e, pi_b, step.state, step.action)?;
                if dropped.contains(&step.state) {
                    triple.a_weight *= rho;
                } else {
                    triple.b_weight *= rho;
                    triple.retained_visits += 1;
                }
            }
            Ok(triple)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WeightDecomposition {
        dropped: dropped.clone(),
        triples,
    })
}

pub fn estimate_sis(
    batch: &TrajectoryBatch,
    pi_e: &TabularPolicy,
    pi_b: &TabularPolicy,
    dropped: &StateSet,
) -> Result<EstimateReport> {
    ensure_nonempty(batch)?;
    let decomp = decompose_weights(batch, pi_e, pi_b, dropped)?;
    Ok(sis_report(&decomp, batch))
}

pub(crate) fn sis_report(decomp: &WeightDecomposition, batch: &TrajectoryBatch) -> EstimateReport {
    let contributions = decomp.triples.iter().map(|t| t.g * t.b_weight).collect();
    EstimateReport::from_contributions(
        "sis",
        contributions,
        batch,
        EstimateExtra::Dropped {
            dropped: decomp.dropped.iter().copied().collect(),
        },
    )
}

/// Empirical bias-variance summary of the SIS estimator for one dropped set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MseHat {
    /// Sample mean of `A`.
    pub mean_a: f64,
    /// Sample variance of `BG` divided by `n`.
    pub var_hat: f64,
    /// Sample covariance of `A` and `BG`.
    pub cov_hat: f64,
    pub mse_hat: f64,
}

pub fn empirical_mse_hat(decomp: &WeightDecomposition) -> Result<MseHat> {
    let n = decomp.n();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let a = decomp.a_weights();
    let bg = decomp.bg();
    let var_hat = stats::sample_variance(&bg) / n as f64;
    let cov_hat = stats::sample_covariance(&a, &bg);
    Ok(MseHat {
        mean_a: stats::mean(&a),
        var_hat,
        cov_hat,
        mse_hat: var_hat + cov_hat * cov_hat,
    })
}
