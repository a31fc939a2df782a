//! Exhaustive covariance-testing search for a negligible dropped-state set.
//!
//! Candidate sets of size `1..=max_cardinality` are enumerated in lexicographic order of
//! their sorted members. A set is eligible when on the batch `|mean(A) - 1| < epsilon`
//! and `|Cov-hat(A, BG)| < epsilon`. Starting from the empty set (plain IS), an eligible
//! set replaces the incumbent when its estimated MSE is strictly lower, or when it is
//! within a factor `1 + epsilon` of the incumbent and strictly larger.
//!
//! The covariance test uses the absolute value so that a large negative covariance is
//! not mistaken for a negligible one.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{decompose_weights, empirical_mse_hat, sis_report, EstimateReport};
use crate::mdp::{StateSet, TabularMdp, TabularPolicy, TrajectoryBatch};

pub const DEFAULT_MAX_CARDINALITY: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub epsilon: f64,
    pub max_cardinality: usize,
    pub candidate_states: StateSet,
    /// Search on the first half of the batch and estimate on the second half.
    pub split_batch: bool,
}

impl SearchConfig {
    pub fn new(epsilon: f64, candidate_states: StateSet) -> Self {
        Self {
            epsilon,
            max_cardinality: DEFAULT_MAX_CARDINALITY,
            candidate_states,
            split_batch: false,
        }
    }

    /// All non-terminal states of `mdp` as candidates.
    pub fn for_mdp(mdp: &TabularMdp, epsilon: f64) -> Self {
        Self::new(epsilon, mdp.non_terminal_states())
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidSearchConfig(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateDiagnostics {
    pub set: StateSet,
    pub mean_a: f64,
    pub cov_hat: f64,
    pub mse_hat: f64,
    pub eligible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best_set: StateSet,
    pub best_mse_hat: f64,
    /// The empty set first, then every candidate in enumeration order.
    pub diagnostics: Vec<CandidateDiagnostics>,
    /// SIS estimate under `best_set`.
    pub estimate: f64,
    pub report: EstimateReport,
}

impl SearchResult {
    pub fn write_diagnostics_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["set", "mean_a", "cov_hat", "mse_hat", "eligible"])?;
        for d in &self.diagnostics {
            w.write_record([
                format_state_set(&d.set),
                d.mean_a.to_string(),
                d.cov_hat.to_string(),
                d.mse_hat.to_string(),
                d.eligible.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `{3;4}` style rendering of a state set; `{}` for the empty set.
pub fn format_state_set(set: &StateSet) -> String {
    let members: Vec<String> = set.iter().map(ToString::to_string).collect();
    format!("{{{}}}", members.join(";"))
}

/// All subsets of `universe` with `1..=max_size` members, by size and then lexicographically.
pub fn candidate_sets(universe: &StateSet, max_size: usize) -> Vec<StateSet> {
    fn extend(
        items: &[usize],
        size: usize,
        start: usize,
        current: &mut Vec<usize>,
        out: &mut Vec<StateSet>,
    ) {
        if current.len() == size {
            out.push(current.iter().copied().collect());
            return;
        }
        for i in start..items.len() {
            current.push(items[i]);
            extend(items, size, i + 1, current, out);
            current.pop();
        }
    }
    let items: Vec<usize> = universe.iter().copied().collect();
    let mut out = Vec::new();
    for size in 1..=max_size.min(items.len()) {
        extend(&items, size, 0, &mut Vec::with_capacity(size), &mut out);
    }
    out
}

fn evaluate(
    batch: &TrajectoryBatch,
    pi_e: &TabularPolicy,
    pi_b: &TabularPolicy,
    set: StateSet,
    epsilon: f64,
) -> Result<CandidateDiagnostics> {
    let decomp = decompose_weights(batch, pi_e, pi_b, &set)?;
    let m = empirical_mse_hat(&decomp)?;
    Ok(CandidateDiagnostics {
        set,
        mean_a: m.mean_a,
        cov_hat: m.cov_hat,
        mse_hat: m.mse_hat,
        eligible: (m.mean_a - 1.0).abs() < epsilon && m.cov_hat.abs() < epsilon,
    })
}

pub fn search_negligible_set(
    batch: &TrajectoryBatch,
    pi_e: &TabularPolicy,
    pi_b: &TabularPolicy,
    config: &SearchConfig,
) -> Result<SearchResult> {
    config.validate()?;
    let (search_batch, estimate_batch) = if config.split_batch {
        let (head, tail) = batch.split_at(batch.n() / 2);
        (head, Some(tail))
    } else {
        (batch.clone(), None)
    };
    if search_batch.n() < 2 {
        return Err(Error::InsufficientData {
            needed: if config.split_batch { 4 } else { 2 },
            got: batch.n(),
        });
    }

    let mut sets = vec![StateSet::new()];
    sets.extend(candidate_sets(
        &config.candidate_states,
        config.max_cardinality,
    ));
    let diagnostics = sets
        .into_par_iter()
        .map(|set| evaluate(&search_batch, pi_e, pi_b, set, config.epsilon))
        .collect::<Result<Vec<_>>>()?;

    let mut best = 0;
    for (i, d) in diagnostics.iter().enumerate().skip(1) {
        if !d.eligible {
            continue;
        }
        let incumbent = &diagnostics[best];
        if d.mse_hat < incumbent.mse_hat
            || (d.mse_hat < incumbent.mse_hat * (1.0 + config.epsilon)
                && d.set.len() > incumbent.set.len())
        {
            best = i;
        }
    }

    let best_set = diagnostics[best].set.clone();
    let target = estimate_batch.as_ref().unwrap_or(&search_batch);
    let report = sis_report(&decompose_weights(target, pi_e, pi_b, &best_set)?, target);
    Ok(SearchResult {
        best_mse_hat: diagnostics[best].mse_hat,
        best_set,
        estimate: report.estimate,
        report,
        diagnostics,
    })
}
