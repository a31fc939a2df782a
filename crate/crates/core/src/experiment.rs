//! Replicated estimator comparisons on lift domains.
//!
//! Every `(bound, n, replicate)` cell samples one behaviour batch from a seed derived
//! from `(base_seed, bound, n, replicate)` alone, so adding or removing estimators never
//! changes the data the others see. Cells run in parallel and results are gathered in
//! `(bound, n, replicate, estimator)` order, which keeps the CSV output byte-identical
//! across runs.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{estimate_incris, estimate_is, estimate_pdis, estimate_sis};
use crate::lift::{
    build_lift_domain, DomainBundle, LiftDomainSpec, DEFAULT_HORIZON_CAP, DEFAULT_NOISE,
};
use crate::mdp::{sample_batch, StateSet, TrajectoryBatch};
use crate::oracle::{true_return_dp, TruthReport};
use crate::search::{
    format_state_set, search_negligible_set, SearchConfig, DEFAULT_MAX_CARDINALITY,
};
use crate::stats;

pub const ROWS_HEADER: [&str; 9] = [
    "domain_size",
    "n",
    "replicate",
    "estimator",
    "estimate",
    "true_return",
    "squared_error",
    "chosen_set",
    "seed",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    #[serde(alias = "det")]
    Deterministic,
    #[serde(alias = "stoch")]
    Stochastic,
}

/// Estimators in the column order of the result tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Is,
    Pdis,
    SisLift,
    SisSearch,
    Incris,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] = [
        Self::Is,
        Self::Pdis,
        Self::SisLift,
        Self::SisSearch,
        Self::Incris,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Self::Is => "is",
            Self::Pdis => "pdis",
            Self::SisLift => "sis_lift",
            Self::SisSearch => "sis_search",
            Self::Incris => "incris",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.label() == label)
    }

    fn seed_salt(self) -> u64 {
        match self {
            Self::Is => 1,
            Self::Pdis => 2,
            Self::SisLift => 3,
            Self::SisSearch => 4,
            Self::Incris => 5,
        }
    }
}

fn default_noise() -> f64 {
    DEFAULT_NOISE
}
fn default_horizon() -> usize {
    DEFAULT_HORIZON_CAP
}
fn default_true() -> bool {
    true
}
fn default_cardinality() -> usize {
    DEFAULT_MAX_CARDINALITY
}
fn default_estimators() -> Vec<EstimatorKind> {
    EstimatorKind::ALL.to_vec()
}
fn default_output() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainKind,
    pub bounds: Vec<usize>,
    /// Transition noise for the stochastic domain; ignored for the deterministic one.
    #[serde(default = "default_noise")]
    pub noise: f64,
    /// Evaluation-policy noise; defaults to the transition noise.
    #[serde(default)]
    pub policy_noise: Option<f64>,
    pub trajectories_per_run: Vec<usize>,
    pub replicates: usize,
    pub epsilon: f64,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorKind>,
    pub base_seed: u64,
    #[serde(default = "default_horizon")]
    pub horizon_cap: usize,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// All estimators of a replicate share one batch.
    #[serde(default = "default_true")]
    pub shared_batch: bool,
    #[serde(default = "default_cardinality")]
    pub max_cardinality: usize,
    /// Search on one half of the batch and estimate on the other.
    #[serde(default)]
    pub split_search: bool,
    /// Replace every reward by zero.
    #[serde(default)]
    pub zero_rewards: bool,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path).map_err(Error::file(path))?)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if self.replicates == 0 {
            return fail("replicates must be at least 1".into());
        }
        if self.bounds.is_empty() || self.bounds.iter().any(|&b| b < 3) {
            return fail(format!(
                "bounds must be non-empty and at least 3, got {:?}",
                self.bounds
            ));
        }
        if self.trajectories_per_run.is_empty() || self.trajectories_per_run.iter().any(|&n| n < 2)
        {
            return fail("trajectories_per_run must be non-empty with every n >= 2".into());
        }
        if self.estimators.is_empty() {
            return fail("estimator list is empty".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return fail(format!("epsilon must be positive, got {}", self.epsilon));
        }
        for b in &self.bounds {
            self.domain_spec(*b)
                .validate()
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        }
        Ok(())
    }

    pub fn domain_spec(&self, bound: usize) -> LiftDomainSpec {
        let noise = match self.domain {
            DomainKind::Deterministic => 0.0,
            DomainKind::Stochastic => self.noise,
        };
        LiftDomainSpec {
            bound,
            noise,
            policy_noise: self.policy_noise,
            horizon_cap: self.horizon_cap,
        }
    }

    /// Estimators in canonical column order, without duplicates.
    pub fn estimator_columns(&self) -> Vec<EstimatorKind> {
        EstimatorKind::ALL
            .into_iter()
            .filter(|k| self.estimators.contains(k))
            .collect()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Base seed of the batch for one grid cell.
pub fn cell_seed(base_seed: u64, bound: usize, n: usize, replicate: usize) -> u64 {
    let h = splitmix64(bound as u64);
    let h = splitmix64(h ^ n as u64);
    let h = splitmix64(h ^ replicate as u64);
    base_seed ^ h
}

fn estimator_seed(cell: u64, kind: EstimatorKind, shared: bool) -> u64 {
    if shared {
        cell
    } else {
        cell ^ splitmix64(kind.seed_salt())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub domain_size: usize,
    pub n: usize,
    pub replicate: usize,
    pub estimator: EstimatorKind,
    /// `None` when the estimator failed on this batch.
    pub estimate: Option<f64>,
    pub true_return: f64,
    pub squared_error: Option<f64>,
    pub chosen_set: Option<StateSet>,
    pub seed: u64,
    pub error: Option<String>,
}

impl ResultRow {
    fn record(&self) -> [String; 9] {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        [
            self.domain_size.to_string(),
            self.n.to_string(),
            self.replicate.to_string(),
            self.estimator.label().to_string(),
            opt(self.estimate),
            self.true_return.to_string(),
            opt(self.squared_error),
            self.chosen_set
                .as_ref()
                .map(format_state_set)
                .unwrap_or_default(),
            self.seed.to_string(),
        ]
    }
}

/// Aggregate over replicates of one `(domain_size, n, estimator)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub domain_size: usize,
    pub n: usize,
    pub estimator: EstimatorKind,
    pub mse: f64,
    pub mean_estimate: f64,
    pub std_error: f64,
    pub true_return: f64,
    pub truncation_mass: f64,
    pub replicates: usize,
    pub failed: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
    /// Truth per bound.
    pub truths: BTreeMap<usize, TruthReport>,
}

struct PreparedDomain {
    bundle: DomainBundle,
    truth: TruthReport,
}

fn prepare(config: &ExperimentConfig, bound: usize) -> Result<PreparedDomain> {
    let mut bundle = build_lift_domain(config.domain_spec(bound))?;
    if config.zero_rewards {
        bundle.mdp = bundle.mdp.map_rewards(|_, _, _, _| 0.0)?;
    }
    let truth = true_return_dp(&bundle.mdp, &bundle.eval_policy)?;
    Ok(PreparedDomain { bundle, truth })
}

fn run_estimator(
    config: &ExperimentConfig,
    domain: &PreparedDomain,
    kind: EstimatorKind,
    batch: &TrajectoryBatch,
) -> Result<(f64, Option<StateSet>)> {
    let b = &domain.bundle;
    let (pi_e, pi_b) = (&b.eval_policy, &b.behaviour_policy);
    Ok(match kind {
        EstimatorKind::Is => (estimate_is(batch, pi_e, pi_b)?.estimate, None),
        EstimatorKind::Pdis => (estimate_pdis(batch, pi_e, pi_b)?.estimate, None),
        EstimatorKind::Incris => (estimate_incris(batch, pi_e, pi_b)?.estimate, None),
        EstimatorKind::SisLift => (
            estimate_sis(batch, pi_e, pi_b, &b.lift_states)?.estimate,
            None,
        ),
        EstimatorKind::SisSearch => {
            let search = SearchConfig {
                max_cardinality: config.max_cardinality,
                split_batch: config.split_search,
                ..SearchConfig::for_mdp(&b.mdp, config.epsilon)
            };
            let result = search_negligible_set(batch, pi_e, pi_b, &search)?;
            (result.estimate, Some(result.best_set))
        }
    })
}

fn run_cell(
    config: &ExperimentConfig,
    domain: &PreparedDomain,
    n: usize,
    replicate: usize,
) -> Vec<ResultRow> {
    let bound = domain.bundle.spec.bound;
    let cell = cell_seed(config.base_seed, bound, n, replicate);
    let truth = domain.truth.true_return;
    let b = &domain.bundle;
    let mut shared: Option<Result<TrajectoryBatch>> = None;
    config
        .estimator_columns()
        .into_iter()
        .map(|kind| {
            let seed = estimator_seed(cell, kind, config.shared_batch);
            let mut row = ResultRow {
                domain_size: 2 * bound + 1,
                n,
                replicate,
                estimator: kind,
                estimate: None,
                true_return: truth,
                squared_error: None,
                chosen_set: None,
                seed,
                error: None,
            };
            let outcome = if config.shared_batch {
                match shared
                    .get_or_insert_with(|| sample_batch(&b.mdp, &b.behaviour_policy, n, seed))
                {
                    Ok(batch) => run_estimator(config, domain, kind, batch),
                    Err(e) => Err(Error::InvalidConfig(format!("sampling failed: {e}"))),
                }
            } else {
                sample_batch(&b.mdp, &b.behaviour_policy, n, seed)
                    .and_then(|batch| run_estimator(config, domain, kind, &batch))
            };
            match outcome {
                Ok((estimate, chosen)) => {
                    row.estimate = Some(estimate);
                    row.squared_error = Some((estimate - truth) * (estimate - truth));
                    row.chosen_set = chosen;
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            row
        })
        .collect()
}

fn summarize(
    config: &ExperimentConfig,
    rows: &[ResultRow],
    truths: &BTreeMap<usize, TruthReport>,
) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(usize, usize, EstimatorKind), Vec<&ResultRow>> = BTreeMap::new();
    for row in rows {
        groups
            .entry((row.domain_size, row.n, row.estimator))
            .or_default()
            .push(row);
    }
    // keep the configured n order rather than numeric order
    let n_rank = |n: usize| {
        config
            .trajectories_per_run
            .iter()
            .position(|&m| m == n)
            .unwrap_or(usize::MAX)
    };
    let mut summary: Vec<SummaryRow> = groups
        .into_iter()
        .map(|((domain_size, n, estimator), group)| {
            let ok: Vec<f64> = group.iter().filter_map(|r| r.estimate).collect();
            let sq: Vec<f64> = group.iter().filter_map(|r| r.squared_error).collect();
            let truth = truths[&((domain_size - 1) / 2)];
            SummaryRow {
                domain_size,
                n,
                estimator,
                mse: stats::mean(&sq),
                mean_estimate: stats::mean(&ok),
                std_error: stats::standard_error(&ok),
                true_return: truth.true_return,
                truncation_mass: truth.truncation_mass,
                replicates: ok.len(),
                failed: group.len() - ok.len(),
            }
        })
        .collect();
    summary.sort_by_key(|s| (n_rank(s.n), s.domain_size, s.estimator));
    summary
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let mut bounds = config.bounds.clone();
    bounds.sort_unstable();
    bounds.dedup();
    let domains = bounds
        .iter()
        .map(|&b| Ok((b, prepare(config, b)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;

    let cells: Vec<(usize, usize, usize)> = bounds
        .iter()
        .flat_map(|&b| {
            config
                .trajectories_per_run
                .iter()
                .flat_map(move |&n| (0..config.replicates).map(move |r| (b, n, r)))
        })
        .collect();
    let rows: Vec<ResultRow> = cells
        .par_iter()
        .map(|&(b, n, r)| run_cell(config, &domains[&b], n, r))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();

    let truths: BTreeMap<usize, TruthReport> = domains.iter().map(|(&b, d)| (b, d.truth)).collect();
    let summary = summarize(config, &rows, &truths);
    Ok(ExperimentOutput {
        config: config.clone(),
        rows,
        summary,
        truths,
    })
}

impl ExperimentOutput {
    pub fn write_rows_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(ROWS_HEADER)?;
        for row in &self.rows {
            w.write_record(row.record())?;
        }
        w.flush()?;
        Ok(())
    }

    /// One line per `(domain_size, n)` with one MSE column per estimator.
    pub fn write_mse_table_csv<W: Write>(&self, out: W) -> Result<()> {
        let columns = self.config.estimator_columns();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["domain_size".to_string(), "n".to_string()];
        header.extend(columns.iter().map(|k| k.label().to_string()));
        w.write_record(&header)?;
        let mut lines: Vec<(usize, usize)> = Vec::new();
        for s in &self.summary {
            if !lines.contains(&(s.domain_size, s.n)) {
                lines.push((s.domain_size, s.n));
            }
        }
        for (size, n) in lines {
            let mut record = vec![size.to_string(), n.to_string()];
            for k in &columns {
                let cell = self
                    .summary
                    .iter()
                    .find(|s| s.domain_size == size && s.n == n && s.estimator == *k)
                    .map(|s| s.mse.to_string())
                    .unwrap_or_default();
                record.push(cell);
            }
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "domain_size",
            "n",
            "estimator",
            "mse",
            "mean_estimate",
            "std_error",
            "true_return",
            "truncation_mass",
            "replicates",
            "failed",
        ])?;
        for s in &self.summary {
            w.write_record([
                s.domain_size.to_string(),
                s.n.to_string(),
                s.estimator.label().to_string(),
                s.mse.to_string(),
                s.mean_estimate.to_string(),
                s.std_error.to_string(),
                s.true_return.to_string(),
                s.truncation_mass.to_string(),
                s.replicates.to_string(),
                s.failed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Figure data for one `n`: mean estimate (deterministic domain) or mean residual
    /// (stochastic domain) with its standard error, per domain size and estimator.
    pub fn write_plot_csv<W: Write>(&self, n: usize, out: W) -> Result<()> {
        let residual = self.config.domain == DomainKind::Stochastic;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "estimator", "y", "yerr"])?;
        for s in self.summary.iter().filter(|s| s.n == n) {
            let y = if residual {
                s.mean_estimate - s.true_return
            } else {
                s.mean_estimate
            };
            w.write_record([
                s.domain_size.to_string(),
                s.estimator.label().to_string(),
                y.to_string(),
                s.std_error.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `rows.csv`, `mse_table.csv`, `summary.csv` and, with `plot_data`, one
    /// `plot_n<N>.csv` per trajectory count. Returns the written paths.
    pub fn write_to(&self, dir: &Path, plot_data: bool) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(Error::file(dir))?;
        let mut written = Vec::new();
        let mut create = |name: String| -> Result<fs::File> {
            let path = dir.join(name);
            let file = fs::File::create(&path).map_err(Error::file(&path))?;
            written.push(path);
            Ok(file)
        };
        self.write_rows_csv(create("rows.csv".into())?)?;
        self.write_mse_table_csv(create("mse_table.csv".into())?)?;
        self.write_summary_csv(create("summary.csv".into())?)?;
        if plot_data {
            for &n in &self.config.trajectories_per_run {
                self.write_plot_csv(n, create(format!("plot_n{n}.csv"))?)?;
            }
        }
        Ok(written)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ResultRow> {
        self.rows.iter().filter(|r| r.error.is_some())
    }

    pub fn summary_for(
        &self,
        domain_size: usize,
        n: usize,
        estimator: EstimatorKind,
    ) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|s| s.domain_size == domain_size && s.n == n && s.estimator == estimator)
    }
}
