//! Incremental importance sampling.
//!
//! For each time step `t` the per-decision weight `rho_{1:t}` is split into the older
//! ratios `A_k = rho_{1:t-k}` and the `k` most recent ones `B_k = rho_{t-k+1:t}`. The
//! term for step `t` is the batch mean of `B_k r_t` with `k` minimising
//!
//! ```text
//! Var-hat(mean of B_k r_t) + Cov-hat(A_k, B_k r_t)^2
//! ```
//!
//! over `k = 0..=t`. Ties go to the larger `k`. Trajectories that ended before `t` have
//! reward 0 and unit ratios from their end onward.

use crate::error::Result;
use crate::mdp::{TabularPolicy, TrajectoryBatch};
use crate::stats;

use super::{ensure_nonempty, trajectory_ratios, EstimateExtra, EstimateReport};

/// Relative slack under which two candidate MSE estimates count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

fn mse_hat(a: &[f64], x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let cov = stats::sample_covariance(a, x);
    stats::sample_variance(x) / n + cov * cov
}

pub fn estimate_incris(
    batch: &TrajectoryBatch,
    pi_e: &TabularPolicy,
    pi_b: &TabularPolicy,
) -> Result<EstimateReport> {
    ensure_nonempty(batch)?;
    let horizon = batch.max_len();
    let ratios = batch
        .iter()
        .map(|t| {
            let mut r = trajectory_ratios(t, pi_e, pi_b)?;
            r.resize(horizon, 1.0);
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    // prefix[i][j] = rho_1 * ... * rho_j of trajectory i
    let prefix: Vec<Vec<f64>> = ratios
        .iter()
        .map(|r| {
            let mut p = Vec::with_capacity(horizon + 1);
            p.push(1.0);
            for &rho in r {
                p.push(p.last().unwrap() * rho);
            }
            p
        })
        .collect();

    let n = batch.n();
    let mut contributions = vec![0.0; n];
    let mut chosen_k = Vec::with_capacity(horizon);
    let mut recent = vec![1.0; n];
    let mut a = vec![0.0; n];
    let mut x = vec![0.0; n];

    for t in 1..=horizon {
        let rewards: Vec<f64> = batch
            .iter()
            .map(|traj| traj.steps.get(t - 1).map_or(0.0, |s| s.reward))
            .collect();

        // recent[i] = B_k for the current k, grown one ratio at a time
        recent.iter_mut().for_each(|b| *b = 1.0);
        let mut mse = Vec::with_capacity(t + 1);
        for k in 0..=t {
            if k > 0 {
                for i in 0..n {
                    recent[i] *= ratios[i][t - k];
                }
            }
            for i in 0..n {
                a[i] = prefix[i][t - k];
                x[i] = recent[i] * rewards[i];
            }
            mse.push(mse_hat(&a, &x));
        }

        let mut best = t;
        for k in (0..t).rev() {
            let slack = TIE_TOLERANCE * mse[best].abs().max(1.0);
            if mse[k] < mse[best] - slack {
                best = k;
            }
        }
        chosen_k.push(best);

        for (i, c) in contributions.iter_mut().enumerate() {
            let kept: f64 = ratios[i][t - best..t].iter().product();
            *c += kept * rewards[i];
        }
    }

    Ok(EstimateReport::from_contributions(
        "incris",
        contributions,
        batch,
        EstimateExtra::Incris { chosen_k },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::estimate_pdis;
    use crate::mdp::{Step, Trajectory};

    fn traj(steps: &[(usize, usize, f64)], seed: u64) -> Trajectory {
        Trajectory {
            steps: steps.iter().map(|&s| Step::from(s)).collect(),
            terminated: true,
            truncated: false,
            seed,
        }
    }

    #[test]
    fn identical_trajectories_keep_every_ratio() {
        let e = TabularPolicy::stationary(2, vec![0.2, 0.8]).unwrap();
        let b = TabularPolicy::uniform(2, 2).unwrap();
        let one = traj(&[(0, 1, 0.1), (1, 1, -0.3), (0, 0, 2.0)], 0);
        let batch = TrajectoryBatch::from_trajectories(vec![one; 50]);
        let inc = estimate_incris(&batch, &e, &b).unwrap();
        let pdis = estimate_pdis(&batch, &e, &b).unwrap();
        assert_eq!(
            inc.extra,
            EstimateExtra::Incris {
                chosen_k: vec![1, 2, 3]
            }
        );
        assert!((inc.estimate - pdis.estimate).abs() < 1e-12);
    }

    #[test]
    fn constant_first_reward_drops_history() {
        // first reward is the same for everyone, so k = 0 has zero variance and zero covariance
        let e = TabularPolicy::stationary(1, vec![0.0, 1.0]).unwrap();
        let b = TabularPolicy::uniform(1, 2).unwrap();
        let batch = TrajectoryBatch::from_trajectories(vec![
            traj(&[(0, 1, -1.0)], 0),
            traj(&[(0, 0, -1.0)], 1),
            traj(&[(0, 0, -1.0)], 2),
        ]);
        let inc = estimate_incris(&batch, &e, &b).unwrap();
        assert_eq!(inc.extra, EstimateExtra::Incris { chosen_k: vec![0] });
        assert_eq!(inc.estimate, -1.0);
    }

    #[test]
    fn ragged_batch_pads_short_trajectories() {
        let p = TabularPolicy::uniform(1, 2).unwrap();
        let batch = TrajectoryBatch::from_trajectories(vec![
            traj(&[(0, 1, 1.0)], 0),
            traj(&[(0, 0, 1.0), (0, 0, 2.0), (0, 1, 3.0)], 1),
        ]);
        let inc = estimate_incris(&batch, &p, &p).unwrap();
        assert_eq!(inc.per_trajectory_contributions, vec![1.0, 6.0]);
        assert_eq!(inc.estimate, 3.5);
    }
}
