//! Exact ground truth for small instances.
//!
//! [`true_return_dp`] runs backward induction over the state-time lattice.
//! [`enumerate_moments`] walks every `(action, next state)` branch under the behaviour
//! policy and accumulates exact moments of the SIS factors `A`, `B` and `G`. It makes
//! two passes, the first for means and the second for central moments, so the
//! covariance it reports is computed independently of `E[ABG] - E[A] E[BG]`.
//! Expectations are normalised by the enumerated leaf mass, which is 1 up to rounding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lift::{build_lift_domain, LiftDomainSpec};
use crate::mdp::{StateSet, TabularMdp, TabularPolicy};

pub const DEFAULT_LEAF_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthReport {
    pub true_return: f64,
    pub horizon_used: usize,
    /// Probability of reaching the horizon cap without entering a terminal state.
    pub truncation_mass: f64,
}

fn check_policy(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<()> {
    if policy.num_states() != mdp.num_states() || policy.num_actions() != mdp.num_actions() {
        return Err(Error::InvalidPolicy(format!(
            "policy is {}x{} but the MDP has {} states and {} actions",
            policy.num_states(),
            policy.num_actions(),
            mdp.num_states(),
            mdp.num_actions()
        )));
    }
    Ok(())
}

/// Expected undiscounted return of `policy` over at most `horizon_cap` steps.
#[allow(clippy::needless_range_loop)]
pub fn true_return_dp(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<TruthReport> {
    check_policy(mdp, policy)?;
    let n = mdp.num_states();
    let h = mdp.horizon_cap();

    // value[s] = expected return with k steps to go
    let mut value = vec![0.0; n];
    for _ in 0..h {
        let mut next_value = vec![0.0; n];
        for (s, v) in next_value.iter_mut().enumerate() {
            if mdp.is_terminal(s) {
                continue;
            }
            for a in 0..mdp.num_actions() {
                let pa = policy.prob(s, a);
                if pa == 0.0 {
                    continue;
                }
                let mut q = 0.0;
                for next in 0..n {
                    let p = mdp.transition(s, a, next);
                    if p == 0.0 {
                        continue;
                    }
                    let future = if mdp.is_terminal(next) {
                        0.0
                    } else {
                        value[next]
                    };
                    q += p * (mdp.reward(s, a, next) + future);
                }
                *v += pa * q;
            }
        }
        value = next_value;
    }
    let true_return = (0..n).map(|s| mdp.start_distribution()[s] * value[s]).sum();

    let mut occupancy = mdp.start_distribution().to_vec();
    for _ in 0..h {
        let mut next_occ = vec![0.0; n];
        for s in (0..n).filter(|&s| occupancy[s] > 0.0) {
            for a in 0..mdp.num_actions() {
                let mass = occupancy[s] * policy.prob(s, a);
                if mass == 0.0 {
                    continue;
                }
                for next in (0..n).filter(|&next| !mdp.is_terminal(next)) {
                    next_occ[next] += mass * mdp.transition(s, a, next);
                }
            }
        }
        occupancy = next_occ;
    }
    let truncation_mass = occupancy.iter().sum::<f64>().clamp(0.0, 1.0);

    Ok(TruthReport {
        true_return,
        horizon_used: h,
        truncation_mass,
    })
}

/// Exact moments of the SIS factors under the behaviour policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactMoments {
    pub e_a: f64,
    pub e_bg: f64,
    /// Expectation of the IS contribution.
    pub e_abg: f64,
    pub cov_a_bg: f64,
    /// Variance of one SIS contribution `BG`.
    pub var_sis_single: f64,
    /// MSE of SIS with a single trajectory, against `e_abg`.
    pub exact_mse_sis: f64,
    /// Variance of one IS contribution `ABG`.
    pub var_is_single: f64,
    /// Expected raw return under the behaviour policy.
    pub e_g: f64,
    /// Expectation and variance of one PDIS contribution.
    pub e_pdis: f64,
    pub var_pdis_single: f64,
    /// Total probability of the enumerated leaves.
    pub leaf_mass: f64,
    pub truncated_mass: f64,
    pub leaves: u64,
    /// Largest retained-state visit count over leaves with positive probability.
    pub max_retained_visits: usize,
    pub max_len: usize,
}

#[derive(Debug, Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    compensation: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

#[derive(Debug, Clone, Copy)]
struct Leaf {
    prob: f64,
    a: f64,
    b: f64,
    g: f64,
    pdis: f64,
    retained_visits: usize,
    truncated: bool,
}

struct Walker<'a> {
    mdp: &'a TabularMdp,
    pi_b: &'a TabularPolicy,
    pi_e: &'a TabularPolicy,
    dropped: &'a StateSet,
    max_len: usize,
    budget: u64,
    leaves: u64,
}

#[derive(Debug, Clone, Copy)]
struct Partial {
    prob: f64,
    a: f64,
    b: f64,
    g: f64,
    pdis: f64,
    pdis_weight: f64,
    retained_visits: usize,
    depth: usize,
}

impl Walker<'_> {
    fn walk(&mut self, visit: &mut dyn FnMut(&Leaf)) -> Result<()> {
        self.leaves = 0;
        for s in 0..self.mdp.num_states() {
            let p = self.mdp.start_distribution()[s];
            if p == 0.0 {
                continue;
            }
            let root = Partial {
                prob: p,
                a: 1.0,
                b: 1.0,
                g: 0.0,
                pdis: 0.0,
                pdis_weight: 1.0,
                retained_visits: 0,
                depth: 0,
            };
            self.expand(s, root, visit)?;
        }
        Ok(())
    }

    fn expand(&mut self, s: usize, node: Partial, visit: &mut dyn FnMut(&Leaf)) -> Result<()> {
        let dropped = self.dropped.contains(&s);
        for a in 0..self.mdp.num_actions() {
            let pb = self.pi_b.prob(s, a);
            if pb == 0.0 {
                continue;
            }
            let rho = self.pi_e.prob(s, a) / pb;
            for next in 0..self.mdp.num_states() {
                let pt = self.mdp.transition(s, a, next);
                if pt == 0.0 {
                    continue;
                }
                let reward = self.mdp.reward(s, a, next);
                let pdis_weight = node.pdis_weight * rho;
                let child = Partial {
                    prob: node.prob * pb * pt,
                    a: if dropped { node.a * rho } else { node.a },
                    b: if dropped { node.b } else { node.b * rho },
                    g: node.g + reward,
                    pdis: node.pdis + reward * pdis_weight,
                    pdis_weight,
                    retained_visits: node.retained_visits + usize::from(!dropped),
                    depth: node.depth + 1,
                };
                let terminal = self.mdp.is_terminal(next);
                if terminal || child.depth == self.max_len {
                    self.leaves += 1;
                    if self.leaves > self.budget {
                        return Err(Error::BudgetExceeded {
                            leaves: self.leaves,
                            budget: self.budget,
                        });
                    }
                    visit(&Leaf {
                        prob: child.prob,
                        a: child.a,
                        b: child.b,
                        g: child.g,
                        pdis: child.pdis,
                        retained_visits: child.retained_visits,
                        truncated: !terminal,
                    });
                } else {
                    self.expand(next, child, visit)?;
                }
            }
        }
        Ok(())
    }
}

pub fn enumerate_moments(
    mdp: &TabularMdp,
    pi_b: &TabularPolicy,
    pi_e: &TabularPolicy,
    dropped: &StateSet,
    max_len: usize,
) -> Result<ExactMoments> {
    enumerate_moments_with_budget(mdp, pi_b, pi_e, dropped, max_len, DEFAULT_LEAF_BUDGET)
}

/// As [`enumerate_moments`], refusing once more than `budget` leaves have been generated.
pub fn enumerate_moments_with_budget(
    mdp: &TabularMdp,
    pi_b: &TabularPolicy,
    pi_e: &TabularPolicy,
    dropped: &StateSet,
    max_len: usize,
    budget: u64,
) -> Result<ExactMoments> {
    check_policy(mdp, pi_b)?;
    check_policy(mdp, pi_e)?;
    if max_len == 0 {
        return Err(Error::InvalidMdp(
            "enumeration length must be at least 1".into(),
        ));
    }
    let mut walker = Walker {
        mdp,
        pi_b,
        pi_e,
        dropped,
        max_len: max_len.min(mdp.horizon_cap()),
        budget,
        leaves: 0,
    };

    let mut mass = Neumaier::default();
    let mut truncated = Neumaier::default();
    let [mut ea, mut ebg, mut eabg, mut eg, mut epdis] = [Neumaier::default(); 5];
    let mut max_retained_visits = 0;
    walker.walk(&mut |leaf| {
        let p = leaf.prob;
        let bg = leaf.b * leaf.g;
        mass.add(p);
        if leaf.truncated {
            truncated.add(p);
        }
        ea.add(p * leaf.a);
        ebg.add(p * bg);
        eabg.add(p * leaf.a * bg);
        eg.add(p * leaf.g);
        epdis.add(p * leaf.pdis);
        if p > 0.0 {
            max_retained_visits = max_retained_visits.max(leaf.retained_visits);
        }
    })?;
    let leaves = walker.leaves;
    let total = mass.value();
    let (e_a, e_bg, e_abg, e_pdis) = (
        ea.value() / total,
        ebg.value() / total,
        eabg.value() / total,
        epdis.value() / total,
    );

    let [mut cov, mut var_bg, mut var_abg, mut var_pdis] = [Neumaier::default(); 4];
    walker.walk(&mut |leaf| {
        let p = leaf.prob;
        let bg = leaf.b * leaf.g;
        let d_bg = bg - e_bg;
        let d_abg = leaf.a * bg - e_abg;
        let d_pdis = leaf.pdis - e_pdis;
        cov.add(p * (leaf.a - e_a) * d_bg);
        var_bg.add(p * d_bg * d_bg);
        var_abg.add(p * d_abg * d_abg);
        var_pdis.add(p * d_pdis * d_pdis);
    })?;

    let var_sis_single = var_bg.value() / total;
    let bias = e_bg - e_abg;
    Ok(ExactMoments {
        e_a,
        e_bg,
        e_abg,
        cov_a_bg: cov.value() / total,
        var_sis_single,
        exact_mse_sis: var_sis_single + bias * bias,
        var_is_single: var_abg.value() / total,
        e_g: eg.value() / total,
        e_pdis,
        var_pdis_single: var_pdis.value() / total,
        leaf_mass: total,
        truncated_mass: truncated.value(),
        leaves,
        max_retained_visits,
        max_len: walker.max_len,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactStats {
    pub bias: f64,
    pub variance: f64,
    pub mse: f64,
}

/// Exact bias, variance and MSE of the SIS estimator averaged over `n` trajectories.
/// The bias is `E[BG] - E[ABG]`, which is `-Cov(A, BG)` whenever `E[A] = 1`.
pub fn exact_estimator_stats(moments: &ExactMoments, n: usize) -> ExactStats {
    let bias = moments.e_bg - moments.e_abg;
    let variance = moments.var_sis_single / n.max(1) as f64;
    ExactStats {
        bias,
        variance,
        mse: variance + bias * bias,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisePoint {
    pub noise: f64,
    pub true_return: f64,
}

/// True return of the stochastic lift domain at each noise level in `grid`.
pub fn scan_noise(
    bound: usize,
    horizon_cap: usize,
    policy_noise: Option<f64>,
    grid: &[f64],
) -> Result<Vec<NoisePoint>> {
    grid.iter()
        .map(|&noise| {
            let spec = LiftDomainSpec {
                policy_noise,
                ..LiftDomainSpec::stochastic(bound, noise).with_horizon_cap(horizon_cap)
            };
            let d = build_lift_domain(spec)?;
            let truth = true_return_dp(&d.mdp, &d.eval_policy)?;
            Ok(NoisePoint {
                noise,
                true_return: truth.true_return,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lift::{build_lift_domain, LiftDomainSpec};

    #[test]
    fn zero_rewards_give_zero_truth() {
        let d = build_lift_domain(LiftDomainSpec::stochastic(4, 0.2)).unwrap();
        let mdp = d.mdp.map_rewards(|_, _, _, _| 0.0).unwrap();
        for policy in [&d.eval_policy, &d.behaviour_policy] {
            assert_eq!(true_return_dp(&mdp, policy).unwrap().true_return, 0.0);
        }
    }

    #[test]
    fn deterministic_truth_is_one_for_every_bound() {
        for bound in 3..=8 {
            let d = build_lift_domain(LiftDomainSpec::deterministic(bound)).unwrap();
            let t = true_return_dp(&d.mdp, &d.eval_policy).unwrap();
            assert!(
                (t.true_return - 1.0).abs() < 1e-12,
                "bound {bound}: {}",
                t.true_return
            );
            assert_eq!(t.truncation_mass, 0.0);
        }
    }

    #[test]
    fn identity_policies_have_unit_a() {
        let d = build_lift_domain(LiftDomainSpec::stochastic(3, 0.1).with_horizon_cap(6)).unwrap();
        let b = &d.behaviour_policy;
        let m = enumerate_moments(&d.mdp, b, b, &d.lift_states, 6).unwrap();
        assert_eq!(m.e_a, 1.0);
        assert_eq!(m.cov_a_bg, 0.0);
        assert!((m.leaf_mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn truncated_leaves_keep_their_mass() {
        let d = build_lift_domain(LiftDomainSpec::deterministic(3).with_horizon_cap(5)).unwrap();
        let m = enumerate_moments(
            &d.mdp,
            &d.behaviour_policy,
            &d.eval_policy,
            &StateSet::new(),
            5,
        )
        .unwrap();
        assert!(m.truncated_mass > 0.0);
        assert!((m.leaf_mass - 1.0).abs() < 1e-12);
        let t = true_return_dp(&d.mdp, &d.behaviour_policy).unwrap();
        assert!((t.truncation_mass - m.truncated_mass).abs() < 1e-12);
        assert!((t.true_return - m.e_g).abs() < 1e-12);
    }

    #[test]
    fn budget_refusal() {
        let d = build_lift_domain(LiftDomainSpec::stochastic(3, 0.1)).unwrap();
        match enumerate_moments_with_budget(
            &d.mdp,
            &d.behaviour_policy,
            &d.eval_policy,
            &StateSet::new(),
            40,
            1000,
        ) {
            Err(Error::BudgetExceeded { leaves, budget }) => {
                assert_eq!((leaves, budget), (1001, 1000))
            }
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn stats_scaling() {
        let d = build_lift_domain(LiftDomainSpec::deterministic(3).with_horizon_cap(12)).unwrap();
        let m = enumerate_moments(
            &d.mdp,
            &d.behaviour_policy,
            &d.eval_policy,
            &d.lift_states,
            12,
        )
        .unwrap();
        let one = exact_estimator_stats(&m, 50);
        let two = exact_estimator_stats(&m, 100);
        assert!((one.variance - 2.0 * two.variance).abs() < 1e-15);
        assert_eq!(one.bias, two.bias);

        let unbiased = ExactMoments {
            e_bg: 1.0,
            e_abg: 1.0,
            cov_a_bg: 0.0,
            ..m
        };
        let s = exact_estimator_stats(&unbiased, 10);
        assert_eq!(s.mse, s.variance);
    }
}
