//! Lift domains on a line, and detection of lift states in arbitrary tabular MDPs.
//!
//! States are the coordinates `-B..=B`, stored at index `s + B`. The agent starts at 0
//! and the episode ends on entering `-B` (reward `-B`) or `+B` (reward `+B`); every
//! other transition costs `-1`. In lift states (`1 <= |s| <= B - 2`) both actions push
//! the agent outward. With noise `delta` every move goes the opposite way with
//! probability `delta`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{StateSet, TabularMdp, TabularPolicy, PROBABILITY_TOLERANCE};

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

pub const DEFAULT_HORIZON_CAP: usize = 100;
pub const DEFAULT_NOISE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftDomainSpec {
    /// Half-width `B` of the line.
    pub bound: usize,
    /// Transition noise; 0 gives the deterministic domain.
    pub noise: f64,
    /// Probability that the evaluation policy moves left. `None` ties it to `noise`.
    #[serde(default)]
    pub policy_noise: Option<f64>,
    pub horizon_cap: usize,
}

impl LiftDomainSpec {
    pub fn deterministic(bound: usize) -> Self {
        Self {
            bound,
            noise: 0.0,
            policy_noise: None,
            horizon_cap: DEFAULT_HORIZON_CAP,
        }
    }

    pub fn stochastic(bound: usize, noise: f64) -> Self {
        Self {
            bound,
            noise,
            policy_noise: None,
            horizon_cap: DEFAULT_HORIZON_CAP,
        }
    }

    pub fn with_horizon_cap(self, horizon_cap: usize) -> Self {
        Self {
            horizon_cap,
            ..self
        }
    }

    pub fn num_states(&self) -> usize {
        2 * self.bound + 1
    }

    pub fn effective_policy_noise(&self) -> f64 {
        self.policy_noise.unwrap_or(self.noise)
    }

    /// Index of line coordinate `coord`.
    pub fn index(&self, coord: i64) -> usize {
        (coord + self.bound as i64) as usize
    }

    /// Line coordinate of state index `index`.
    pub fn coord(&self, index: usize) -> i64 {
        index as i64 - self.bound as i64
    }

    pub fn is_lift_coord(&self, coord: i64) -> bool {
        let b = self.bound as i64;
        coord != 0 && coord.abs() <= b - 2
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.bound < 3 {
            return Err(Error::InvalidDomain(format!(
                "bound must be at least 3, got {}",
                self.bound
            )));
        }
        let in_range = |d: f64| d.is_finite() && (0.0..0.5).contains(&d);
        if !in_range(self.noise) {
            return Err(Error::InvalidDomain(format!(
                "noise must be in [0, 0.5), got {}",
                self.noise
            )));
        }
        if !in_range(self.effective_policy_noise()) {
            return Err(Error::InvalidDomain(format!(
                "policy noise must be in [0, 0.5), got {}",
                self.effective_policy_noise()
            )));
        }
        if self.horizon_cap == 0 {
            return Err(Error::InvalidDomain(
                "horizon cap must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// A lift domain together with its canonical policies.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainBundle {
    pub spec: LiftDomainSpec,
    pub mdp: TabularMdp,
    /// Moves right with probability `1 - policy_noise` in every state.
    pub eval_policy: TabularPolicy,
    /// Uniform over left and right.
    pub behaviour_policy: TabularPolicy,
    pub lift_states: StateSet,
}

pub fn build_lift_domain(spec: LiftDomainSpec) -> Result<DomainBundle> {
    spec.validate()?;
    let b = spec.bound as i64;
    let n = spec.num_states();
    let delta = spec.noise;
    let mut transition = vec![0.0; n * 2 * n];
    let mut reward = vec![0.0; n * 2 * n];
    let cell = |s: usize, a: usize, next: usize| (s * 2 + a) * n + next;

    for s in 0..n {
        let coord = spec.coord(s);
        for a in [LEFT, RIGHT] {
            if coord.abs() == b {
                transition[cell(s, a, s)] = 1.0;
                continue;
            }
            let intended = if spec.is_lift_coord(coord) {
                coord.signum()
            } else if a == LEFT {
                -1
            } else {
                1
            };
            transition[cell(s, a, spec.index(coord + intended))] += 1.0 - delta;
            transition[cell(s, a, spec.index(coord - intended))] += delta;
            for next in 0..n {
                reward[cell(s, a, next)] = match spec.coord(next) {
                    c if c == -b => -b as f64,
                    c if c == b => b as f64,
                    _ => -1.0,
                };
            }
        }
    }

    let terminal: StateSet = [0, n - 1].into();
    let mut start = vec![0.0; n];
    start[spec.index(0)] = 1.0;
    let mdp = TabularMdp::new(n, 2, transition, reward, &terminal, start, spec.horizon_cap)?;

    let pol = spec.effective_policy_noise();
    let eval_policy = TabularPolicy::stationary(n, vec![pol, 1.0 - pol])?;
    let behaviour_policy = TabularPolicy::uniform(n, 2)?;
    let lift_states = (-b + 2..=b - 2)
        .filter(|&c| c != 0)
        .map(|c| spec.index(c))
        .collect();

    Ok(DomainBundle {
        spec,
        mdp,
        eval_policy,
        behaviour_policy,
        lift_states,
    })
}

/// Non-terminal states whose next-state distribution and transition rewards do not depend
/// on the action. Rewards are compared only on next states reachable from the state.
pub fn detect_lift_states(mdp: &TabularMdp) -> StateSet {
    let same = |x: f64, y: f64| (x - y).abs() <= PROBABILITY_TOLERANCE;
    mdp.non_terminal_states()
        .into_iter()
        .filter(|&s| {
            let t0 = mdp.transition_row(s, 0);
            let r0 = mdp.reward_row(s, 0);
            (1..mdp.num_actions()).all(|a| {
                let t = mdp.transition_row(s, a);
                let r = mdp.reward_row(s, a);
                (0..mdp.num_states()).all(|next| {
                    same(t0[next], t[next]) && (t0[next] == 0.0 || same(r0[next], r[next]))
                })
            })
        })
        .collect()
}
