//! Tabular finite-horizon MDPs, tabular policies and seeded trajectory sampling.
//!
//! Rewards are indexed by `(state, action, next_state)` so that a terminal bonus can
//! depend on which terminal state is entered. The reward of the transition into a
//! terminal state is attached to the final step of the trajectory, so the return of
//! an episode is always the plain sum of its step rewards.
//!
//! Sampling draws from a ChaCha8 stream seeded with the trajectory seed and uses
//! inverse-CDF selection over the tabulated distribution in index order. Given the
//! same model, policy and seed the resulting trajectory is identical on every
//! platform.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when checking that probability rows sum to one.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

/// A set of state indices. Ordered so that iteration and serialization are deterministic.
pub type StateSet = BTreeSet<usize>;

fn check_distribution(row: &[f64], what: impl Fn() -> String) -> std::result::Result<(), String> {
    if let Some(p) = row
        .iter()
        .find(|p| !p.is_finite() || **p < 0.0 || **p > 1.0)
    {
        return Err(format!("{} has entry {p} outside [0, 1]", what()));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
        return Err(format!("{} sums to {sum}", what()));
    }
    Ok(())
}

/// A finite-horizon undiscounted MDP with tabulated dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MdpDocument", into = "MdpDocument")]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    transition: Vec<f64>,
    reward: Vec<f64>,
    terminal: Vec<bool>,
    start_distribution: Vec<f64>,
    horizon_cap: usize,
}

impl TabularMdp {
    /// Builds a model from flat `(state, action, next_state)` tensors in row-major order.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        terminal_states: &StateSet,
        start_distribution: Vec<f64>,
        horizon_cap: usize,
    ) -> Result<Self> {
        fn invalid<T>(msg: String) -> Result<T> {
            Err(Error::InvalidMdp(msg))
        }
        if num_states == 0 || num_actions == 0 {
            return invalid("need at least one state and one action".into());
        }
        if horizon_cap == 0 {
            return invalid("horizon cap must be at least 1".into());
        }
        let cells = num_states * num_actions * num_states;
        if transition.len() != cells || reward.len() != cells {
            return invalid(format!(
                "expected {cells} transition and reward entries, got {} and {}",
                transition.len(),
                reward.len()
            ));
        }
        if start_distribution.len() != num_states {
            return invalid(format!(
                "start distribution has {} entries for {num_states} states",
                start_distribution.len()
            ));
        }
        if let Some(&s) = terminal_states.iter().find(|&&s| s >= num_states) {
            return invalid(format!("terminal state {s} out of range"));
        }
        if reward.iter().any(|r| !r.is_finite()) {
            return invalid("rewards must be finite".into());
        }
        for s in 0..num_states {
            for a in 0..num_actions {
                let start = (s * num_actions + a) * num_states;
                check_distribution(&transition[start..start + num_states], || {
                    format!("transition row ({s}, {a})")
                })
                .or_else(invalid)?;
            }
        }
        check_distribution(&start_distribution, || "start distribution".into()).or_else(invalid)?;
        if let Some(&s) = terminal_states
            .iter()
            .find(|&&s| start_distribution[s] > 0.0)
        {
            return invalid(format!(
                "start distribution puts mass on terminal state {s}"
            ));
        }
        let mut terminal = vec![false; num_states];
        for &s in terminal_states {
            terminal[s] = true;
        }
        Ok(Self {
            num_states,
            num_actions,
            transition,
            reward,
            terminal,
            start_distribution,
            horizon_cap,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn horizon_cap(&self) -> usize {
        self.horizon_cap
    }

    fn row_start(&self, s: usize, a: usize) -> usize {
        (s * self.num_actions + a) * self.num_states
    }

    pub fn transition(&self, s: usize, a: usize, next: usize) -> f64 {
        self.transition[self.row_start(s, a) + next]
    }

    /// Next-state distribution for `(s, a)`.
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = self.row_start(s, a);
        &self.transition[start..start + self.num_states]
    }

    pub fn reward(&self, s: usize, a: usize, next: usize) -> f64 {
        self.reward[self.row_start(s, a) + next]
    }

    pub fn reward_row(&self, s: usize, a: usize) -> &[f64] {
        let start = self.row_start(s, a);
        &self.reward[start..start + self.num_states]
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn terminal_states(&self) -> StateSet {
        (0..self.num_states).filter(|&s| self.terminal[s]).collect()
    }

    pub fn non_terminal_states(&self) -> StateSet {
        (0..self.num_states)
            .filter(|&s| !self.terminal[s])
            .collect()
    }

    pub fn start_distribution(&self) -> &[f64] {
        &self.start_distribution
    }

    /// Largest absolute reward over all transitions out of non-terminal states.
    pub fn max_abs_reward(&self) -> f64 {
        (0..self.num_states)
            .filter(|&s| !self.terminal[s])
            .flat_map(|s| (0..self.num_actions).map(move |a| (s, a)))
            .flat_map(|(s, a)| self.reward_row(s, a).iter())
            .fold(0.0, |m: f64, r| m.max(r.abs()))
    }

    /// Same model with a different horizon cap.
    pub fn with_horizon_cap(&self, horizon_cap: usize) -> Result<Self> {
        if horizon_cap == 0 {
            return Err(Error::InvalidMdp("horizon cap must be at least 1".into()));
        }
        Ok(Self {
            horizon_cap,
            ..self.clone()
        })
    }

    /// Same model with every reward replaced by `f(s, a, next, reward)`.
    pub fn map_rewards(&self, f: impl Fn(usize, usize, usize, f64) -> f64) -> Result<Self> {
        let mut reward = self.reward.clone();
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                let start = self.row_start(s, a);
                for next in 0..self.num_states {
                    reward[start + next] = f(s, a, next, reward[start + next]);
                }
            }
        }
        if reward.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidMdp("rewards must be finite".into()));
        }
        Ok(Self {
            reward,
            ..self.clone()
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// JSON interchange form of a [`TabularMdp`] with explicit nested tensors.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct MdpDocument {
    num_states: usize,
    num_actions: usize,
    /// `transition[s][a][s']`
    transition: Vec<Vec<Vec<f64>>>,
    /// `reward[s][a][s']`
    reward: Vec<Vec<Vec<f64>>>,
    terminal_states: Vec<usize>,
    start_distribution: Vec<f64>,
    horizon_cap: usize,
}

impl From<TabularMdp> for MdpDocument {
    fn from(mdp: TabularMdp) -> Self {
        let nest = |flat: &[f64]| -> Vec<Vec<Vec<f64>>> {
            flat.chunks(mdp.num_states * mdp.num_actions)
                .map(|per_state| {
                    per_state
                        .chunks(mdp.num_states)
                        .map(<[f64]>::to_vec)
                        .collect()
                })
                .collect()
        };
        Self {
            num_states: mdp.num_states,
            num_actions: mdp.num_actions,
            transition: nest(&mdp.transition),
            reward: nest(&mdp.reward),
            terminal_states: mdp.terminal_states().into_iter().collect(),
            start_distribution: mdp.start_distribution.clone(),
            horizon_cap: mdp.horizon_cap,
        }
    }
}

impl TryFrom<MdpDocument> for TabularMdp {
    type Error = Error;

    fn try_from(doc: MdpDocument) -> Result<Self> {
        let flatten = |nested: Vec<Vec<Vec<f64>>>, name: &str| -> Result<Vec<f64>> {
            let shape_ok = nested.len() == doc.num_states
                && nested.iter().all(|rows| {
                    rows.len() == doc.num_actions && rows.iter().all(|r| r.len() == doc.num_states)
                });
            if !shape_ok {
                return Err(Error::InvalidMdp(format!(
                    "{name} tensor does not have shape [{}][{}][{}]",
                    doc.num_states, doc.num_actions, doc.num_states
                )));
            }
            Ok(nested.into_iter().flatten().flatten().collect())
        };
        let transition = flatten(doc.transition, "transition")?;
        let reward = flatten(doc.reward, "reward")?;
        TabularMdp::new(
            doc.num_states,
            doc.num_actions,
            transition,
            reward,
            &doc.terminal_states.iter().copied().collect(),
            doc.start_distribution,
            doc.horizon_cap,
        )
    }
}

/// Per-state action distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularPolicy {
    num_actions: usize,
    probs: Vec<f64>,
}

impl TabularPolicy {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let num_actions = rows.first().map_or(0, Vec::len);
        if num_actions == 0 {
            return Err(Error::InvalidPolicy(
                "policy needs at least one state and action".into(),
            ));
        }
        for (s, row) in rows.iter().enumerate() {
            if row.len() != num_actions {
                return Err(Error::InvalidPolicy(format!(
                    "row {s} has {} actions, expected {num_actions}",
                    row.len()
                )));
            }
            check_distribution(row, || format!("policy row {s}")).map_err(Error::InvalidPolicy)?;
        }
        Ok(Self {
            num_actions,
            probs: rows.into_iter().flatten().collect(),
        })
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Result<Self> {
        Self::new(vec![
            vec![1.0 / num_actions as f64; num_actions];
            num_states
        ])
    }

    /// The same action distribution in every state.
    pub fn stationary(num_states: usize, row: Vec<f64>) -> Result<Self> {
        Self::new(vec![row; num_states])
    }

    pub fn num_states(&self) -> usize {
        self.probs.len() / self.num_actions
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.num_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.num_actions..(s + 1) * self.num_actions]
    }

    fn check_shape(&self, mdp: &TabularMdp) -> Result<()> {
        if self.num_states() != mdp.num_states() || self.num_actions != mdp.num_actions() {
            return Err(Error::InvalidPolicy(format!(
                "policy is {}x{} but the MDP has {} states and {} actions",
                self.num_states(),
                self.num_actions,
                mdp.num_states(),
                mdp.num_actions()
            )));
        }
        Ok(())
    }
}

/// Importance ratio `pi_e(a|s) / pi_b(a|s)`.
pub fn action_ratio(pi_e: &TabularPolicy, pi_b: &TabularPolicy, s: usize, a: usize) -> Result<f64> {
    let behaviour = pi_b.prob(s, a);
    if behaviour <= 0.0 {
        return Err(Error::SupportViolation {
            state: s,
            action: a,
        });
    }
    Ok(pi_e.prob(s, a) / behaviour)
}

/// One decision: the state visited, the action taken and the reward of the resulting transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(usize, usize, f64)", into = "(usize, usize, f64)")]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
}

impl From<(usize, usize, f64)> for Step {
    fn from((state, action, reward): (usize, usize, f64)) -> Self {
        Self {
            state,
            action,
            reward,
        }
    }
}

impl From<Step> for (usize, usize, f64) {
    fn from(step: Step) -> Self {
        (step.state, step.action, step.reward)
    }
}

/// A sampled episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TrajectoryRecord", into = "TrajectoryRecord")]
pub struct Trajectory {
    pub steps: Vec<Step>,
    /// The episode entered a terminal state.
    pub terminated: bool,
    /// The episode was cut off at the horizon cap.
    pub truncated: bool,
    pub seed: u64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Undiscounted return.
    pub fn total_return(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn visits(&self, s: usize) -> bool {
        self.steps.iter().any(|step| step.state == s)
    }
}

/// JSON-lines record for one episode.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TrajectoryRecord {
    seed: u64,
    terminated: bool,
    steps: Vec<Step>,
}

impl From<Trajectory> for TrajectoryRecord {
    fn from(t: Trajectory) -> Self {
        Self {
            seed: t.seed,
            terminated: t.terminated,
            steps: t.steps,
        }
    }
}

impl TryFrom<TrajectoryRecord> for Trajectory {
    type Error = String;

    fn try_from(r: TrajectoryRecord) -> std::result::Result<Self, String> {
        if r.steps.is_empty() {
            return Err("trajectory has no steps".into());
        }
        if r.steps.iter().any(|s| !s.reward.is_finite()) {
            return Err("trajectory has a non-finite reward".into());
        }
        Ok(Self {
            steps: r.steps,
            terminated: r.terminated,
            truncated: !r.terminated,
            seed: r.seed,
        })
    }
}

/// Trajectories sampled with consecutive seeds starting at `base_seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryBatch {
    trajectories: Vec<Trajectory>,
    base_seed: u64,
}

impl TrajectoryBatch {
    /// Wraps already sampled or logged trajectories. The base seed is taken from the first one.
    pub fn from_trajectories(trajectories: Vec<Trajectory>) -> Self {
        let base_seed = trajectories.first().map_or(0, |t| t.seed);
        Self {
            trajectories,
            base_seed,
        }
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn base_seed(&self) -> u64 {
        self.base_seed
    }

    pub fn n(&self) -> usize {
        self.trajectories.len()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Trajectory> {
        self.trajectories.iter()
    }

    pub fn truncated_count(&self) -> usize {
        self.trajectories.iter().filter(|t| t.truncated).count()
    }

    pub fn max_len(&self) -> usize {
        self.trajectories
            .iter()
            .map(Trajectory::len)
            .max()
            .unwrap_or(0)
    }

    /// Splits into the first `mid` trajectories and the rest.
    pub fn split_at(&self, mid: usize) -> (Self, Self) {
        let (head, tail) = self.trajectories.split_at(mid.min(self.n()));
        (
            Self::from_trajectories(head.to_vec()),
            Self::from_trajectories(tail.to_vec()),
        )
    }

    /// Writes one JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for t in &self.trajectories {
            serde_json::to_writer(&mut out, t)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self> {
        let mut trajectories = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let t: Trajectory = serde_json::from_str(&line).map_err(|e| Error::MalformedLog {
                line: i + 1,
                message: e.to_string(),
            })?;
            trajectories.push(t);
        }
        if trajectories.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        Ok(Self::from_trajectories(trajectories))
    }

    /// Checks that every step refers to a state and action of `mdp` and never to a terminal state.
    pub fn check_against(&self, mdp: &TabularMdp) -> Result<()> {
        for (i, t) in self.trajectories.iter().enumerate() {
            for step in &t.steps {
                if step.state >= mdp.num_states() || step.action >= mdp.num_actions() {
                    return Err(Error::MalformedLog {
                        line: i + 1,
                        message: format!("step ({}, {}) out of range", step.state, step.action),
                    });
                }
                if mdp.is_terminal(step.state) {
                    return Err(Error::MalformedLog {
                        line: i + 1,
                        message: format!("step in terminal state {}", step.state),
                    });
                }
            }
        }
        Ok(())
    }
}

impl<'a> IntoIterator for &'a TrajectoryBatch {
    type Item = &'a Trajectory;
    type IntoIter = std::slice::Iter<'a, Trajectory>;

    fn into_iter(self) -> Self::IntoIter {
        self.trajectories.iter()
    }
}

/// Inverse-CDF draw over `probs` in index order. Returns the last index with positive
/// probability when rounding leaves `u` beyond the accumulated mass.
fn draw_index(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    let mut cumulative = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return i;
        }
    }
    probs
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(probs.len() - 1)
}

/// Samples one episode. Deterministic in `seed`.
pub fn sample_trajectory(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    seed: u64,
) -> Result<Trajectory> {
    policy.check_shape(mdp)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = draw_index(mdp.start_distribution(), &mut rng);
    let mut steps = Vec::new();
    loop {
        let row = policy.row(state);
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(Error::DegeneratePolicyRow { state, sum });
        }
        let action = draw_index(row, &mut rng);
        let next = draw_index(mdp.transition_row(state, action), &mut rng);
        steps.push(Step {
            state,
            action,
            reward: mdp.reward(state, action, next),
        });
        if mdp.is_terminal(next) {
            return Ok(Trajectory {
                steps,
                terminated: true,
                truncated: false,
                seed,
            });
        }
        if steps.len() == mdp.horizon_cap() {
            return Ok(Trajectory {
                steps,
                terminated: false,
                truncated: true,
                seed,
            });
        }
        state = next;
    }
}

/// Samples `n` episodes; episode `i` uses seed `base_seed + i` (wrapping).
pub fn sample_batch(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    n: usize,
    base_seed: u64,
) -> Result<TrajectoryBatch> {
    if n == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let trajectories = (0..n as u64)
        .into_par_iter()
        .map(|i| sample_trajectory(mdp, policy, base_seed.wrapping_add(i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrajectoryBatch {
        trajectories,
        base_seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_state_loop(h: usize) -> TabularMdp {
        TabularMdp::new(1, 1, vec![1.0], vec![0.0], &StateSet::new(), vec![1.0], h).unwrap()
    }

    #[test]
    fn single_state_self_loop_truncates_at_cap() {
        let mdp = one_state_loop(5);
        let policy = TabularPolicy::uniform(1, 1).unwrap();
        let t = sample_trajectory(&mdp, &policy, 42).unwrap();
        assert_eq!(t.len(), 5);
        assert!(t.truncated && !t.terminated);
        assert_eq!(t.total_return(), 0.0);
    }

    #[test]
    fn rejects_bad_rows() {
        let bad = TabularMdp::new(1, 1, vec![0.9], vec![0.0], &StateSet::new(), vec![1.0], 3);
        assert!(matches!(bad, Err(Error::InvalidMdp(_))));
        assert!(TabularPolicy::new(vec![vec![0.5, 0.6]]).is_err());
        assert!(TabularPolicy::new(vec![vec![1.5, -0.5]]).is_err());
    }

    #[test]
    fn rejects_start_mass_on_terminal() {
        let term: StateSet = [1].into();
        let r = TabularMdp::new(
            2,
            1,
            vec![0.0, 1.0, 0.0, 1.0],
            vec![0.0; 4],
            &term,
            vec![0.5, 0.5],
            3,
        );
        assert!(matches!(r, Err(Error::InvalidMdp(_))));
    }

    #[test]
    fn ratio_cases() {
        let e = TabularPolicy::new(vec![vec![0.0, 1.0]]).unwrap();
        let b = TabularPolicy::uniform(1, 2).unwrap();
        assert_eq!(action_ratio(&e, &b, 0, 1).unwrap(), 2.0);
        assert_eq!(action_ratio(&e, &b, 0, 0).unwrap(), 0.0);
        assert_eq!(action_ratio(&b, &b, 0, 0).unwrap(), 1.0);
        let no_support = TabularPolicy::new(vec![vec![1.0, 0.0]]).unwrap();
        assert!(matches!(
            action_ratio(&e, &no_support, 0, 1),
            Err(Error::SupportViolation {
                state: 0,
                action: 1
            })
        ));
    }

    #[test]
    fn batch_seeding_contract() {
        let mdp = one_state_loop(3);
        let policy = TabularPolicy::uniform(1, 1).unwrap();
        let batch = sample_batch(&mdp, &policy, 100, 7).unwrap();
        assert_eq!(batch.n(), 100);
        assert_eq!(
            batch.trajectories()[3],
            sample_trajectory(&mdp, &policy, 10).unwrap()
        );
        let single = sample_batch(&mdp, &policy, 1, 99).unwrap();
        assert_eq!(
            single.trajectories()[0],
            sample_trajectory(&mdp, &policy, 99).unwrap()
        );
        assert!(sample_batch(&mdp, &policy, 0, 0).is_err());
    }

    #[test]
    fn policy_shape_mismatch_is_rejected() {
        let mdp = one_state_loop(3);
        let policy = TabularPolicy::uniform(2, 1).unwrap();
        assert!(matches!(
            sample_trajectory(&mdp, &policy, 0),
            Err(Error::InvalidPolicy(_))
        ));
    }

    #[test]
    fn jsonl_layout() {
        let t = Trajectory {
            steps: vec![
                Step {
                    state: 3,
                    action: 1,
                    reward: -1.0,
                },
                Step {
                    state: 4,
                    action: 0,
                    reward: 2.5,
                },
            ],
            terminated: true,
            truncated: false,
            seed: 12,
        };
        let batch = TrajectoryBatch::from_trajectories(vec![t.clone()]);
        let mut buf = Vec::new();
        batch.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "{\"seed\":12,\"terminated\":true,\"steps\":[[3,1,-1.0],[4,0,2.5]]}\n"
        );
        let back = TrajectoryBatch::read_jsonl(text.as_bytes()).unwrap();
        assert_eq!(back.trajectories()[0], t);
    }

    #[test]
    fn jsonl_reports_line_of_bad_record() {
        let text = "{\"seed\":1,\"terminated\":true,\"steps\":[[0,0,1.0]]}\n{\"seed\":2}\n";
        match TrajectoryBatch::read_jsonl(text.as_bytes()) {
            Err(Error::MalformedLog { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mdp_json_round_trip_validates() {
        let mdp = one_state_loop(4);
        let json = mdp.to_json().unwrap();
        assert_eq!(TabularMdp::from_json(&json).unwrap(), mdp);
        let broken = json.replace("1.0", "0.5");
        assert!(TabularMdp::from_json(&broken).is_err());
    }
}
