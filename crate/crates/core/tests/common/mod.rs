//! Random small problems shared by the integration tests.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sis_ope::mdp::sample_batch;
use sis_ope::{StateSet, TabularMdp, TabularPolicy, TrajectoryBatch};

pub struct Problem {
    pub mdp: TabularMdp,
    pub pi_e: TabularPolicy,
    pub pi_b: TabularPolicy,
    pub batch: TrajectoryBatch,
    /// A non-terminal state with no incoming mass.
    pub orphan: usize,
}

/// Builds a random MDP whose last state is terminal and whose second-to-last state is
/// unreachable, plus a behaviour batch of 2..=40 trajectories.
pub fn random_problem(seed: u64) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ns = rng.gen_range(4..=7);
    let na = rng.gen_range(2..=3);
    let terminal = ns - 1;
    let orphan = ns - 2;

    let mut transition = vec![0.0; ns * na * ns];
    let mut reward = vec![0.0; ns * na * ns];
    for s in 0..ns {
        for a in 0..na {
            let row = &mut transition[(s * na + a) * ns..(s * na + a + 1) * ns];
            if s == terminal {
                row[terminal] = 1.0;
                continue;
            }
            for (next, w) in row.iter_mut().enumerate() {
                if next != orphan && rng.gen_bool(0.7) {
                    *w = rng.gen_range(0.0..1.0);
                }
            }
            row[terminal] += 0.3;
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|w| *w /= total);
        }
    }
    reward
        .iter_mut()
        .for_each(|r| *r = rng.gen_range(-2.0..2.0));

    let mut start = vec![0.0; ns];
    for w in start.iter_mut().take(orphan) {
        *w = rng.gen_range(0.1..1.0);
    }
    let total: f64 = start.iter().sum();
    start.iter_mut().for_each(|w| *w /= total);

    let horizon = rng.gen_range(3..=12);
    let mdp = TabularMdp::new(
        ns,
        na,
        transition,
        reward,
        &StateSet::from([terminal]),
        start,
        horizon,
    )
    .unwrap();

    let pi_b = TabularPolicy::new(
        (0..ns)
            .map(|_| normalised((0..na).map(|_| rng.gen_range(0.1..1.0)).collect()))
            .collect(),
    )
    .unwrap();
    let pi_e = TabularPolicy::new(
        (0..ns)
            .map(|_| {
                let mut row: Vec<f64> = (0..na)
                    .map(|_| {
                        if rng.gen_bool(0.3) {
                            0.0
                        } else {
                            rng.gen_range(0.0..1.0)
                        }
                    })
                    .collect();
                if row.iter().all(|&p| p == 0.0) {
                    row[0] = 1.0;
                }
                normalised(row)
            })
            .collect(),
    )
    .unwrap();

    let n = rng.gen_range(2..=40);
    let batch = sample_batch(&mdp, &pi_b, n, rng.gen()).unwrap();
    Problem {
        mdp,
        pi_e,
        pi_b,
        batch,
        orphan,
    }
}

fn normalised(mut row: Vec<f64>) -> Vec<f64> {
    let total: f64 = row.iter().sum();
    row.iter_mut().for_each(|p| *p /= total);
    row
}

pub fn mean_return(batch: &TrajectoryBatch) -> f64 {
    batch.iter().map(|t| t.total_return()).sum::<f64>() / batch.n() as f64
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}
