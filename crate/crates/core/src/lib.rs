//! Off-policy evaluation of tabular finite-horizon MDP policies with state-based
//! importance sampling (SIS).
//!
//! SIS drops the importance ratios taken in a chosen set of states from the trajectory
//! weight. When the dropped factor has mean one and does not covary with the rest of the
//! weighted return, the estimate stays accurate while the variance shrinks with the
//! number of retained decisions rather than the horizon.
//!
//! * [`mdp`]: models, policies, seeded sampling and trajectory logs
//! * [`lift`]: deterministic and noisy lift domains, lift-state detection
//! * [`estimators`]: IS, PDIS, INCRIS and SIS, plus the empirical MSE and variance bound
//! * [`search`]: covariance-testing search for the dropped-state set
//! * [`oracle`]: dynamic-programming truth and exact moments by enumeration
//! * [`experiment`]: replicated comparisons written to CSV

pub mod error;
pub mod estimators;
pub mod experiment;
pub mod lift;
pub mod mdp;
pub mod oracle;
pub mod search;
pub mod stats;

pub use error::{Error, Result};
pub use mdp::{StateSet, TabularMdp, TabularPolicy, Trajectory, TrajectoryBatch};
