//! Contextual bandits with hinge and ramp surrogate losses over linear
//! regressors: surrogate policies, a Langevin sampler for continuous
//! exponential weights, the Hinge-LMC and SmoothFTL learners, simulated
//! environments, brute-force oracles and an experiment harness.

pub mod env;
pub mod error;
pub mod harness;
pub mod hinge_lmc;
pub mod learner;
pub mod model;
pub mod oracles;
pub mod sampler;
pub mod smooth_ftl;
pub mod surrogate;

pub use error::{Error, Result};
pub use learner::{Action, Feedback, Learner, UniformBaseline};
pub use model::{Context, ModelSpec, ParamVector};
pub use surrogate::{ActionDistribution, LossVector, Margin, ScoreVector};
