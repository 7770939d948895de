//! Linear TD-family policy evaluation: environments, learners, an exact
//! expectation oracle and error metrics.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the precision for the common cases.

pub mod envs;
pub mod learners;
pub mod metrics;
pub mod numerics;
pub mod oracle;
mod scalar;

pub use scalar::Scalar;

pub type DenseMatrix64 = numerics::DenseMatrix<f64>;
pub type DenseMatrix32 = numerics::DenseMatrix<f32>;
pub type EnvSpec64 = envs::EnvSpec<f64>;
pub type EnvSpec32 = envs::EnvSpec<f32>;
pub type AlgoConfig64 = learners::AlgoConfig<f64>;
pub type AlgoConfig32 = learners::AlgoConfig<f32>;
pub type LearnerState64 = learners::LearnerState<f64>;
pub type LearnerState32 = learners::LearnerState<f32>;
pub type StepSchedule64 = learners::StepSchedule<f64>;
pub type ExpectationSet64 = oracle::ExpectationSet<f64>;
