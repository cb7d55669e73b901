//! Spectral laboratory for retarded stochastic evolution equations
//!
//! ```text
//! du = (A u + F(u_t)) dt + G(u_t) dW,   u_0 = ξ ∈ C([-μ,0]; H)
//! ```
//!
//! solved pathwise: the stochastic convolution is replaced by
//! `G(u_t)ω(t) + ∫ S(t-r) A G(u_r) ω(r) dr - ∫ S(t-r) K(u_r) ω(r) dr`
//! where `K(u_t) = d/dt G(u_t)`. Local solutions come from a contraction
//! on a noise-dependent horizon and are glued along stopping times; the
//! resulting cocycle is then probed for absorption and pullback attraction.
//!
//! Everything is finite-mode: `H` is spanned by the first `N` eigenvectors
//! of `-A`, `U` by the first `M` eigenvectors of the covariance `Q`, and
//! time lives on one uniform grid of step `h`.
//!
//! All numerics are generic over [`Scalar`]; the `*64` aliases at the crate
//! root fix the scalar to `f64`.

// `!(x > 0)` style guards are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attractor;
pub mod coefficients;
pub mod error;
pub mod hilbert;
pub mod io;
pub mod noise;
pub mod rds;
pub mod segments;
pub mod solver;
pub mod special;

mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use attractor::{AbsorbingEstimate, DelayBound, GronwallBound, PullbackReport};
pub use coefficients::{CoefficientConstants, CoefficientSet, Diffusion, Drift, NoiseOperator, Pointwise};
pub use hilbert::{HVector, SpectralOperator};
pub use noise::{NoiseModel, NoisePath};
pub use rds::CocycleEvaluation;
pub use segments::{Segment, Trajectory};
pub use solver::{ContractionBudget, GlobalSolution, SolverConfig, StoppingSchedule};

pub type SpectralOperator64 = SpectralOperator<f64>;
pub type HVector64 = HVector<f64>;
pub type NoiseModel64 = NoiseModel<f64>;
pub type NoisePath64 = NoisePath<f64>;
pub type Segment64 = Segment<f64>;
pub type Trajectory64 = Trajectory<f64>;
pub type CoefficientSet64 = CoefficientSet<f64>;
pub type SolverConfig64 = SolverConfig<f64>;
pub type StoppingSchedule64 = StoppingSchedule<f64>;
pub type AbsorbingEstimate64 = AbsorbingEstimate<f64>;
pub type PullbackReport64 = PullbackReport<f64>;
