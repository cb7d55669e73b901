//! The cocycle `φ(t, ω, ξ) = u_t` and checks of its algebra.

use std::io::Write;

use serde::Serialize;

use crate::io::fmt;
use crate::noise::grid_index;
use crate::segments::Segment;
use crate::solver::{global_solve, SolverConfig, StoppingSchedule};
use crate::{CoefficientSet, Error, NoisePath, Result, Scalar, SpectralOperator};

#[derive(Debug, Clone)]
pub struct CocycleEvaluation<T> {
    pub t: T,
    pub seed: u64,
    /// Offset of the driving path relative to its sampled base, in steps.
    pub path_offset: i64,
    pub initial: Segment<T>,
    pub state: Segment<T>,
    pub schedule: StoppingSchedule<T>,
}

/// `φ(t, ω, ξ)`.
pub fn cocycle_evaluate<T: Scalar>(
    t: T,
    omega: &NoisePath<T>,
    xi: &Segment<T>,
    coeffs: &CoefficientSet<T>,
    op: &SpectralOperator<T>,
    cfg: &SolverConfig<T>,
) -> Result<CocycleEvaluation<T>> {
    let k = grid_index(t, coeffs.step())?;
    if k < 0 {
        return Err(Error::param("t", "must be >= 0"));
    }
    let sol = global_solve(xi, omega, t, coeffs, op, cfg)?;
    Ok(CocycleEvaluation {
        t,
        seed: omega.seed(),
        path_offset: omega.offset(),
        initial: xi.clone(),
        state: sol.trajectory.segment_at_step(k as usize),
        schedule: sol.schedule,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CocycleDefect<T> {
    pub t: T,
    pub tau: T,
    pub seed: u64,
    pub defect: T,
    pub tolerance: T,
    pub pass: bool,
}

/// `‖φ(t+τ, ω, ξ) - φ(t, θ_τ ω, φ(τ, ω, ξ))‖_μ`, the shifted path being
/// materialized as its own sample array.
pub fn cocycle_defect<T: Scalar>(
    t: T,
    tau: T,
    omega: &NoisePath<T>,
    xi: &Segment<T>,
    coeffs: &CoefficientSet<T>,
    op: &SpectralOperator<T>,
    cfg: &SolverConfig<T>,
) -> Result<CocycleDefect<T>> {
    let left = cocycle_evaluate(t + tau, omega, xi, coeffs, op, cfg)?;
    let mid = cocycle_evaluate(tau, omega, xi, coeffs, op, cfg)?;
    let shifted = omega.wiener_shift(tau)?.materialize();
    let right = cocycle_evaluate(t, &shifted, &mid.state, coeffs, op, cfg)?;
    let defect = left.state.sup_dist(&right.state);
    let tolerance = T::lit(10.0) * cfg.picard_tol;
    Ok(CocycleDefect { t, tau, seed: omega.seed(), defect, tolerance, pass: defect <= tolerance })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuityModulus<T> {
    pub ratio: T,
    pub intervals: usize,
    /// `4.5^intervals`
    pub limit: T,
    pub pass: bool,
}

/// `‖φ(t,ω,ξ) - φ(t,ω,ξ̃)‖_μ / ‖ξ - ξ̃‖_μ`.
pub fn continuity_modulus<T: Scalar>(
    t: T,
    omega: &NoisePath<T>,
    xi: &Segment<T>,
    xi_tilde: &Segment<T>,
    coeffs: &CoefficientSet<T>,
    op: &SpectralOperator<T>,
    cfg: &SolverConfig<T>,
) -> Result<ContinuityModulus<T>> {
    let d0 = xi.sup_dist(xi_tilde);
    if d0.is_zero() {
        return Err(Error::param("xi_tilde", "perturbation must be nonzero"));
    }
    let a = cocycle_evaluate(t, omega, xi, coeffs, op, cfg)?;
    let b = cocycle_evaluate(t, omega, xi_tilde, coeffs, op, cfg)?;
    let ratio = a.state.sup_dist(&b.state) / d0;
    let intervals = a.schedule.intervals_covering(t);
    let limit = T::lit(4.5).powi(intervals as i32);
    Ok(ContinuityModulus { ratio, intervals, limit, pass: ratio <= limit })
}

/// Rows `t,tau,seed,defect,tolerance,PASS`.
pub fn write_cocycle_csv<T: Scalar, W: Write>(rows: &[CocycleDefect<T>], mut w: W) -> std::io::Result<()> {
    writeln!(w, "t,tau,seed,defect,tolerance,PASS")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            fmt(r.t),
            fmt(r.tau),
            r.seed,
            fmt(r.defect),
            fmt(r.tolerance),
            if r.pass { 1 } else { 0 }
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{Diffusion, Drift, ExampleSpec, NoiseMode};
    use crate::{HVector, NoiseModel};

    const H: f64 = 1.0 / 256.0;

    fn setup() -> (SpectralOperator<f64>, CoefficientSet<f64>, NoisePath<f64>, Segment<f64>) {
        let op = SpectralOperator::laplacian_like(4).unwrap();
        let spec = ExampleSpec { gains: vec![0.5], c_g: 0.25, nu: 0.5, mode: NoiseMode::StateDependent };
        let set = CoefficientSet::make_example(&op, 2, 32, H, &spec).unwrap();
        let model = NoiseModel::geometric(2, 0.5, H).unwrap();
        let w = NoisePath::sample(&model, -1.0, 2.0, 5).unwrap();
        let xi = Segment::from_fn(4, 32, H, |s| vec![1.0 + s, 0.5, -0.5 * s, 0.1]).unwrap();
        (op, set, w, xi)
    }

    #[test]
    fn identity_at_time_zero() {
        let (op, set, w, xi) = setup();
        let e = cocycle_evaluate(0.0, &w, &xi, &set, &op, &SolverConfig::default()).unwrap();
        assert_eq!(e.state, xi);
    }

    #[test]
    fn short_times_keep_initial_history() {
        let (op, set, w, xi) = setup();
        let t = 10.0 * H;
        let e = cocycle_evaluate(t, &w, &xi, &set, &op, &SolverConfig::default()).unwrap();
        for i in 0..=22 {
            assert_eq!(e.state.sample(i), xi.sample(i + 10));
        }
    }

    #[test]
    fn cocycle_defect_small() {
        let (op, set, w, xi) = setup();
        let cfg = SolverConfig::default();
        for (t, tau) in [(0.5, 0.5), (0.25, 0.75), (0.0, 0.5), (0.5, 0.0)] {
            let d = cocycle_defect(t, tau, &w, &xi, &set, &op, &cfg).unwrap();
            assert!(d.pass, "t={t} tau={tau} defect={}", d.defect);
            if t == 0.0 || tau == 0.0 {
                assert_eq!(d.defect, 0.0);
            }
        }
    }

    #[test]
    fn semigroup_only_modulus_at_most_one() {
        let op = SpectralOperator::laplacian_like(3).unwrap();
        let set = CoefficientSet::new(Drift::zero(3), Diffusion::zero(&op, 1, 0.5).unwrap(), 16, H).unwrap();
        let model = NoiseModel::new(vec![1.0], H).unwrap();
        let w = NoisePath::sample(&model, 0.0, 1.0, 1).unwrap();
        let xi = Segment::constant(&HVector(vec![1.0, 1.0, 1.0]), 16, H).unwrap();
        let xt = Segment::constant(&HVector(vec![1.001, 1.0, 0.999]), 16, H).unwrap();
        let c = continuity_modulus(0.5, &w, &xi, &xt, &set, &op, &SolverConfig::default()).unwrap();
        assert!(c.ratio <= 1.0 + 1e-12);
        assert!(continuity_modulus(0.5, &w, &xi, &xi, &set, &op, &SolverConfig::default()).is_err());
    }
}
