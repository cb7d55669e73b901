//! Finite-mode Hilbert space with a diagonal generator.
//!
//! `H = span{e_1, …, e_N}` where `-A e_k = λ_k e_k`. The semigroup, the
//! fractional powers and every operator norm are diagonal and therefore
//! exact.

use serde::{Deserialize, Serialize};

use crate::special::{full_decay_sup, half_decay_sup};
use crate::{Error, Result, Scalar};

/// Coefficient vector of an element of `H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HVector<T>(pub Vec<T>);

impl<T: Scalar> HVector<T> {
    pub fn zeros(n: usize) -> Self {
        HVector(vec![T::zero(); n])
    }

    pub fn from_slice(x: &[T]) -> Self {
        HVector(x.to_vec())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn norm(&self) -> T {
        norm(&self.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, a: T) -> Self {
        HVector(self.0.iter().map(|&v| a * v).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        HVector(self.0.iter().zip(&other.0).map(|(&a, &b)| a + b).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        HVector(self.0.iter().zip(&other.0).map(|(&a, &b)| a - b).collect())
    }

    pub fn dist(&self, other: &Self) -> T {
        dist(&self.0, &other.0)
    }
}

impl<T> From<Vec<T>> for HVector<T> {
    fn from(v: Vec<T>) -> Self {
        HVector(v)
    }
}

pub(crate) fn norm<T: Scalar>(x: &[T]) -> T {
    x.iter().map(|&v| v * v).sum::<T>().sqrt()
}

pub(crate) fn dist<T: Scalar>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>().sqrt()
}

/// Eigenvalues of `-A` on the truncated basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralOperator<T> {
    eigenvalues: Vec<T>,
}

impl<T: Scalar> SpectralOperator<T> {
    /// Explicit spectrum; must be nonempty, finite, strictly positive and
    /// nondecreasing.
    pub fn new(eigenvalues: Vec<T>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::param("eigenvalues", "spectrum is empty"));
        }
        if eigenvalues.iter().any(|l| !l.is_finite() || *l <= T::zero()) {
            return Err(Error::param("eigenvalues", "every eigenvalue must be finite and > 0"));
        }
        if eigenvalues.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::param("eigenvalues", "eigenvalues must be nondecreasing"));
        }
        Ok(SpectralOperator { eigenvalues })
    }

    /// `λ_k = λ₁ · k^p`, `k = 1..=n`.
    pub fn power_law(n: usize, lambda1: T, exponent: T) -> Result<Self> {
        if exponent < T::zero() || !exponent.is_finite() {
            return Err(Error::param("exponent", "power-law exponent must be finite and >= 0"));
        }
        let eig = (1..=n).map(|k| lambda1 * T::from_count(k).powf(exponent)).collect();
        Self::new(eig)
    }

    /// Dirichlet-Laplacian-like default `λ_k = k²`.
    pub fn laplacian_like(n: usize) -> Result<Self> {
        let eig = (1..=n).map(|k| T::from_count(k * k)).collect();
        Self::new(eig)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    /// Spectral gap `λ₁`.
    pub fn gap(&self) -> T {
        self.eigenvalues[0]
    }

    fn check_len(&self, x: &HVector<T>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { what: "H vector", expected: self.dim(), got: x.len() });
        }
        Ok(())
    }

    /// `S(t)x`, i.e. `x_k ↦ e^{-λ_k t} x_k`.
    pub fn semigroup_apply(&self, t: T, x: &HVector<T>) -> Result<HVector<T>> {
        if !(t >= T::zero()) {
            return Err(Error::param("t", "semigroup time must be >= 0"));
        }
        self.check_len(x)?;
        Ok(HVector(self.eigenvalues.iter().zip(&x.0).map(|(&l, &v)| (-l * t).exp() * v).collect()))
    }

    /// `(-A)^γ x` for `γ ∈ [0, 1]`.
    pub fn fractional_apply(&self, gamma: T, x: &HVector<T>) -> Result<HVector<T>> {
        check_unit_interval("gamma", gamma)?;
        self.check_len(x)?;
        Ok(HVector(self.eigenvalues.iter().zip(&x.0).map(|(&l, &v)| l.powf(gamma) * v).collect()))
    }

    /// `|(-A)^γ x|` without allocating.
    pub(crate) fn fractional_norm(&self, gamma: T, x: &[T]) -> T {
        self.eigenvalues
            .iter()
            .zip(x)
            .map(|(&l, &v)| {
                let w = l.powf(gamma) * v;
                w * w
            })
            .sum::<T>()
            .sqrt()
    }

    /// `‖(-A)^γ S(t)‖ = max_k λ_k^γ e^{-λ_k t}`.
    pub fn smoothing_norm(&self, gamma: T, t: T) -> T {
        self.eigenvalues.iter().map(|&l| l.powf(gamma) * (-l * t).exp()).fold(T::zero(), T::max)
    }

    /// Numerically audits the analytic-semigroup estimates with the actual
    /// closed-form constants of the diagonal spectrum.
    ///
    /// Smoothing: `‖(-A)^γ S(t)‖ ≤ c_γ t^{-γ} e^{-λ₁t/2}` with
    /// `c_γ = (2γ/e)^γ`. Differences: for `0 ≤ q ≤ r < t`, `α ∈ [0,1]` and
    /// `δ ∈ [α, α+γ]`, the norm of `(S(t-r) - S(t-q))(-A)^{-δ}` into
    /// `D((-A)^γ)` is compared with `(r-q)^α (t-r)^{-α-γ+δ}`; the largest
    /// observed ratio is the audit's constant, and must not exceed the
    /// closed-form `(p/e)^p`, `p = γ - δ + α`.
    pub fn estimate_audit(&self, gamma: T, samples: usize) -> Result<EstimateAudit<T>> {
        if !(gamma >= T::zero() && gamma < T::one()) {
            return Err(Error::param("gamma", "audit exponent must lie in [0, 1)"));
        }
        if samples == 0 {
            return Err(Error::param("samples", "need at least one sample"));
        }
        let slack = T::one() + T::lit(64.0) * T::epsilon();
        let c_gamma = half_decay_sup(gamma);
        let lambda1 = self.gap();
        let n = T::from_count(samples);

        let mut smoothing = Vec::with_capacity(samples);
        let mut difference = Vec::with_capacity(samples);
        // Weyl sequences: deterministic, well spread
        let golden = T::lit(0.618_033_988_749_894_9);
        let silver = T::lit(0.414_213_562_373_095_1);
        let bronze = T::lit(0.302_775_637_731_994_6);
        for i in 1..=samples {
            let t = T::from_count(i) / n;
            let measured = self.smoothing_norm(gamma, t);
            let bound = c_gamma * t.powf(-gamma) * (-lambda1 * t / T::lit(2.0)).exp();
            smoothing.push(SmoothingSample { t, measured, bound, ratio: measured / bound });

            let fi = T::from_count(i);
            let u1 = (fi * golden).fract();
            let u2 = (fi * silver).fract();
            let u3 = (fi * bronze).fract();
            let q = t * u1 * T::lit(0.9);
            let r = q + (t - q) * u2 * T::lit(0.9);
            let alpha = (fi * (golden + silver)).fract();
            let delta = alpha + u3 * gamma;
            let (a, d) = (t - r, r - q);
            let measured = self
                .eigenvalues
                .iter()
                .map(|&l| l.powf(gamma - delta) * ((-l * a).exp() - (-l * (t - q)).exp()).abs())
                .fold(T::zero(), T::max);
            let shape = d.powf(alpha) * a.powf(-(alpha + gamma - delta));
            let p = gamma - delta + alpha;
            difference.push(DifferenceSample {
                t,
                q,
                r,
                alpha,
                delta,
                measured,
                shape,
                ratio: if shape > T::zero() { measured / shape } else { T::zero() },
                closed_form_constant: full_decay_sup(p),
            });
        }
        let max_smoothing_ratio = smoothing.iter().map(|s| s.ratio).fold(T::zero(), T::max);
        let difference_constant = difference.iter().map(|s| s.ratio).fold(T::zero(), T::max);
        let difference_ok = difference.iter().all(|s| s.ratio <= s.closed_form_constant * slack);
        Ok(EstimateAudit {
            gamma,
            c_gamma,
            pass: max_smoothing_ratio <= slack && difference_ok,
            smoothing,
            max_smoothing_ratio,
            difference,
            difference_constant,
        })
    }
}

pub(crate) fn check_unit_interval<T: Scalar>(name: &'static str, v: T) -> Result<()> {
    if !(v >= T::zero() && v <= T::one()) {
        return Err(Error::param(name, "must lie in [0, 1]"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothingSample<T> {
    pub t: T,
    pub measured: T,
    pub bound: T,
    pub ratio: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DifferenceSample<T> {
    pub t: T,
    pub q: T,
    pub r: T,
    pub alpha: T,
    pub delta: T,
    pub measured: T,
    pub shape: T,
    pub ratio: T,
    pub closed_form_constant: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateAudit<T> {
    pub gamma: T,
    pub c_gamma: T,
    pub pass: bool,
    pub smoothing: Vec<SmoothingSample<T>>,
    pub max_smoothing_ratio: T,
    pub difference: Vec<DifferenceSample<T>>,
    /// Largest observed ratio of the difference estimate.
    pub difference_constant: T,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_bad_spectra() {
        assert!(SpectralOperator::<f64>::new(vec![]).is_err());
        assert!(SpectralOperator::new(vec![0.0, 1.0]).is_err());
        assert!(SpectralOperator::new(vec![2.0, 1.0]).is_err());
        assert!(SpectralOperator::new(vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn power_law_profile_is_exact() {
        let a = SpectralOperator::<f64>::power_law(32, 1.0, 2.0).unwrap();
        for (k, &l) in a.eigenvalues().iter().enumerate() {
            assert_eq!(l, ((k + 1) * (k + 1)) as f64);
        }
        assert_eq!(a, SpectralOperator::laplacian_like(32).unwrap());
    }

    #[test]
    fn semigroup_examples() {
        let a = SpectralOperator::new(vec![1.0f64]).unwrap();
        let x = HVector(vec![1.0]);
        assert_eq!(a.semigroup_apply(0.0, &x).unwrap(), x);
        assert_relative_eq!(a.semigroup_apply(1.0, &x).unwrap().0[0], 0.367_879_441_171_442_3);
        assert!(a.semigroup_apply(-0.1, &x).is_err());
        assert!(a.semigroup_apply(0.1, &HVector(vec![1.0, 2.0])).is_err());
    }

    #[test]
    fn fractional_examples() {
        let a = SpectralOperator::new(vec![1.0f64, 4.0]).unwrap();
        let x = HVector(vec![1.0, 1.0]);
        assert_eq!(a.fractional_apply(0.0, &x).unwrap(), x);
        assert_eq!(a.fractional_apply(1.0, &x).unwrap(), HVector(vec![1.0, 4.0]));
        let b = SpectralOperator::new(vec![4.0f64]).unwrap();
        assert_eq!(b.fractional_apply(0.5, &HVector(vec![3.0])).unwrap(), HVector(vec![6.0]));
        assert!(a.fractional_apply(1.5, &x).is_err());
        assert!(a.fractional_apply(-0.1, &x).is_err());
    }

    #[test]
    fn audit_scalar_case_is_tight() {
        let a = SpectralOperator::new(vec![1.0f64]).unwrap();
        let audit = a.estimate_audit(0.5, 1).unwrap();
        let s = &audit.smoothing[0];
        assert_eq!(s.t, 1.0);
        assert_relative_eq!(s.measured, (-1.0f64).exp(), max_relative = 1e-15);
        // equality case: z = 2γ = λt
        assert_relative_eq!(s.ratio, 1.0, max_relative = 1e-14);
        assert!(audit.pass);
    }

    #[test]
    fn audit_gamma_zero_always_passes() {
        let a = SpectralOperator::<f64>::laplacian_like(8).unwrap();
        let audit = a.estimate_audit(0.0, 20).unwrap();
        assert!(audit.pass);
        assert!(audit.smoothing.iter().all(|s| s.measured <= s.bound));
    }

    #[test]
    fn audit_matches_exhaustive_mode_scan() {
        let a = SpectralOperator::<f64>::laplacian_like(32).unwrap();
        let audit = a.estimate_audit(0.75, 50).unwrap();
        assert!(audit.pass, "max ratio {}", audit.max_smoothing_ratio);
        for s in &audit.smoothing {
            // oracle: brute-force maximum over modes
            let mut best = 0.0f64;
            for k in 1..=32 {
                let l = (k * k) as f64;
                best = best.max(l.powf(0.75) * (-l * s.t).exp());
            }
            assert_eq!(s.measured, best);
        }
        assert!(audit.max_smoothing_ratio <= 1.0);
    }

    #[test]
    fn works_in_single_precision() {
        let a = SpectralOperator::<f32>::laplacian_like(4).unwrap();
        let x = HVector(vec![1.0f32; 4]);
        let y = a.semigroup_apply(0.5, &x).unwrap();
        assert!(y.norm() <= (-0.5f32).exp() * x.norm() * (1.0 + 4.0 * f32::EPSILON));
        assert!(a.estimate_audit(0.5f32, 10).unwrap().pass);
    }
}
