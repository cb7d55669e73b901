//! Absorption and attraction: the delay gate, the Gronwall a-priori
//! bound, the tempered radius `R(ω)` and pullback experiments.
//!
//! Throughout `λ` is the spectral gap `λ₁` and `κ_F = λ - C_F e^{λμ}`.
//! Integrals over grid data use the larger endpoint value on each cell
//! against exact kernel moments, so every quadrature is a majorant of
//! the integral of the piecewise-linear interpolant.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientConstants;
use crate::io::fmt;
use crate::noise::{grid_index, TrendProbe};
use crate::segments::{diameter, segment_diagnostics, Segment};
use crate::solver::{global_solve, SolverConfig};
use crate::special::{full_decay_sup, half_decay_sup, power_exp_moment};
use crate::{CoefficientSet, Error, NoisePath, Result, Scalar, SpectralOperator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayBound<T> {
    pub lambda: T,
    pub c_f: T,
    pub mu: T,
    /// `ln(λ/C_F)/λ`, infinite for `C_F = 0`.
    pub threshold: T,
    pub margin: T,
    /// `λ - C_F e^{λμ}`
    pub rate: T,
    pub holds: bool,
}

/// `μ < ln(λ/C_F)/λ`, equivalently `λ - C_F e^{λμ} > 0`.
pub fn check_delay_bound<T: Scalar>(lambda: T, c_f: T, mu: T) -> Result<DelayBound<T>> {
    if !(lambda > T::zero()) || !(c_f >= T::zero()) || !(mu > T::zero()) {
        return Err(Error::param("delay bound", "need λ > 0, C_F >= 0, μ > 0"));
    }
    let threshold = if c_f.is_zero() { T::infinity() } else { (lambda / c_f).ln() / lambda };
    let rate = lambda - c_f * (lambda * mu).exp();
    Ok(DelayBound { lambda, c_f, mu, threshold, margin: threshold - mu, rate, holds: mu < threshold })
}

fn require_delay_bound<T: Scalar>(c: &CoefficientConstants<T>, lambda: T, mu: T) -> Result<DelayBound<T>> {
    let d = check_delay_bound(lambda, c.c_f, mu)?;
    if !d.holds || !(d.rate > T::zero()) {
        return Err(Error::DelayBoundViolated { mu: mu.to_f64_lossy(), threshold: d.threshold.to_f64_lossy() });
    }
    if !c.bounds_finite() {
        return Err(Error::param("constants", "absorption estimates need finite C_G, C_G_nu, C_K, C_F"));
    }
    Ok(d)
}

/// Cell weights `∫ x^{ν-1} e^{-λx}` on `[ih, (i+1)h]`, exact for
/// `i < near` and majorized by `(near·h)^{ν-1} ∫ e^{-λx}` beyond.
struct SingularKernel<T> {
    near: Vec<T>,
    far_scale: T,
    decay: T,
    cell: T,
}

impl<T: Scalar> SingularKernel<T> {
    fn new(nu: T, lambda: T, h: T, near: usize) -> Self {
        let near = near.max(1);
        let w =
            (0..near).map(|i| power_exp_moment(nu, lambda, T::from_count(i) * h, T::from_count(i + 1) * h)).collect();
        let x0 = T::from_count(near) * h;
        let decay = (-lambda * h).exp();
        let cell = (T::one() - decay) / lambda;
        SingularKernel { near: w, far_scale: x0.powf(nu - T::one()) * (-lambda * x0).exp(), decay, cell }
    }

    /// `out[j] ≈ Σ_{c<j} W_{j-1-c} d[c]` for `j = 0..=d.len()`.
    fn convolve(&self, d: &[T]) -> Vec<T> {
        let l = self.near.len();
        let mut out = Vec::with_capacity(d.len() + 1);
        let mut far = T::zero();
        out.push(T::zero());
        for j in 1..=d.len() {
            if j > l {
                // cell c = j-1-l enters the far field at lag l
                far = self.decay * far + self.far_scale * self.cell * d[j - 1 - l];
            } else if j > 1 {
                far = self.decay * far;
            }
            let mut acc = far;
            for (lag, &w) in self.near.iter().enumerate().take(j) {
                acc = acc + w * d[j - 1 - lag];
            }
            out.push(acc);
        }
        out
    }
}

fn cell_max<T: Scalar>(v: &[T]) -> Vec<T> {
    v.windows(2).map(|w| w[0].max(w[1])).collect()
}

/// `‖u_τ‖_μ ≤ α(τ) + C_F e^{λμ} ∫₀^τ e^{-κ_F(τ-r)} α(r) dr` for the
/// solution driven by `θ_{-t} ω`, tabulated at every grid `τ ∈ [0, t]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GronwallBound<T> {
    pub t: T,
    pub step: T,
    pub alpha: Vec<T>,
    pub bound: Vec<T>,
    pub delay: DelayBound<T>,
}

impl<T: Scalar> GronwallBound<T> {
    pub fn tau(&self, j: usize) -> T {
        T::from_count(j) * self.step
    }

    /// Bound at `τ = t`.
    pub fn terminal(&self) -> T {
        *self.bound.last().expect("nonempty table")
    }
}

/// Far-field cutoff of the singular kernel, in time units.
const NEAR_FIELD: f64 = 1.0;

pub fn gronwall_bound<T: Scalar>(
    xi_norm: T,
    omega: &NoisePath<T>,
    t: T,
    constants: &CoefficientConstants<T>,
    lambda: T,
    delay_steps: usize,
) -> Result<GronwallBound<T>> {
    let h = omega.step();
    let mu = T::from_count(delay_steps) * h;
    let delay = require_delay_bound(constants, lambda, mu)?;
    let n = grid_index(t, h)?;
    if n < 0 {
        return Err(Error::param("t", "must be >= 0"));
    }
    let n = n as usize;
    let need = n as i64 + delay_steps as i64;
    if -omega.i_min() < need {
        return Err(Error::InsufficientHistory {
            needed: -(T::from_i64(need).unwrap() * h).to_f64_lossy(),
            available: omega.t_min().to_f64_lossy(),
        });
    }
    let c = constants;
    let e_mu = (lambda * mu).exp();
    let kappa = delay.rate;
    // sups[k] = ‖ω_{-kh}‖_μ; ‖ω_{τ_j - t}‖_μ = sups[n - j]
    let sups = omega.backward_window_sups(delay_steps, n)?;
    let wsup: Vec<T> = (0..=n).map(|j| sups[n - j]).collect();
    let mut buf = vec![T::zero(); omega.dim()];
    let wabs: Vec<T> = (0..=n).map(|j| omega.norm_at(j as i64 - n as i64, &mut buf)).collect();
    let w_start = wabs[0];

    let decay = (-lambda * h).exp();
    let cell = (T::one() - decay) / lambda;
    let mut k_int = vec![T::zero(); n + 1];
    for j in 0..n {
        k_int[j + 1] = decay * k_int[j] + cell * wabs[j].max(wabs[j + 1]);
    }
    let near = (T::lit(NEAR_FIELD) / h).ceil().to_usize().unwrap_or(1);
    let g_int = SingularKernel::new(c.nu, lambda, h, near).convolve(&cell_max(&wsup));

    let alpha: Vec<T> = (0..=n)
        .map(|j| {
            let tau = T::from_count(j) * h;
            let s = (-lambda * tau).exp();
            e_mu * s * (xi_norm + c.c_g * w_start)
                + c.c_g * wsup[j]
                + c.c_f_bar * e_mu * (T::one() - s) / lambda
                + c.c_k * e_mu * k_int[j]
                + c.c_g_nu * g_int[j]
        })
        .collect();

    let gain = c.c_f * e_mu;
    let mut bound = Vec::with_capacity(n + 1);
    let mut acc = T::zero();
    let kdecay = (-kappa * h).exp();
    let kcell = (T::one() - kdecay) / kappa;
    bound.push(alpha[0]);
    for j in 0..n {
        acc = kdecay * acc + kcell * alpha[j].max(alpha[j + 1]);
        bound.push(alpha[j + 1] + gain * acc);
    }
    Ok(GronwallBound { t, step: h, alpha, bound, delay })
}

/// Per-term breakdown of `R(ω)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusTerms<T> {
    /// `C_G ‖ω_0‖_μ`
    pub noise_now: T,
    /// `C̄_F e^{λμ} / λ`
    pub drift_const: T,
    /// `C_K e^{λμ} ∫ e^{λr} ‖ω_r‖_μ dr`
    pub k_integral: T,
    /// `C_Gν ∫ e^{λr} (-r)^{ν-1} ‖ω_r‖_μ dr`
    pub g_nu_integral: T,
    /// `C_G ∫ e^{κ_F r} ‖ω_r‖_μ dr`
    pub bracket_g: T,
    /// `C̄_F e^{λμ} / (λ κ_F)`
    pub bracket_drift: T,
    /// `(k_integral + g_nu_integral) / κ_F`
    pub bracket_tail: T,
    /// `C_F e^{λμ}`, multiplying the bracket
    pub bracket_gain: T,
}

impl<T: Scalar> RadiusTerms<T> {
    pub fn total(&self) -> T {
        self.noise_now
            + self.drift_const
            + self.k_integral
            + self.g_nu_integral
            + self.bracket_gain * (self.bracket_g + self.bracket_drift + self.bracket_tail)
    }

    /// Sum of the terms that depend on the path.
    pub fn path_part(&self) -> T {
        self.noise_now + self.k_integral + self.g_nu_integral + self.bracket_gain * (self.bracket_g + self.bracket_tail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsorbingEstimate<T> {
    pub radius: T,
    pub delta: T,
    pub rho: T,
    pub t_trunc: T,
    pub terms: RadiusTerms<T>,
    /// Bound on the part of `R` beyond `-T_trunc` under the linear
    /// majorant `‖ω_r‖_μ ≤ a + b|r|` fitted on the sampled history.
    pub tail_bound: T,
    pub majorant: (T, T),
    pub tail_certified: bool,
    pub delay: DelayBound<T>,
}

/// Relative size below which the truncated tail is accepted.
pub const TAIL_TOLERANCE: f64 = 1e-6;

/// `R(ω)` with the infinite integrals truncated to `[-T_trunc, 0]`;
/// `δ` defaults to `R/10`.
pub fn absorbing_radius<T: Scalar>(
    omega: &NoisePath<T>,
    constants: &CoefficientConstants<T>,
    lambda: T,
    delay_steps: usize,
    t_trunc: T,
    delta: Option<T>,
) -> Result<AbsorbingEstimate<T>> {
    let h = omega.step();
    let mu = T::from_count(delay_steps) * h;
    let delay = require_delay_bound(constants, lambda, mu)?;
    let n = grid_index(t_trunc, h)?;
    if n < 1 {
        return Err(Error::param("t_trunc", "must be at least one grid step"));
    }
    let n = n as usize;
    if -omega.i_min() < (n + delay_steps) as i64 {
        return Err(Error::InsufficientHistory {
            needed: -(t_trunc + mu).to_f64_lossy(),
            available: omega.t_min().to_f64_lossy(),
        });
    }
    let c = constants;
    let kappa = delay.rate;
    let e_mu = (lambda * mu).exp();
    let sups = omega.backward_window_sups(delay_steps, n)?;
    let d = cell_max(&sups);
    let exp_integral = |a: T| -> T {
        let decay = (-a * h).exp();
        let cell = (T::one() - decay) / a;
        // cell k spans r ∈ [-(k+1)h, -kh]; ∫ e^{ar} = e^{-akh}·cell
        let mut w = cell;
        let mut acc = T::zero();
        for &v in &d {
            acc = acc + w * v;
            w = w * decay;
        }
        acc
    };
    let i_lambda = exp_integral(lambda);
    let i_kappa = exp_integral(kappa);
    let j_nu: T = d
        .iter()
        .enumerate()
        .map(|(k, &v)| power_exp_moment(c.nu, lambda, T::from_count(k) * h, T::from_count(k + 1) * h) * v)
        .sum();

    let k_integral = c.c_k * e_mu * i_lambda;
    let g_nu_integral = c.c_g_nu * j_nu;
    let terms = RadiusTerms {
        noise_now: c.c_g * sups[0],
        drift_const: c.c_f_bar * e_mu / lambda,
        k_integral,
        g_nu_integral,
        bracket_g: c.c_g * i_kappa,
        bracket_drift: c.c_f_bar * e_mu / (lambda * kappa),
        bracket_tail: (k_integral + g_nu_integral) / kappa,
        bracket_gain: c.c_f * e_mu,
    };
    let radius = terms.total();

    // linear majorant a + b|r| of ‖ω_r‖_μ over the sampled window, slope
    // taken over lags of at least one time unit
    let unit = (T::one() / h).ceil().to_usize().unwrap_or(1).min(n);
    let slope = (unit..=n).map(|k| (sups[k] - sups[0]).max(T::zero()) / (T::from_count(k) * h)).fold(T::zero(), T::max);
    let intercept = (0..=n).map(|k| sups[k] - slope * T::from_count(k) * h).fold(T::zero(), T::max);
    let tail = |a: T| -> T { (-a * t_trunc).exp() * (intercept / a + slope * (t_trunc / a + T::one() / (a * a))) };
    let amp = T::one() + c.c_f * e_mu / kappa;
    let tail_bound = c.c_k * e_mu * tail(lambda) * amp
        + c.c_g_nu * t_trunc.powf(c.nu - T::one()) * tail(lambda) * amp
        + c.c_f * e_mu * c.c_g * tail(kappa);
    let tail_certified = tail_bound <= T::lit(TAIL_TOLERANCE) * radius || tail_bound.is_zero();
    let delta = delta.unwrap_or(radius * T::lit(0.1));
    if !(delta >= T::zero()) {
        return Err(Error::param("delta", "must be >= 0"));
    }
    Ok(AbsorbingEstimate {
        radius,
        delta,
        rho: radius + delta,
        t_trunc,
        terms,
        tail_bound,
        majorant: (intercept, slope),
        tail_certified,
        delay,
    })
}

/// The `ξ`-dependent Gronwall terms at pullback time `t`:
/// `e^{λμ}(D + C_G ‖ω_{-t}‖_μ)(e^{-λt} + e^{-κ_F t})`.
pub fn xi_terms<T: Scalar>(
    bundle_norm: T,
    omega: &NoisePath<T>,
    t: T,
    constants: &CoefficientConstants<T>,
    lambda: T,
    delay_steps: usize,
) -> Result<T> {
    let h = omega.step();
    let mu = T::from_count(delay_steps) * h;
    let delay = require_delay_bound(constants, lambda, mu)?;
    let k = grid_index(t, h)?;
    let lo = -k - delay_steps as i64;
    if lo < omega.i_min() || k < 0 {
        return Err(Error::InsufficientHistory {
            needed: -(t + mu).to_f64_lossy(),
            available: omega.t_min().to_f64_lossy(),
        });
    }
    let w = omega.sup_indices(lo, -k);
    Ok((lambda * mu).exp() * (bundle_norm + constants.c_g * w) * ((-lambda * t).exp() + (-delay.rate * t).exp()))
}

/// Smallest grid time `t* ≤ t_max` with `ξ`-terms `≤ δ/2` on all of `[t*, t_max]`.
pub fn absorption_threshold<T: Scalar>(
    bundle_norm: T,
    omega: &NoisePath<T>,
    delta: T,
    constants: &CoefficientConstants<T>,
    lambda: T,
    delay_steps: usize,
    t_max: T,
) -> Result<Option<T>> {
    let h = omega.step();
    let mu = T::from_count(delay_steps) * h;
    let delay = require_delay_bound(constants, lambda, mu)?;
    let n = grid_index(t_max, h)?.max(0) as usize;
    let sups = omega.backward_window_sups(delay_steps, n)?;
    let e_mu = (lambda * mu).exp();
    let half = delta * T::lit(0.5);
    let mut found = None;
    for k in (0..=n).rev() {
        let t = T::from_count(k) * h;
        let v = e_mu * (bundle_norm + constants.c_g * sups[k]) * ((-lambda * t).exp() + (-delay.rate * t).exp());
        if v <= half {
            found = Some(t);
        } else {
            break;
        }
    }
    Ok(found)
}

/// Linear-in-`x` ceilings for `sup_s |(-A)^ε u_t(s)|` and the `α`-Hölder
/// seminorm of `u_t` after `2μ` of evolution driven by `θ_{-2μ} ω`,
/// where `x` bounds `|u|` on `[-μ, 2μ]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompactnessCeiling<T> {
    pub epsilon: T,
    pub alpha: T,
    pub frac: (T, T),
    pub holder: (T, T),
    /// `max_{i=0,1,2} ρ(θ_{-iμ} ω)`
    pub rho_max: T,
}

impl<T: Scalar> CompactnessCeiling<T> {
    pub fn frac_at(&self, x: T) -> T {
        self.frac.0 + self.frac.1 * x
    }

    pub fn holder_at(&self, x: T) -> T {
        self.holder.0 + self.holder.1 * x
    }
}

#[allow(clippy::too_many_arguments)]
pub fn compactness_ceiling<T: Scalar>(
    omega: &NoisePath<T>,
    constants: &CoefficientConstants<T>,
    lambda: T,
    delay_steps: usize,
    beta: T,
    epsilon: T,
    alpha: T,
    rho_max: T,
) -> Result<CompactnessCeiling<T>> {
    let c = constants;
    let nu = c.nu;
    if !(epsilon > T::zero() && epsilon < nu) {
        return Err(Error::param("epsilon", "must lie in (0, nu)"));
    }
    if !(alpha > T::zero() && alpha <= beta && alpha < nu) {
        return Err(Error::param("alpha", "need 0 < alpha <= beta and alpha < nu"));
    }
    let h = omega.step();
    let m = delay_steps as i64;
    let mu = T::from_count(delay_steps) * h;
    let two_mu = mu + mu;
    // p = θ_{-2μ} ω on [-μ, 2μ]
    let p = omega.shift_steps(-2 * m)?;
    let big_p = p.sup_indices(-m, 2 * m);
    let holder_p = p.holder_seminorm(beta, -mu, two_mu)?;
    let half = lambda * T::lit(0.5);

    let c_eps = half_decay_sup(epsilon);
    let k_eps_mu = c_eps * mu.powf(-epsilon) * (-half * mu).exp();
    let m_eps = c_eps * power_exp_moment(T::one() - epsilon, half, T::zero(), two_mu);
    let gamma = T::one() + epsilon - nu;
    let m_gamma = half_decay_sup(gamma) * power_exp_moment(nu - epsilon, half, T::zero(), two_mu);
    let frac0 = c.c_f_bar * m_eps
        + c.c_g_nu * lambda.powf(epsilon - nu) * big_p
        + c.c_g_nu * big_p * m_gamma
        + c.c_k * big_p * m_eps;
    let frac1 = k_eps_mu + c.c_f * m_eps;

    let one = T::one();
    let fa = full_decay_sup(alpha);
    let smooth = fa * two_mu.powf(one - alpha) / (one - alpha) + mu.powf(one - alpha);
    let q = one - nu + alpha;
    let h_ag =
        full_decay_sup(q) * two_mu.powf(one - q) / (one - q) + full_decay_sup(one - nu) * mu.powf(nu - alpha) / nu;
    let holder0 = c.c_f_bar * smooth
        + c.c_g_nu * big_p * h_ag
        + c.c_k * big_p * smooth
        + c.c_k * big_p * mu.powf(one - alpha)
        + c.c_g * holder_p * mu.powf(beta - alpha);
    let holder1 = fa * mu.powf(-alpha) + c.c_f * smooth;
    Ok(CompactnessCeiling { epsilon, alpha, frac: (frac0, frac1), holder: (holder0, holder1), rho_max })
}

/// Parameters of a pullback experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PullbackSpec<T> {
    pub epsilon: T,
    pub alpha: T,
    pub t_trunc: T,
    pub delta: Option<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PullbackRow<T> {
    pub t: T,
    pub member: usize,
    pub sup_norm: T,
    pub absorbed: bool,
    pub frac_sup: T,
    pub holder_alpha: T,
    /// `max |u|` over the last `3μ` of the evolution.
    pub window_sup: T,
    pub frac_ceiling: Option<T>,
    pub holder_ceiling: Option<T>,
}

impl<T: Scalar> PullbackRow<T> {
    pub fn within_ceiling(&self) -> bool {
        match (self.frac_ceiling, self.holder_ceiling) {
            (Some(f), Some(hc)) => self.frac_sup <= f && self.holder_alpha <= hc,
            _ => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PullbackTime<T> {
    pub t: T,
    pub diameter: T,
    pub max_sup: T,
    pub all_absorbed: bool,
    pub xi_terms: T,
    pub max_interval: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PullbackReport<T> {
    pub seed: u64,
    pub estimate: AbsorbingEstimate<T>,
    pub bundle_norm: T,
    pub rows: Vec<PullbackRow<T>>,
    pub times: Vec<PullbackTime<T>>,
    /// First recorded time from which every later time is fully absorbed.
    pub measured_t_d: Option<T>,
    /// Earliest time from which the `ξ`-terms stay below `δ/2`.
    pub threshold_t_d: Option<T>,
    pub ceiling: Option<CompactnessCeiling<T>>,
}

impl<T: Scalar> PullbackReport<T> {
    /// Absorption holds from `measured_t_d` on, and no later than one
    /// schedule interval after the Gronwall threshold.
    pub fn absorption_consistent(&self) -> bool {
        let (Some(measured), Some(threshold)) = (self.measured_t_d, self.threshold_t_d) else {
            return false;
        };
        let slack = self.times.iter().map(|p| p.max_interval).fold(T::zero(), T::max);
        let after: Vec<&PullbackTime<T>> = self.times.iter().filter(|p| p.t >= measured).collect();
        after.iter().all(|p| p.all_absorbed) && measured <= threshold + slack
    }

    /// Diameter at the largest time is at most the diameter at the smallest.
    pub fn diameter_contracts(&self) -> bool {
        match (self.times.first(), self.times.last()) {
            (Some(a), Some(b)) => b.diameter <= a.diameter,
            _ => false,
        }
    }

    pub fn within_ceiling(&self) -> bool {
        self.rows.iter().filter(|r| r.absorbed).all(|r| r.within_ceiling())
    }

    /// Rows `t_j,seed,member,sup_norm,absorbed,diameter,frac_sup,holder_alpha`.
    pub fn write_csv<W: Write>(&self, mut w: W, header: bool) -> std::io::Result<()> {
        if header {
            writeln!(w, "t_j,seed,member,sup_norm,absorbed,diameter,frac_sup,holder_alpha")?;
        }
        for r in &self.rows {
            let diam = self.times.iter().find(|p| p.t == r.t).map_or(T::nan(), |p| p.diameter);
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                fmt(r.t),
                self.seed,
                r.member,
                fmt(r.sup_norm),
                if r.absorbed { 1 } else { 0 },
                fmt(diam),
                fmt(r.frac_sup),
                fmt(r.holder_alpha)
            )?;
        }
        Ok(())
    }
}

/// Evolves every bundle member to `φ(t_j, θ_{-t_j} ω, ξ)` for each time.
#[allow(clippy::too_many_arguments)]
pub fn pullback_run<T: Scalar>(
    omega: &NoisePath<T>,
    bundle: &[Segment<T>],
    times: &[T],
    coeffs: &CoefficientSet<T>,
    op: &SpectralOperator<T>,
    cfg: &SolverConfig<T>,
    estimate: &AbsorbingEstimate<T>,
    spec: &PullbackSpec<T>,
) -> Result<PullbackReport<T>> {
    if bundle.is_empty() || times.is_empty() {
        return Err(Error::param("bundle", "need at least one member and one time"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("times", "pullback times must increase"));
    }
    let h = coeffs.step();
    let m = coeffs.delay_steps();
    let mu = coeffs.delay();
    let lambda = op.gap();
    let c = coeffs.constants();
    let bundle_norm = bundle.iter().map(|x| x.sup_norm()).fold(T::zero(), T::max);

    let ceiling = {
        let mut rho_max = estimate.rho;
        for i in 1..=2i64 {
            let shifted = omega.shift_steps(-i * m as i64)?;
            let e = absorbing_radius(&shifted, c, lambda, m, estimate.t_trunc, None)?;
            rho_max = rho_max.max(e.rho);
        }
        Some(compactness_ceiling(omega, c, lambda, m, cfg.beta, spec.epsilon, spec.alpha, rho_max)?)
    };

    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for &t in times {
        let k = grid_index(t, h)?;
        if k < 1 {
            return Err(Error::param("times", "pullback times must be positive grid times"));
        }
        let fiber = omega.shift_steps(-k)?;
        let mut states = Vec::with_capacity(bundle.len());
        let mut max_interval = T::zero();
        for (member, xi) in bundle.iter().enumerate() {
            let sol = global_solve(xi, &fiber, t, coeffs, op, cfg)?;
            let state = sol.trajectory.segment_at_step(k as usize);
            let d = segment_diagnostics(&state.view(), h, op, spec.epsilon, spec.alpha)?;
            let lo = (k - 3 * m as i64).max(-(m as i64));
            let window_sup = (lo..=k).map(|j| crate::hilbert::norm(sol.trajectory.state(j))).fold(T::zero(), T::max);
            let sup_norm = state.sup_norm();
            let applies = k >= 2 * m as i64;
            let x = ceiling.map_or(window_sup, |cl| cl.rho_max.max(window_sup));
            rows.push(PullbackRow {
                t,
                member,
                sup_norm,
                absorbed: sup_norm <= estimate.rho,
                frac_sup: d.fractional_sup,
                holder_alpha: d.holder_alpha,
                window_sup,
                frac_ceiling: ceiling.filter(|_| applies).map(|cl| cl.frac_at(x)),
                holder_ceiling: ceiling.filter(|_| applies).map(|cl| cl.holder_at(x)),
            });
            for iv in &sol.schedule.intervals {
                max_interval = max_interval.max(iv.end - iv.start);
            }
            states.push(state);
        }
        let these = &rows[rows.len() - bundle.len()..];
        summary.push(PullbackTime {
            t,
            diameter: diameter(&states),
            max_sup: these.iter().map(|r| r.sup_norm).fold(T::zero(), T::max),
            all_absorbed: these.iter().all(|r| r.absorbed),
            xi_terms: xi_terms(bundle_norm, omega, t, c, lambda, m)?,
            max_interval,
        });
    }
    let mut measured_t_d = None;
    for p in summary.iter().rev() {
        if p.all_absorbed {
            measured_t_d = Some(p.t);
        } else {
            break;
        }
    }
    let t_last = *times.last().expect("nonempty");
    let threshold_t_d = absorption_threshold(bundle_norm, omega, estimate.delta, c, lambda, m, t_last)?;
    let _ = mu;
    Ok(PullbackReport {
        seed: omega.seed(),
        estimate: *estimate,
        bundle_norm,
        rows,
        times: summary,
        measured_t_d,
        threshold_t_d,
        ceiling,
    })
}

/// Trend of `e^{-2κt} R₁(θ_{-t} ω)` with
/// `R₁(ω) = ∫_{-T_trunc}^0 e^{κ_F r} ‖ω_r‖_μ dr`, sampled every `μ`.
pub fn temperedness_audit<T: Scalar>(
    omega: &NoisePath<T>,
    constants: &CoefficientConstants<T>,
    lambda: T,
    delay_steps: usize,
    kappa: T,
    horizon: T,
    t_trunc: T,
) -> Result<TrendProbe<T>> {
    if !(kappa > T::zero()) {
        return Err(Error::param("kappa", "must be > 0"));
    }
    let h = omega.step();
    let mu = T::from_count(delay_steps) * h;
    let delay = require_delay_bound(constants, lambda, mu)?;
    let rate = delay.rate;
    let n_h = grid_index(horizon, h)?.max(0);
    let n_t = grid_index(t_trunc, h)?.max(1) as usize;
    if -omega.i_min() < n_h + n_t as i64 + delay_steps as i64 {
        return Err(Error::InsufficientHistory {
            needed: -(horizon + t_trunc + mu).to_f64_lossy(),
            available: omega.t_min().to_f64_lossy(),
        });
    }
    let decay = (-rate * h).exp();
    let cell = (T::one() - decay) / rate;
    let two = T::lit(2.0);
    let mut rows = Vec::new();
    let mut k = 0i64;
    while k <= n_h {
        let fiber = omega.shift_steps(-k)?;
        let sups = fiber.backward_window_sups(delay_steps, n_t)?;
        let mut w = cell;
        let mut acc = T::zero();
        for pair in sups.windows(2) {
            acc = acc + w * pair[0].max(pair[1]);
            w = w * decay;
        }
        let t = T::from_i64(k).unwrap() * h;
        rows.push((t, (-two * kappa * t).exp() * acc));
        k += delay_steps as i64;
    }
    Ok(TrendProbe::from_rows(rows))
}
