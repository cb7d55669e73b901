//! Pathwise mild solutions.
//!
//! The fixed-point map is
//!
//! ```text
//! T(u)(t) = S(t)ξ(0) + ∫₀ᵗ S(t-r) F(u_r) dr + G(u_t)ω(t)
//!         + ∫₀ᵗ S(t-r) A G(u_r)ω(r) dr - ∫₀ᵗ S(t-r) K(u_r)ω(r) dr
//! ```
//!
//! discretized per mode by exponential product integration: on each cell
//! the data are interpolated linearly and integrated against the exact
//! kernel moments. `K` enters through its cell average
//! `(G(u_{t+h}) - G(u_t))/h`, which is what the trapezoid rule for `G`
//! produces; with this choice the discrete form of
//! `G(u_T)w - S(T)G(u_0)w = ∫₀ᵀ S(T-r)(K(u_r) - A G(u_r))w dr`
//! holds to round-off, so restarting with `θ_τ ω` reproduces the same
//! grid solution.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientConstants, CoefficientSet, NoiseOperator};
use crate::hilbert::{dist, norm};
use crate::io::fmt;
use crate::noise::grid_index;
use crate::segments::{Segment, Trajectory};
use crate::special::{beta as beta_fn, exp_cell_moments};
use crate::{Error, HVector, NoisePath, Result, Scalar, SpectralOperator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig<T> {
    /// Hölder exponent of the noise seminorm, in `(0, 1/2)`.
    pub beta: T,
    pub picard_tol: T,
    pub max_picard_iters: usize,
    pub contraction_target: T,
    pub min_horizon_steps: usize,
    /// Proceed on horizons whose contraction bound exceeds the target.
    pub allow_noncontractive: bool,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        SolverConfig {
            beta: T::lit(0.25),
            picard_tol: T::lit(1e-10),
            max_picard_iters: 200,
            contraction_target: T::lit(0.5),
            min_horizon_steps: 1,
            allow_noncontractive: false,
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > T::zero() && self.beta < T::lit(0.5)) {
            return Err(Error::param("beta", "must lie in (0, 1/2)"));
        }
        if !(self.picard_tol > T::zero()) {
            return Err(Error::param("picard_tol", "must be > 0"));
        }
        if self.max_picard_iters == 0 {
            return Err(Error::param("max_picard_iters", "must be >= 1"));
        }
        if !(self.contraction_target > T::zero() && self.contraction_target < T::one()) {
            return Err(Error::param("contraction_target", "must lie in (0, 1)"));
        }
        if self.min_horizon_steps == 0 {
            return Err(Error::param("min_horizon_steps", "must be >= 1"));
        }
        Ok(())
    }
}

/// Coefficients of the local contraction estimate
/// `c_F T + ‖ω‖_{β,0,T} (c_G T^β + c_Gν T^{β+ν} + c_K T^{1+β})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionBudget<T> {
    pub c_f: T,
    pub c_g: T,
    pub c_g_nu: T,
    pub c_k: T,
    beta: T,
    nu: T,
}

impl<T: Scalar> ContractionBudget<T> {
    pub fn new(constants: &CoefficientConstants<T>, beta: T) -> Result<Self> {
        constants.validate()?;
        if !(beta > T::zero() && beta < T::lit(0.5)) {
            return Err(Error::param("beta", "must lie in (0, 1/2)"));
        }
        let nu = constants.nu;
        let weight = if constants.l_g_nu.is_zero() { T::zero() } else { beta_fn(nu, beta + T::one()) };
        Ok(ContractionBudget {
            c_f: constants.l_f,
            c_g: constants.l_g,
            c_g_nu: constants.l_g_nu * weight,
            c_k: constants.l_k / (T::one() + beta),
            beta,
            nu,
        })
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn nu(&self) -> T {
        self.nu
    }

    /// True when the bound does not depend on the noise.
    pub fn noise_free(&self) -> bool {
        self.c_g.is_zero() && self.c_g_nu.is_zero() && self.c_k.is_zero()
    }

    pub fn bound(&self, t: T, seminorm: T) -> T {
        let b = self.beta;
        let noise = if self.noise_free() || seminorm.is_zero() {
            T::zero()
        } else {
            seminorm * (self.c_g * t.powf(b) + self.c_g_nu * t.powf(b + self.nu) + self.c_k * t.powf(T::one() + b))
        };
        self.c_f * t + noise
    }
}

/// A horizon chosen by [`local_horizon`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Horizon<T> {
    pub steps: usize,
    pub length: T,
    pub seminorm: T,
    pub bound: T,
    pub noncontractive: bool,
}

/// Largest grid horizon `T ≤ max_steps·h` (and inside the forward window
/// of `omega`) whose contraction bound stays at or below the target.
pub fn local_horizon<T: Scalar>(
    omega: &NoisePath<T>,
    budget: &ContractionBudget<T>,
    cfg: &SolverConfig<T>,
    max_steps: Option<usize>,
) -> Result<Horizon<T>> {
    cfg.validate()?;
    let h = omega.step();
    let window = omega.i_max().max(0) as usize;
    let cap = max_steps.map_or(window, |s| s.min(window));
    let min_steps = cfg.min_horizon_steps.min(max_steps.unwrap_or(usize::MAX));
    if cap < min_steps || cap == 0 {
        return Err(Error::WindowExhausted { at: 0.0, min_steps: cfg.min_horizon_steps });
    }
    let target = cfg.contraction_target;
    let at = |k: usize, s: T| budget.bound(T::from_count(k) * h, s);

    let vals = omega.window_values(0, cap as i64)?;
    let md = omega.dim();
    let constant = vals.chunks(md).all(|r| r == &vals[..md]);
    if budget.noise_free() || constant {
        // bound is c_F·T
        let k = if budget.c_f.is_zero() {
            cap
        } else {
            let raw = (target / (budget.c_f * h)).floor().to_usize().unwrap_or(usize::MAX);
            let mut k = raw.min(cap);
            while k > 0 && at(k, T::zero()) > target {
                k -= 1;
            }
            k
        };
        return Ok(finish(k, min_steps, T::zero(), at, target, h));
    }

    let weights: Vec<T> =
        (0..=cap).map(|g| if g == 0 { T::zero() } else { (T::from_count(g) * h).powf(-cfg.beta) }).collect();
    let mut sem = T::zero();
    let mut last = (0usize, T::zero());
    for j in 1..=cap {
        let vj = &vals[j * md..(j + 1) * md];
        let mut s = sem;
        for i in 0..j {
            s = s.max(dist(vj, &vals[i * md..(i + 1) * md]) * weights[j - i]);
        }
        if at(j, s) > target {
            if j <= min_steps {
                // even the minimum horizon fails; report it at its own seminorm
                let mut sm = s;
                for jj in j + 1..=min_steps.min(cap) {
                    let v = &vals[jj * md..(jj + 1) * md];
                    for i in 0..jj {
                        sm = sm.max(dist(v, &vals[i * md..(i + 1) * md]) * weights[jj - i]);
                    }
                }
                let k = min_steps.min(cap);
                return Ok(Horizon {
                    steps: k,
                    length: T::from_count(k) * h,
                    seminorm: sm,
                    bound: at(k, sm),
                    noncontractive: true,
                });
            }
            break;
        }
        sem = s;
        last = (j, s);
    }
    Ok(finish(last.0, min_steps, last.1, at, target, h))
}

fn finish<T: Scalar>(k: usize, min_steps: usize, sem: T, at: impl Fn(usize, T) -> T, target: T, h: T) -> Horizon<T> {
    let k = k.max(min_steps);
    let bound = at(k, sem);
    Horizon { steps: k, length: T::from_count(k) * h, seminorm: sem, bound, noncontractive: bound > target }
}

/// Per-mode exponential cell weights.
struct CellWeights<T> {
    lambda: Vec<T>,
    decay: Vec<T>,
    left: Vec<T>,
    right: Vec<T>,
}

impl<T: Scalar> CellWeights<T> {
    fn new(op: &SpectralOperator<T>, h: T) -> Self {
        let lambda = op.eigenvalues().to_vec();
        let mut decay = Vec::with_capacity(lambda.len());
        let mut left = Vec::with_capacity(lambda.len());
        let mut right = Vec::with_capacity(lambda.len());
        for &l in &lambda {
            let (_, wl, wr) = exp_cell_moments(l, h);
            decay.push((-l * h).exp());
            left.push(wl);
            right.push(wr);
        }
        CellWeights { lambda, decay, left, right }
    }
}

/// Discrete fixed-point map on `[-μ, n·h]` with reusable buffers.
struct Kernel<'a, T> {
    coeffs: &'a CoefficientSet<T>,
    w: CellWeights<T>,
    n: usize,
    /// `exp(-λ_k j h)`, row-major `(n+1)×N`
    semigroup: Vec<T>,
    gv: Vec<T>,
    gmat: Vec<T>,
    kbar: Vec<T>,
    fv: Vec<T>,
}

impl<'a, T: Scalar> Kernel<'a, T> {
    fn new(coeffs: &'a CoefficientSet<T>, op: &SpectralOperator<T>, n: usize) -> Self {
        let dim = coeffs.dim();
        let m = coeffs.delay_steps();
        let h = coeffs.step();
        let w = CellWeights::new(op, h);
        let mut semigroup = Vec::with_capacity((n + 1) * dim);
        for j in 0..=n {
            let t = T::from_count(j) * h;
            semigroup.extend(w.lambda.iter().map(|&l| (-l * t).exp()));
        }
        Kernel {
            coeffs,
            w,
            n,
            semigroup,
            gv: vec![T::zero(); (m + n + 1) * dim],
            gmat: vec![T::zero(); (n + 1) * dim],
            kbar: vec![T::zero(); n * dim],
            fv: vec![T::zero(); (n + 1) * dim],
        }
    }

    /// `G(u_{jh})` for `j = 0..=n` and cell averages of `K`.
    fn diffusion_data(&mut self, u: &[T]) {
        let c = self.coeffs;
        let dim = c.dim();
        let m = c.delay_steps();
        let n = self.n;
        if c.diffusion().is_zero() {
            self.gmat.iter_mut().for_each(|v| *v = T::zero());
            self.kbar.iter_mut().for_each(|v| *v = T::zero());
            return;
        }
        for (row, out) in u.chunks(dim).zip(self.gv.chunks_mut(dim)) {
            c.diffusion().g_into(row, out);
        }
        let half = T::lit(0.5);
        let inv_m = T::one() / T::from_count(m);
        for k in 0..dim {
            let mut acc = half * (self.gv[k] + self.gv[m * dim + k]);
            for i in 1..m {
                acc = acc + self.gv[i * dim + k];
            }
            self.gmat[k] = acc * inv_m;
        }
        let h = c.step();
        let scale = half / c.delay();
        for j in 0..n {
            for k in 0..dim {
                let gv = &self.gv;
                let kb = (gv[(j + m + 1) * dim + k] + gv[(j + m) * dim + k] - gv[(j + 1) * dim + k] - gv[j * dim + k])
                    * scale;
                self.kbar[j * dim + k] = kb;
                self.gmat[(j + 1) * dim + k] = self.gmat[j * dim + k] + h * kb;
            }
        }
    }

    fn drift_data(&mut self, u: &[T]) {
        let c = self.coeffs;
        let dim = c.dim();
        let m = c.delay_steps();
        if c.drift().is_zero() {
            self.fv.iter_mut().for_each(|v| *v = T::zero());
            return;
        }
        let off = c.drift_offset();
        for j in 0..=self.n {
            let r = j + m - off;
            c.drift().eval_into(&u[r * dim..(r + 1) * dim], &mut self.fv[j * dim..(j + 1) * dim]);
        }
    }

    /// `out = T(u)`; `omega` holds `ω(jh)` for `j = 0..=n`.
    fn apply(&mut self, u: &[T], omega: &[T], out: &mut [T]) {
        let c = self.coeffs;
        let dim = c.dim();
        let md = c.noise_dim();
        let m = c.delay_steps();
        self.diffusion_data(u);
        self.drift_data(u);
        out[..(m + 1) * dim].copy_from_slice(&u[..(m + 1) * dim]);
        let cols = c.diffusion().column_map();
        let xi0 = &u[m * dim..(m + 1) * dim];
        for k in 0..dim {
            let (lam, e, wl, wr) = (self.w.lambda[k], self.w.decay[k], self.w.left[k], self.w.right[k]);
            let col = cols[k];
            let mut z = T::zero();
            let mut f0 = self.fv[k];
            let mut w0 = omega[col];
            let mut gw0 = self.gmat[k] * w0;
            for j in 0..self.n {
                let f1 = self.fv[(j + 1) * dim + k];
                let w1 = omega[(j + 1) * md + col];
                let g1 = self.gmat[(j + 1) * dim + k];
                let gw1 = g1 * w1;
                let kb = self.kbar[j * dim + k];
                z = e * z + (wl * f0 + wr * f1) - lam * (wl * gw0 + wr * gw1) - kb * (wl * w0 + wr * w1);
                out[(j + m + 1) * dim + k] = self.semigroup[(j + 1) * dim + k] * xi0[k] + z + gw1;
                f0 = f1;
                w0 = w1;
                gw0 = gw1;
            }
        }
    }
}

fn sup_row_dist<T: Scalar>(a: &[T], b: &[T], dim: usize) -> T {
    a.chunks(dim).zip(b.chunks(dim)).map(|(x, y)| dist(x, y)).fold(T::zero(), T::max)
}

fn check_solve_inputs<T: Scalar>(
    xi: &Segment<T>,
    omega: &NoisePath<T>,
    coeffs: &CoefficientSet<T>,
    op: &SpectralOperator<T>,
    steps: usize,
) -> Result<()> {
    if xi.dim() != coeffs.dim() || op.dim() != coeffs.dim() {
        return Err(Error::DimensionMismatch { what: "state dimension", expected: coeffs.dim(), got: xi.dim() });
    }
    if xi.delay_steps() != coeffs.delay_steps() {
        return Err(Error::DimensionMismatch {
            what: "initial segment delay steps",
            expected: coeffs.delay_steps(),
            got: xi.delay_steps(),
        });
    }
    if omega.dim() != coeffs.noise_dim() {
        return Err(Error::DimensionMismatch {
            what: "noise dimension",
            expected: coeffs.noise_dim(),
            got: omega.dim(),
        });
    }
    if (omega.step() - coeffs.step()).abs() > T::epsilon() * coeffs.step() {
        return Err(Error::param("h", "noise grid and coefficient grid differ"));
    }
    if !omega.contains_index(steps as i64) {
        return Err(Error::OutOfWindow {
            start: 0.0,
            end: (T::from_count(steps) * coeffs.step()).to_f64_lossy(),
            available_start: omega.t_min().to_f64_lossy(),
            available_end: omega.t_max().to_f64_lossy(),
        });
    }
    Ok(())
}

/// One application of the fixed-point map to a trajectory `u` on
/// `[-μ, T]`; samples on `[-μ, 0]` are taken from `xi`.
pub fn apply_operator<T: Scalar>(
    xi: &Segment<T>,
    u: &Trajectory<T>,
    omega: &NoisePath<T>,
    coeffs: &CoefficientSet<T>,
    op: &SpectralOperator<T>,
) -> Result<Trajectory<T>> {
    let n = u.steps();
    check_solve_inputs(xi, omega, coeffs, op, n)?;
    if u.delay_steps() != coeffs.delay_steps() || u.dim() != coeffs.dim() {
        return Err(Error::DimensionMismatch {
            what: "trajectory",
            expected: coeffs.delay_steps(),
            got: u.delay_steps(),
        });
    }
    let dim = coeffs.dim();
    let m = coeffs.delay_steps();
    let mut input = u.clone();
    input.raw_mut()[..(m + 1) * dim].copy_from_slice(xi.view().data());
    let w = omega.window_values(0, n as i64)?;
    let mut out = input.clone();
    let mut kernel = Kernel::new(coeffs, op, n);
    kernel.apply(input.raw(), &w, out.raw_mut());
    Ok(out)
}

/// Convergence record of one Picard solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PicardReport<T> {
    pub iterations: usize,
    /// `|||u^{i+1} - u^i|||` per iteration.
    pub differences: Vec<T>,
}

impl<T: Scalar> PicardReport<T> {
    /// Successive ratios `d_{i+1}/d_i`, skipping steps whose previous
    /// difference is already at round-off level.
    pub fn ratios(&self, scale: T) -> Vec<T> {
        let floor = T::lit(1e3) * T::epsilon() * (T::one() + scale);
        self.differences.windows(2).filter(|w| w[0] > floor).map(|w| w[1] / w[0]).collect()
    }

    /// Largest ratio after the first iteration.
    pub fn max_ratio(&self, scale: T) -> T {
        self.ratios(scale).into_iter().fold(T::zero(), T::max)
    }
}

/// Local solution on `[-μ, T]`.
#[derive(Debug, Clone)]
pub struct LocalSolution<T> {
    pub trajectory: Trajectory<T>,
    pub report: PicardReport<T>,
}

fn picard_iterate<T: Scalar>(
    kernel: &mut Kernel<'_, T>,
    start: Trajectory<T>,
    w: &[T],
    cfg: &SolverConfig<T>,
) -> Result<LocalSolution<T>> {
    let dim = kernel.coeffs.dim();
    let mut cur = start;
    let mut next = cur.clone();
    let mut differences = Vec::new();
    loop {
        kernel.apply(cur.raw(), w, next.raw_mut());
        let d = sup_row_dist(cur.raw(), next.raw(), dim);
        differences.push(d);
        std::mem::swap(&mut cur, &mut next);
        if !d.is_finite() {
            return Err(Error::PicardDivergence {
                iters: differences.len(),
                tol: cfg.picard_tol.to_f64_lossy(),
                last_diff: d.to_f64_lossy(),
            });
        }
        if d <= cfg.picard_tol {
            break;
        }
        if differences.len() >= cfg.max_picard_iters {
            return Err(Error::PicardDivergence {
                iters: differences.len(),
                tol: cfg.picard_tol.to_f64_lossy(),
                last_diff: d.to_f64_lossy(),
            });
        }
    }
    Ok(LocalSolution { trajectory: cur, report: PicardReport { iterations: differences.len(), differences } })
}

/// Fixed point on `[-μ, T]` started from the constant extension of `ξ(0)`.
///
/// Refuses horizons whose contraction bound exceeds the target unless the
/// override is set.
pub fn picard_solve<T: Scalar>(
    xi: &Segment<T>,
    omega: &NoisePath<T>,
    t: T,
    coeffs: &CoefficientSet<T>,
    op: &SpectralOperator<T>,
    cfg: &SolverConfig<T>,
) -> Result<LocalSolution<T>> {
    cfg.validate()?;
    let n = steps_of(t, coeffs.step())?;
    check_solve_inputs(xi, omega, coeffs, op, n)?;
    let budget = ContractionBudget::new(coeffs.constants(), cfg.beta)?;
    let sem = if n == 0 { T::zero() } else { omega.holder_seminorm(cfg.beta, T::zero(), t)? };
    let bound = budget.bound(t, sem);
    if bound > cfg.contraction_target && !cfg.allow_noncontractive {
        return Err(Error::NonContractive {
            at: 0.0,
            bound: bound.to_f64_lossy(),
            target: cfg.contraction_target.to_f64_lossy(),
        });
    }
    picard_unchecked(xi, omega, n, coeffs, op, cfg, None)
}

/// As [`picard_solve`] but from a caller-supplied first iterate.
pub fn picard_solve_from<T: Scalar>(
    xi: &Segment<T>,
    initial: &Trajectory<T>,
    omega: &NoisePath<T>,
    coeffs: &CoefficientSet<T>,
    op: &SpectralOperator<T>,
    cfg: &SolverConfig<T>,
) -> Result<LocalSolution<T>> {
    cfg.validate()?;
    let n = initial.steps();
    check_solve_inputs(xi, omega, coeffs, op, n)?;
    picard_unchecked(xi, omega, n, coeffs, op, cfg, Some(initial))
}

fn picard_unchecked<T: Scalar>(
    xi: &Segment<T>,
    omega: &NoisePath<T>,
    n: usize,
    coeffs: &CoefficientSet<T>,
    op: &SpectralOperator<T>,
    cfg: &SolverConfig<T>,
    initial: Option<&Trajectory<T>>,
) -> Result<LocalSolution<T>> {
    let start = match initial {
        Some(u) => {
            let mut u = u.clone();
            let len = xi.view().data().len();
            u.raw_mut()[..len].copy_from_slice(xi.view().data());
            u
        }
        None => Trajectory::constant_extension(xi, n),
    };
    if n == 0 {
        return Ok(LocalSolution { trajectory: start, report: PicardReport { iterations: 0, differences: vec![] } });
    }
    let w = omega.window_values(0, n as i64)?;
    let mut kernel = Kernel::new(coeffs, op, n);
    picard_iterate(&mut kernel, start, &w, cfg)
}

fn steps_of<T: Scalar>(t: T, h: T) -> Result<usize> {
    let n = grid_index(t, h)?;
    if n < 0 {
        return Err(Error::param("t", "must be >= 0"));
    }
    Ok(n as usize)
}

/// One interval `[T_{i-1}, T_i]` of the stopping-time schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScheduleInterval<T> {
    pub start: T,
    pub end: T,
    pub start_step: usize,
    pub steps: usize,
    /// `‖θ_{T_{i-1}} ω‖_{β, 0, T_i - T_{i-1}}`
    pub seminorm: T,
    pub bound: T,
    pub picard_iterations: usize,
    pub max_ratio: T,
    pub noncontractive: bool,
}

/// Grid-aligned stopping times `0 = T_0 < T_1 < … < T_n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoppingSchedule<T> {
    pub intervals: Vec<ScheduleInterval<T>>,
}

impl<T: Scalar> StoppingSchedule<T> {
    pub fn times(&self) -> Vec<T> {
        let mut out = vec![T::zero()];
        out.extend(self.intervals.iter().map(|i| i.end));
        out
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn noncontractive_count(&self) -> usize {
        self.intervals.iter().filter(|i| i.noncontractive).count()
    }

    /// Number of intervals meeting `[0, t]`.
    pub fn intervals_covering(&self, t: T) -> usize {
        self.intervals.iter().filter(|i| i.start < t).count().max(1)
    }

    /// Rows `i,T_i,seminorm,bound,picard_iterations,flags`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "i,T_i,seminorm,bound,picard_iterations,flags")?;
        for (i, iv) in self.intervals.iter().enumerate() {
            let flag = if iv.noncontractive { "NONCONTRACTIVE" } else { "OK" };
            writeln!(
                w,
                "{},{},{},{},{},{}",
                i + 1,
                fmt(iv.end),
                fmt(iv.seminorm),
                fmt(iv.bound),
                iv.picard_iterations,
                flag
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GlobalSolution<T> {
    pub trajectory: Trajectory<T>,
    pub schedule: StoppingSchedule<T>,
}

/// Glues local solutions along stopping times, restarting each interval
/// from `u_{T_{i-1}}` with the shifted path `θ_{T_{i-1}} ω`.
pub fn global_solve<T: Scalar>(
    xi: &Segment<T>,
    omega: &NoisePath<T>,
    t_total: T,
    coeffs: &CoefficientSet<T>,
    op: &SpectralOperator<T>,
    cfg: &SolverConfig<T>,
) -> Result<GlobalSolution<T>> {
    cfg.validate()?;
    let total = steps_of(t_total, coeffs.step())?;
    check_solve_inputs(xi, omega, coeffs, op, total)?;
    let budget = ContractionBudget::new(coeffs.constants(), cfg.beta)?;
    let h = coeffs.step();
    let dim = coeffs.dim();
    let m = coeffs.delay_steps();
    let mut traj = Trajectory::from_initial(xi);
    let mut intervals = Vec::new();
    let mut done = 0usize;
    while done < total {
        let local = omega.shift_steps(done as i64)?;
        let hz = local_horizon(&local, &budget, cfg, Some(total - done))?;
        if hz.noncontractive && !cfg.allow_noncontractive {
            return Err(Error::NonContractive {
                at: (T::from_count(done) * h).to_f64_lossy(),
                bound: hz.bound.to_f64_lossy(),
                target: cfg.contraction_target.to_f64_lossy(),
            });
        }
        let start = traj.segment_at_step(done);
        let sol = picard_unchecked(&start, &local, hz.steps, coeffs, op, cfg, None)?;
        let rows = sol.trajectory.raw();
        for j in 1..=hz.steps {
            traj.push(&rows[(m + j) * dim..(m + j + 1) * dim]);
        }
        let scale = norm_scale(&sol.trajectory);
        intervals.push(ScheduleInterval {
            start: T::from_count(done) * h,
            end: T::from_count(done + hz.steps) * h,
            start_step: done,
            steps: hz.steps,
            seminorm: hz.seminorm,
            bound: hz.bound,
            picard_iterations: sol.report.iterations,
            max_ratio: sol.report.max_ratio(scale),
            noncontractive: hz.noncontractive,
        });
        done += hz.steps;
    }
    Ok(GlobalSolution { trajectory: traj, schedule: StoppingSchedule { intervals } })
}

fn norm_scale<T: Scalar>(u: &Trajectory<T>) -> T {
    u.sup_norm()
}

/// Discrepancy at `T_1 + h` between the map written from time 0 and the
/// map re-based at the first stopping time `T_1` with `θ_{T_1} ω`, both
/// evaluated on the glued trajectory.
pub fn junction_residual<T: Scalar>(
    solution: &GlobalSolution<T>,
    xi: &Segment<T>,
    omega: &NoisePath<T>,
    coeffs: &CoefficientSet<T>,
    op: &SpectralOperator<T>,
) -> Result<T> {
    let traj = &solution.trajectory;
    let first = solution.schedule.intervals.first().ok_or_else(|| Error::param("schedule", "empty schedule"))?;
    let t1 = first.steps;
    if t1 + 1 > traj.steps() {
        return Err(Error::param("schedule", "need at least one grid step past the first stopping time"));
    }
    let upto = |from: usize, to: usize| -> Trajectory<T> {
        let dim = traj.dim();
        let m = traj.delay_steps();
        let mut sub = Trajectory::from_initial(&traj.segment_at_step(from));
        for j in from + 1..=to {
            sub.push(&traj.raw()[(j + m) * dim..(j + m + 1) * dim]);
        }
        sub
    };
    let direct = apply_operator(xi, &upto(0, t1 + 1), omega, coeffs, op)?;
    let restarted =
        apply_operator(&traj.segment_at_step(t1), &upto(t1, t1 + 1), &omega.shift_steps(t1 as i64)?, coeffs, op)?;
    Ok(dist(direct.state((t1 + 1) as i64), restarted.state(1)))
}

/// Pathwise form of the stochastic convolution from samples of `G(u_r)`
/// and `K(u_r)` at the grid times `0, h, …, t`:
/// `G(u_t)ω(t) + ∫ S(t-r) A G(u_r)ω(r) dr - ∫ S(t-r) K(u_r)ω(r) dr`.
///
/// `K` enters through cell averages of neighbouring samples.
pub fn pathwise_integral<T: Scalar>(
    op: &SpectralOperator<T>,
    g: &[NoiseOperator<T>],
    k: &[NoiseOperator<T>],
    omega: &NoisePath<T>,
    t: T,
) -> Result<HVector<T>> {
    let n = steps_of(t, omega.step())?;
    if g.len() != n + 1 || k.len() != n + 1 {
        return Err(Error::DimensionMismatch { what: "operator samples", expected: n + 1, got: g.len().min(k.len()) });
    }
    check_samples(op, g, omega)?;
    check_samples(op, k, omega)?;
    let w = CellWeights::new(op, omega.step());
    let md = omega.dim();
    let vals = omega.window_values(0, n as i64)?;
    let half = T::lit(0.5);
    let out = (0..op.dim())
        .map(|i| {
            let (lam, e, wl, wr) = (w.lambda[i], w.decay[i], w.left[i], w.right[i]);
            let mut z = T::zero();
            for j in 0..n {
                let c0 = g[j].column_map()[i];
                let c1 = g[j + 1].column_map()[i];
                let (w0, w1) = (vals[j * md + c0], vals[(j + 1) * md + c1]);
                let gw0 = g[j].values()[i] * w0;
                let gw1 = g[j + 1].values()[i] * w1;
                let kb = half * (k[j].values()[i] + k[j + 1].values()[i]);
                let kc = k[j].column_map()[i];
                let (k0, k1) = (vals[j * md + kc], vals[(j + 1) * md + kc]);
                z = e * z - lam * (wl * gw0 + wr * gw1) - kb * (wl * k0 + wr * k1);
            }
            let c = g[n].column_map()[i];
            z + g[n].values()[i] * vals[n * md + c]
        })
        .collect();
    Ok(HVector(out))
}

fn check_samples<T: Scalar>(op: &SpectralOperator<T>, s: &[NoiseOperator<T>], omega: &NoisePath<T>) -> Result<()> {
    for x in s {
        if x.rows() != op.dim() || x.cols() != omega.dim() {
            return Err(Error::DimensionMismatch { what: "operator sample shape", expected: op.dim(), got: x.rows() });
        }
    }
    Ok(())
}

/// Left-point Riemann–Stieltjes sum `Σ S(t - r_i) σ(r_i) (ω(r_{i+1}) - ω(r_i))`.
pub fn ito_oracle<T: Scalar>(
    op: &SpectralOperator<T>,
    sigma: &[NoiseOperator<T>],
    omega: &NoisePath<T>,
    t: T,
) -> Result<HVector<T>> {
    let n = steps_of(t, omega.step())?;
    if sigma.len() < n {
        return Err(Error::DimensionMismatch { what: "sigma samples", expected: n, got: sigma.len() });
    }
    check_samples(op, &sigma[..n], omega)?;
    let h = omega.step();
    let md = omega.dim();
    let vals = omega.window_values(0, n as i64)?;
    let out = op
        .eigenvalues()
        .iter()
        .enumerate()
        .map(|(i, &lam)| {
            let mut acc = T::zero();
            for j in 0..n {
                let c = sigma[j].column_map()[i];
                let dw = vals[(j + 1) * md + c] - vals[j * md + c];
                acc = acc + (-lam * T::from_count(n - j) * h).exp() * sigma[j].values()[i] * dw;
            }
            acc
        })
        .collect();
    Ok(HVector(out))
}

/// Quadrature check of `∫₀ᵀ S(T-r)(K(u_r) - A G(u_r))w dr = G(u_T)w - S(T)G(u_0)w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftCorrection<T> {
    /// With `K` taken as the cell average used by the solver.
    pub cell_average: T,
    /// With `K` sampled at the grid points and interpolated linearly.
    pub pointwise: T,
}

pub fn shift_correction_check<T: Scalar>(
    op: &SpectralOperator<T>,
    coeffs: &CoefficientSet<T>,
    traj: &Trajectory<T>,
    w: &[T],
    t: T,
) -> Result<ShiftCorrection<T>> {
    let n = steps_of(t, coeffs.step())?;
    if n > traj.steps() {
        return Err(Error::param("t", "beyond the trajectory"));
    }
    if w.len() != coeffs.noise_dim() {
        return Err(Error::DimensionMismatch { what: "noise vector", expected: coeffs.noise_dim(), got: w.len() });
    }
    let cw = CellWeights::new(op, coeffs.step());
    let g: Vec<Vec<T>> = (0..=n).map(|j| coeffs.g_values(&traj.view_at(j))).collect();
    let k: Vec<Vec<T>> = (0..=n).map(|j| coeffs.k_values(&traj.view_at(j))).collect();
    let cols = coeffs.diffusion().column_map();
    let half = T::lit(0.5);
    let mut err_cell = vec![T::zero(); op.dim()];
    let mut err_point = vec![T::zero(); op.dim()];
    for i in 0..op.dim() {
        let (lam, e, wl, wr) = (cw.lambda[i], cw.decay[i], cw.left[i], cw.right[i]);
        let wc = w[cols[i]];
        let (mut zc, mut zp) = (T::zero(), T::zero());
        for j in 0..n {
            let a_term = lam * (wl * g[j][i] + wr * g[j + 1][i]);
            let kb_trap = half * (k[j][i] + k[j + 1][i]);
            zc = e * zc + (a_term + kb_trap * (wl + wr)) * wc;
            zp = e * zp + (a_term + wl * k[j][i] + wr * k[j + 1][i]) * wc;
        }
        let exact = (g[n][i] - (-lam * t).exp() * g[0][i]) * wc;
        err_cell[i] = zc - exact;
        err_point[i] = zp - exact;
    }
    Ok(ShiftCorrection { cell_average: norm(&err_cell), pointwise: norm(&err_point) })
}
