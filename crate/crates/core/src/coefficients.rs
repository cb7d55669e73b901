//! Drift `F`, smoothing diffusion `G` and its time derivative `K`.
//!
//! `G(x) = (1/μ) ∫_{-μ}^0 g(x(q)) dq` with `g` acting row-wise: every row
//! `k` of the `N×M` matrix has a single nonzero entry `σ_k φ(x_k)` in
//! column `j(k)`. Along a trajectory `d/dt G(u_t) = K(u_t)` with
//! `K(x) = (1/μ)(g(x(0)) - g(x(-μ)))`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::hilbert::norm;
use crate::segments::{Segment, SegmentView, Trajectory};
use crate::{Error, HVector, Result, Scalar, SpectralOperator};

/// Scalar nonlinearity applied component-wise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pointwise {
    Tanh,
    Linear,
    /// `φ ≡ 1`; makes the map state independent.
    Unit,
}

impl Pointwise {
    #[inline]
    pub fn eval<T: Scalar>(self, x: T) -> T {
        match self {
            Pointwise::Tanh => x.tanh(),
            Pointwise::Linear => x,
            Pointwise::Unit => T::one(),
        }
    }

    pub fn lipschitz<T: Scalar>(self) -> T {
        match self {
            Pointwise::Tanh | Pointwise::Linear => T::one(),
            Pointwise::Unit => T::zero(),
        }
    }

    /// `sup |φ|`.
    pub fn bound<T: Scalar>(self) -> T {
        match self {
            Pointwise::Tanh | Pointwise::Unit => T::one(),
            Pointwise::Linear => T::infinity(),
        }
    }

    /// `sup |φ(a) - φ(b)|`.
    pub fn oscillation<T: Scalar>(self) -> T {
        match self {
            Pointwise::Tanh => T::lit(2.0),
            Pointwise::Linear => T::infinity(),
            Pointwise::Unit => T::zero(),
        }
    }
}

/// Which point of the segment the drift reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftArgument {
    /// `x(0)`
    Current,
    /// `x(-μ)`
    Delayed,
}

/// `F(x)_k = a_k φ(x(s*)_k)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Drift<T> {
    gains: Vec<T>,
    map: Pointwise,
    argument: DriftArgument,
}

impl<T: Scalar> Drift<T> {
    pub fn new(gains: Vec<T>, map: Pointwise, argument: DriftArgument) -> Result<Self> {
        if gains.iter().any(|a| !a.is_finite()) {
            return Err(Error::param("gains", "must be finite"));
        }
        Ok(Drift { gains, map, argument })
    }

    pub fn zero(n: usize) -> Self {
        Drift { gains: vec![T::zero(); n], map: Pointwise::Linear, argument: DriftArgument::Current }
    }

    pub fn gains(&self) -> &[T] {
        &self.gains
    }

    pub fn map(&self) -> Pointwise {
        self.map
    }

    pub fn argument(&self) -> DriftArgument {
        self.argument
    }

    #[inline]
    pub(crate) fn eval_into(&self, x: &[T], out: &mut [T]) {
        for ((o, &a), &v) in out.iter_mut().zip(&self.gains).zip(x) {
            *o = a * self.map.eval(v);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.gains.iter().all(|a| a.is_zero())
    }

    fn lipschitz(&self) -> T {
        if self.is_zero() {
            return T::zero();
        }
        self.gains.iter().fold(T::zero(), |m, a| m.max(a.abs())) * self.map.lipschitz()
    }

    /// `|F(0)|`.
    fn at_zero(&self) -> T {
        let v: Vec<T> = self.gains.iter().map(|&a| a * self.map.eval(T::zero())).collect();
        norm(&v)
    }
}

/// An `N×M` matrix with one nonzero entry per row: row `k` holds
/// `values[k]` in column `cols[k]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseOperator<T> {
    values: Vec<T>,
    cols: Vec<usize>,
    m: usize,
}

impl<T: Scalar> NoiseOperator<T> {
    pub fn new(values: Vec<T>, cols: Vec<usize>, m: usize) -> Result<Self> {
        if values.len() != cols.len() {
            return Err(Error::DimensionMismatch { what: "column map", expected: values.len(), got: cols.len() });
        }
        if cols.iter().any(|&c| c >= m) {
            return Err(Error::param("cols", "column index out of range"));
        }
        Ok(NoiseOperator { values, cols, m })
    }

    pub fn rows(&self) -> usize {
        self.values.len()
    }

    pub fn cols(&self) -> usize {
        self.m
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn column_map(&self) -> &[usize] {
        &self.cols
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        self.values
            .iter()
            .zip(&self.cols)
            .map(|(&v, &c)| {
                let mut row = vec![T::zero(); self.m];
                row[c] = v;
                row
            })
            .collect()
    }

    pub fn apply(&self, w: &[T]) -> Result<HVector<T>> {
        if w.len() != self.m {
            return Err(Error::DimensionMismatch { what: "noise vector", expected: self.m, got: w.len() });
        }
        Ok(HVector(self.values.iter().zip(&self.cols).map(|(&v, &c)| v * w[c]).collect()))
    }

    /// Operator norm `U → H`: the largest column norm, since columns
    /// have disjoint supports.
    pub fn opnorm(&self) -> T {
        column_opnorm(&self.values, &self.cols, self.m)
    }

    pub fn frobenius(&self) -> T {
        norm(&self.values)
    }

    pub fn sub(&self, other: &Self) -> Self {
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| a - b).collect();
        NoiseOperator { values, cols: self.cols.clone(), m: self.m }
    }

    /// `(-A)^γ` applied on the left.
    pub fn fractional(&self, op: &SpectralOperator<T>, gamma: T) -> Self {
        let values = self.values.iter().zip(op.eigenvalues()).map(|(&v, &l)| v * l.powf(gamma)).collect();
        NoiseOperator { values, cols: self.cols.clone(), m: self.m }
    }
}

pub(crate) fn column_opnorm<T: Scalar>(values: &[T], cols: &[usize], m: usize) -> T {
    let mut acc = vec![T::zero(); m];
    for (&v, &c) in values.iter().zip(cols) {
        acc[c] = acc[c] + v * v;
    }
    acc.into_iter().fold(T::zero(), T::max).sqrt()
}

/// `(g(x)w)_k = σ_k φ(x_k) w_{j(k)}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diffusion<T> {
    sigma: Vec<T>,
    cols: Vec<usize>,
    m: usize,
    map: Pointwise,
    nu: T,
    /// `λ_k^ν`
    lambda_nu: Vec<T>,
}

impl<T: Scalar> Diffusion<T> {
    pub fn new(
        sigma: Vec<T>,
        cols: Vec<usize>,
        m: usize,
        map: Pointwise,
        nu: T,
        op: &SpectralOperator<T>,
    ) -> Result<Self> {
        if !(nu > T::zero() && nu < T::one()) {
            return Err(Error::param("nu", "must lie in (0, 1)"));
        }
        if sigma.len() != op.dim() {
            return Err(Error::DimensionMismatch { what: "sigma", expected: op.dim(), got: sigma.len() });
        }
        if sigma.iter().any(|s| !s.is_finite()) {
            return Err(Error::param("sigma", "must be finite"));
        }
        NoiseOperator::new(sigma.clone(), cols.clone(), m)?;
        let lambda_nu: Vec<T> = op.eigenvalues().iter().map(|&l| l.powf(nu)).collect();
        if sigma.iter().zip(&lambda_nu).any(|(&s, &l)| !(s * l).is_finite()) {
            return Err(Error::param("sigma", "(-A)^nu G would be unbounded"));
        }
        Ok(Diffusion { sigma, cols, m, map, nu, lambda_nu })
    }

    /// `σ_k = c_g λ_k^{-ν} / k`, columns cycling through `1..=M`.
    pub fn smoothing_example(op: &SpectralOperator<T>, m: usize, c_g: T, nu: T, map: Pointwise) -> Result<Self> {
        if m == 0 {
            return Err(Error::param("M", "noise dimension must be >= 1"));
        }
        if !(nu > T::zero() && nu < T::one()) {
            return Err(Error::param("nu", "must lie in (0, 1)"));
        }
        let sigma =
            op.eigenvalues().iter().enumerate().map(|(k, &l)| c_g * l.powf(-nu) / T::from_count(k + 1)).collect();
        let cols = (0..op.dim()).map(|k| k % m).collect();
        Self::new(sigma, cols, m, map, nu, op)
    }

    pub fn zero(op: &SpectralOperator<T>, m: usize, nu: T) -> Result<Self> {
        Self::new(
            vec![T::zero(); op.dim()],
            (0..op.dim()).map(|k| k % m.max(1)).collect(),
            m.max(1),
            Pointwise::Unit,
            nu,
            op,
        )
    }

    pub fn sigma(&self) -> &[T] {
        &self.sigma
    }

    pub fn column_map(&self) -> &[usize] {
        &self.cols
    }

    pub fn noise_dim(&self) -> usize {
        self.m
    }

    pub fn map(&self) -> Pointwise {
        self.map
    }

    pub fn nu(&self) -> T {
        self.nu
    }

    pub fn is_zero(&self) -> bool {
        self.sigma.iter().all(|s| s.is_zero())
    }

    /// Row values of `g(x)`.
    #[inline]
    pub(crate) fn g_into(&self, x: &[T], out: &mut [T]) {
        for ((o, &s), &v) in out.iter_mut().zip(&self.sigma).zip(x) {
            *o = s * self.map.eval(v);
        }
    }

    pub(crate) fn operator(&self, values: Vec<T>) -> NoiseOperator<T> {
        NoiseOperator { values, cols: self.cols.clone(), m: self.m }
    }

    fn max_sigma(&self, weights: Option<&[T]>) -> T {
        self.sigma
            .iter()
            .enumerate()
            .map(|(k, &s)| s.abs() * weights.map_or(T::one(), |w| w[k]))
            .fold(T::zero(), T::max)
    }

    fn column_norm(&self, weights: Option<&[T]>) -> T {
        let v: Vec<T> = self.sigma.iter().enumerate().map(|(k, &s)| s * weights.map_or(T::one(), |w| w[k])).collect();
        column_opnorm(&v, &self.cols, self.m)
    }

    /// `sup_x` of `φ`-scaled column norm, with `0·∞ = 0`.
    fn scaled(&self, factor: T, base: T) -> T {
        if base.is_zero() || factor.is_zero() {
            T::zero()
        } else {
            factor * base
        }
    }
}

/// Declared constants. Lipschitz constants are with respect to `‖·‖_μ`;
/// operator norms are `U → H` (and `U → D((-A)^ν)` for the `ν` ones).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientConstants<T> {
    pub l_f: T,
    pub c_f: T,
    pub c_f_bar: T,
    pub l_g: T,
    pub l_g_nu: T,
    pub nu: T,
    pub c_g: T,
    pub c_g_nu: T,
    pub l_k: T,
    pub c_k: T,
}

impl<T: Scalar> CoefficientConstants<T> {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("L_F", self.l_f),
            ("C_F", self.c_f),
            ("C_F_bar", self.c_f_bar),
            ("L_G", self.l_g),
            ("L_G_nu", self.l_g_nu),
            ("C_G", self.c_g),
            ("C_G_nu", self.c_g_nu),
            ("L_K", self.l_k),
            ("C_K", self.c_k),
        ];
        for (name, v) in all {
            if v.is_nan() || v < T::zero() {
                return Err(Error::param(name, "constants must be nonnegative"));
            }
        }
        if !(self.nu > T::zero() && self.nu < T::one()) {
            return Err(Error::param("nu", "must lie in (0, 1)"));
        }
        Ok(())
    }

    /// True when all bounds used by the absorption estimates are finite.
    pub fn bounds_finite(&self) -> bool {
        [self.c_f, self.c_f_bar, self.c_g, self.c_g_nu, self.c_k].iter().all(|v| v.is_finite())
    }
}

/// Config-level description of the example coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleSpec<T> {
    /// `a_k`; a single value is broadcast to every mode.
    pub gains: Vec<T>,
    pub c_g: T,
    pub nu: T,
    pub mode: NoiseMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    StateDependent,
    Additive,
}

/// `F`, `G`, `K` over a fixed delay grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientSet<T> {
    drift: Drift<T>,
    diffusion: Diffusion<T>,
    delay_steps: usize,
    step: T,
    constants: CoefficientConstants<T>,
}

impl<T: Scalar> CoefficientSet<T> {
    /// Derives the declared constants in closed form.
    pub fn new(drift: Drift<T>, diffusion: Diffusion<T>, delay_steps: usize, step: T) -> Result<Self> {
        if delay_steps == 0 {
            return Err(Error::param("mu", "delay must span at least one grid step"));
        }
        if !(step > T::zero()) {
            return Err(Error::param("h", "grid step must be > 0"));
        }
        if drift.gains.len() != diffusion.sigma.len() {
            return Err(Error::DimensionMismatch {
                what: "drift gains",
                expected: diffusion.sigma.len(),
                got: drift.gains.len(),
            });
        }
        let mu = T::from_count(delay_steps) * step;
        let l_f = drift.lipschitz();
        let d = &diffusion;
        let lip = d.map.lipschitz::<T>();
        let l_g = d.scaled(lip, d.max_sigma(None));
        let l_g_nu = d.scaled(lip, d.max_sigma(Some(&d.lambda_nu)));
        let c_g = d.scaled(d.map.bound(), d.column_norm(None));
        let c_g_nu = d.scaled(d.map.bound(), d.column_norm(Some(&d.lambda_nu)));
        let c_k = d.scaled(d.map.oscillation(), d.column_norm(None)) / mu;
        let l_k = T::lit(2.0) * l_g / mu;
        let constants = CoefficientConstants {
            l_f,
            c_f: l_f,
            c_f_bar: drift.at_zero(),
            l_g,
            l_g_nu,
            nu: d.nu,
            c_g,
            c_g_nu,
            l_k,
            c_k,
        };
        Ok(CoefficientSet { drift, diffusion, delay_steps, step, constants })
    }

    /// Tanh drift on `x(0)` with the smoothing diffusion
    /// `σ_k = c_g λ_k^{-ν}/k`; `Additive` swaps `tanh` for `1` in `g`.
    pub fn make_example(
        op: &SpectralOperator<T>,
        noise_dim: usize,
        delay_steps: usize,
        step: T,
        spec: &ExampleSpec<T>,
    ) -> Result<Self> {
        let n = op.dim();
        let gains = match spec.gains.len() {
            1 => vec![spec.gains[0]; n],
            l if l == n => spec.gains.clone(),
            l => return Err(Error::DimensionMismatch { what: "f.gains", expected: n, got: l }),
        };
        let map = match spec.mode {
            NoiseMode::StateDependent => Pointwise::Tanh,
            NoiseMode::Additive => Pointwise::Unit,
        };
        let drift = Drift::new(gains, Pointwise::Tanh, DriftArgument::Current)?;
        let diffusion = Diffusion::smoothing_example(op, noise_dim, spec.c_g, spec.nu, map)?;
        Self::new(drift, diffusion, delay_steps, step)
    }

    /// Replaces the derived constants, e.g. by sharper hand-proved ones.
    pub fn with_constants(mut self, constants: CoefficientConstants<T>) -> Result<Self> {
        constants.validate()?;
        self.constants = constants;
        Ok(self)
    }

    pub fn drift(&self) -> &Drift<T> {
        &self.drift
    }

    pub fn diffusion(&self) -> &Diffusion<T> {
        &self.diffusion
    }

    pub fn constants(&self) -> &CoefficientConstants<T> {
        &self.constants
    }

    pub fn dim(&self) -> usize {
        self.diffusion.sigma.len()
    }

    pub fn noise_dim(&self) -> usize {
        self.diffusion.m
    }

    pub fn delay_steps(&self) -> usize {
        self.delay_steps
    }

    pub fn step(&self) -> T {
        self.step
    }

    pub fn delay(&self) -> T {
        T::from_count(self.delay_steps) * self.step
    }

    fn check_segment(&self, x: &SegmentView<'_, T>) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch { what: "segment", expected: self.dim(), got: x.dim() });
        }
        if x.delay_steps() != self.delay_steps {
            return Err(Error::DimensionMismatch {
                what: "segment delay steps",
                expected: self.delay_steps,
                got: x.delay_steps(),
            });
        }
        Ok(())
    }

    /// Row of the segment the drift reads.
    #[inline]
    pub(crate) fn drift_offset(&self) -> usize {
        match self.drift.argument {
            DriftArgument::Current => 0,
            DriftArgument::Delayed => self.delay_steps,
        }
    }

    pub fn f(&self, x: &Segment<T>) -> Result<HVector<T>> {
        let v = x.view();
        self.check_segment(&v)?;
        let mut out = vec![T::zero(); self.dim()];
        self.drift.eval_into(v.at(self.delay_steps - self.drift_offset()), &mut out);
        Ok(HVector(out))
    }

    /// Trapezoid average of `g` over the segment samples.
    pub(crate) fn g_values(&self, x: &SegmentView<'_, T>) -> Vec<T> {
        let n = self.dim();
        let m = self.delay_steps;
        let mut acc = vec![T::zero(); n];
        let mut buf = vec![T::zero(); n];
        let half = T::lit(0.5);
        for i in 0..=m {
            self.diffusion.g_into(x.at(i), &mut buf);
            let w = if i == 0 || i == m { half } else { T::one() };
            for (a, &b) in acc.iter_mut().zip(&buf) {
                *a = *a + w * b;
            }
        }
        let scale = T::one() / T::from_count(m);
        acc.iter_mut().for_each(|a| *a = *a * scale);
        acc
    }

    pub(crate) fn k_values(&self, x: &SegmentView<'_, T>) -> Vec<T> {
        let n = self.dim();
        let mut head = vec![T::zero(); n];
        let mut tail = vec![T::zero(); n];
        self.diffusion.g_into(x.head(), &mut head);
        self.diffusion.g_into(x.tail(), &mut tail);
        let inv_mu = T::one() / self.delay();
        head.iter().zip(&tail).map(|(&a, &b)| (a - b) * inv_mu).collect()
    }

    pub fn g(&self, x: &Segment<T>) -> Result<NoiseOperator<T>> {
        let v = x.view();
        self.check_segment(&v)?;
        Ok(self.diffusion.operator(self.g_values(&v)))
    }

    pub fn k(&self, x: &Segment<T>) -> Result<NoiseOperator<T>> {
        let v = x.view();
        self.check_segment(&v)?;
        Ok(self.diffusion.operator(self.k_values(&v)))
    }

    /// Empirical Lipschitz and bound constants from random segment pairs.
    pub fn lipschitz_probe(
        &self,
        op: &SpectralOperator<T>,
        which: ProbeTarget,
        trials: usize,
        seed: u64,
    ) -> Result<LipschitzProbe<T>> {
        let n = self.dim();
        let m = self.delay_steps;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nu = self.diffusion.nu;
        let c = &self.constants;
        let (declared, declared_bound) = match which {
            ProbeTarget::F => (c.l_f, c.c_f_bar),
            ProbeTarget::G => (c.l_g, c.c_g),
            ProbeTarget::K => (c.l_k, c.c_k),
            ProbeTarget::GNu => (c.l_g_nu, c.c_g_nu),
        };
        let mut empirical = T::zero();
        let mut max_bound = T::zero();
        let mut max_frobenius = T::zero();
        for _ in 0..trials {
            let amp: f64 = 10f64.powf(rng.random_range(-1.0..1.0));
            let x = random_segment(&mut rng, n, m, self.step, amp);
            let eps: f64 = 10f64.powf(rng.random_range(-6.0..0.0)) * amp;
            let dx = random_segment(&mut rng, n, m, self.step, eps);
            let y = x.add(&dx);
            let d = x.sup_dist(&y);
            if d.is_zero() {
                continue;
            }
            let (diff, size, frob) = match which {
                ProbeTarget::F => {
                    let (fx, fy) = (self.f(&x)?, self.f(&y)?);
                    // linear-bound check: |F(x)| - C_F ‖x‖_μ ≤ C̄_F
                    (fx.dist(&fy), fx.norm() - c.c_f * x.sup_norm(), T::zero())
                }
                ProbeTarget::G | ProbeTarget::K | ProbeTarget::GNu => {
                    let (mx, my) = match which {
                        ProbeTarget::K => (self.k(&x)?, self.k(&y)?),
                        _ => (self.g(&x)?, self.g(&y)?),
                    };
                    let (mx, my) = if which == ProbeTarget::GNu {
                        (mx.fractional(op, nu), my.fractional(op, nu))
                    } else {
                        (mx, my)
                    };
                    let delta = mx.sub(&my);
                    (delta.opnorm(), mx.opnorm(), delta.frobenius() / d)
                }
            };
            empirical = empirical.max(diff / d);
            max_bound = max_bound.max(size);
            max_frobenius = max_frobenius.max(frob);
        }
        let slack = T::one() + T::lit(1e-9);
        let pass = empirical <= declared * slack + T::lit(1e-14) && max_bound <= declared_bound * slack + T::lit(1e-14);
        Ok(LipschitzProbe { which, trials, empirical, declared, max_bound, declared_bound, max_frobenius, pass })
    }

    /// Compares the grid derivative of `t ↦ G(u_t)` with `K` at grid time `t`.
    pub fn derivative_identity_check(&self, traj: &Trajectory<T>, t: T) -> Result<DerivativeDefect<T>> {
        if traj.delay_steps() != self.delay_steps || traj.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "trajectory delay steps",
                expected: self.delay_steps,
                got: traj.delay_steps(),
            });
        }
        let k = crate::noise::grid_index(t, self.step)?;
        if k < 0 || k as usize + 1 > traj.steps() {
            return Err(Error::param("t", "need t >= 0 and t + h inside the trajectory"));
        }
        let k = k as usize;
        let h = self.step;
        let g0 = self.g_values(&traj.view_at(k));
        let g1 = self.g_values(&traj.view_at(k + 1));
        let k0 = self.k_values(&traj.view_at(k));
        let k1 = self.k_values(&traj.view_at(k + 1));
        let half = T::lit(0.5);
        let forward: Vec<T> = (0..self.dim()).map(|i| (g1[i] - g0[i]) / h - half * (k0[i] + k1[i])).collect();
        let forward = column_opnorm(&forward, &self.diffusion.cols, self.diffusion.m);
        let central = if k >= 1 {
            let gm = self.g_values(&traj.view_at(k - 1));
            let v: Vec<T> = (0..self.dim()).map(|i| (g1[i] - gm[i]) / (h + h) - k0[i]).collect();
            Some(column_opnorm(&v, &self.diffusion.cols, self.diffusion.m))
        } else {
            None
        };
        Ok(DerivativeDefect { t, trapezoid: forward, central })
    }
}

fn random_segment<T: Scalar>(rng: &mut ChaCha8Rng, n: usize, m: usize, step: T, amp: f64) -> Segment<T> {
    // smooth-ish: random start plus a bounded random walk
    let mut data = Vec::with_capacity((m + 1) * n);
    let mut cur: Vec<f64> = (0..n).map(|_| rng.random_range(-amp..amp)).collect();
    let jump = amp / (m as f64).sqrt();
    for _ in 0..=m {
        data.extend(cur.iter().map(|&v| T::lit(v)));
        for v in cur.iter_mut() {
            *v += rng.random_range(-jump..jump);
        }
    }
    Segment::from_raw(n, step, data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProbeTarget {
    F,
    G,
    K,
    GNu,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipschitzProbe<T> {
    pub which: ProbeTarget,
    pub trials: usize,
    pub empirical: T,
    pub declared: T,
    /// Largest `‖G‖`, `‖K‖`, `‖(-A)^ν G‖` seen, or for `F` the largest
    /// `|F(x)| - C_F ‖x‖_μ`.
    pub max_bound: T,
    pub declared_bound: T,
    /// Largest Frobenius-norm difference quotient (zero for `F`).
    pub max_frobenius: T,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivativeDefect<T> {
    pub t: T,
    /// `‖(G(u_{t+h}) - G(u_t))/h - (K(u_t) + K(u_{t+h}))/2‖`
    pub trapezoid: T,
    /// `‖(G(u_{t+h}) - G(u_{t-h}))/(2h) - K(u_t)‖`, when `t ≥ h`
    pub central: Option<T>,
}

#[cfg(test)]
mod tests {
    use super::*;

    const H: f64 = 1.0 / 64.0;

    fn scalar_linear(m: usize) -> (SpectralOperator<f64>, CoefficientSet<f64>) {
        let op = SpectralOperator::new(vec![1.0]).unwrap();
        let diff = Diffusion::new(vec![1.0], vec![0], 1, Pointwise::Linear, 0.5, &op).unwrap();
        let set = CoefficientSet::new(Drift::zero(1), diff, m, H).unwrap();
        (op, set)
    }

    #[test]
    fn constant_segment_gives_pointwise_g_and_zero_k() {
        let op = SpectralOperator::laplacian_like(3).unwrap();
        let spec = ExampleSpec { gains: vec![0.5], c_g: 0.3, nu: 0.5, mode: NoiseMode::StateDependent };
        let set = CoefficientSet::make_example(&op, 2, 8, H, &spec).unwrap();
        let v = HVector(vec![0.2, -1.0, 3.0]);
        let seg = Segment::constant(&v, 8, H).unwrap();
        let g = set.g(&seg).unwrap();
        for k in 0..3 {
            let expect = set.diffusion().sigma()[k] * v.0[k].tanh();
            assert!((g.values()[k] - expect).abs() < 1e-15);
        }
        assert!(set.k(&seg).unwrap().values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn additive_mode_has_no_k() {
        let op = SpectralOperator::laplacian_like(4).unwrap();
        let spec = ExampleSpec { gains: vec![0.5], c_g: 0.3, nu: 0.5, mode: NoiseMode::Additive };
        let set = CoefficientSet::make_example(&op, 2, 8, H, &spec).unwrap();
        let seg = Segment::from_fn(4, 8, H, |s| vec![s, 2.0 * s, -s, 1.0]).unwrap();
        assert!(set.k(&seg).unwrap().values().iter().all(|&x| x == 0.0));
        assert_eq!(set.g(&seg).unwrap().values(), set.diffusion().sigma());
        assert_eq!(set.constants().l_k, 0.0);
        assert_eq!(set.constants().c_k, 0.0);
    }

    #[test]
    fn scalar_linear_trapezoid_is_exact() {
        // μ = 1: segment x(q) = q gives G = ∫_{-1}^0 q dq = -1/2
        let (_, set) = scalar_linear(64);
        let seg = Segment::from_fn(1, 64, H, |s| vec![s]).unwrap();
        let g = set.g(&seg).unwrap();
        assert!((g.values()[0] + 0.5).abs() < 1e-15);
        assert_eq!(g.apply(&[2.0]).unwrap().0, vec![-1.0]);
    }

    #[test]
    fn noise_operator_norms() {
        let a = NoiseOperator::new(vec![3.0, 4.0, 1.0], vec![0, 0, 1], 2).unwrap();
        assert_eq!(a.opnorm(), 5.0);
        assert!((a.frobenius() - 26f64.sqrt()).abs() < 1e-15);
        assert_eq!(a.to_dense(), vec![vec![3.0, 0.0], vec![4.0, 0.0], vec![0.0, 1.0]]);
        assert!(NoiseOperator::new(vec![1.0], vec![2], 2).is_err());
    }

    #[test]
    fn nu_is_validated() {
        let op = SpectralOperator::laplacian_like(2).unwrap();
        assert!(Diffusion::smoothing_example(&op, 1, 1.0, 1.0, Pointwise::Tanh).is_err());
        assert!(Diffusion::smoothing_example(&op, 1, 1.0, 0.0, Pointwise::Tanh).is_err());
    }

    #[test]
    fn linear_drift_probe_hits_gain() {
        let op = SpectralOperator::new(vec![1.0]).unwrap();
        let drift = Drift::new(vec![-0.7], Pointwise::Linear, DriftArgument::Current).unwrap();
        let set = CoefficientSet::new(drift, Diffusion::zero(&op, 1, 0.5).unwrap(), 4, H).unwrap();
        let p = set.lipschitz_probe(&op, ProbeTarget::F, 500, 1).unwrap();
        assert!(p.pass);
        assert!(p.empirical <= 0.7 * (1.0 + 1e-9) && p.empirical > 0.0);
        let z = set.lipschitz_probe(&op, ProbeTarget::G, 100, 1).unwrap();
        assert_eq!(z.empirical, 0.0);
    }

    #[test]
    fn derivative_identity_linear_data() {
        let (_, set) = scalar_linear(16);
        let tr = Trajectory::from_fn(1, 16, 64, H, |t| vec![t]).unwrap();
        let d = set.derivative_identity_check(&tr, 0.5).unwrap();
        assert!(d.trapezoid < 1e-12);
        assert!(d.central.unwrap() < 1e-12);
    }
}
