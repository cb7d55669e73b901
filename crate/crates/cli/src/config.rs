//! TOML experiment configuration.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use rspde_core::coefficients::{ExampleSpec, NoiseMode};
use rspde_core::{CoefficientSet, NoiseModel, Segment, SolverConfig, SpectralOperator};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralBlock {
    pub modes: usize,
    /// `λ_k = lambda1 · k^exponent`
    pub lambda1: f64,
    pub exponent: f64,
}

impl Default for SpectralBlock {
    fn default() -> Self {
        SpectralBlock { modes: 16, lambda1: 1.0, exponent: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseBlock {
    pub dim: usize,
    /// `q_j = q_ratio^j`
    pub q_ratio: f64,
    pub step: f64,
    pub seed: u64,
    /// Multi-seed commands use `seed, seed+1, …, seed+seeds-1`.
    pub seeds: usize,
}

impl Default for NoiseBlock {
    fn default() -> Self {
        NoiseBlock { dim: 4, q_ratio: 0.5, step: 1.0 / 1024.0, seed: 0, seeds: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DelayBlock {
    pub mu: f64,
}

impl Default for DelayBlock {
    fn default() -> Self {
        DelayBlock { mu: 0.125 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoefficientsBlock {
    pub mode: NoiseMode,
    /// One value is broadcast to every mode.
    pub drift_gains: Vec<f64>,
    pub c_g: f64,
    pub nu: f64,
}

impl Default for CoefficientsBlock {
    fn default() -> Self {
        CoefficientsBlock { mode: NoiseMode::StateDependent, drift_gains: vec![0.5], c_g: 0.5, nu: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialShape {
    /// `x_k(s) = amplitude · cos(1 + s) / k`
    Cosine,
    /// `x_k(s) = amplitude / k`
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialBlock {
    pub shape: InitialShape,
    pub amplitude: f64,
}

impl Default for InitialBlock {
    fn default() -> Self {
        InitialBlock { shape: InitialShape::Cosine, amplitude: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateBlock {
    pub t: f64,
}

impl Default for SimulateBlock {
    fn default() -> Self {
        SimulateBlock { t: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CocycleBlock {
    pub t: Vec<f64>,
    pub tau: Vec<f64>,
    /// Perturbation pairs per seed for the continuity check.
    pub continuity_pairs: usize,
    pub perturbation: f64,
}

/// `k/5` rounded down to the default grid `2^-10`.
const FIFTHS: [f64; 5] = [0.19921875, 0.3994140625, 0.599609375, 0.7998046875, 1.0];

impl Default for CocycleBlock {
    fn default() -> Self {
        CocycleBlock { t: FIFTHS.to_vec(), tau: FIFTHS.to_vec(), continuity_pairs: 5, perturbation: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleBlock {
    pub t: f64,
    /// Grid levels; the finest is `noise.step`, each coarser one doubles it.
    pub levels: usize,
    /// Errors are root-mean-square over this many seeds.
    pub seeds: usize,
}

impl Default for OracleBlock {
    fn default() -> Self {
        OracleBlock { t: 1.0, levels: 3, seeds: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PullbackBlock {
    pub times: Vec<f64>,
    pub bundle_size: usize,
    /// Bundle members have `‖ξ‖_μ` spread evenly up to `bundle_scale · ρ`.
    pub bundle_scale: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub kappa: f64,
    pub t_trunc: f64,
    pub temper_horizon: f64,
    /// Absorbing margin; `R/10` when absent.
    pub delta: Option<f64>,
    /// Fraction of seeds the statistical checks must reach.
    pub pass_fraction: f64,
}

impl Default for PullbackBlock {
    fn default() -> Self {
        PullbackBlock {
            times: vec![0.5, 1.0, 2.0, 4.0, 8.0, 12.0],
            bundle_size: 8,
            bundle_scale: 2.0,
            epsilon: 0.25,
            alpha: 0.25,
            kappa: 0.05,
            t_trunc: 40.0,
            temper_horizon: 20.0,
            delta: None,
            pass_fraction: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: String,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock { dir: "out".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub spectral: SpectralBlock,
    pub noise: NoiseBlock,
    pub delay: DelayBlock,
    pub coefficients: CoefficientsBlock,
    pub solver: SolverConfig<f64>,
    pub initial: InitialBlock,
    pub simulate: SimulateBlock,
    pub cocycle: CocycleBlock,
    pub oracle: OracleBlock,
    pub pullback: PullbackBlock,
    pub output: OutputBlock,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn steps(name: &str, t: f64, h: f64) -> Result<usize, CliError> {
    let x = t / h;
    let k = x.round();
    if !(t >= 0.0) || (x - k).abs() > 1e-9 * x.abs().max(1.0) {
        return Err(bad(format!("{name} = {t} is not a nonnegative multiple of the step {h}")));
    }
    Ok(k as usize)
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization; the output location is
    /// not part of the experiment and is left out.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputBlock::default();
        hex::encode(Sha256::digest(c.to_toml().as_bytes()))
    }

    pub fn step(&self) -> f64 {
        self.noise.step
    }

    pub fn delay_steps(&self) -> usize {
        steps("delay.mu", self.delay.mu, self.noise.step).expect("validated")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let s = &self.spectral;
        if s.modes == 0 || !(s.lambda1 > 0.0) || !(s.exponent >= 0.0) {
            return Err(bad("spectral: need modes >= 1, lambda1 > 0, exponent >= 0"));
        }
        let n = &self.noise;
        if n.dim == 0 || !(n.q_ratio > 0.0 && n.q_ratio <= 1.0) || !(n.step > 0.0) || n.seeds == 0 {
            return Err(bad("noise: need dim >= 1, q_ratio in (0, 1], step > 0, seeds >= 1"));
        }
        let h = n.step;
        if steps("delay.mu", self.delay.mu, h)? == 0 {
            return Err(bad("delay.mu must be at least one grid step"));
        }
        let c = &self.coefficients;
        if !(c.nu > 0.0 && c.nu < 1.0) {
            return Err(bad("coefficients.nu must lie in (0, 1)"));
        }
        if !(c.drift_gains.len() == 1 || c.drift_gains.len() == s.modes) {
            return Err(bad("coefficients.drift_gains needs 1 or spectral.modes entries"));
        }
        if c.drift_gains.iter().chain([&c.c_g]).any(|v| !v.is_finite()) {
            return Err(bad("coefficients must be finite"));
        }
        self.solver.validate().map_err(|e| bad(e.to_string()))?;
        if !self.initial.amplitude.is_finite() {
            return Err(bad("initial.amplitude must be finite"));
        }
        steps("simulate.t", self.simulate.t, h)?;
        let cy = &self.cocycle;
        if cy.t.is_empty() || cy.tau.is_empty() {
            return Err(bad("cocycle: t and tau need at least one value"));
        }
        for &v in cy.t.iter().chain(&cy.tau) {
            steps("cocycle time", v, h)?;
        }
        if !(cy.perturbation > 0.0) {
            return Err(bad("cocycle.perturbation must be > 0"));
        }
        let o = &self.oracle;
        if o.levels < 3 || o.seeds == 0 {
            return Err(bad("oracle: need levels >= 3 and seeds >= 1"));
        }
        let coarse = h * (1u64 << (o.levels - 1)) as f64;
        steps("oracle.t", o.t, coarse)?;
        if steps("delay.mu on the coarsest oracle grid", self.delay.mu, coarse)? == 0 {
            return Err(bad("delay.mu must span a step of the coarsest oracle grid"));
        }
        let p = &self.pullback;
        if p.times.is_empty() || p.times.windows(2).any(|w| w[1] <= w[0]) || p.times[0] <= 0.0 {
            return Err(bad("pullback.times must be positive and increasing"));
        }
        for &t in &p.times {
            steps("pullback time", t, h)?;
        }
        if p.bundle_size == 0 || !(p.bundle_scale > 0.0) {
            return Err(bad("pullback: need bundle_size >= 1 and bundle_scale > 0"));
        }
        if !(p.epsilon > 0.0 && p.epsilon < c.nu) {
            return Err(bad("pullback.epsilon must lie in (0, nu)"));
        }
        if !(p.alpha > 0.0 && p.alpha <= self.solver.beta && p.alpha < c.nu) {
            return Err(bad("pullback.alpha must lie in (0, min(nu, beta)]"));
        }
        if !(p.kappa > 0.0) || !(p.pass_fraction > 0.0 && p.pass_fraction <= 1.0) {
            return Err(bad("pullback: need kappa > 0 and pass_fraction in (0, 1]"));
        }
        steps("pullback.t_trunc", p.t_trunc, h)?;
        steps("pullback.temper_horizon", p.temper_horizon, h)?;
        if p.delta.is_some_and(|d| !(d >= 0.0)) {
            return Err(bad("pullback.delta must be >= 0"));
        }
        Ok(())
    }

    pub fn operator(&self) -> Result<SpectralOperator<f64>, CliError> {
        Ok(SpectralOperator::power_law(self.spectral.modes, self.spectral.lambda1, self.spectral.exponent)?)
    }

    pub fn noise_model(&self) -> Result<NoiseModel<f64>, CliError> {
        Ok(NoiseModel::geometric(self.noise.dim, self.noise.q_ratio, self.noise.step)?)
    }

    /// Example coefficients at the configured grid, or at `step` with the
    /// delay kept fixed in time units.
    pub fn coefficients_at(
        &self,
        op: &SpectralOperator<f64>,
        step: f64,
        mode: NoiseMode,
    ) -> Result<CoefficientSet<f64>, CliError> {
        let m = steps("delay.mu", self.delay.mu, step)?;
        let c = &self.coefficients;
        let spec = ExampleSpec { gains: c.drift_gains.clone(), c_g: c.c_g, nu: c.nu, mode };
        Ok(CoefficientSet::make_example(op, self.noise.dim, m, step, &spec)?)
    }

    pub fn coefficients(&self, op: &SpectralOperator<f64>) -> Result<CoefficientSet<f64>, CliError> {
        self.coefficients_at(op, self.noise.step, self.coefficients.mode)
    }

    /// `true` when `F`, `G` and `K` all vanish.
    pub fn coefficients_vanish(&self) -> bool {
        self.coefficients.c_g == 0.0 && self.coefficients.drift_gains.iter().all(|&g| g == 0.0)
    }

    pub fn initial_segment(&self) -> Result<Segment<f64>, CliError> {
        let n = self.spectral.modes;
        let a = self.initial.amplitude;
        let shape = self.initial.shape;
        Ok(Segment::from_fn(n, self.delay_steps(), self.noise.step, |s| {
            (0..n)
                .map(|k| {
                    let base = a / (k + 1) as f64;
                    match shape {
                        InitialShape::Cosine => base * (1.0 + s).cos(),
                        InitialShape::Constant => base,
                    }
                })
                .collect()
        })?)
    }

    /// Bundle members with `‖ξ_i‖_μ = bundle_scale · ρ · (i+1)/size`.
    pub fn bundle(&self, rho: f64) -> Result<Vec<Segment<f64>>, CliError> {
        let n = self.spectral.modes;
        let size = self.pullback.bundle_size;
        (0..size)
            .map(|i| {
                let shape = Segment::from_fn(n, self.delay_steps(), self.noise.step, |s| {
                    (0..n)
                        .map(|k| {
                            let sign = if (k + i) % 2 == 0 { 1.0 } else { -1.0 };
                            sign * (1.0 + s * (i + 1) as f64).cos() / ((k + 1) * (k + 1)) as f64
                        })
                        .collect()
                })?;
                let target = self.pullback.bundle_scale * rho * (i + 1) as f64 / size as f64;
                Ok(shape.scaled(target / shape.sup_norm()))
            })
            .collect()
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.noise.seeds as u64).map(|i| self.noise.seed + i).collect()
    }

    /// History needed behind `t = 0` by the pullback command, in steps.
    pub fn pullback_history_steps(&self) -> usize {
        let h = self.noise.step;
        let p = &self.pullback;
        let t_max = p.times.last().copied().unwrap_or(0.0).max(p.temper_horizon);
        steps("history", t_max, h).unwrap_or(0)
            + steps("history", p.t_trunc, h).unwrap_or(0)
            + 4 * self.delay_steps()
            + 1
    }
}
