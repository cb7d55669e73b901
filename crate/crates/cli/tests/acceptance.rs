//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::path::Path;
use std::process::Command as Process;
use std::result::Result;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use rspde_cli::commands::{oracle_table, perturbed, pullback_seeds, OracleForm, PullbackSeed};
use rspde_cli::ExperimentConfig;
use rspde_core::attractor::{absorbing_radius, gronwall_bound};
use rspde_core::coefficients::{Diffusion, DriftArgument, NoiseMode, Pointwise};
use rspde_core::rds::{cocycle_defect, continuity_modulus};
use rspde_core::solver::{apply_operator, global_solve, local_horizon};
use rspde_core::*;

type ModeRuns = Vec<(NoiseMode, Vec<PullbackSeed>)>;
type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;

fn semigroup_audit() -> Outcome {
    let cfg = ExperimentConfig::default();
    let op = cfg.operator()?;
    let mut worst_ratio: f64 = 0.0;
    let mut audits = true;
    for gamma in [0.25, 0.5, 0.75] {
        let a = op.estimate_audit(gamma, 50)?;
        audits &= a.pass;
        worst_ratio = worst_ratio.max(a.max_smoothing_ratio);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut ulps: f64 = 0.0;
    for _ in 0..200 {
        let s = rng.random_range(0..4096) as f64 / 1024.0;
        let t = rng.random_range(0..4096) as f64 / 1024.0;
        let x = HVector((0..op.dim()).map(|_| rng.random_range(-1.0..1.0)).collect());
        let a = op.semigroup_apply(t, &op.semigroup_apply(s, &x)?)?;
        let b = op.semigroup_apply(s + t, &x)?;
        for (u, v) in a.0.iter().zip(&b.0) {
            ulps = ulps.max(u.to_bits().abs_diff(v.to_bits()) as f64);
        }
    }
    Ok((
        audits && ulps <= 8.0,
        format!("audits pass {audits}, max smoothing ratio {worst_ratio:.3}, law within {ulps:.1} ulps"),
    ))
}

fn contraction_certificate() -> Outcome {
    let cfg = ExperimentConfig::default();
    let op = cfg.operator()?;
    let set = cfg.coefficients(&op)?;
    let model = cfg.noise_model()?;
    let xi = cfg.initial_segment()?;
    let (h, m, n) = (cfg.step(), cfg.delay_steps(), op.dim());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst, mut picard, mut flagged): (f64, f64, usize) = (0.0, 0.0, 0);
    for pair in 0..50u64 {
        let w = NoisePath::sample(&model, 0.0, 2.0, pair)?;
        let sol = global_solve(&xi, &w, 2.0, &set, &op, &cfg.solver)?;
        flagged += sol.schedule.noncontractive_count();
        for iv in &sol.schedule.intervals {
            picard = picard.max(iv.max_ratio);
        }
        let iv = &sol.schedule.intervals[pair as usize % sol.schedule.len()];
        let hist = sol.trajectory.segment_at_step(iv.start_step);
        let ws = w.shift_steps(iv.start_step as i64)?;
        let base = |t: f64| sol.trajectory.at(iv.start + t).unwrap();
        let len = iv.steps as f64 * h;
        let amp = 10f64.powf(rng.random_range(-3.0..1.0));
        let mut bump = || {
            let c: Vec<f64> = (0..n).map(|_| amp * rng.random_range(-1.0..1.0)).collect();
            let f: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..12.0)).collect();
            move |t: f64| -> Vec<f64> {
                let b = base(t.max(0.0));
                (0..n).map(|k| b.0[k] + (t.max(0.0) / len) * c[k] * (f[k] * t).cos()).collect()
            }
        };
        let (fu, fv) = (bump(), bump());
        let u = Trajectory::from_fn(n, m, iv.steps, h, fu)?;
        let v = Trajectory::from_fn(n, m, iv.steps, h, fv)?;
        let tu = apply_operator(&hist, &u, &ws, &set, &op)?;
        let tv = apply_operator(&hist, &v, &ws, &set, &op)?;
        let dist = |a: &Trajectory<f64>, b: &Trajectory<f64>| {
            (0..=iv.steps as i64)
                .map(|j| HVector::from_slice(a.state(j)).dist(&HVector::from_slice(b.state(j))))
                .fold(0.0, f64::max)
        };
        worst = worst.max(dist(&tu, &tv) / dist(&u, &v));
    }
    let pass = worst <= 0.55 && picard <= 0.55 && flagged == 0;
    Ok((pass, format!("operator ratio {worst:.4}, Picard ratio {picard:.4}, {flagged} noncontractive")))
}

/// `p(t) + q(t) e^{-λt}` with polynomial coefficient vectors.
#[derive(Clone)]
struct ExpPoly {
    p: Vec<f64>,
    q: Vec<f64>,
}

fn eval(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, a| acc * t + a)
}

/// Coefficients of `c(t - d)`.
fn translate(c: &[f64], d: f64) -> Vec<f64> {
    let mut out = vec![0.0; c.len()];
    for (j, a) in c.iter().enumerate() {
        let mut binom = 1.0;
        for (i, o) in out.iter_mut().enumerate().take(j + 1) {
            *o += a * binom * (-d).powi((j - i) as i32);
            binom = binom * (j - i) as f64 / (i + 1) as f64;
        }
    }
    out
}

fn derivative(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(j, a)| j as f64 * a).collect()
}

fn antiderivative(c: &[f64]) -> Vec<f64> {
    std::iter::once(0.0).chain(c.iter().enumerate().map(|(j, a)| a / (j + 1) as f64)).collect()
}

fn add(a: &mut Vec<f64>, b: &[f64], s: f64) {
    if a.len() < b.len() {
        a.resize(b.len(), 0.0);
    }
    for (x, y) in a.iter_mut().zip(b) {
        *x += s * y;
    }
}

impl ExpPoly {
    fn at(&self, t: f64, lambda: f64) -> f64 {
        eval(&self.p, t) + eval(&self.q, t) * (-lambda * t).exp()
    }
}

/// Exact pieces of `u' = -λu + c u(t-μ)`, `u ≡ 1` on `[-μ, 0]`, one per delay interval.
fn method_of_steps(lambda: f64, c: f64, mu: f64, pieces: usize) -> Vec<ExpPoly> {
    let mut out = Vec::with_capacity(pieces);
    let mut prev = ExpPoly { p: vec![1.0], q: vec![] };
    let mut u0 = 1.0;
    for k in 0..pieces {
        let t0 = k as f64 * mu;
        let f: Vec<f64> = translate(&prev.p, mu).iter().map(|a| c * a).collect();
        let mut p = Vec::new();
        let mut d = f;
        let mut sign = 1.0;
        for i in 0.. {
            if d.is_empty() {
                break;
            }
            add(&mut p, &d, sign / lambda.powi(i + 1));
            d = derivative(&d);
            sign = -sign;
        }
        let shifted: Vec<f64> = translate(&prev.q, mu).iter().map(|a| c * (lambda * mu).exp() * a).collect();
        let mut q = antiderivative(&shifted);
        let k0 = (u0 - eval(&p, t0)) * (lambda * t0).exp() - eval(&q, t0);
        add(&mut q, &[k0], 1.0);
        prev = ExpPoly { p, q };
        u0 = prev.at(t0 + mu, lambda);
        out.push(prev.clone());
    }
    out
}

fn deterministic_oracle() -> Outcome {
    let (lambda, c, mu) = (1.0, 0.4, 0.125);
    let exact = method_of_steps(lambda, c, mu, 4);
    let mut errs = Vec::new();
    for h in [1.0 / 512.0, 1.0 / 1024.0] {
        let m = (mu / h) as usize;
        let op = SpectralOperator::new(vec![lambda])?;
        let drift = Drift::new(vec![c], Pointwise::Linear, DriftArgument::Delayed)?;
        let set = CoefficientSet::new(drift, Diffusion::zero(&op, 1, 0.5)?, m, h)?;
        let w = NoisePath::zero(&NoiseModel::new(vec![1.0], h)?, 0, 4 * m as i64)?;
        let xi = Segment::constant(&HVector(vec![1.0]), m, h)?;
        let sol = global_solve(&xi, &w, 4.0 * mu, &set, &op, &SolverConfig::default())?;
        let mut err: f64 = 0.0;
        for j in 0..=4 * m {
            let t = j as f64 * h;
            let piece = &exact[(j.saturating_sub(1) / m).min(3)];
            err = err.max((sol.trajectory.state(j as i64)[0] - piece.at(t, lambda)).abs());
        }
        errs.push((h, err));
    }
    let ratio = errs[0].1 / errs[1].1;
    let pass = errs.iter().all(|(h, e)| *e <= 5.0 * h) && ratio >= 1.8;
    Ok((pass, format!("sup error {:.3e} at h=2^-9, {:.3e} at h=2^-10, ratio {ratio:.3}", errs[0].1, errs[1].1)))
}

fn integration_by_parts() -> Outcome {
    let cfg = ExperimentConfig::default();
    let mut pass = true;
    let mut detail = Vec::new();
    for form in [OracleForm::ConstantG, OracleForm::StateDependentG] {
        let e = oracle_table(&cfg, form)?;
        let r: Vec<f64> = e.windows(2).map(|w| w[0] / w[1]).collect();
        pass &= r.iter().all(|&x| x >= 1.5);
        detail.push(format!("{} ratios {:?}", form.name(), r.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>()));
    }
    Ok((pass, detail.join(", ")))
}

fn cocycle_property() -> Outcome {
    let cfg = ExperimentConfig::default();
    let op = cfg.operator()?;
    let set = cfg.coefficients(&op)?;
    let model = cfg.noise_model()?;
    let xi = cfg.initial_segment()?;
    let seeds: Vec<u64> = (0..20).collect();
    let per: Vec<Result<f64, Error>> = seeds
        .par_iter()
        .map(|&s| {
            let w = NoisePath::sample(&model, 0.0, 2.0, s)?;
            let mut worst: f64 = 0.0;
            for &t in &cfg.cocycle.t {
                for &tau in &cfg.cocycle.tau {
                    worst = worst.max(cocycle_defect(t, tau, &w, &xi, &set, &op, &cfg.solver)?.defect);
                }
            }
            Ok(worst)
        })
        .collect();
    let worst = per.into_iter().collect::<Result<Vec<_>, _>>()?.into_iter().fold(0.0, f64::max);
    let tol = 10.0 * cfg.solver.picard_tol;
    Ok((worst <= tol, format!("max defect {worst:.3e} over 500 evaluations, limit {tol:.0e}")))
}

fn continuity() -> Outcome {
    let cfg = ExperimentConfig::default();
    let op = cfg.operator()?;
    let set = cfg.coefficients(&op)?;
    let model = cfg.noise_model()?;
    let xi = cfg.initial_segment()?;
    let budget = ContractionBudget::new(set.constants(), cfg.solver.beta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    let mut single = true;
    for pair in 0..100u64 {
        let w = NoisePath::sample(&model, 0.0, 1.0, pair)?;
        let t = local_horizon(&w, &budget, &cfg.solver, None)?.length;
        let size = 10f64.powf(rng.random_range(-4.0..0.0));
        let xt = perturbed(&xi, size, (pair % 7) as usize)?;
        let c = continuity_modulus(t, &w, &xi, &xt, &set, &op, &cfg.solver)?;
        single &= c.intervals == 1;
        worst = worst.max(c.ratio);
    }
    Ok((single && worst <= 4.5, format!("max modulus {worst:.4} over 100 pairs, single interval {single}")))
}

fn gronwall_domination() -> Outcome {
    let cfg = ExperimentConfig::default();
    let op = cfg.operator()?;
    let set = cfg.coefficients(&op)?;
    let model = cfg.noise_model()?;
    let xi = cfg.initial_segment()?;
    let (t, h, m) = (4.0, cfg.step(), cfg.delay_steps());
    let k = (t / h) as usize;
    let mut violations = 0usize;
    let mut slack = f64::INFINITY;
    for seed in 0..20 {
        let w = NoisePath::sample(&model, -t - 2.0 * cfg.delay.mu, 0.0, seed)?;
        let g = gronwall_bound(xi.sup_norm(), &w, t, set.constants(), op.gap(), m)?;
        let sol = global_solve(&xi, &w.shift_steps(-(k as i64))?, t, &set, &op, &cfg.solver)?;
        for j in 0..=k {
            let norm = sol.trajectory.segment_at_step(j).sup_norm();
            if norm > g.bound[j] {
                violations += 1;
            }
            slack = slack.min(g.bound[j] / norm);
        }
    }
    Ok((
        violations == 0,
        format!("{violations} violations over 20 seeds x {} grid times, min bound/norm {slack:.3}", k + 1),
    ))
}

fn delay_gate() -> Outcome {
    let mut cfg = ExperimentConfig::default();
    cfg.spectral.lambda1 = 1.0;
    cfg.coefficients.drift_gains = vec![0.5];
    cfg.pullback.t_trunc = 20.0;
    let mut out = Vec::new();
    for mu in [0.5, 0.75] {
        cfg.delay.mu = mu;
        let op = cfg.operator()?;
        let set = cfg.coefficients(&op)?;
        let m = cfg.delay_steps();
        let w = NoisePath::sample(&cfg.noise_model()?, -cfg.pullback.t_trunc - 2.0 * mu, 0.0, 1)?;
        out.push((set.constants().c_f, absorbing_radius(&w, set.constants(), op.gap(), m, cfg.pullback.t_trunc, None)));
    }
    let ok = matches!(out[0].1, Ok(ref e) if e.radius.is_finite());
    let refused = matches!(out[1].1, Err(Error::DelayBoundViolated { .. }));
    let detail = match (&out[0].1, &out[1].1) {
        (Ok(e), Err(err)) => format!("C_F={}, mu=0.5 radius {:.4}; mu=0.75: {err}", out[0].0, e.radius),
        (a, b) => {
            format!("unexpected outcomes: {:?} / {:?}", a.as_ref().map(|e| e.radius), b.as_ref().map(|e| e.radius))
        }
    };
    Ok((ok && refused, detail))
}

fn pullback_modes() -> Result<ModeRuns, Box<dyn std::error::Error>> {
    let mut out = Vec::new();
    for mode in [NoiseMode::StateDependent, NoiseMode::Additive] {
        let mut cfg = ExperimentConfig::default();
        cfg.coefficients.mode = mode;
        out.push((mode, pullback_seeds(&cfg)?));
    }
    Ok(out)
}

fn fraction(runs: &[PullbackSeed], f: impl Fn(&PullbackSeed) -> bool) -> f64 {
    runs.iter().filter(|r| f(r)).count() as f64 / runs.len() as f64
}

fn mode_name(m: NoiseMode) -> &'static str {
    match m {
        NoiseMode::StateDependent => "state-dependent",
        NoiseMode::Additive => "additive",
    }
}

fn pullback_absorption(modes: &[(NoiseMode, Vec<PullbackSeed>)]) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for (mode, runs) in modes {
        let f = fraction(runs, |r| r.consistent);
        let bounded = runs.iter().all(|r| r.report.bundle_norm <= 2.0 * r.estimate.rho * (1.0 + 1e-12));
        pass &= f >= 0.9 && bounded;
        detail.push(format!("{}: {:.0}% consistent, bundle <= 2rho {bounded}", mode_name(*mode), 100.0 * f));
    }
    Ok((pass, detail.join("; ")))
}

fn attraction_compactness(modes: &[(NoiseMode, Vec<PullbackSeed>)]) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for (mode, runs) in modes {
        let f = fraction(runs, |r| r.contracts);
        let ceiling = runs.iter().all(|r| r.within_ceiling);
        pass &= f >= 0.9 && ceiling;
        detail.push(format!("{}: {:.0}% contract, within ceiling {ceiling}", mode_name(*mode), 100.0 * f));
    }
    Ok((pass, detail.join("; ")))
}

const SMALL: &str = r#"
[noise]
seeds = 2
[simulate]
t = 0.5
[cocycle]
t = [0.19921875, 0.3994140625]
tau = [0.19921875]
continuity_pairs = 2
[oracle]
seeds = 2
[pullback]
times = [0.5, 1.0, 2.0]
bundle_size = 3
t_trunc = 10.0
temper_horizon = 4.0
"#;

fn reproducibility() -> Outcome {
    let dir = tempfile::tempdir()?;
    let config = dir.path().join("small.toml");
    std::fs::write(&config, SMALL)?;
    let bin = env!("CARGO_BIN_EXE_rspde");
    let mut compared = 0;
    let mut differing = Vec::new();
    for cmd in ["simulate", "cocycle-test", "oracle-compare", "pullback"] {
        let outs: Vec<_> = ["1", "2"]
            .iter()
            .map(|threads| {
                let out = dir.path().join(format!("{cmd}-{threads}"));
                let status = Process::new(bin)
                    .args(["--quiet", "--seed", "3", "--config"])
                    .arg(&config)
                    .arg("--out")
                    .arg(&out)
                    .arg(cmd)
                    .env("RSPDE_THREADS", threads)
                    .status();
                (out, status)
            })
            .collect();
        for (_, s) in &outs {
            if !matches!(s, Ok(s) if s.code() == Some(0) || s.code() == Some(1)) {
                return Ok((false, format!("{cmd} did not run: {s:?}")));
            }
        }
        for entry in std::fs::read_dir(&outs[0].0)? {
            let name = entry?.file_name();
            compared += 1;
            if !same(&outs[0].0.join(&name), &outs[1].0.join(&name)) {
                differing.push(format!("{cmd}/{}", name.to_string_lossy()));
            }
        }
    }
    Ok((differing.is_empty() && compared > 0, format!("{compared} files compared, differing {differing:?}")))
}

fn same(a: &Path, b: &Path) -> bool {
    matches!((std::fs::read(a), std::fs::read(b)), (Ok(x), Ok(y)) if x == y)
}

fn report(id: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let (pass, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    println!(
        "criterion {id:>2} {name}: {} ({detail}) [{:.1}s]",
        if pass { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64()
    );
    pass
}

fn main() {
    let mut all = true;
    all &= report(1, "semigroup audit", semigroup_audit);
    all &= report(2, "contraction certificate", contraction_certificate);
    all &= report(3, "deterministic oracle", deterministic_oracle);
    all &= report(4, "integration-by-parts equivalence", integration_by_parts);
    all &= report(5, "cocycle property", cocycle_property);
    all &= report(6, "continuity in the initial segment", continuity);
    all &= report(7, "Gronwall domination", gronwall_domination);
    all &= report(8, "delay-bound gate", delay_gate);
    let modes = pullback_modes();
    match &modes {
        Ok(m) => {
            all &= report(9, "pullback absorption", || pullback_absorption(m));
            all &= report(10, "attraction and compactness trend", || attraction_compactness(m));
        }
        Err(e) => {
            let msg = e.to_string();
            all &= report(9, "pullback absorption", || Err(msg.clone().into()));
            all &= report(10, "attraction and compactness trend", || Err(msg.into()));
        }
    }
    all &= report(11, "reproducibility", reproducibility);
    if !all {
        std::process::exit(1);
    }
}
