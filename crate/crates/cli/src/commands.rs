//! The experiment commands. Each writes its artifacts under the output
//! directory and returns the declared acceptance checks of the run.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use rspde_core::attractor::{absorbing_radius, pullback_run, temperedness_audit, PullbackSpec};
use rspde_core::coefficients::{NoiseMode, NoiseOperator};
use rspde_core::io::fmt;
use rspde_core::rds::{cocycle_defect, continuity_modulus, write_cocycle_csv, CocycleDefect, ContinuityModulus};
use rspde_core::solver::{global_solve, ito_oracle, junction_residual, local_horizon, pathwise_integral};
use rspde_core::{AbsorbingEstimate, ContractionBudget, HVector, NoisePath, PullbackReport, Segment};

use crate::{Check, CliError, ExperimentConfig, Report};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    CocycleTest,
    OracleCompare,
    Pullback,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::CocycleTest => "cocycle-test",
            Command::OracleCompare => "oracle-compare",
            Command::Pullback => "pullback",
        }
    }
}

pub fn run(command: Command, cfg: &ExperimentConfig, out: &Path) -> Result<Report, CliError> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    match command {
        Command::Simulate => simulate(cfg, out),
        Command::CocycleTest => cocycle_test(cfg, out),
        Command::OracleCompare => oracle_compare(cfg, out),
        Command::Pullback => pullback(cfg, out),
    }
}

/// `# command=…,config_sha256=…,seed=…[,seeds=…]`
pub fn header(cfg: &ExperimentConfig, command: Command, seeds: Option<usize>) -> String {
    let mut h = format!("# command={},config_sha256={},seed={}", command.name(), cfg.hash(), cfg.noise.seed);
    if let Some(n) = seeds {
        h.push_str(&format!(",seeds={n}"));
    }
    h.push('\n');
    h
}

struct Artifact {
    path: PathBuf,
    buf: Vec<u8>,
}

impl Artifact {
    fn new(out: &Path, name: &str, header: &str) -> Self {
        Artifact { path: out.join(name), buf: header.as_bytes().to_vec() }
    }

    fn finish(self, report: &mut Report) -> Result<(), CliError> {
        fs::write(&self.path, &self.buf)?;
        report.files.push(self.path);
        Ok(())
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

fn simulate(cfg: &ExperimentConfig, out: &Path) -> Result<Report, CliError> {
    let op = cfg.operator()?;
    let set = cfg.coefficients(&op)?;
    let w = NoisePath::sample(&cfg.noise_model()?, 0.0, cfg.simulate.t, cfg.noise.seed)?;
    let xi = cfg.initial_segment()?;
    let sol = global_solve(&xi, &w, cfg.simulate.t, &set, &op, &cfg.solver)?;
    let head = header(cfg, Command::Simulate, None);
    let mut report = Report::default();

    let mut traj = Artifact::new(out, "trajectory.csv", &head);
    sol.trajectory.write_csv(&mut traj.buf)?;
    traj.finish(&mut report)?;
    let mut sched = Artifact::new(out, "schedule.csv", &head);
    sol.schedule.write_csv(&mut sched.buf)?;
    sched.finish(&mut report)?;

    let tol = 10.0 * cfg.solver.picard_tol;
    let check = if sol.schedule.len() > 1 {
        let residual = junction_residual(&sol, &xi, &w, &set, &op)?;
        Check::new(
            "junction residual <= 10 picard_tol",
            residual <= tol,
            format!("residual {residual:.3e}, {} intervals", sol.schedule.len()),
        )
    } else {
        Check::new("junction residual <= 10 picard_tol", true, "single interval, no junction")
    };
    report.checks.push(check);
    let flagged = sol.schedule.noncontractive_count();
    report.checks.push(Check::new(
        "noncontractive intervals only under override",
        flagged == 0 || cfg.solver.allow_noncontractive,
        format!("{flagged} flagged"),
    ));
    if cfg.coefficients_vanish() {
        let x0 = HVector::from_slice(xi.head());
        let steps = sol.trajectory.steps();
        let mut err: f64 = 0.0;
        for j in 0..=steps {
            let want = op.semigroup_apply(j as f64 * cfg.step(), &x0)?;
            err = err.max(HVector::from_slice(sol.trajectory.state(j as i64)).dist(&want));
        }
        report.checks.push(Check::new(
            "zero coefficients reproduce S(t)xi(0)",
            err <= 1e-12 * (1.0 + x0.norm()),
            format!("max error {err:.3e}"),
        ));
    }
    Ok(report)
}

struct SeedCocycle {
    defects: Vec<CocycleDefect<f64>>,
    continuity: Vec<(usize, f64, ContinuityModulus<f64>)>,
}

/// `ξ + size·(pair+1)·p` with a smooth pattern `p` of unit scale.
pub fn perturbed(xi: &Segment<f64>, size: f64, pair: usize) -> Result<Segment<f64>, CliError> {
    let n = xi.dim();
    let p = Segment::from_fn(n, xi.delay_steps(), xi.step(), |s| {
        (0..n).map(|k| (((k + 1) * (pair + 1)) as f64 * (s + 0.3)).sin() / (k + 1) as f64).collect()
    })?;
    Ok(xi.add(&p.scaled(size * (pair + 1) as f64)))
}

fn cocycle_test(cfg: &ExperimentConfig, out: &Path) -> Result<Report, CliError> {
    let op = cfg.operator()?;
    let set = cfg.coefficients(&op)?;
    let model = cfg.noise_model()?;
    let xi = cfg.initial_segment()?;
    let cy = &cfg.cocycle;
    let t_max = cy.t.iter().cloned().fold(0.0, f64::max) + cy.tau.iter().cloned().fold(0.0, f64::max);
    let budget = ContractionBudget::new(set.constants(), cfg.solver.beta)?;
    let per_seed: Vec<Result<SeedCocycle, CliError>> = cfg
        .seeds()
        .par_iter()
        .map(|&seed| {
            let w = NoisePath::sample(&model, 0.0, t_max.max(1.0), seed)?;
            let mut defects = Vec::new();
            for &t in &cy.t {
                for &tau in &cy.tau {
                    defects.push(cocycle_defect(t, tau, &w, &xi, &set, &op, &cfg.solver)?);
                }
            }
            let t = local_horizon(&w, &budget, &cfg.solver, None)?.length;
            let mut continuity = Vec::new();
            for pair in 0..cy.continuity_pairs {
                let xt = perturbed(&xi, cy.perturbation, pair)?;
                continuity.push((pair, t, continuity_modulus(t, &w, &xi, &xt, &set, &op, &cfg.solver)?));
            }
            Ok(SeedCocycle { defects, continuity })
        })
        .collect();
    let per_seed = per_seed.into_iter().collect::<Result<Vec<_>, _>>()?;

    let head = header(cfg, Command::CocycleTest, Some(cfg.noise.seeds));
    let mut report = Report::default();
    let defects: Vec<CocycleDefect<f64>> = per_seed.iter().flat_map(|s| s.defects.iter().copied()).collect();
    let mut a = Artifact::new(out, "cocycle.csv", &head);
    write_cocycle_csv(&defects, &mut a.buf)?;
    a.finish(&mut report)?;

    let mut c = Artifact::new(out, "continuity.csv", &head);
    writeln!(c.buf, "seed,pair,t,intervals,ratio,limit,PASS")?;
    for (seed, s) in cfg.seeds().iter().zip(&per_seed) {
        for (pair, t, m) in &s.continuity {
            writeln!(
                c.buf,
                "{seed},{pair},{},{},{},{},{}",
                fmt(*t),
                m.intervals,
                fmt(m.ratio),
                fmt(m.limit),
                u8::from(m.pass)
            )?;
        }
    }
    c.finish(&mut report)?;

    let worst = defects.iter().map(|d| d.defect).fold(0.0, f64::max);
    let failed = defects.iter().filter(|d| !d.pass).count();
    report.checks.push(Check::new(
        "cocycle defect <= 10 picard_tol",
        failed == 0,
        format!("max defect {worst:.3e} over {} rows, {failed} failing", defects.len()),
    ));
    let mods: Vec<&ContinuityModulus<f64>> = per_seed.iter().flat_map(|s| s.continuity.iter().map(|c| &c.2)).collect();
    let worst = mods.iter().map(|m| m.ratio).fold(0.0, f64::max);
    report.checks.push(Check::new(
        "continuity modulus <= 4.5^intervals",
        mods.iter().all(|m| m.pass),
        format!("max ratio {worst:.4} over {} pairs", mods.len()),
    ));
    Ok(report)
}

/// Forms compared by the oracle study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleForm {
    ConstantG,
    StateDependentG,
}

impl OracleForm {
    pub fn name(self) -> &'static str {
        match self {
            OracleForm::ConstantG => "constant_g",
            OracleForm::StateDependentG => "state_dependent_g",
        }
    }
}

/// `|pathwise - Itô sum|` at `t` for each grid level, coarsest first.
pub fn oracle_errors(cfg: &ExperimentConfig, form: OracleForm, seed: u64) -> Result<Vec<f64>, CliError> {
    let op = cfg.operator()?;
    let o = &cfg.oracle;
    let fine = NoisePath::sample(&cfg.noise_model()?, 0.0, o.t, seed)?;
    let mut errs = Vec::with_capacity(o.levels);
    for l in 0..o.levels {
        let factor = 1usize << (o.levels - 1 - l);
        let w = fine.coarsen(factor)?;
        let h = cfg.step() * factor as f64;
        let n = (o.t / h).round() as usize;
        let (g, k) = match form {
            OracleForm::ConstantG => {
                let set = cfg.coefficients_at(&op, h, NoiseMode::Additive)?;
                let zero = Segment::constant(&HVector::zeros(op.dim()), set.delay_steps(), h)?;
                let sigma = set.g(&zero)?;
                let kz = NoiseOperator::new(vec![0.0; op.dim()], sigma.column_map().to_vec(), sigma.cols())?;
                (vec![sigma; n + 1], vec![kz; n + 1])
            }
            OracleForm::StateDependentG => {
                let set = cfg.coefficients_at(&op, h, NoiseMode::StateDependent)?;
                let mut at = cfg.clone();
                at.noise.step = h;
                let xi = at.initial_segment()?;
                let sol = global_solve(&xi, &w, o.t, &set, &op, &cfg.solver)?;
                let segs: Vec<Segment<f64>> = (0..=n).map(|j| sol.trajectory.segment_at_step(j)).collect();
                let g = segs.iter().map(|s| set.g(s)).collect::<Result<Vec<_>, _>>()?;
                let k = segs.iter().map(|s| set.k(s)).collect::<Result<Vec<_>, _>>()?;
                (g, k)
            }
        };
        let a = pathwise_integral(&op, &g, &k, &w, o.t)?;
        let b = ito_oracle(&op, &g, &w, o.t)?;
        errs.push(a.dist(&b));
    }
    Ok(errs)
}

/// Root-mean-square errors over the oracle seeds.
pub fn oracle_table(cfg: &ExperimentConfig, form: OracleForm) -> Result<Vec<f64>, CliError> {
    let seeds: Vec<u64> = (0..cfg.oracle.seeds as u64).map(|i| cfg.noise.seed + i).collect();
    let runs: Vec<Result<Vec<f64>, CliError>> = seeds.par_iter().map(|&s| oracle_errors(cfg, form, s)).collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok((0..cfg.oracle.levels)
        .map(|l| (runs.iter().map(|r| r[l] * r[l]).sum::<f64>() / runs.len() as f64).sqrt())
        .collect())
}

fn oracle_compare(cfg: &ExperimentConfig, out: &Path) -> Result<Report, CliError> {
    let head = header(cfg, Command::OracleCompare, Some(cfg.oracle.seeds));
    let mut report = Report::default();
    let mut a = Artifact::new(out, "oracle.csv", &head);
    writeln!(a.buf, "form,level,step,error,ratio,order")?;
    for form in [OracleForm::ConstantG, OracleForm::StateDependentG] {
        let errs = oracle_table(cfg, form)?;
        let mut ratios = Vec::new();
        for (l, &e) in errs.iter().enumerate() {
            let h = cfg.step() * (1u64 << (cfg.oracle.levels - 1 - l)) as f64;
            let (ratio, order) = if l == 0 {
                (None, None)
            } else {
                let r = errs[l - 1] / e;
                ratios.push(r);
                (Some(r), Some(r.log2()))
            };
            writeln!(a.buf, "{},{l},{},{},{},{}", form.name(), fmt(h), fmt(e), opt(ratio), opt(order))?;
        }
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        report.checks.push(Check::new(
            format!("{}: error ratio >= 1.5 per halving", form.name()),
            ratios.iter().all(|&r| r >= 1.5),
            format!("min ratio {min:.3}"),
        ));
    }
    a.finish(&mut report)?;
    Ok(report)
}

/// Per-seed outcome of the pullback command.
#[derive(Debug, Clone, Serialize)]
pub struct PullbackSeed {
    pub seed: u64,
    pub estimate: AbsorbingEstimate<f64>,
    #[serde(skip)]
    pub report: PullbackReport<f64>,
    pub consistent: bool,
    pub contracts: bool,
    pub last_three_nonincreasing: bool,
    pub within_ceiling: bool,
    pub tempered: bool,
}

pub fn pullback_seed(cfg: &ExperimentConfig, seed: u64) -> Result<PullbackSeed, CliError> {
    let op = cfg.operator()?;
    let set = cfg.coefficients(&op)?;
    let h = cfg.step();
    let m = cfg.delay_steps();
    let p = &cfg.pullback;
    let hist = cfg.pullback_history_steps();
    let w = NoisePath::sample(&cfg.noise_model()?, -(hist as f64) * h, 0.0, seed)?;
    let c = set.constants();
    let estimate = absorbing_radius(&w, c, op.gap(), m, p.t_trunc, p.delta)?;
    let bundle = cfg.bundle(estimate.rho)?;
    let spec = PullbackSpec { epsilon: p.epsilon, alpha: p.alpha, t_trunc: p.t_trunc, delta: p.delta };
    let report = pullback_run(&w, &bundle, &p.times, &set, &op, &cfg.solver, &estimate, &spec)?;
    let temper = temperedness_audit(&w, c, op.gap(), m, p.kappa, p.temper_horizon, p.t_trunc)?;
    let d: Vec<f64> = report.times.iter().map(|t| t.diameter).collect();
    let tail = &d[d.len().saturating_sub(3)..];
    Ok(PullbackSeed {
        seed,
        estimate,
        consistent: report.absorption_consistent(),
        contracts: report.diameter_contracts(),
        last_three_nonincreasing: tail.windows(2).all(|x| x[1] <= x[0]),
        within_ceiling: report.within_ceiling(),
        tempered: temper.pass,
        report,
    })
}

pub fn pullback_seeds(cfg: &ExperimentConfig) -> Result<Vec<PullbackSeed>, CliError> {
    let runs: Vec<Result<PullbackSeed, CliError>> = cfg.seeds().par_iter().map(|&s| pullback_seed(cfg, s)).collect();
    runs.into_iter().collect()
}

#[derive(Serialize)]
struct EstimateFile<'a> {
    command: &'static str,
    config_sha256: String,
    seeds: &'a [PullbackSeed],
}

fn pullback(cfg: &ExperimentConfig, out: &Path) -> Result<Report, CliError> {
    let runs = pullback_seeds(cfg)?;
    let head = header(cfg, Command::Pullback, Some(cfg.noise.seeds));
    let mut report = Report::default();

    let mut rows = Artifact::new(out, "pullback.csv", &head);
    for (i, r) in runs.iter().enumerate() {
        r.report.write_csv(&mut rows.buf, i == 0)?;
    }
    rows.finish(&mut report)?;

    let mut sum = Artifact::new(out, "pullback_summary.csv", &head);
    writeln!(
        sum.buf,
        "seed,radius,rho,delta,tail_bound,tail_certified,measured_t_d,threshold_t_d,consistent,contracts,last_three_nonincreasing,within_ceiling,tempered"
    )?;
    for r in &runs {
        let e = &r.estimate;
        writeln!(
            sum.buf,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.seed,
            fmt(e.radius),
            fmt(e.rho),
            fmt(e.delta),
            fmt(e.tail_bound),
            u8::from(e.tail_certified),
            opt(r.report.measured_t_d),
            opt(r.report.threshold_t_d),
            u8::from(r.consistent),
            u8::from(r.contracts),
            u8::from(r.last_three_nonincreasing),
            u8::from(r.within_ceiling),
            u8::from(r.tempered)
        )?;
    }
    sum.finish(&mut report)?;

    let json = EstimateFile { command: Command::Pullback.name(), config_sha256: cfg.hash(), seeds: &runs };
    let path = out.join("estimate.json");
    fs::write(&path, serde_json::to_string_pretty(&json).expect("estimate serializes") + "\n")?;
    report.files.push(path);

    let n = runs.len();
    let need = (cfg.pullback.pass_fraction * n as f64).ceil() as usize;
    let mut fraction = |name: &str, count: usize| {
        report.checks.push(Check::new(name, count >= need, format!("{count}/{n} seeds, need {need}")));
    };
    fraction("absorption consistent with the xi-term threshold", runs.iter().filter(|r| r.consistent).count());
    fraction("diameter at largest time <= at smallest", runs.iter().filter(|r| r.contracts).count());
    fraction(
        "diameter nonincreasing over the last three times",
        runs.iter().filter(|r| r.last_three_nonincreasing).count(),
    );
    fraction("temperedness trend", runs.iter().filter(|r| r.tempered).count());
    let ceiling = runs.iter().filter(|r| r.within_ceiling).count();
    report.checks.push(Check::new(
        "diagnostics within the compactness ceiling",
        ceiling == n,
        format!("{ceiling}/{n} seeds"),
    ));
    let tails = runs.iter().filter(|r| r.estimate.tail_certified).count();
    report.checks.push(Check::new("truncation tail certified", tails == n, format!("{tails}/{n} seeds")));
    Ok(report)
}
