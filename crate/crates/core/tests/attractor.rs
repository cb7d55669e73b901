use rspde_core::attractor::{
    absorbing_radius, check_delay_bound, gronwall_bound, pullback_run, temperedness_audit, PullbackSpec,
};
use rspde_core::coefficients::{Diffusion, ExampleSpec, NoiseMode};
use rspde_core::solver::global_solve;
use rspde_core::*;

const H: f64 = 1.0 / 256.0;

fn example(mode: NoiseMode, h: f64) -> (SpectralOperator<f64>, CoefficientSet<f64>, NoiseModel<f64>) {
    let op = SpectralOperator::laplacian_like(16).unwrap();
    let m = (0.125 / h) as usize;
    let spec = ExampleSpec { gains: vec![0.5], c_g: 0.5, nu: 0.5, mode };
    let set = CoefficientSet::make_example(&op, 4, m, h, &spec).unwrap();
    (op, set, NoiseModel::geometric(4, 0.5, h).unwrap())
}

#[test]
fn delay_gate_equivalence_sweep() {
    for i in 1..=20 {
        for j in 0..=20 {
            for k in 1..=20 {
                let (lam, c_f, mu) = (0.25 * i as f64, 0.2 * j as f64, 0.05 * k as f64);
                let d = check_delay_bound(lam, c_f, mu).unwrap();
                let direct = lam - c_f * (lam * mu).exp() > 0.0;
                // skip points sitting on the boundary to round-off
                if (lam - c_f * (lam * mu).exp()).abs() > 1e-12 {
                    assert_eq!(d.holds, direct, "λ={lam} C_F={c_f} μ={mu}");
                }
            }
        }
    }
    let d = check_delay_bound(1.0_f64, 0.5, 0.5).unwrap();
    assert!((d.threshold - std::f64::consts::LN_2).abs() < 1e-15 && d.holds);
}

#[test]
fn radius_is_homogeneous_in_the_path() {
    let (_, set, model) = example(NoiseMode::StateDependent, H);
    let c = *set.constants();
    let w = NoisePath::sample(&model, -45.0, 0.0, 2).unwrap();
    let a = absorbing_radius(&w, &c, 1.0, 32, 40.0, None).unwrap();
    let b = absorbing_radius(&w.scaled(2.0), &c, 1.0, 32, 40.0, None).unwrap();
    assert_eq!(b.terms.path_part(), 2.0 * a.terms.path_part());
    assert_eq!(b.terms.drift_const, a.terms.drift_const);
    assert_eq!(b.terms.noise_now, 2.0 * a.terms.noise_now);
    assert_eq!(b.terms.g_nu_integral, 2.0 * a.terms.g_nu_integral);
}

#[test]
fn truncation_refinement() {
    let (_, set, model) = example(NoiseMode::StateDependent, H);
    let c = *set.constants();
    for seed in 0..5 {
        let w = NoisePath::sample(&model, -81.0, 0.0, seed).unwrap();
        let a = absorbing_radius(&w, &c, 1.0, 32, 40.0, None).unwrap();
        let b = absorbing_radius(&w, &c, 1.0, 32, 80.0, None).unwrap();
        let rel = (b.radius - a.radius).abs() / b.radius;
        assert!(rel < 1e-5, "seed {seed}: {rel}");
        assert!(a.tail_certified);
    }
}

#[test]
fn gronwall_without_coefficients_is_the_semigroup_envelope() {
    let op = SpectralOperator::new(vec![1.0, 4.0]).unwrap();
    let set = CoefficientSet::new(Drift::zero(2), Diffusion::zero(&op, 1, 0.5).unwrap(), 32, H).unwrap();
    let model = NoiseModel::new(vec![1.0], H).unwrap();
    let w = NoisePath::sample(&model, -3.0, 0.0, 1).unwrap();
    let xi = Segment::from_fn(2, 32, H, |s| vec![1.0 + s, -0.5]).unwrap();
    let g = gronwall_bound(xi.sup_norm(), &w, 2.0, set.constants(), 1.0, 32).unwrap();
    let e = (0.125f64).exp();
    for (j, b) in g.bound.iter().enumerate() {
        let want = e * (-(j as f64) * H).exp() * xi.sup_norm();
        assert!((b - want).abs() <= 1e-14 * want);
    }
    let sol = global_solve(&xi, &w.shift_steps(-512).unwrap(), 2.0, &set, &op, &SolverConfig::default()).unwrap();
    for j in 0..=512 {
        assert!(sol.trajectory.segment_at_step(j).sup_norm() <= g.bound[j]);
    }
}

#[test]
fn gronwall_dominates_the_solver() {
    let (op, set, model) = example(NoiseMode::StateDependent, H);
    let cfg = SolverConfig::default();
    let xi =
        Segment::from_fn(16, 32, H, |s| (0..16).map(|k| 3.0 * (2.0 * s).sin() / (k + 1) as f64).collect()).unwrap();
    for seed in 0..5 {
        let w = NoisePath::sample(&model, -4.5, 0.0, seed).unwrap();
        let g = gronwall_bound(xi.sup_norm(), &w, 4.0, set.constants(), 1.0, 32).unwrap();
        let sol = global_solve(&xi, &w.shift_steps(-1024).unwrap(), 4.0, &set, &op, &cfg).unwrap();
        for j in 0..=1024 {
            assert!(sol.trajectory.segment_at_step(j).sup_norm() <= g.bound[j], "seed {seed} step {j}");
        }
    }
}

#[test]
fn pure_semigroup_bundle_contracts_at_the_closed_form_rate() {
    let op = SpectralOperator::new(vec![1.0]).unwrap();
    let set = CoefficientSet::new(Drift::zero(1), Diffusion::zero(&op, 1, 0.5).unwrap(), 32, H).unwrap();
    let model = NoiseModel::new(vec![1.0], H).unwrap();
    let w = NoisePath::sample(&model, -30.0, 0.0, 4).unwrap();
    let est = absorbing_radius(&w, set.constants(), 1.0, 32, 20.0, None).unwrap();
    let bundle: Vec<Segment<f64>> =
        [-1.0, 0.5, 2.0].iter().map(|&v| Segment::constant(&HVector(vec![v]), 32, H).unwrap()).collect();
    let spec = PullbackSpec { epsilon: 0.25, alpha: 0.25, t_trunc: 20.0, delta: None };
    let times = [0.5, 1.0, 2.0];
    let rep = pullback_run(&w, &bundle, &times, &set, &op, &SolverConfig::default(), &est, &spec).unwrap();
    for p in &rep.times {
        let want = (-(p.t - 0.125)).exp() * 3.0;
        assert!((p.diameter - want).abs() <= 1e-14 * want, "t {}: {} vs {want}", p.t, p.diameter);
    }
}

#[test]
fn zero_bundle_with_additive_noise_is_absorbed() {
    let (op, set, model) = example(NoiseMode::Additive, H);
    let w = NoisePath::sample(&model, -40.0, 0.0, 6).unwrap();
    let est = absorbing_radius(&w, set.constants(), 1.0, 32, 30.0, None).unwrap();
    let zero = vec![Segment::constant(&HVector::zeros(16), 32, H).unwrap()];
    let spec = PullbackSpec { epsilon: 0.25, alpha: 0.25, t_trunc: 30.0, delta: None };
    let rep = pullback_run(&w, &zero, &[1.0, 4.0, 8.0], &set, &op, &SolverConfig::default(), &est, &spec).unwrap();
    assert!(rep.rows.iter().all(|r| r.absorbed && r.sup_norm > 0.0));
    assert!(rep.within_ceiling());
}

#[test]
fn temperedness_examples() {
    let (_, set, model) = example(NoiseMode::StateDependent, H);
    let c = *set.constants();
    let zero = NoisePath::zero(&model, -256 * 72, 0).unwrap();
    let z = temperedness_audit(&zero, &c, 1.0, 32, 0.05, 40.0, 30.0).unwrap();
    assert!(z.pass && z.rows.iter().all(|r| r.1 == 0.0));

    let unit = NoiseModel::new(vec![1.0], H).unwrap();
    let lin = NoisePath::from_fn(&unit, -256 * 72, 0, |s| vec![s]).unwrap();
    assert!(temperedness_audit(&lin, &c, 1.0, 32, 0.5, 40.0, 30.0).unwrap().pass);

    let passed = (0..50u64)
        .filter(|&s| {
            let w = NoisePath::sample(&model, -71.0, 0.0, s).unwrap();
            temperedness_audit(&w, &c, 1.0, 32, 0.05, 40.0, 30.0).unwrap().pass
        })
        .count();
    assert!(passed >= 45, "{passed}/50");
}
