use rspde_core::attractor::absorbing_radius;
use rspde_core::coefficients::{ExampleSpec, NoiseMode};
use rspde_core::rds::cocycle_defect;
use rspde_core::solver::global_solve;
use rspde_core::*;

fn run<T: Scalar>() -> (T, T, T) {
    let h = T::lit(1.0 / 256.0);
    let op = SpectralOperator::<T>::laplacian_like(8).unwrap();
    let spec =
        ExampleSpec { gains: vec![T::lit(0.5)], c_g: T::lit(0.5), nu: T::lit(0.5), mode: NoiseMode::StateDependent };
    let set = CoefficientSet::make_example(&op, 2, 32, h, &spec).unwrap();
    let model = NoiseModel::geometric(2, T::lit(0.5), h).unwrap();
    let w = NoisePath::sample(&model, T::lit(-25.0), T::lit(2.0), 9).unwrap();
    let xi = Segment::from_fn(8, 32, h, |s| (0..8).map(|k| (T::one() + s) / T::from_count(k + 1)).collect()).unwrap();
    let cfg = SolverConfig::<T> { picard_tol: T::lit(1e-5), ..SolverConfig::default() };
    let sol = global_solve(&xi, &w, T::one(), &set, &op, &cfg).unwrap();
    let d = cocycle_defect(T::lit(0.5), T::lit(0.5), &w, &xi, &set, &op, &cfg).unwrap();
    let r = absorbing_radius(&w, set.constants(), T::one(), 32, T::lit(20.0), None).unwrap();
    (sol.trajectory.sup_norm(), d.defect, r.radius)
}

#[test]
fn f32_and_f64_agree() {
    let (s32, d32, r32) = run::<f32>();
    let (s64, d64, r64) = run::<f64>();
    assert!(((s32 as f64) - s64).abs() < 1e-4 * s64);
    assert!(((r32 as f64) - r64).abs() < 1e-3 * r64);
    assert!(d32 < 1e-4 && d64 < 1e-4, "{d32} {d64}");
}
