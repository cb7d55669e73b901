//! Special functions and exact kernel moments used by the quadratures.

use crate::Scalar;

const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma<T: Scalar>(x: T) -> T {
    let half = T::lit(0.5);
    if x < half {
        // reflection keeps the approximation in its accurate range
        let pi = T::PI();
        return (pi / (pi * x).sin()).ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let mut acc = T::lit(LANCZOS_COEF[0]);
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc = acc + T::lit(c) / (x + T::from_count(i));
    }
    let t = x + T::lit(LANCZOS_G) + half;
    half * (T::lit(2.0) * T::PI()).ln() + (x + half) * t.ln() - t + acc.ln()
}

pub fn gamma<T: Scalar>(x: T) -> T {
    ln_gamma(x).exp()
}

/// Euler Beta function `B(a, b) = ∫₀¹ (1-r)^{a-1} r^{b-1} dr`.
pub fn beta<T: Scalar>(a: T, b: T) -> T {
    (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_p<T: Scalar>(a: T, x: T) -> T {
    if x <= T::zero() {
        return T::zero();
    }
    if x < a + T::one() {
        gamma_series(a, x)
    } else {
        T::one() - gamma_cont_frac(a, x)
    }
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 - P(a, x)`.
pub fn gamma_q<T: Scalar>(a: T, x: T) -> T {
    if x <= T::zero() {
        return T::one();
    }
    if x < a + T::one() {
        T::one() - gamma_series(a, x)
    } else {
        gamma_cont_frac(a, x)
    }
}

fn gamma_series<T: Scalar>(a: T, x: T) -> T {
    let eps = T::epsilon();
    let mut ap = a;
    let mut term = T::one() / a;
    let mut sum = term;
    for _ in 0..1000 {
        ap = ap + T::one();
        term = term * x / ap;
        sum = sum + term;
        if term.abs() < sum.abs() * eps {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_cont_frac<T: Scalar>(a: T, x: T) -> T {
    // modified Lentz
    let eps = T::epsilon();
    let tiny = T::min_positive_value() / eps;
    let mut b = x + T::one() - a;
    let mut c = T::one() / tiny;
    let mut d = T::one() / b;
    let mut h = d;
    for i in 1..1000 {
        let i = T::from_count(i);
        let an = -i * (i - a);
        b = b + T::lit(2.0);
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = T::one() / d;
        let del = d * c;
        h = h * del;
        if (del - T::one()).abs() < eps {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// `∫_a^b x^{ν-1} e^{-λx} dx` for `0 ≤ a ≤ b`, `ν > 0`, `λ > 0`.
///
/// Closed form through incomplete gamma functions; the upper function is
/// used away from the origin so that short far-out cells keep their
/// relative accuracy.
pub fn power_exp_moment<T: Scalar>(nu: T, lambda: T, a: T, b: T) -> T {
    debug_assert!(a >= T::zero() && b >= a);
    if b <= a {
        return T::zero();
    }
    let scale = gamma(nu) / lambda.powf(nu);
    let (la, lb) = (lambda * a, lambda * b);
    if la >= T::one() {
        scale * (gamma_q(nu, la) - gamma_q(nu, lb))
    } else {
        scale * (gamma_p(nu, lb) - gamma_p(nu, la))
    }
}

/// Exact moments of the exponential kernel on one cell of length `h`:
/// returns `(total, left, right)` with
/// `left = ∫₀ʰ e^{-λ(h-s)} (1 - s/h) ds`, `right = ∫₀ʰ e^{-λ(h-s)} s/h ds`
/// and `total = left + right = ∫₀ʰ e^{-λ(h-s)} ds`.
pub fn exp_cell_moments<T: Scalar>(lambda: T, h: T) -> (T, T, T) {
    let z = lambda * h;
    let (phi1, phi2) = if z.abs() < T::lit(0.5) {
        // alternating series; 24 terms is far below round-off for |z| < 1/2
        let mut phi1 = T::zero();
        let mut phi2 = T::zero();
        let mut zk = T::one();
        let mut fact = T::one(); // (k+1)!
        for k in 0..24usize {
            let kk = T::from_count(k);
            fact = fact * (kk + T::one());
            let sign = if k % 2 == 0 { T::one() } else { -T::one() };
            phi1 = phi1 + sign * zk / fact;
            phi2 = phi2 + sign * (kk + T::one()) * zk / (fact * (kk + T::lit(2.0)));
            zk = zk * z;
        }
        (phi1, phi2)
    } else {
        let e = (-z).exp();
        ((T::one() - e) / z, (T::one() - e * (T::one() + z)) / (z * z))
    };
    let total = h * phi1;
    let left = h * phi2;
    (total, left, total - left)
}

/// `sup_{z>0} z^p e^{-z/2} = (2p/e)^p`, with the convention `0^0 = 1`.
pub fn half_decay_sup<T: Scalar>(p: T) -> T {
    if p <= T::zero() {
        return T::one();
    }
    (T::lit(2.0) * p / T::E()).powf(p)
}

/// `sup_{z>0} z^p e^{-z} = (p/e)^p`, with the convention `0^0 = 1`.
pub fn full_decay_sup<T: Scalar>(p: T) -> T {
    if p <= T::zero() {
        return T::one();
    }
    (p / T::E()).powf(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gamma_at_integers_and_half() {
        for n in 1..15u32 {
            let fact: f64 = (1..n).map(f64::from).product();
            assert_relative_eq!(gamma(f64::from(n)), fact, max_relative = 1e-13);
        }
        assert_relative_eq!(gamma(0.5f64), std::f64::consts::PI.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn beta_closed_forms() {
        assert_relative_eq!(beta(1.0f64, 3.0), 1.0 / 3.0, max_relative = 1e-13);
        assert_relative_eq!(beta(0.5f64, 0.5), std::f64::consts::PI, max_relative = 1e-13);
        assert_relative_eq!(beta(2.0f64, 3.0), 1.0 / 12.0, max_relative = 1e-13);
    }

    #[test]
    fn incomplete_gamma_complements() {
        for &a in &[0.25f64, 0.5, 0.75, 1.0, 3.5] {
            for &x in &[1e-6f64, 0.1, 0.9, 1.5, 4.0, 30.0] {
                assert_relative_eq!(gamma_p(a, x) + gamma_q(a, x), 1.0, max_relative = 1e-13);
            }
        }
        // P(1, x) = 1 - e^{-x}
        assert_relative_eq!(gamma_p(1.0f64, 0.3), 1.0 - (-0.3f64).exp(), max_relative = 1e-13);
    }

    #[test]
    fn power_exp_moment_matches_nu_one() {
        // ν = 1 reduces to a plain exponential integral
        let m = power_exp_moment(1.0f64, 2.0, 0.5, 1.5);
        assert_relative_eq!(m, ((-1.0f64).exp() - (-3.0f64).exp()) / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn cell_moments_series_and_direct_agree_near_switch() {
        let h = 1.0f64;
        let below = exp_cell_moments(0.499_999_999, h);
        let above = exp_cell_moments(0.500_000_001, h);
        assert_relative_eq!(below.0, above.0, max_relative = 1e-8);
        assert_relative_eq!(below.1, above.1, max_relative = 1e-8);
        let (total, left, right) = exp_cell_moments(0.0f64, 0.25);
        assert_eq!(total, 0.25);
        assert_eq!(left, 0.125);
        assert_eq!(right, 0.125);
    }

    #[test]
    fn sup_constants() {
        assert_eq!(half_decay_sup(0.0f64), 1.0);
        // z^{1/2} e^{-z/2} peaks at z = 1
        assert_relative_eq!(half_decay_sup(0.5f64), (-0.5f64).exp(), max_relative = 1e-15);
    }
}
