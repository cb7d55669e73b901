//! Two-sided Q-Wiener paths on a uniform grid and the Wiener shift.
//!
//! A [`NoisePath`] is a shared immutable sample array plus an integer
//! offset. Shifting by `θ_t` only moves the offset, so `θ_s ∘ θ_t` and
//! `θ_{s+t}` read the exact same floating-point numbers.

use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::hilbert::norm;
use crate::io::{field, fmt, header_fields, parse};
use crate::{Error, Result, Scalar};

/// Covariance eigenvalues `q_j` of the truncated `U` and the grid step `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel<T> {
    q: Vec<T>,
    step: T,
}

impl<T: Scalar> NoiseModel<T> {
    /// `q_j >= 0`; a zero entry switches that direction off.
    pub fn new(q: Vec<T>, step: T) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::param("q", "noise dimension must be >= 1"));
        }
        if q.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::param("q", "covariance eigenvalues must be finite and >= 0"));
        }
        if !(step > T::zero()) || !step.is_finite() {
            return Err(Error::param("step", "grid step must be finite and > 0"));
        }
        Ok(NoiseModel { q, step })
    }

    /// `q_j = ratio^j`, `j = 1..=m`.
    pub fn geometric(m: usize, ratio: T, step: T) -> Result<Self> {
        Self::new((1..=m).map(|j| ratio.powi(j as i32)).collect(), step)
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn q(&self) -> &[T] {
        &self.q
    }

    pub fn step(&self) -> T {
        self.step
    }

    pub fn trace(&self) -> T {
        self.q.iter().copied().sum()
    }

    /// Index `k` with `t = k·h`, or [`Error::OffGrid`].
    pub fn grid_index(&self, t: T) -> Result<i64> {
        grid_index(t, self.step)
    }
}

pub(crate) fn grid_index<T: Scalar>(t: T, step: T) -> Result<i64> {
    let x = t / step;
    let k = x.round();
    let tol = T::lit(1e-7) * T::one().max(k.abs());
    if !x.is_finite() || (x - k).abs() > tol {
        return Err(Error::OffGrid { time: t.to_f64_lossy(), step: step.to_f64_lossy() });
    }
    k.to_i64().ok_or_else(|| Error::OffGrid { time: t.to_f64_lossy(), step: step.to_f64_lossy() })
}

#[derive(Debug)]
struct PathData<T> {
    model: NoiseModel<T>,
    i_min: i64,
    i_max: i64,
    /// row-major, `dim` entries per grid index
    samples: Vec<T>,
    seed: u64,
}

impl<T: Scalar> PathData<T> {
    #[inline]
    fn row(&self, i: i64) -> &[T] {
        let m = self.model.dim();
        let r = (i - self.i_min) as usize;
        &self.samples[r * m..(r + 1) * m]
    }
}

/// Grid-sampled two-sided path `ω` with `ω(0) = 0`.
#[derive(Debug, Clone)]
pub struct NoisePath<T> {
    data: Arc<PathData<T>>,
    offset: i64,
}

impl<T: Scalar> NoisePath<T> {
    /// Samples a path covering `[t_min, t_max]` from two independent
    /// one-sided random walks glued at zero.
    pub fn sample(model: &NoiseModel<T>, t_min: T, t_max: T, seed: u64) -> Result<Self> {
        if !(t_min <= T::zero() && t_max >= T::zero()) {
            return Err(Error::param("window", "need t_min <= 0 <= t_max"));
        }
        let h = model.step();
        let i_min = -(((-t_min) / h) - T::lit(1e-9)).ceil().to_i64().unwrap_or(0).max(0);
        let i_max = ((t_max / h) - T::lit(1e-9)).ceil().to_i64().unwrap_or(0).max(0);
        if i_min == i_max {
            return Err(Error::param("window", "sampling window is empty"));
        }
        let m = model.dim();
        let len = (i_max - i_min + 1) as usize;
        let mut samples = vec![T::zero(); len * m];
        let scales: Vec<T> = model.q().iter().map(|&q| (q * h).sqrt()).collect();
        let zero_row = (-i_min) as usize;

        let mut forward = ChaCha8Rng::seed_from_u64(seed);
        forward.set_stream(1);
        for r in zero_row + 1..len {
            for j in 0..m {
                let z: f64 = StandardNormal.sample(&mut forward);
                samples[r * m + j] = samples[(r - 1) * m + j] + scales[j] * T::lit(z);
            }
        }
        let mut backward = ChaCha8Rng::seed_from_u64(seed);
        backward.set_stream(2);
        for r in (0..zero_row).rev() {
            for j in 0..m {
                let z: f64 = StandardNormal.sample(&mut backward);
                samples[r * m + j] = samples[(r + 1) * m + j] + scales[j] * T::lit(z);
            }
        }
        Ok(Self::from_parts(model.clone(), i_min, i_max, samples, seed))
    }

    /// Wraps explicit samples, one row per grid index `i_min..=i_max`.
    pub fn from_rows(model: &NoiseModel<T>, i_min: i64, rows: Vec<Vec<T>>, seed: u64) -> Result<Self> {
        let m = model.dim();
        if i_min > 0 || rows.is_empty() {
            return Err(Error::param("rows", "window must contain the origin"));
        }
        let i_max = i_min + rows.len() as i64 - 1;
        if i_max < 0 {
            return Err(Error::param("rows", "window must contain the origin"));
        }
        let mut samples = Vec::with_capacity(rows.len() * m);
        for row in &rows {
            if row.len() != m {
                return Err(Error::DimensionMismatch { what: "noise sample", expected: m, got: row.len() });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::param("rows", "noise samples must be finite"));
            }
            samples.extend_from_slice(row);
        }
        if rows[(-i_min) as usize].iter().any(|v| *v != T::zero()) {
            return Err(Error::param("rows", "path must vanish at t = 0"));
        }
        Ok(Self::from_parts(model.clone(), i_min, i_max, samples, seed))
    }

    /// Synthetic path `ω(s) = f(s)·v` on `[i_min·h, i_max·h]`; `f(0)` must be 0.
    pub fn from_fn(model: &NoiseModel<T>, i_min: i64, i_max: i64, f: impl Fn(T) -> Vec<T>) -> Result<Self> {
        let h = model.step();
        let rows = (i_min..=i_max).map(|i| f(T::from_i64(i).unwrap() * h)).collect();
        Self::from_rows(model, i_min, rows, 0)
    }

    /// Identically zero path.
    pub fn zero(model: &NoiseModel<T>, i_min: i64, i_max: i64) -> Result<Self> {
        let m = model.dim();
        Self::from_fn(model, i_min, i_max, |_| vec![T::zero(); m])
    }

    fn from_parts(model: NoiseModel<T>, i_min: i64, i_max: i64, samples: Vec<T>, seed: u64) -> Self {
        NoisePath { data: Arc::new(PathData { model, i_min, i_max, samples, seed }), offset: 0 }
    }

    pub fn model(&self) -> &NoiseModel<T> {
        &self.data.model
    }

    pub fn dim(&self) -> usize {
        self.data.model.dim()
    }

    pub fn step(&self) -> T {
        self.data.model.step()
    }

    pub fn seed(&self) -> u64 {
        self.data.seed
    }

    /// Accumulated shift of this view relative to the sampled base path.
    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn i_min(&self) -> i64 {
        self.data.i_min - self.offset
    }

    pub fn i_max(&self) -> i64 {
        self.data.i_max - self.offset
    }

    pub fn t_min(&self) -> T {
        T::from_i64(self.i_min()).unwrap() * self.step()
    }

    pub fn t_max(&self) -> T {
        T::from_i64(self.i_max()).unwrap() * self.step()
    }

    pub fn contains_index(&self, i: i64) -> bool {
        i >= self.i_min() && i <= self.i_max()
    }

    fn check_index(&self, i: i64) -> Result<()> {
        if !self.contains_index(i) {
            let h = self.step().to_f64_lossy();
            return Err(Error::OutOfWindow {
                start: i as f64 * h,
                end: i as f64 * h,
                available_start: self.i_min() as f64 * h,
                available_end: self.i_max() as f64 * h,
            });
        }
        Ok(())
    }

    /// Writes `ω(i·h)` into `out`. Panics outside the window.
    #[inline]
    pub fn value_into(&self, i: i64, out: &mut [T]) {
        let row = self.data.row(i + self.offset);
        if self.offset == 0 {
            out.copy_from_slice(row);
        } else {
            let base = self.data.row(self.offset);
            for ((o, &a), &b) in out.iter_mut().zip(row).zip(base) {
                *o = a - b;
            }
        }
    }

    pub fn value(&self, i: i64) -> Result<Vec<T>> {
        self.check_index(i)?;
        let mut out = vec![T::zero(); self.dim()];
        self.value_into(i, &mut out);
        Ok(out)
    }

    /// `ω(t)` at a grid-aligned time.
    pub fn at(&self, t: T) -> Result<Vec<T>> {
        self.value(grid_index(t, self.step())?)
    }

    #[inline]
    pub(crate) fn norm_at(&self, i: i64, buf: &mut [T]) -> T {
        self.value_into(i, buf);
        norm(buf)
    }

    /// Values for indices `from..=to` packed row-major.
    pub fn window_values(&self, from: i64, to: i64) -> Result<Vec<T>> {
        self.check_index(from)?;
        self.check_index(to)?;
        let m = self.dim();
        let mut out = vec![T::zero(); ((to - from + 1).max(0) as usize) * m];
        for (r, i) in (from..=to).enumerate() {
            self.value_into(i, &mut out[r * m..(r + 1) * m]);
        }
        Ok(out)
    }

    /// Wiener shift `θ_t ω(·) = ω(· + t) - ω(t)` for grid-aligned `t`.
    pub fn wiener_shift(&self, t: T) -> Result<Self> {
        self.shift_steps(grid_index(t, self.step())?)
    }

    /// `θ_{k·h}`.
    pub fn shift_steps(&self, k: i64) -> Result<Self> {
        if !self.contains_index(k) {
            return Err(Error::param("t", "shift moves the origin outside the sampled window"));
        }
        Ok(NoisePath { data: Arc::clone(&self.data), offset: self.offset + k })
    }

    /// Copies the visible window into a fresh base path (offset 0).
    pub fn materialize(&self) -> Self {
        let samples = self.window_values(self.i_min(), self.i_max()).expect("own window");
        Self::from_parts(self.data.model.clone(), self.i_min(), self.i_max(), samples, self.data.seed)
    }

    /// `c·ω` as a new base path.
    pub fn scaled(&self, c: T) -> Self {
        let mut p = self.materialize();
        let data = Arc::get_mut(&mut p.data).expect("fresh path");
        for v in &mut data.samples {
            *v = *v * c;
        }
        p
    }

    /// Same path observed on a grid `factor` times coarser.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::param("factor", "must be >= 1"));
        }
        let f = factor as i64;
        let lo = self.i_min().div_euclid(f) + i64::from(self.i_min().rem_euclid(f) != 0);
        let hi = self.i_max().div_euclid(f);
        let model = NoiseModel::new(self.data.model.q.clone(), self.step() * T::from_count(factor))?;
        let m = self.dim();
        let mut samples = vec![T::zero(); ((hi - lo + 1) as usize) * m];
        for (r, i) in (lo..=hi).enumerate() {
            self.value_into(i * f, &mut samples[r * m..(r + 1) * m]);
        }
        Ok(Self::from_parts(model, lo, hi, samples, self.data.seed))
    }

    fn index_range(&self, a: T, b: T) -> Result<(i64, i64)> {
        let h = self.step();
        let (ia, ib) = (grid_index(a, h)?, grid_index(b, h)?);
        if ia > ib {
            return Err(Error::param("interval", "need a <= b"));
        }
        self.check_index(ia)?;
        self.check_index(ib)?;
        Ok((ia, ib))
    }

    /// `β`-Hölder seminorm over every pair of grid points in `[a, b]`.
    pub fn holder_seminorm(&self, beta: T, a: T, b: T) -> Result<T> {
        let (ia, ib) = self.index_range(a, b)?;
        if ia == ib {
            return Err(Error::param("interval", "degenerate interval"));
        }
        self.holder_seminorm_indices(beta, ia, ib, None)
    }

    /// Restricts the pair search to gaps of at most `max_gap` steps; the
    /// result is a lower bound of [`Self::holder_seminorm`].
    pub fn holder_seminorm_windowed(&self, beta: T, a: T, b: T, max_gap: usize) -> Result<T> {
        let (ia, ib) = self.index_range(a, b)?;
        if ia == ib {
            return Err(Error::param("interval", "degenerate interval"));
        }
        self.holder_seminorm_indices(beta, ia, ib, Some(max_gap.max(1)))
    }

    fn holder_seminorm_indices(&self, beta: T, ia: i64, ib: i64, max_gap: Option<usize>) -> Result<T> {
        check_beta(beta)?;
        let vals = self.window_values(ia, ib)?;
        let m = self.dim();
        let n = (ib - ia) as usize;
        let weights = gap_weights(beta, self.step(), n);
        let mut best = T::zero();
        for j in 1..=n {
            let lo = match max_gap {
                Some(g) => j.saturating_sub(g),
                None => 0,
            };
            let vj = &vals[j * m..(j + 1) * m];
            for i in lo..j {
                let d = crate::hilbert::dist(vj, &vals[i * m..(i + 1) * m]);
                best = best.max(d * weights[j - i]);
            }
        }
        Ok(best)
    }

    /// Running seminorm `‖ω‖_{β, 0, k·h}` for `k = 0..=steps` (entry 0 is 0).
    ///
    /// Each new right endpoint only adds the pairs that end there, so the
    /// whole profile costs `O(steps²)`.
    pub fn holder_profile(&self, beta: T, steps: usize) -> Result<Vec<T>> {
        check_beta(beta)?;
        let vals = self.window_values(0, steps as i64)?;
        let m = self.dim();
        let weights = gap_weights(beta, self.step(), steps);
        let mut out = Vec::with_capacity(steps + 1);
        let mut best = T::zero();
        out.push(best);
        for j in 1..=steps {
            let vj = &vals[j * m..(j + 1) * m];
            for i in 0..j {
                let d = crate::hilbert::dist(vj, &vals[i * m..(i + 1) * m]);
                best = best.max(d * weights[j - i]);
            }
            out.push(best);
        }
        Ok(out)
    }

    /// `max |ω(s)|_U` over grid `s ∈ [a, b]`.
    pub fn sup_window(&self, a: T, b: T) -> Result<T> {
        let (ia, ib) = self.index_range(a, b)?;
        Ok(self.sup_indices(ia, ib))
    }

    pub(crate) fn sup_indices(&self, ia: i64, ib: i64) -> T {
        let mut buf = vec![T::zero(); self.dim()];
        (ia..=ib).map(|i| self.norm_at(i, &mut buf)).fold(T::zero(), T::max)
    }

    /// Sliding `‖ω_{-k·h}‖_μ = sup_{s ∈ [-μ,0]} |ω(-k·h + s)|` for
    /// `k = 0..=count`, with `μ = delay_steps·h`.
    pub(crate) fn backward_window_sups(&self, delay_steps: usize, count: usize) -> Result<Vec<T>> {
        let lo = -(count as i64) - delay_steps as i64;
        self.check_index(lo)?;
        let mut buf = vec![T::zero(); self.dim()];
        let norms: Vec<T> = (lo..=0).map(|i| self.norm_at(i, &mut buf)).collect();
        // norms[r] is |ω(lo + r)|; window for k covers lo+count-k .. lo+count-k+delay
        Ok(sliding_max(&norms, delay_steps + 1).into_iter().rev().collect())
    }

    /// Trend probe for `lim_{t→∞} e^{-2κt} ‖ω_{-t}‖_μ = 0` on the available
    /// history, sampled every `μ`.
    pub fn sublinearity_probe(&self, kappa: T, mu: T) -> Result<TrendProbe<T>> {
        if !(kappa > T::zero()) {
            return Err(Error::param("kappa", "must be > 0"));
        }
        let h = self.step();
        let m = grid_index(mu, h)?;
        if m < 1 {
            return Err(Error::param("mu", "window must span at least one grid step"));
        }
        let room = -self.i_min() - m;
        if room < 0 {
            return Err(Error::InsufficientHistory {
                needed: -(mu.to_f64_lossy()),
                available: self.t_min().to_f64_lossy(),
            });
        }
        let sups = self.backward_window_sups(m as usize, room as usize)?;
        let two = T::lit(2.0);
        let rows: Vec<(T, T)> = (0..=room)
            .step_by(m as usize)
            .map(|k| {
                let t = T::from_i64(k).unwrap() * h;
                (t, (-two * kappa * t).exp() * sups[k as usize])
            })
            .collect();
        Ok(TrendProbe::from_rows(rows))
    }

    /// CSV export: header comments carry the model and window, then one
    /// row `i,t,w_1..w_M` per grid index.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let m = self.dim();
        writeln!(w, "# rspde noise path")?;
        writeln!(
            w,
            "# h={},M={},i_min={},i_max={},seed={}",
            fmt(self.step()),
            m,
            self.i_min(),
            self.i_max(),
            self.seed()
        )?;
        let q: Vec<String> = self.model().q().iter().map(|&v| fmt(v)).collect();
        writeln!(w, "# q={}", q.join(";"))?;
        let mut head = vec!["i".to_string(), "t".to_string()];
        head.extend((1..=m).map(|j| format!("w_{j}")));
        writeln!(w, "{}", head.join(","))?;
        let mut buf = vec![T::zero(); m];
        let h = self.step();
        for i in self.i_min()..=self.i_max() {
            self.value_into(i, &mut buf);
            let vals: Vec<String> = buf.iter().map(|&v| fmt(v)).collect();
            writeln!(w, "{},{},{}", i, fmt(T::from_i64(i).unwrap() * h), vals.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::Parse("unexpected end of file".into()))?
                .map_err(|e| Error::Parse(e.to_string()))
        };
        let _title = next()?;
        let header = header_fields(&next()?);
        let qline = next()?;
        let _columns = next()?;
        let h: T = parse(field(&header, "h")?)?;
        let m: usize = field(&header, "M")?.parse().map_err(|_| Error::Parse("bad M".into()))?;
        let i_min: i64 = field(&header, "i_min")?.parse().map_err(|_| Error::Parse("bad i_min".into()))?;
        let i_max: i64 = field(&header, "i_max")?.parse().map_err(|_| Error::Parse("bad i_max".into()))?;
        let seed: u64 = field(&header, "seed")?.parse().map_err(|_| Error::Parse("bad seed".into()))?;
        let q = qline
            .trim_start_matches('#')
            .trim()
            .trim_start_matches("q=")
            .split(';')
            .map(parse)
            .collect::<Result<Vec<T>>>()?;
        let model = NoiseModel::new(q, h)?;
        if model.dim() != m {
            return Err(Error::DimensionMismatch { what: "q header", expected: m, got: model.dim() });
        }
        let mut rows = Vec::with_capacity((i_max - i_min + 1).max(0) as usize);
        for line in lines {
            let line = line.map_err(|e| Error::Parse(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != m + 2 {
                return Err(Error::Parse(format!("expected {} columns, got {}", m + 2, cols.len())));
            }
            rows.push(cols[2..].iter().map(|c| parse(c)).collect::<Result<Vec<T>>>()?);
        }
        if rows.len() as i64 != i_max - i_min + 1 {
            return Err(Error::Parse("row count does not match the header window".into()));
        }
        Self::from_rows(&model, i_min, rows, seed)
    }
}

fn check_beta<T: Scalar>(beta: T) -> Result<()> {
    if !(beta > T::zero() && beta < T::lit(0.5)) {
        return Err(Error::param("beta", "Hölder exponent must lie in (0, 1/2)"));
    }
    Ok(())
}

/// `(k·h)^{-β}` for `k = 0..=n` (entry 0 unused).
fn gap_weights<T: Scalar>(beta: T, h: T, n: usize) -> Vec<T> {
    (0..=n).map(|k| if k == 0 { T::zero() } else { (T::from_count(k) * h).powf(-beta) }).collect()
}

/// `out[i] = max(x[i..i+w])` for every full window.
pub(crate) fn sliding_max<T: Scalar>(x: &[T], w: usize) -> Vec<T> {
    use std::collections::VecDeque;
    let mut out = Vec::with_capacity(x.len().saturating_sub(w) + 1);
    let mut dq: VecDeque<usize> = VecDeque::new();
    for i in 0..x.len() {
        while let Some(&b) = dq.back() {
            if x[b] <= x[i] {
                dq.pop_back();
            } else {
                break;
            }
        }
        dq.push_back(i);
        if let Some(&f) = dq.front() {
            if f + w <= i {
                dq.pop_front();
            }
        }
        if i + 1 >= w {
            out.push(x[*dq.front().unwrap()]);
        }
    }
    out
}

/// Table `(t, value)` of a decay trend probe with its PASS verdict.
///
/// PASS iff the value at the largest probed `t` is at most half the value
/// at `t = 0` (identically zero tables pass).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendProbe<T> {
    pub rows: Vec<(T, T)>,
    pub pass: bool,
}

impl<T: Scalar> TrendProbe<T> {
    pub fn from_rows(rows: Vec<(T, T)>) -> Self {
        let pass = match (rows.first(), rows.last()) {
            (Some(first), Some(last)) => last.1 <= T::lit(0.5) * first.1,
            _ => true,
        };
        TrendProbe { rows, pass }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(m: usize) -> NoiseModel<f64> {
        NoiseModel::geometric(m, 0.5, 1.0 / 64.0).unwrap()
    }

    #[test]
    fn zero_covariance_gives_zero_path() {
        let z = NoiseModel::new(vec![0.0], 0.01).unwrap();
        let p = NoisePath::sample(&z, -1.0, 1.0, 7).unwrap();
        for i in p.i_min()..=p.i_max() {
            assert_eq!(p.value(i).unwrap(), vec![0.0]);
        }
    }

    #[test]
    fn sampling_is_deterministic_and_pinned_at_zero() {
        let m = model(3);
        let a = NoisePath::sample(&m, -2.0, 2.0, 11).unwrap();
        let b = NoisePath::sample(&m, -2.0, 2.0, 11).unwrap();
        let c = NoisePath::sample(&m, -2.0, 2.0, 12).unwrap();
        assert_eq!(a.value(0).unwrap(), vec![0.0; 3]);
        assert_eq!(a.window_values(-128, 128).unwrap(), b.window_values(-128, 128).unwrap());
        assert_ne!(a.window_values(1, 1).unwrap(), c.window_values(1, 1).unwrap());
        assert_eq!((a.i_min(), a.i_max()), (-128, 128));
    }

    #[test]
    fn empty_window_rejected() {
        assert!(NoisePath::sample(&model(1), 0.0, 0.0, 1).is_err());
        assert!(NoisePath::sample(&model(1), 0.5, 1.0, 1).is_err());
    }

    #[test]
    fn shift_by_zero_is_identity_and_off_grid_rejected() {
        let p = NoisePath::sample(&model(2), -1.0, 1.0, 3).unwrap();
        let q = p.wiener_shift(0.0).unwrap();
        assert_eq!(p.window_values(-64, 64).unwrap(), q.window_values(-64, 64).unwrap());
        assert!(p.wiener_shift(0.01).is_err());
        assert!(p.wiener_shift(2.0).is_err());
    }

    #[test]
    fn linear_path_is_shift_invariant() {
        let m = NoiseModel::new(vec![1.0], 1.0 / 1024.0).unwrap();
        let p = NoisePath::from_fn(&m, -2048, 2048, |s| vec![s]).unwrap();
        let q = p.wiener_shift(0.5).unwrap();
        for i in q.i_min()..=q.i_max() {
            assert_eq!(q.value(i).unwrap()[0], i as f64 / 1024.0);
        }
    }

    #[test]
    fn holder_of_identity_path() {
        let m = NoiseModel::new(vec![1.0_f64], 1.0 / 64.0).unwrap();
        let p = NoisePath::from_fn(&m, 0, 64, |s| vec![s]).unwrap();
        let v: f64 = p.holder_seminorm(0.25, 0.0, 1.0).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        let c = NoisePath::zero(&m, 0, 64).unwrap();
        assert_eq!(c.holder_seminorm(0.25, 0.0, 1.0).unwrap(), 0.0);
        assert!(p.holder_seminorm(0.25, 0.5, 0.5).is_err());
        assert!(p.holder_seminorm(0.6, 0.0, 1.0).is_err());
    }

    #[test]
    fn profile_matches_full_double_loop() {
        let p = NoisePath::sample(&model(2), -1.0, 1.0, 5).unwrap();
        let prof = p.holder_profile(0.3, 64).unwrap();
        for k in [1usize, 2, 7, 33, 64] {
            let t = k as f64 / 64.0;
            assert_eq!(prof[k], p.holder_seminorm(0.3, 0.0, t).unwrap());
        }
    }

    #[test]
    fn sup_window_examples() {
        let m = NoiseModel::new(vec![1.0], 0.25).unwrap();
        let p = NoisePath::from_fn(&m, -8, 0, |s| vec![s]).unwrap();
        assert_eq!(p.sup_window(-2.0, -1.0).unwrap(), 2.0);
        let z = NoisePath::zero(&m, -8, 0).unwrap();
        assert_eq!(z.sup_window(-2.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn backward_sups_match_direct_scan() {
        let p = NoisePath::sample(&model(2), -3.0, 0.5, 9).unwrap();
        let sups = p.backward_window_sups(8, 100).unwrap();
        for k in [0usize, 1, 8, 50, 100] {
            let t = -(k as f64) / 64.0;
            assert_eq!(sups[k], p.sup_window(t - 0.125, t).unwrap());
        }
    }

    #[test]
    fn sliding_max_basic() {
        assert_eq!(sliding_max(&[1.0, 3.0, 2.0, 0.0, 5.0], 2), vec![3.0, 3.0, 2.0, 5.0]);
        assert_eq!(sliding_max(&[1.0, 3.0, 2.0], 1), vec![1.0, 3.0, 2.0]);
    }

    #[test]
    fn coarsen_keeps_values() {
        let p = NoisePath::sample(&model(2), -1.0, 1.0, 4).unwrap();
        let c = p.coarsen(4).unwrap();
        assert_eq!(c.step(), 4.0 / 64.0);
        assert_eq!(c.value(3).unwrap(), p.value(12).unwrap());
        assert_eq!(c.value(-2).unwrap(), p.value(-8).unwrap());
    }

    #[test]
    fn sublinearity_probe_examples() {
        let m = NoiseModel::new(vec![1.0], 1.0 / 64.0).unwrap();
        let zero = NoisePath::zero(&m, -640, 0).unwrap();
        let probe = zero.sublinearity_probe(1.0, 0.25).unwrap();
        assert!(probe.pass);
        assert!(probe.rows.iter().all(|r| r.1 == 0.0));
        let lin = NoisePath::from_fn(&m, -640, 0, |s| vec![s]).unwrap();
        let probe = lin.sublinearity_probe(1.0, 0.25).unwrap();
        assert!(probe.pass);
        // (t + μ) e^{-2t} decreases once t > 1/2 - μ
        let tail: Vec<f64> = probe.rows.iter().filter(|r| r.0 >= 0.5).map(|r| r.1).collect();
        assert!(tail.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn csv_round_trip_of_shifted_path() {
        let p = NoisePath::sample(&model(2), -1.0, 1.0, 21).unwrap().wiener_shift(0.25).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let back = NoisePath::<f64>::read_csv(buf.as_slice()).unwrap();
        assert_eq!((back.i_min(), back.i_max()), (p.i_min(), p.i_max()));
        assert_eq!(back.seed(), 21);
        assert_eq!(
            back.window_values(back.i_min(), back.i_max()).unwrap(),
            p.window_values(p.i_min(), p.i_max()).unwrap()
        );
    }
}
