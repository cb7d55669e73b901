//! The delay state space `C_μ = C([-μ,0]; H)` sampled on the time grid.

use std::io::Write;

use serde::Serialize;

use crate::hilbert::{check_unit_interval, dist, norm, SpectralOperator};
use crate::io::fmt;
use crate::noise::grid_index;
use crate::{Error, HVector, Result, Scalar};

/// Borrowed `m + 1` consecutive states `s_0 … s_m` at `-μ, …, 0`.
#[derive(Debug, Clone, Copy)]
pub struct SegmentView<'a, T> {
    data: &'a [T],
    dim: usize,
}

impl<'a, T: Scalar> SegmentView<'a, T> {
    pub(crate) fn new(data: &'a [T], dim: usize) -> Self {
        debug_assert!(dim > 0 && data.len().is_multiple_of(dim) && data.len() >= 2 * dim);
        SegmentView { data, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub(crate) fn data(&self) -> &'a [T] {
        self.data
    }

    /// Number of grid steps `m` spanned by the segment.
    pub fn delay_steps(&self) -> usize {
        self.data.len() / self.dim - 1
    }

    /// Sample `i`, located at time `-μ + i·h`.
    #[inline]
    pub fn at(&self, i: usize) -> &'a [T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// `x(0)`.
    #[inline]
    pub fn head(&self) -> &'a [T] {
        self.at(self.delay_steps())
    }

    /// `x(-μ)`.
    #[inline]
    pub fn tail(&self) -> &'a [T] {
        self.at(0)
    }

    pub fn sup_norm(&self) -> T {
        (0..=self.delay_steps()).map(|i| norm(self.at(i))).fold(T::zero(), T::max)
    }

    pub fn sup_dist(&self, other: &SegmentView<'_, T>) -> T {
        (0..=self.delay_steps()).map(|i| dist(self.at(i), other.at(i))).fold(T::zero(), T::max)
    }
}

/// Owned grid-sampled segment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segment<T> {
    dim: usize,
    step: T,
    data: Vec<T>,
}

impl<T: Scalar> Segment<T> {
    /// Samples `f` at `s = -μ + i·h`, `i = 0..=m`.
    pub fn from_fn(dim: usize, delay_steps: usize, step: T, f: impl Fn(T) -> Vec<T>) -> Result<Self> {
        let samples = (0..=delay_steps)
            .map(|i| HVector(f(T::from_count(i) * step - T::from_count(delay_steps) * step)))
            .collect();
        Self::from_samples(dim, step, samples)
    }

    pub fn from_samples(dim: usize, step: T, samples: Vec<HVector<T>>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::param("samples", "a segment spans at least one grid step"));
        }
        if !(step > T::zero()) {
            return Err(Error::param("step", "grid step must be > 0"));
        }
        let mut data = Vec::with_capacity(samples.len() * dim);
        for s in &samples {
            if s.len() != dim {
                return Err(Error::DimensionMismatch { what: "segment sample", expected: dim, got: s.len() });
            }
            if !s.is_finite() {
                return Err(Error::param("samples", "segment entries must be finite"));
            }
            data.extend_from_slice(s.as_slice());
        }
        Ok(Segment { dim, step, data })
    }

    pub fn constant(value: &HVector<T>, delay_steps: usize, step: T) -> Result<Self> {
        Self::from_samples(value.len(), step, vec![value.clone(); delay_steps + 1])
    }

    pub(crate) fn from_raw(dim: usize, step: T, data: Vec<T>) -> Self {
        Segment { dim, step, data }
    }

    pub fn view(&self) -> SegmentView<'_, T> {
        SegmentView::new(&self.data, self.dim)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn step(&self) -> T {
        self.step
    }

    pub fn delay_steps(&self) -> usize {
        self.data.len() / self.dim - 1
    }

    /// `μ = m·h`.
    pub fn delay(&self) -> T {
        T::from_count(self.delay_steps()) * self.step
    }

    pub fn sample(&self, i: usize) -> &[T] {
        self.view().at(i)
    }

    pub fn samples(&self) -> Vec<HVector<T>> {
        (0..=self.delay_steps()).map(|i| HVector::from_slice(self.sample(i))).collect()
    }

    pub fn head(&self) -> &[T] {
        self.view().head()
    }

    /// `‖x‖_μ = max_i |s_i|`.
    pub fn sup_norm(&self) -> T {
        self.view().sup_norm()
    }

    pub fn sup_dist(&self, other: &Segment<T>) -> T {
        self.view().sup_dist(&other.view())
    }

    pub fn add(&self, other: &Segment<T>) -> Segment<T> {
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect();
        Segment { dim: self.dim, step: self.step, data }
    }

    pub fn sub(&self, other: &Segment<T>) -> Segment<T> {
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect();
        Segment { dim: self.dim, step: self.step, data }
    }

    pub fn scaled(&self, c: T) -> Segment<T> {
        Segment { dim: self.dim, step: self.step, data: self.data.iter().map(|&v| c * v).collect() }
    }

    /// `(max_i |(-A)^ε s_i|, max_{i<j} |s_i - s_j| / ((j-i)h)^α)`.
    pub fn diagnostics(&self, op: &SpectralOperator<T>, epsilon: T, alpha: T) -> Result<SegmentDiagnostics<T>> {
        segment_diagnostics(&self.view(), self.step, op, epsilon, alpha)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write_rows(&mut w, self.dim, self.step, -(self.delay_steps() as i64), &self.data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SegmentDiagnostics<T> {
    pub fractional_sup: T,
    pub holder_alpha: T,
}

pub fn segment_diagnostics<T: Scalar>(
    seg: &SegmentView<'_, T>,
    step: T,
    op: &SpectralOperator<T>,
    epsilon: T,
    alpha: T,
) -> Result<SegmentDiagnostics<T>> {
    if !(epsilon > T::zero() && epsilon < T::one()) {
        return Err(Error::param("epsilon", "must lie in (0, 1)"));
    }
    if !(alpha > T::zero()) {
        return Err(Error::param("alpha", "must lie in (0, 1]"));
    }
    check_unit_interval("alpha", alpha)?;
    if op.dim() != seg.dim() {
        return Err(Error::DimensionMismatch { what: "segment vs operator", expected: op.dim(), got: seg.dim() });
    }
    let m = seg.delay_steps();
    let fractional_sup = (0..=m).map(|i| op.fractional_norm(epsilon, seg.at(i))).fold(T::zero(), T::max);
    let weights: Vec<T> =
        (0..=m).map(|k| if k == 0 { T::zero() } else { (T::from_count(k) * step).powf(-alpha) }).collect();
    let mut holder_alpha = T::zero();
    for j in 1..=m {
        for i in 0..j {
            holder_alpha = holder_alpha.max(dist(seg.at(i), seg.at(j)) * weights[j - i]);
        }
    }
    Ok(SegmentDiagnostics { fractional_sup, holder_alpha })
}

/// Path `u` on `[-μ, T]`, grid-sampled.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory<T> {
    dim: usize,
    delay_steps: usize,
    step: T,
    /// rows for grid indices `-m ..= steps`
    data: Vec<T>,
}

impl<T: Scalar> Trajectory<T> {
    /// Trajectory holding only the initial segment.
    pub fn from_initial(xi: &Segment<T>) -> Self {
        Trajectory { dim: xi.dim, delay_steps: xi.delay_steps(), step: xi.step, data: xi.data.clone() }
    }

    /// `ξ` continued by its endpoint value for `steps` grid steps.
    pub fn constant_extension(xi: &Segment<T>, steps: usize) -> Self {
        let mut tr = Self::from_initial(xi);
        let head = xi.head().to_vec();
        for _ in 0..steps {
            tr.push(&head);
        }
        tr
    }

    /// Samples `f` at every grid time of `[-μ, steps·h]`.
    pub fn from_fn(dim: usize, delay_steps: usize, steps: usize, step: T, f: impl Fn(T) -> Vec<T>) -> Result<Self> {
        let mut data = Vec::with_capacity((delay_steps + steps + 1) * dim);
        for j in -(delay_steps as i64)..=(steps as i64) {
            let v = f(T::from_i64(j).unwrap() * step);
            if v.len() != dim {
                return Err(Error::DimensionMismatch { what: "trajectory sample", expected: dim, got: v.len() });
            }
            data.extend(v);
        }
        Ok(Trajectory { dim, delay_steps, step, data })
    }

    pub(crate) fn push(&mut self, state: &[T]) {
        debug_assert_eq!(state.len(), self.dim);
        self.data.extend_from_slice(state);
    }

    pub(crate) fn raw(&self) -> &[T] {
        &self.data
    }

    pub(crate) fn raw_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn step(&self) -> T {
        self.step
    }

    pub fn delay_steps(&self) -> usize {
        self.delay_steps
    }

    /// Number of grid steps after `t = 0`.
    pub fn steps(&self) -> usize {
        self.data.len() / self.dim - self.delay_steps - 1
    }

    pub fn end_time(&self) -> T {
        T::from_count(self.steps()) * self.step
    }

    /// `u(j·h)` for `j ∈ [-m, steps]`.
    #[inline]
    pub fn state(&self, j: i64) -> &[T] {
        let r = (j + self.delay_steps as i64) as usize;
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    /// `u(t)` at a grid time.
    pub fn at(&self, t: T) -> Result<HVector<T>> {
        let j = self.index_of(t)?;
        Ok(HVector::from_slice(self.state(j)))
    }

    fn index_of(&self, t: T) -> Result<i64> {
        let j = grid_index(t, self.step)?;
        if j < -(self.delay_steps as i64) || j > self.steps() as i64 {
            return Err(Error::OutOfWindow {
                start: t.to_f64_lossy(),
                end: t.to_f64_lossy(),
                available_start: -(T::from_count(self.delay_steps) * self.step).to_f64_lossy(),
                available_end: self.end_time().to_f64_lossy(),
            });
        }
        Ok(j)
    }

    /// `u_{k·h}` borrowed; `k ∈ [0, steps]`.
    #[inline]
    pub fn view_at(&self, k: usize) -> SegmentView<'_, T> {
        let start = k * self.dim;
        SegmentView::new(&self.data[start..start + (self.delay_steps + 1) * self.dim], self.dim)
    }

    /// `u_t(s) = u(t + s)`, `s ∈ [-μ, 0]`.
    pub fn segment_at(&self, t: T) -> Result<Segment<T>> {
        let k = self.index_of(t)?;
        if k < 0 {
            return Err(Error::param("t", "segment time must be >= 0"));
        }
        Ok(self.segment_at_step(k as usize))
    }

    pub fn segment_at_step(&self, k: usize) -> Segment<T> {
        Segment::from_raw(self.dim, self.step, self.view_at(k).data.to_vec())
    }

    /// `|||u||| = max over all grid times of |u|`.
    pub fn sup_norm(&self) -> T {
        self.data.chunks(self.dim).map(norm).fold(T::zero(), T::max)
    }

    /// `max_j |u(j) - v(j)|` over the common grid.
    pub fn sup_dist(&self, other: &Trajectory<T>) -> T {
        self.data.chunks(self.dim).zip(other.data.chunks(other.dim)).map(|(a, b)| dist(a, b)).fold(T::zero(), T::max)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write_rows(&mut w, self.dim, self.step, -(self.delay_steps as i64), &self.data)
    }
}

fn write_rows<T: Scalar, W: Write>(w: &mut W, dim: usize, step: T, first: i64, data: &[T]) -> std::io::Result<()> {
    let mut head = vec!["t".to_string()];
    head.extend((1..=dim).map(|k| format!("x_{k}")));
    writeln!(w, "{}", head.join(","))?;
    for (r, row) in data.chunks(dim).enumerate() {
        let t = T::from_i64(first + r as i64).unwrap() * step;
        let vals: Vec<String> = row.iter().map(|&v| fmt(v)).collect();
        writeln!(w, "{},{}", fmt(t), vals.join(","))?;
    }
    Ok(())
}

/// Hausdorff semidistance `sup_{x∈X} inf_{y∈Y} ‖x - y‖_μ`.
pub fn hausdorff_semidistance<T: Scalar>(xs: &[Segment<T>], ys: &[Segment<T>]) -> T {
    xs.iter().map(|x| ys.iter().map(|y| x.sup_dist(y)).fold(T::infinity(), T::min)).fold(T::zero(), T::max)
}

/// Largest pairwise `‖x - y‖_μ`.
pub fn diameter<T: Scalar>(xs: &[Segment<T>]) -> T {
    let mut d = T::zero();
    for (i, x) in xs.iter().enumerate() {
        for y in &xs[i + 1..] {
            d = d.max(x.sup_dist(y));
        }
    }
    d
}
