//! Uniform-grid representation of smooth periodic functions on T^d.
//!
//! The torus T^d is identified with [0,1)^d; grid node i ↦ i/n componentwise
//! with n points per axis (a power of two), stored row-major with the last
//! axis contiguous. Quadrature is the plain node average — trapezoidal on a
//! periodic grid — which is spectrally accurate for smooth integrands:
//!
//! ```text
//!     ∫_{T^d} f ≈ n^{−d} Σ_i f(i/n),    ‖f‖_{L^p}^p ≈ n^{−d} Σ_i |f(i/n)|^p.
//! ```
//!
//! Fields are immutable after construction and optionally carry the analytic
//! evaluator they were sampled from, which later enables exact dilation
//! f ↦ f(λ·) and off-grid translation f ↦ f(· − y). Spectral coefficients
//! are cached lazily and shared across clones.

mod dump;
mod random;
mod spectral;
mod time;

pub use dump::{read_series, write_scalar_series, write_vector_series, SeriesPayload};
pub use random::random_band_limited;
pub use spectral::Spectrum;
pub use time::{time_derivative, Field, TimeEval, TimeField, TimeGrid};

use crate::error::{Error, Result};
use crate::tol;
use std::sync::{Arc, OnceLock};

/// Analytic evaluator of a periodic function of space, x ∈ [0,1)^d.
pub type SpaceFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Shape of the uniform tensor grid on T^d = [0,1)^d.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct GridSpec {
    d: usize,
    n: usize,
}

impl GridSpec {
    /// A d-dimensional grid with n points per axis.
    ///
    /// Requires 2 ≤ d ≤ 4 and n ≥ 4 a power of two.
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if !(2..=4).contains(&d) {
            return Err(Error::Domain(format!("grid dimension d = {d} outside 2..=4")));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::Domain(format!(
                "points per axis n = {n} must be a power of two ≥ 4"
            )));
        }
        Ok(GridSpec { d, n })
    }

    /// Spatial dimension d.
    pub fn dim(&self) -> usize {
        self.d
    }

    /// Points per axis n.
    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    /// Total number of nodes, n^d.
    pub fn node_count(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    /// Row-major stride of `axis`: the last axis is contiguous.
    pub fn stride(&self, axis: usize) -> usize {
        debug_assert!(axis < self.d);
        self.n.pow((self.d - 1 - axis) as u32)
    }

    /// Grid spacing 1/n.
    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Flat index of the node with the given integer coordinates.
    pub fn index_of(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.d);
        let mut flat = 0;
        for &c in coords {
            debug_assert!(c < self.n);
            flat = flat * self.n + c;
        }
        flat
    }

    /// Integer coordinates of the node with flat index `flat`.
    pub fn coords_of(&self, mut flat: usize, out: &mut [usize]) {
        debug_assert_eq!(out.len(), self.d);
        for a in (0..self.d).rev() {
            out[a] = flat % self.n;
            flat /= self.n;
        }
    }

    /// Visit every node in flat order with its point x = i/n ∈ [0,1)^d.
    pub fn for_each_node(&self, mut f: impl FnMut(usize, &[f64])) {
        let h = self.spacing();
        let mut idx = [0usize; 4];
        let mut pt = [0.0f64; 4];
        let len = self.node_count();
        for flat in 0..len {
            f(flat, &pt[..self.d]);
            for a in (0..self.d).rev() {
                idx[a] += 1;
                if idx[a] == self.n {
                    idx[a] = 0;
                    pt[a] = 0.0;
                } else {
                    pt[a] = idx[a] as f64 * h;
                    break;
                }
            }
        }
    }
}

/// Compensated (Neumaier) summation; deterministic regardless of thread count.
pub(crate) fn neumaier_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// |x|^p with fast paths for the common exponents.
#[inline]
fn abs_pow(x: f64, p: f64) -> f64 {
    let a = x.abs();
    if p == 1.0 {
        a
    } else if p == 2.0 {
        a * a
    } else {
        a.powf(p)
    }
}

fn validate_p(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::Domain(format!("Lebesgue exponent p = {p} must be ≥ 1 or ∞")));
    }
    Ok(())
}

/// Smooth periodic scalar field sampled on a [`GridSpec`].
#[derive(Clone)]
pub struct ScalarField {
    grid: GridSpec,
    values: Arc<Vec<f64>>,
    spectrum: Arc<OnceLock<Spectrum>>,
    analytic: Option<SpaceFn>,
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarField")
            .field("grid", &self.grid)
            .field("max_abs", &self.max_abs())
            .field("analytic", &self.analytic.is_some())
            .finish()
    }
}

impl ScalarField {
    /// Sample an analytic evaluator at the grid nodes and remember it.
    ///
    /// Fails with `SamplingError` if the evaluator returns a non-finite
    /// value at any node.
    pub fn sample(grid: GridSpec, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Result<Self> {
        Self::sample_fn(grid, Arc::new(f))
    }

    /// Like [`ScalarField::sample`] for an already type-erased evaluator.
    pub fn sample_fn(grid: GridSpec, f: SpaceFn) -> Result<Self> {
        let mut values = vec![0.0; grid.node_count()];
        let mut bad: Option<usize> = None;
        grid.for_each_node(|flat, pt| {
            let v = f(pt);
            values[flat] = v;
            if !v.is_finite() && bad.is_none() {
                bad = Some(flat);
            }
        });
        if let Some(flat) = bad {
            let mut c = vec![0usize; grid.dim()];
            grid.coords_of(flat, &mut c);
            return Err(Error::Sampling(format!(
                "evaluator returned a non-finite value at node {c:?}"
            )));
        }
        Ok(ScalarField {
            grid,
            values: Arc::new(values),
            spectrum: Arc::new(OnceLock::new()),
            analytic: Some(f),
        })
    }

    /// Wrap explicit node values (row-major, length n^d, all finite).
    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::Domain(format!(
                "value buffer has length {}, grid needs {}",
                values.len(),
                grid.node_count()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Sampling(format!("non-finite value at flat index {i}")));
        }
        Ok(Self::from_values_unchecked(grid, values))
    }

    /// Internal constructor for buffers produced by checked arithmetic.
    pub(crate) fn from_values_unchecked(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.node_count());
        ScalarField {
            grid,
            values: Arc::new(values),
            spectrum: Arc::new(OnceLock::new()),
            analytic: None,
        }
    }

    /// The constant field c.
    pub fn constant(grid: GridSpec, c: f64) -> Self {
        let mut f = Self::from_values_unchecked(grid, vec![c; grid.node_count()]);
        f.analytic = Some(Arc::new(move |_: &[f64]| c));
        f
    }

    /// The zero field.
    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Grid this field lives on.
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    /// Node values in row-major order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The analytic evaluator this field was sampled from, if any.
    pub fn analytic(&self) -> Option<&SpaceFn> {
        self.analytic.as_ref()
    }

    /// Cached Fourier coefficients (computed on first use, shared by clones).
    pub fn spectrum(&self) -> &Spectrum {
        self.spectrum.get_or_init(|| Spectrum::of_values(self.grid, &self.values))
    }

    /// Grid mean n^{−d} Σ f(i/n) (compensated summation).
    pub fn mean(&self) -> f64 {
        neumaier_sum(self.values.iter().copied()) / self.grid.node_count() as f64
    }

    /// Maximum of |f| over the nodes (the grid C⁰ norm).
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// L^p norm by node-average quadrature; p = ∞ gives the grid maximum.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        validate_p(p)?;
        if p.is_infinite() {
            return Ok(self.max_abs());
        }
        let sum = neumaier_sum(self.values.iter().map(|&v| abs_pow(v, p)));
        Ok((sum / self.grid.node_count() as f64).powf(1.0 / p))
    }

    /// W^{k,p} norm: Σ_{|α| ≤ k} ‖∂^α f‖_{L^p}, derivatives spectral.
    ///
    /// Refuses fields whose spectral tail above n/4 carries more than
    /// `tol::TAIL_TOL` of the energy (the derivatives would be aliased).
    pub fn sobolev_norm(&self, k: usize, p: f64) -> Result<f64> {
        validate_p(p)?;
        let tail = self.spectrum().tail_fraction();
        if tail > tol::TAIL_TOL {
            return Err(Error::Aliasing(format!(
                "spectral tail above n/4 carries {tail:.3e} of the energy (> {:.0e})",
                tol::TAIL_TOL
            )));
        }
        self.sobolev_norm_unchecked(k, p)
    }

    /// W^{k,p} norm without the aliasing gate, for fields whose resolution
    /// is guaranteed by construction (resolved analytic content).
    pub(crate) fn sobolev_norm_unchecked(&self, k: usize, p: f64) -> Result<f64> {
        let mut total = 0.0;
        for alpha in multi_indices(self.grid.dim(), k) {
            let term = if alpha.iter().all(|&a| a == 0) {
                self.lp_norm(p)?
            } else {
                self.multi_deriv(&alpha).lp_norm(p)?
            };
            total += term;
        }
        Ok(total)
    }

    /// Spectral partial derivative ∂_a f.
    pub fn partial_deriv(&self, axis: usize) -> ScalarField {
        assert!(axis < self.grid.dim(), "axis {axis} out of range");
        let mut alpha = vec![0usize; self.grid.dim()];
        alpha[axis] = 1;
        self.multi_deriv(&alpha)
    }

    /// Spectral mixed derivative ∂^α f.
    pub fn multi_deriv(&self, alpha: &[usize]) -> ScalarField {
        assert_eq!(alpha.len(), self.grid.dim());
        let spec = self.spectrum().derivative(alpha);
        spec.to_field()
    }

    /// Apply a diagonal Fourier multiplier m(k) and transform back.
    pub fn apply_multiplier(
        &self,
        m: impl Fn(&[i64]) -> num_complex::Complex64,
    ) -> ScalarField {
        self.spectrum().apply(m).to_field()
    }

    /// Pointwise map (drops the analytic evaluator and spectral cache).
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        let values = self.values.iter().map(|&v| f(v)).collect();
        Self::from_values_unchecked(self.grid, values)
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        assert_eq!(self.grid, other.grid, "zip_map requires a shared grid");
        let values = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::from_values_unchecked(self.grid, values)
    }

    /// self + other.
    pub fn add(&self, other: &ScalarField) -> ScalarField {
        self.zip_map(other, |a, b| a + b)
    }

    /// self − other.
    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        self.zip_map(other, |a, b| a - b)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &ScalarField) -> ScalarField {
        self.zip_map(other, |a, b| a * b)
    }

    /// c·self.
    pub fn scale(&self, c: f64) -> ScalarField {
        let mut out = self.map(|v| c * v);
        if let Some(f) = &self.analytic {
            let f = Arc::clone(f);
            out.analytic = Some(Arc::new(move |x: &[f64]| c * f(x)));
        }
        out
    }

    /// self + c·other (fused update used by the assembly loops).
    pub fn add_scaled(&self, c: f64, other: &ScalarField) -> ScalarField {
        self.zip_map(other, |a, b| a + c * b)
    }

    /// Subtract the grid mean, making the result exactly zero-mean.
    pub fn remove_mean(&self) -> ScalarField {
        let m = self.mean();
        self.map(|v| v - m)
    }

    /// Check the zero-mean invariant |mean| ≤ MEAN_TOL_REL·‖f‖_{L²}.
    pub fn require_zero_mean(&self, context: &str) -> Result<()> {
        let mean = self.mean();
        let tol = tol::MEAN_TOL_REL * self.lp_norm(2.0)?;
        if mean.abs() > tol {
            return Err(Error::Mean {
                context: context.to_string(),
                mean,
                tol,
            });
        }
        Ok(())
    }
}

/// All multi-indices α ∈ N^d with |α| ≤ k, in lexicographic order.
pub(crate) fn multi_indices(d: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; d];
    fn rec(axis: usize, remaining: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if axis == cur.len() {
            out.push(cur.clone());
            return;
        }
        for a in 0..=remaining {
            cur[axis] = a;
            rec(axis + 1, remaining - a, cur, out);
        }
        cur[axis] = 0;
    }
    rec(0, k, &mut cur, &mut out);
    out
}

/// Vector field on T^d: d scalar components on a shared grid.
#[derive(Clone, Debug)]
pub struct VectorField {
    comps: Vec<ScalarField>,
}

impl VectorField {
    /// Bundle d components (must match the grid dimension).
    pub fn new(comps: Vec<ScalarField>) -> Self {
        assert!(!comps.is_empty(), "vector field needs components");
        let grid = comps[0].grid();
        assert_eq!(comps.len(), grid.dim(), "component count must equal d");
        assert!(
            comps.iter().all(|c| c.grid() == grid),
            "all components must share one grid"
        );
        VectorField { comps }
    }

    /// The zero vector field.
    pub fn zeros(grid: GridSpec) -> Self {
        VectorField {
            comps: (0..grid.dim()).map(|_| ScalarField::zeros(grid)).collect(),
        }
    }

    /// A single scalar along coordinate direction `axis` (f·e_axis).
    pub fn along_axis(f: ScalarField, axis: usize) -> Self {
        let grid = f.grid();
        assert!(axis < grid.dim());
        let comps = (0..grid.dim())
            .map(|a| if a == axis { f.clone() } else { ScalarField::zeros(grid) })
            .collect();
        VectorField { comps }
    }

    /// Component j.
    pub fn comp(&self, j: usize) -> &ScalarField {
        &self.comps[j]
    }

    /// All components.
    pub fn comps(&self) -> &[ScalarField] {
        &self.comps
    }

    /// Grid shared by the components.
    pub fn grid(&self) -> GridSpec {
        self.comps[0].grid()
    }

    /// Pointwise Euclidean magnitude |v|.
    pub fn magnitude(&self) -> ScalarField {
        let grid = self.grid();
        let mut sq = vec![0.0; grid.node_count()];
        for c in &self.comps {
            for (s, &v) in sq.iter_mut().zip(c.values()) {
                *s += v * v;
            }
        }
        for s in sq.iter_mut() {
            *s = s.sqrt();
        }
        ScalarField::from_values_unchecked(grid, sq)
    }

    /// self + other.
    pub fn add(&self, other: &VectorField) -> VectorField {
        self.zip_with(other, |a, b| a.add(b))
    }

    /// self − other.
    pub fn sub(&self, other: &VectorField) -> VectorField {
        self.zip_with(other, |a, b| a.sub(b))
    }

    /// c·self.
    pub fn scale(&self, c: f64) -> VectorField {
        VectorField {
            comps: self.comps.iter().map(|f| f.scale(c)).collect(),
        }
    }

    /// Pointwise scalar multiple s(x)·v(x).
    pub fn scale_pointwise(&self, s: &ScalarField) -> VectorField {
        VectorField {
            comps: self.comps.iter().map(|f| f.mul(s)).collect(),
        }
    }

    /// Pointwise dot product v·w.
    pub fn dot(&self, other: &VectorField) -> ScalarField {
        assert_eq!(self.comps.len(), other.comps.len());
        let grid = self.grid();
        let mut acc = vec![0.0; grid.node_count()];
        for (a, b) in self.comps.iter().zip(other.comps.iter()) {
            for (o, (&x, &y)) in acc.iter_mut().zip(a.values().iter().zip(b.values())) {
                *o += x * y;
            }
        }
        ScalarField::from_values_unchecked(grid, acc)
    }

    fn zip_with(
        &self,
        other: &VectorField,
        f: impl Fn(&ScalarField, &ScalarField) -> ScalarField,
    ) -> VectorField {
        assert_eq!(self.comps.len(), other.comps.len());
        VectorField {
            comps: self
                .comps
                .iter()
                .zip(other.comps.iter())
                .map(|(a, b)| f(a, b))
                .collect(),
        }
    }

    /// Maximum of |v| over the nodes.
    pub fn max_abs(&self) -> f64 {
        self.magnitude().max_abs()
    }

    /// L^p norm of the pointwise Euclidean magnitude.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        self.magnitude().lp_norm(p)
    }

    /// W^{k,p} norm: Σ_{|α| ≤ k} ‖∂^α v‖_{L^p} with the magnitude convention.
    pub fn sobolev_norm(&self, k: usize, p: f64) -> Result<f64> {
        validate_p(p)?;
        for c in &self.comps {
            let tail = c.spectrum().tail_fraction();
            if tail > tol::TAIL_TOL {
                return Err(Error::Aliasing(format!(
                    "spectral tail above n/4 carries {tail:.3e} of the energy (> {:.0e})",
                    tol::TAIL_TOL
                )));
            }
        }
        self.sobolev_norm_unchecked(k, p)
    }

    pub(crate) fn sobolev_norm_unchecked(&self, k: usize, p: f64) -> Result<f64> {
        let mut total = 0.0;
        for alpha in multi_indices(self.grid().dim(), k) {
            let deriv = if alpha.iter().all(|&a| a == 0) {
                self.clone()
            } else {
                VectorField {
                    comps: self.comps.iter().map(|c| c.multi_deriv(&alpha)).collect(),
                }
            };
            total += deriv.lp_norm(p)?;
        }
        Ok(total)
    }
}

/// Sample an analytic evaluator onto a grid (stores the evaluator).
pub fn sample(
    grid: GridSpec,
    f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
) -> Result<ScalarField> {
    ScalarField::sample(grid, f)
}

/// Dilate: (dilate f)(x) = f(λx mod 1).
///
/// Analytic fields are resampled exactly for any λ ≥ 1; grid-only fields
/// use the exact node map i ↦ λi mod n, which requires λ to divide n.
pub fn dilate(f: &ScalarField, lambda: u64) -> Result<ScalarField> {
    if lambda == 0 {
        return Err(Error::Domain("dilation factor λ must be ≥ 1".into()));
    }
    if lambda == 1 {
        return Ok(f.clone());
    }
    let grid = f.grid();
    if let Some(ev) = f.analytic() {
        let ev = Arc::clone(ev);
        let lam = lambda as f64;
        let d = grid.dim();
        return ScalarField::sample_fn(
            grid,
            Arc::new(move |x: &[f64]| {
                let mut y = [0.0f64; 4];
                for a in 0..d {
                    y[a] = (lam * x[a]).fract();
                }
                ev(&y[..d])
            }),
        );
    }
    let n = grid.points_per_axis();
    if n as u64 % lambda != 0 {
        return Err(Error::Resolution(format!(
            "dilation by λ = {lambda} needs an analytic form or λ dividing n = {n}"
        )));
    }
    let lam = lambda as usize;
    let mut values = vec![0.0; grid.node_count()];
    let mut coords = vec![0usize; grid.dim()];
    let mut mapped = vec![0usize; grid.dim()];
    for (flat, v) in values.iter_mut().enumerate() {
        grid.coords_of(flat, &mut coords);
        for (m, &c) in mapped.iter_mut().zip(&coords) {
            *m = (c * lam) % n;
        }
        *v = f.values()[grid.index_of(&mapped)];
    }
    Ok(ScalarField::from_values_unchecked(grid, values))
}

/// Translate: (translate f)(x) = f(x − y).
///
/// Analytic fields are resampled for any y; grid-only fields require y to
/// be grid-aligned (every component an integer multiple of 1/n).
pub fn translate(f: &ScalarField, y: &[f64]) -> Result<ScalarField> {
    let grid = f.grid();
    assert_eq!(y.len(), grid.dim(), "shift must have d components");
    if let Some(ev) = f.analytic() {
        let ev = Arc::clone(ev);
        let d = grid.dim();
        let shift: Vec<f64> = y.to_vec();
        return ScalarField::sample_fn(
            grid,
            Arc::new(move |x: &[f64]| {
                let mut z = [0.0f64; 4];
                for a in 0..d {
                    z[a] = (x[a] - shift[a]).rem_euclid(1.0);
                }
                ev(&z[..d])
            }),
        );
    }
    let n = grid.points_per_axis();
    let mut steps = vec![0usize; grid.dim()];
    for (a, &ya) in y.iter().enumerate() {
        let scaled = ya * n as f64;
        let rounded = scaled.round();
        if (scaled - rounded).abs() > tol::SAMPLING_TOL * n as f64 {
            return Err(Error::Resolution(format!(
                "off-grid shift y[{a}] = {ya} requires an analytic form"
            )));
        }
        steps[a] = (rounded as i64).rem_euclid(n as i64) as usize;
    }
    let mut values = vec![0.0; grid.node_count()];
    let mut coords = vec![0usize; grid.dim()];
    let mut mapped = vec![0usize; grid.dim()];
    for (flat, v) in values.iter_mut().enumerate() {
        grid.coords_of(flat, &mut coords);
        for ((m, &c), &s) in mapped.iter_mut().zip(&coords).zip(&steps) {
            *m = (c + n - s) % n;
        }
        *v = f.values()[grid.index_of(&mapped)];
    }
    Ok(ScalarField::from_values_unchecked(grid, values))
}

/// L^p norm of a scalar field (free-function form).
pub fn lp_norm(f: &ScalarField, p: f64) -> Result<f64> {
    f.lp_norm(p)
}

/// W^{k,p} norm of a scalar field (free-function form).
pub fn sobolev_norm(f: &ScalarField, k: usize, p: f64) -> Result<f64> {
    f.sobolev_norm(k, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn grid_spec_validates_shape() {
        assert!(GridSpec::new(2, 16).is_ok());
        assert!(GridSpec::new(1, 16).is_err(), "d = 1 must be rejected");
        assert!(GridSpec::new(5, 16).is_err(), "d = 5 must be rejected");
        assert!(GridSpec::new(2, 12).is_err(), "n = 12 is not a power of two");
        assert!(GridSpec::new(2, 2).is_err(), "n = 2 is too coarse");
    }

    #[test]
    fn strides_are_row_major_last_axis_contiguous() {
        let g = GridSpec::new(3, 8).unwrap();
        assert_eq!(g.stride(2), 1);
        assert_eq!(g.stride(1), 8);
        assert_eq!(g.stride(0), 64);
        assert_eq!(g.index_of(&[1, 2, 3]), 64 + 16 + 3);
        let mut c = [0usize; 3];
        g.coords_of(64 + 16 + 3, &mut c);
        assert_eq!(c, [1, 2, 3]);
    }

    #[test]
    fn sample_constant_is_constant() {
        let g = GridSpec::new(2, 8).unwrap();
        let f = sample(g, |_| 1.0).unwrap();
        assert!(f.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn sample_rejects_non_finite_values() {
        let g = GridSpec::new(2, 8).unwrap();
        let err = sample(g, |x| 1.0 / x[0]).unwrap_err();
        assert!(matches!(err, Error::Sampling(_)), "got {err:?}");
    }

    #[test]
    fn cosine_mode_has_zero_grid_mean() {
        let g = GridSpec::new(2, 16).unwrap();
        let f = sample(g, |x| (2.0 * PI * x[0]).cos()).unwrap();
        assert!(
            f.mean().abs() < 1e-15,
            "grid quadrature of a resolved mode must vanish, got {}",
            f.mean()
        );
    }

    #[test]
    fn resolution_refinement_of_analytic_sample() {
        // L² norms at n = 32 and n = 64 agree to spectral accuracy.
        let norm = |n: usize| {
            let g = GridSpec::new(2, n).unwrap();
            sample(g, |x| (2.0 * PI * x[0]).sin().exp())
                .unwrap()
                .lp_norm(2.0)
                .unwrap()
        };
        assert!(
            (norm(32) - norm(64)).abs() <= 1e-10,
            "norms at n = 32/64 differ by {}",
            (norm(32) - norm(64)).abs()
        );
    }

    #[test]
    fn resampling_at_double_resolution_restricts_exactly() {
        let f = |x: &[f64]| (2.0 * PI * x[0]).cos() * (0.3 + (2.0 * PI * x[1]).sin());
        let coarse = sample(GridSpec::new(2, 16).unwrap(), f).unwrap();
        let fine = sample(GridSpec::new(2, 32).unwrap(), f).unwrap();
        let gc = coarse.grid();
        let gf = fine.grid();
        let mut c = [0usize; 2];
        for flat in 0..gc.node_count() {
            gc.coords_of(flat, &mut c);
            let fine_flat = gf.index_of(&[2 * c[0], 2 * c[1]]);
            assert_eq!(
                coarse.values()[flat],
                fine.values()[fine_flat],
                "node ({},{}) must be reproduced exactly",
                c[0],
                c[1]
            );
        }
    }

    #[test]
    fn lp_norm_of_constants_and_modes() {
        let g = GridSpec::new(2, 16).unwrap();
        let c = ScalarField::constant(g, -2.5);
        for p in [1.0, 1.5, 2.0, 3.0, f64::INFINITY] {
            assert!(
                (c.lp_norm(p).unwrap() - 2.5).abs() < 1e-14,
                "constant field L^{p} norm"
            );
        }
        let f = sample(g, |x| 2.0f64.sqrt() * (2.0 * PI * x[0]).cos()).unwrap();
        assert!(
            (f.lp_norm(2.0).unwrap() - 1.0).abs() < 1e-12,
            "√2·cos(2πx₁) has unit L² norm, got {}",
            f.lp_norm(2.0).unwrap()
        );
    }

    #[test]
    fn lp_norm_rejects_p_below_one() {
        let g = GridSpec::new(2, 8).unwrap();
        let f = ScalarField::constant(g, 1.0);
        assert!(matches!(f.lp_norm(0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn sobolev_norm_matches_closed_form_for_single_mode() {
        // f = sin(2πx₁): ‖f‖₂ = 1/√2, ‖∂₁f‖₂ = 2π/√2, ‖∂₂f‖₂ = 0.
        let g = GridSpec::new(2, 32).unwrap();
        let f = sample(g, |x| (2.0 * PI * x[0]).sin()).unwrap();
        let expect = (1.0 + 2.0 * PI) / 2.0f64.sqrt();
        let got = f.sobolev_norm(1, 2.0).unwrap();
        assert!(
            (got - expect).abs() < 1e-10,
            "W^{{1,2}} norm of sin(2πx₁): got {got}, want {expect}"
        );
    }

    #[test]
    fn sobolev_norm_k_zero_is_lp_norm() {
        let g = GridSpec::new(2, 16).unwrap();
        let f = sample(g, |x| (2.0 * PI * x[0]).cos() + 0.5 * (4.0 * PI * x[1]).sin()).unwrap();
        assert!(
            (f.sobolev_norm(0, 3.0).unwrap() - f.lp_norm(3.0).unwrap()).abs() < 1e-14,
            "k = 0 must reduce to the L^p norm"
        );
    }

    #[test]
    fn dilate_shifts_modes_and_scales_derivatives() {
        let g = GridSpec::new(2, 32).unwrap();
        let f = sample(g, |x| (2.0 * PI * x[0]).sin()).unwrap();
        let f3 = dilate(&f, 3).unwrap();
        let direct = sample(g, |x| (6.0 * PI * x[0]).sin()).unwrap();
        let diff: f64 = f3
            .values()
            .iter()
            .zip(direct.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-12, "dilated sine must equal sin(6πx₁), max diff {diff}");
        let g1 = f.partial_deriv(0).lp_norm(2.0).unwrap();
        let g3 = f3.partial_deriv(0).lp_norm(2.0).unwrap();
        assert!(
            (g3 / g1 - 3.0).abs() < 1e-12,
            "‖∇f_3‖/‖∇f‖ must be 3, got {}",
            g3 / g1
        );
    }

    #[test]
    fn dilate_identity_and_grid_only_path() {
        let g = GridSpec::new(2, 16).unwrap();
        let f = sample(g, |x| (2.0 * PI * (x[0] + 2.0 * x[1])).cos()).unwrap();
        let id = dilate(&f, 1).unwrap();
        assert_eq!(id.values(), f.values());

        let grid_only = ScalarField::from_values(g, f.values().to_vec()).unwrap();
        let d2 = dilate(&grid_only, 2).unwrap();
        let expect = sample(g, |x| (4.0 * PI * (x[0] + 2.0 * x[1])).cos()).unwrap();
        for (a, b) in d2.values().iter().zip(expect.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        let err = dilate(&grid_only, 3).unwrap_err();
        assert!(matches!(err, Error::Resolution(_)), "3 ∤ 16 without analytic form");
    }

    #[test]
    fn translate_quarter_period_turns_cosine_into_sine() {
        let g = GridSpec::new(2, 16).unwrap();
        let f = sample(g, |x| (2.0 * PI * x[0]).cos()).unwrap();
        let shifted = translate(&f, &[0.25, 0.0]).unwrap();
        let sine = sample(g, |x| (2.0 * PI * x[0]).sin()).unwrap();
        for (a, b) in shifted.values().iter().zip(sine.values()) {
            assert!((a - b).abs() < 1e-12, "cos(2π(x−1/4)) = sin(2πx)");
        }
    }

    #[test]
    fn translate_preserves_norms_on_grid_aligned_shifts() {
        let g = GridSpec::new(2, 16).unwrap();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(7);
        let f = random_band_limited(g, 4, true, &mut rng);
        let shifted = translate(&f, &[3.0 / 16.0, 5.0 / 16.0]).unwrap();
        let (a, b) = (f.lp_norm(3.0).unwrap(), shifted.lp_norm(3.0).unwrap());
        assert!(
            (a - b).abs() <= 1e-12 * a.max(1.0),
            "L³ norm must be translation invariant: {a} vs {b}"
        );
    }

    #[test]
    fn translate_rejects_off_grid_shift_without_analytic_form() {
        let g = GridSpec::new(2, 16).unwrap();
        let f = ScalarField::from_values(g, vec![0.0; g.node_count()]).unwrap();
        let err = translate(&f, &[0.1, 0.0]).unwrap_err();
        assert!(matches!(err, Error::Resolution(_)));
    }

    #[test]
    fn translate_identity_shift() {
        let g = GridSpec::new(2, 8).unwrap();
        let f = sample(g, |x| x[0].sin()).unwrap();
        let t = translate(&f, &[0.0, 0.0]).unwrap();
        for (a, b) in t.values().iter().zip(f.values()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn vector_field_norms_use_pointwise_magnitude() {
        let g = GridSpec::new(2, 16).unwrap();
        let v = VectorField::new(vec![
            ScalarField::constant(g, 3.0),
            ScalarField::constant(g, 4.0),
        ]);
        assert!((v.lp_norm(1.0).unwrap() - 5.0).abs() < 1e-14);
        assert!((v.max_abs() - 5.0).abs() < 1e-14);
    }

    #[test]
    fn multi_index_enumeration_counts() {
        // #{α ∈ N^d : |α| ≤ k} = C(k+d, d).
        assert_eq!(multi_indices(2, 1).len(), 3);
        assert_eq!(multi_indices(2, 2).len(), 6);
        assert_eq!(multi_indices(3, 2).len(), 10);
    }

    #[test]
    fn remove_mean_is_exact() {
        let g = GridSpec::new(2, 16).unwrap();
        let f = sample(g, |x| 0.7 + (2.0 * PI * x[0]).cos()).unwrap();
        let z = f.remove_mean();
        assert!(z.mean().abs() <= 1e-16, "measured mean {}", z.mean());
        z.require_zero_mean("test").unwrap();
    }
}
