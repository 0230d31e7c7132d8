//! Time discretization: uniform sample grids and time-dependent fields.
//!
//! A [`TimeGrid`] holds K+1 uniform samples t_k = kT/K of the horizon
//! [0, T]. A [`TimeField`] stores one spatial field per sample and, when
//! available, the analytic evaluator it was sampled from together with its
//! analytic time derivative. Discrete time differentiation uses 4th-order
//! stencils:
//!
//! ```text
//!     f'(t_k) ≈ (f_{k−2} − 8f_{k−1} + 8f_{k+1} − f_{k+2}) / (12h)
//! ```
//!
//! in the interior with matching one-sided 4th-order formulas at the two
//! samples next to each endpoint.

use super::{GridSpec, ScalarField, VectorField};
use crate::error::{Error, Result};
use std::sync::Arc;

/// Uniform time grid with K+1 samples on [0, T].
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TimeGrid {
    t_end: f64,
    intervals: usize,
}

impl TimeGrid {
    /// Horizon T > 0 divided into K ≥ 8 intervals.
    pub fn new(t_end: f64, intervals: usize) -> Result<Self> {
        if !t_end.is_finite() || t_end <= 0.0 {
            return Err(Error::Domain(format!("time horizon T = {t_end} must be positive")));
        }
        if intervals < 8 {
            return Err(Error::Domain(format!(
                "time grid needs K ≥ 8 intervals for the 4th-order stencils, got {intervals}"
            )));
        }
        Ok(TimeGrid { t_end, intervals })
    }

    /// Horizon T.
    pub fn horizon(&self) -> f64 {
        self.t_end
    }

    /// Number of intervals K.
    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// Number of samples K+1.
    pub fn num_samples(&self) -> usize {
        self.intervals + 1
    }

    /// Step h = T/K.
    pub fn dt(&self) -> f64 {
        self.t_end / self.intervals as f64
    }

    /// Sample time t_k = kT/K.
    pub fn time(&self, k: usize) -> f64 {
        debug_assert!(k <= self.intervals);
        k as f64 * self.t_end / self.intervals as f64
    }

    /// All sample times in order.
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.intervals).map(move |k| self.time(k))
    }
}

/// Spatial fields that can live inside a [`TimeField`].
pub trait Field: Clone + Send + Sync + 'static {
    /// Grid the field lives on.
    fn grid(&self) -> GridSpec;
    /// Σ c_i·f_i over the given terms (at least one term).
    fn linear_comb(terms: &[(f64, &Self)]) -> Self;
    /// L^p norm (vector fields use the pointwise Euclidean magnitude).
    fn lp_norm(&self, p: f64) -> Result<f64>;
    /// W^{k,p} norm.
    fn sobolev_norm(&self, k: usize, p: f64) -> Result<f64>;
    /// Grid maximum of the pointwise magnitude.
    fn max_abs(&self) -> f64;
}

impl Field for ScalarField {
    fn grid(&self) -> GridSpec {
        ScalarField::grid(self)
    }

    fn linear_comb(terms: &[(f64, &Self)]) -> Self {
        assert!(!terms.is_empty(), "linear_comb needs at least one term");
        let grid = terms[0].1.grid();
        let mut out = vec![0.0; grid.node_count()];
        for (c, f) in terms {
            assert_eq!(f.grid(), grid, "linear_comb requires a shared grid");
            for (o, &v) in out.iter_mut().zip(f.values()) {
                *o += c * v;
            }
        }
        ScalarField::from_values_unchecked(grid, out)
    }

    fn lp_norm(&self, p: f64) -> Result<f64> {
        ScalarField::lp_norm(self, p)
    }

    fn sobolev_norm(&self, k: usize, p: f64) -> Result<f64> {
        ScalarField::sobolev_norm(self, k, p)
    }

    fn max_abs(&self) -> f64 {
        ScalarField::max_abs(self)
    }
}

impl Field for VectorField {
    fn grid(&self) -> GridSpec {
        VectorField::grid(self)
    }

    fn linear_comb(terms: &[(f64, &Self)]) -> Self {
        assert!(!terms.is_empty(), "linear_comb needs at least one term");
        let d = terms[0].1.comps().len();
        let comps = (0..d)
            .map(|j| {
                let parts: Vec<(f64, &ScalarField)> =
                    terms.iter().map(|(c, v)| (*c, v.comp(j))).collect();
                ScalarField::linear_comb(&parts)
            })
            .collect();
        VectorField::new(comps)
    }

    fn lp_norm(&self, p: f64) -> Result<f64> {
        VectorField::lp_norm(self, p)
    }

    fn sobolev_norm(&self, k: usize, p: f64) -> Result<f64> {
        VectorField::sobolev_norm(self, k, p)
    }

    fn max_abs(&self) -> f64 {
        VectorField::max_abs(self)
    }
}

/// Analytic evaluator of a time-dependent field.
pub type TimeEval<F> = Arc<dyn Fn(f64) -> F + Send + Sync>;

/// Time-sampled field with optional analytic (value, ∂_t) evaluators.
#[derive(Clone)]
pub struct TimeField<F: Field> {
    tgrid: TimeGrid,
    snaps: Vec<F>,
    value_eval: Option<TimeEval<F>>,
    dt_eval: Option<TimeEval<F>>,
}

impl<F: Field> std::fmt::Debug for TimeField<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TimeField")
            .field("tgrid", &self.tgrid)
            .field("grid", &self.grid())
            .field("analytic", &self.value_eval.is_some())
            .field("analytic_dt", &self.dt_eval.is_some())
            .finish()
    }
}

impl<F: Field> TimeField<F> {
    /// Wrap explicit snapshots (length K+1, shared grid).
    pub fn from_snapshots(tgrid: TimeGrid, snaps: Vec<F>) -> Result<Self> {
        if snaps.len() != tgrid.num_samples() {
            return Err(Error::Domain(format!(
                "need {} snapshots, got {}",
                tgrid.num_samples(),
                snaps.len()
            )));
        }
        let grid = snaps[0].grid();
        if !snaps.iter().all(|s| s.grid() == grid) {
            return Err(Error::Domain("snapshots must share one grid".into()));
        }
        Ok(TimeField {
            tgrid,
            snaps,
            value_eval: None,
            dt_eval: None,
        })
    }

    /// Sample an analytic evaluator at the grid times and remember it,
    /// optionally with its analytic time derivative.
    pub fn from_eval(tgrid: TimeGrid, value: TimeEval<F>, dt: Option<TimeEval<F>>) -> Self {
        let snaps = tgrid.times().map(|t| value(t)).collect();
        TimeField {
            tgrid,
            snaps,
            value_eval: Some(value),
            dt_eval: dt,
        }
    }

    /// The time grid.
    pub fn tgrid(&self) -> TimeGrid {
        self.tgrid
    }

    /// The shared spatial grid.
    pub fn grid(&self) -> GridSpec {
        self.snaps[0].grid()
    }

    /// Snapshot at sample k.
    pub fn snapshot(&self, k: usize) -> &F {
        &self.snaps[k]
    }

    /// All snapshots in time order.
    pub fn snapshots(&self) -> &[F] {
        &self.snaps
    }

    /// Analytic value evaluator, if the field was built from one.
    pub fn value_eval(&self) -> Option<&TimeEval<F>> {
        self.value_eval.as_ref()
    }

    /// Analytic time-derivative evaluator, if available.
    pub fn dt_eval(&self) -> Option<&TimeEval<F>> {
        self.dt_eval.as_ref()
    }

    /// Time derivative at sample k: analytic when available, else the
    /// 4th-order stencil.
    pub fn derivative_at(&self, k: usize) -> F {
        if let Some(dt) = &self.dt_eval {
            return dt(self.tgrid.time(k));
        }
        self.stencil_derivative_at(k)
    }

    /// 4th-order finite-difference time derivative at sample k.
    pub fn stencil_derivative_at(&self, k: usize) -> F {
        let kk = self.tgrid.intervals();
        assert!(k <= kk, "sample index {k} out of range 0..={kk}");
        let inv = 1.0 / (12.0 * self.tgrid.dt());
        let (offsets, coefs): (&[i64], &[f64]) = if k == 0 {
            (&[0, 1, 2, 3, 4], &[-25.0, 48.0, -36.0, 16.0, -3.0])
        } else if k == 1 {
            (&[-1, 0, 1, 2, 3], &[-3.0, -10.0, 18.0, -6.0, 1.0])
        } else if k == kk - 1 {
            (&[-3, -2, -1, 0, 1], &[-1.0, 6.0, -18.0, 10.0, 3.0])
        } else if k == kk {
            (&[-4, -3, -2, -1, 0], &[3.0, -16.0, 36.0, -48.0, 25.0])
        } else {
            (&[-2, -1, 0, 1, 2], &[1.0, -8.0, 0.0, 8.0, -1.0])
        };
        let terms: Vec<(f64, &F)> = offsets
            .iter()
            .zip(coefs)
            .map(|(&o, &c)| (c * inv, &self.snaps[(k as i64 + o) as usize]))
            .collect();
        F::linear_comb(&terms)
    }

    /// New time field from a per-sample transformation (drops evaluators).
    pub fn map(&self, f: impl Fn(usize, f64, &F) -> F) -> TimeField<F> {
        let snaps = self
            .snaps
            .iter()
            .enumerate()
            .map(|(k, s)| f(k, self.tgrid.time(k), s))
            .collect();
        TimeField {
            tgrid: self.tgrid,
            snaps,
            value_eval: None,
            dt_eval: None,
        }
    }

    /// sup over samples of a per-snapshot functional (C_t norms).
    pub fn max_over_samples(&self, f: impl Fn(&F) -> Result<f64>) -> Result<f64> {
        let mut m = 0.0f64;
        for s in &self.snaps {
            m = m.max(f(s)?);
        }
        Ok(m)
    }
}

/// Time derivative of a time field at sample index k (free-function form).
pub fn time_derivative<F: Field>(field: &TimeField<F>, k: usize) -> F {
    field.derivative_at(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus_grid::sample;
    use std::f64::consts::PI;

    fn mode(grid: GridSpec, c: f64) -> ScalarField {
        sample(grid, move |x| c * (2.0 * PI * x[0]).cos()).unwrap()
    }

    #[test]
    fn time_grid_validates() {
        assert!(TimeGrid::new(1.0, 8).is_ok());
        assert!(TimeGrid::new(0.0, 8).is_err());
        assert!(TimeGrid::new(1.0, 4).is_err(), "K < 8 rejected");
        let tg = TimeGrid::new(2.0, 10).unwrap();
        assert_eq!(tg.time(0), 0.0);
        assert_eq!(tg.time(10), 2.0);
        assert!((tg.dt() - 0.2).abs() < 1e-16);
    }

    #[test]
    fn linear_in_time_differentiates_exactly() {
        let g = GridSpec::new(2, 8).unwrap();
        let tg = TimeGrid::new(1.0, 8).unwrap();
        let tf = TimeField::from_eval(tg, Arc::new(move |t| mode(g, 2.0 * t)), None);
        for k in 0..=8 {
            let d = tf.derivative_at(k);
            let expect = mode(g, 2.0);
            for (a, b) in d.values().iter().zip(expect.values()) {
                assert!(
                    (a - b).abs() < 1e-12,
                    "stencil must be exact on polynomials of degree ≤ 4 (sample {k})"
                );
            }
        }
    }

    #[test]
    fn constant_in_time_has_zero_derivative() {
        let g = GridSpec::new(2, 8).unwrap();
        let tg = TimeGrid::new(1.0, 8).unwrap();
        let tf = TimeField::from_eval(tg, Arc::new(move |_| mode(g, 1.0)), None);
        for k in [0, 3, 8] {
            assert!(tf.derivative_at(k).max_abs() < 1e-13);
        }
    }

    #[test]
    fn stencil_error_decays_at_fourth_order() {
        let g = GridSpec::new(2, 8).unwrap();
        let err_at = |kk: usize| -> f64 {
            let tg = TimeGrid::new(1.0, kk).unwrap();
            let tf = TimeField::from_eval(
                tg,
                Arc::new(move |t: f64| mode(g, t.sin())),
                None,
            );
            let mut worst = 0.0f64;
            for k in 0..=kk {
                let t = tg.time(k);
                let exact = mode(g, t.cos());
                let d = tf.stencil_derivative_at(k);
                let diff = ScalarField::linear_comb(&[(1.0, &d), (-1.0, &exact)]);
                worst = worst.max(diff.max_abs());
            }
            worst
        };
        let (e16, e32) = (err_at(16), err_at(32));
        let order = (e16 / e32).log2();
        assert!(
            order > 3.6,
            "refinement 16→32 must show 4th-order decay, measured order {order:.2}"
        );
    }

    #[test]
    fn analytic_derivative_takes_precedence() {
        let g = GridSpec::new(2, 8).unwrap();
        let tg = TimeGrid::new(1.0, 8).unwrap();
        let tf = TimeField::from_eval(
            tg,
            Arc::new(move |t: f64| mode(g, t * t)),
            Some(Arc::new(move |t: f64| mode(g, 2.0 * t))),
        );
        let d = tf.derivative_at(4);
        let expect = mode(g, 2.0 * tg.time(4));
        for (a, b) in d.values().iter().zip(expect.values()) {
            assert!((a - b).abs() < 1e-15, "must use the analytic ∂_t");
        }
    }

    #[test]
    fn snapshot_count_is_validated() {
        let g = GridSpec::new(2, 8).unwrap();
        let tg = TimeGrid::new(1.0, 8).unwrap();
        let snaps = vec![ScalarField::zeros(g); 5];
        assert!(TimeField::from_snapshots(tg, snaps).is_err());
    }
}
