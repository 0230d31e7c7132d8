//! Periodic pseudo-differential calculus on T^d.
//!
//! The backbone is the family of operators D^k, k ∈ Z, realized as diagonal
//! Fourier multipliers:
//!
//! ```text
//!     D^k = Δ^{k/2}            (k even),
//!     D^k = ∇Δ^{(k−1)/2}       (k odd, vector-valued),
//!     D⁰  = Id,
//! ```
//!
//! with the zero mode annihilated for k < 0 and preserved for k ≥ 0. On
//! top of these sit the standard antidivergence D^{−1}, the inverse
//! Laplacian, and the bilinear antidivergence
//!
//! ```text
//!     R_N(f,g) = Σ_{k=0}^{N−1} (−1)^k D^k f · D^{−k−1} g
//!              + D^{−1}( (−1)^N D^N f · D^{−N} g − ∫ fg ),
//! ```
//!
//! which satisfies div R_N(f,g) = fg − ∫fg and the Leibniz rule, and gains
//! one factor of the oscillation per term when g is a fast dilation g_λ.
//! Because every D^k is an exact multiplier on the grid, the telescoping
//! identity behind div R_N holds to rounding error whenever the products
//! are spectrally resolved.
//!
//! The module also carries empirical probes for the inequalities the
//! construction relies on (Calderon-Zygmund, antiderivative estimates):
//! the probes measure the relevant norm ratio on a given field and compare
//! it against a budget calibrated on a frozen corpus of 100 seeded random
//! band-limited fields per (d, p, k).

use crate::error::{Error, Result};
use crate::tol;
use crate::torus_grid::{
    dilate, random_band_limited, Field, GridSpec, ScalarField, VectorField,
};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

/// Scalar or vector result of [`cal_d`] (vector iff the order is odd).
#[derive(Debug, Clone)]
pub enum EitherField {
    /// Even-order result Δ^{k/2}f.
    Scalar(ScalarField),
    /// Odd-order result ∇Δ^{(k−1)/2}f.
    Vector(VectorField),
}

impl EitherField {
    /// The scalar variant, or a panic (callers know the parity).
    pub fn unwrap_scalar(self) -> ScalarField {
        match self {
            EitherField::Scalar(f) => f,
            EitherField::Vector(_) => panic!("expected a scalar field (even order)"),
        }
    }

    /// The vector variant, or a panic (callers know the parity).
    pub fn unwrap_vector(self) -> VectorField {
        match self {
            EitherField::Scalar(_) => panic!("expected a vector field (odd order)"),
            EitherField::Vector(v) => v,
        }
    }

    /// L^p norm of either variant.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        match self {
            EitherField::Scalar(f) => f.lp_norm(p),
            EitherField::Vector(v) => v.lp_norm(p),
        }
    }

    /// W^{k,p} norm of either variant.
    pub fn sobolev_norm(&self, k: usize, p: f64) -> Result<f64> {
        match self {
            EitherField::Scalar(f) => f.sobolev_norm(k, p),
            EitherField::Vector(v) => v.sobolev_norm(k, p),
        }
    }
}

/// Spectral gradient ∇f.
pub fn gradient(f: &ScalarField) -> VectorField {
    let comps = (0..f.grid().dim()).map(|a| f.partial_deriv(a)).collect();
    VectorField::new(comps)
}

/// Spectral divergence Σ_a ∂_a v_a.
pub fn divergence(v: &VectorField) -> ScalarField {
    let grid = v.grid();
    let mut acc = ScalarField::zeros(grid);
    for (a, c) in v.comps().iter().enumerate() {
        acc = acc.add(&c.partial_deriv(a));
    }
    acc
}

/// Spectral Laplacian Δf = Σ_a ∂²_a f.
pub fn laplacian(f: &ScalarField) -> ScalarField {
    lap_power(f, 1)
}

/// |2πk|² of a wave vector.
fn four_pi_sq_ksq(k: &[i64]) -> f64 {
    let ksq: f64 = k.iter().map(|&ka| (ka * ka) as f64).sum();
    4.0 * PI * PI * ksq
}

/// Δ^m as a multiplier: (−4π²|k|²)^m; the zero mode maps to zero for
/// m < 0 (mean-zero convention) and is preserved for m = 0.
fn lap_power(f: &ScalarField, m: i64) -> ScalarField {
    if m == 0 {
        return f.clone();
    }
    f.apply_multiplier(|k| {
        let q = four_pi_sq_ksq(k);
        if q == 0.0 {
            return Complex64::new(0.0, 0.0); // zero mode: killed by Δ (m>0) or the convention (m<0)
        }
        Complex64::new((-q).powi(m as i32), 0.0)
    })
}

/// ∇Δ^m componentwise as fused multipliers (Nyquist dropped by ∂_a).
fn grad_lap_power(f: &ScalarField, m: i64) -> VectorField {
    let grid = f.grid();
    let ny = (grid.points_per_axis() / 2) as i64;
    let spectrum = f.spectrum();
    let comps = (0..grid.dim())
        .map(|a| {
            spectrum
                .apply(|k| {
                    if k[a] == ny {
                        return Complex64::new(0.0, 0.0);
                    }
                    let q = four_pi_sq_ksq(k);
                    if q == 0.0 {
                        return Complex64::new(0.0, 0.0);
                    }
                    let lap = if m == 0 { 1.0 } else { (-q).powi(m as i32) };
                    Complex64::new(0.0, 2.0 * PI * k[a] as f64) * lap
                })
                .to_field()
        })
        .collect();
    VectorField::new(comps)
}

/// D^k f for even k (scalar result), no mean checks.
fn d_even(f: &ScalarField, k: i64) -> ScalarField {
    debug_assert!(k % 2 == 0);
    lap_power(f, k / 2)
}

/// D^k f for odd k (vector result), no mean checks.
fn d_odd(f: &ScalarField, k: i64) -> VectorField {
    debug_assert!(k % 2 != 0);
    grad_lap_power(f, (k - 1).div_euclid(2))
}

/// The operator D^k: Δ^{k/2} for even k, ∇Δ^{(k−1)/2} for odd k.
///
/// Negative orders require a zero-mean input (`MeanError` otherwise);
/// the output is vector-valued iff k is odd.
pub fn cal_d(k: i64, f: &ScalarField) -> Result<EitherField> {
    if k < 0 {
        f.require_zero_mean("cal_d with negative order")?;
    }
    Ok(if k.rem_euclid(2) == 0 {
        EitherField::Scalar(d_even(f, k))
    } else {
        EitherField::Vector(d_odd(f, k))
    })
}

/// Inverse Laplacian on zero-mean fields: multiplier −1/(4π²|k|²) on
/// nonzero modes, zero mode to zero.
pub fn inv_laplacian(f: &ScalarField) -> Result<ScalarField> {
    f.require_zero_mean("inv_laplacian input")?;
    Ok(lap_power(f, -1))
}

/// Standard antidivergence D^{−1} = ∇Δ^{−1}: div(antidiv_std f) = f − ∫f.
pub fn antidiv_std(f: &ScalarField) -> Result<VectorField> {
    f.require_zero_mean("antidiv_std input")?;
    Ok(d_odd(f, -1))
}

fn check_resolved(f: &ScalarField, what: &str) -> Result<()> {
    let tail = f.spectrum().tail_fraction();
    if tail > tol::TAIL_TOL {
        return Err(Error::Aliasing(format!(
            "{what} carries {tail:.3e} of its energy above n/4; the product would alias"
        )));
    }
    Ok(())
}

/// Bilinear antidivergence R_N(f, g): div R_N(f,g) = fg − ∫fg.
///
/// Requires g zero-mean and both factors band-resolved (each field's tail
/// above n/4 below `tol::TAIL_TOL`), so that the pointwise products inside
/// the telescoping stay unaliased.
pub fn antidiv_bilinear(f: &ScalarField, g: &ScalarField, n_order: usize) -> Result<VectorField> {
    if n_order == 0 {
        return Err(Error::Domain("antidivergence order N must be ≥ 1".into()));
    }
    g.require_zero_mean("antidiv_bilinear second factor")?;
    check_resolved(f, "first factor of R_N")?;
    check_resolved(g, "second factor of R_N")?;
    Ok(antidiv_bilinear_unchecked(f, g, n_order))
}

/// Clips the top spectral band of f so that pointwise products with g
/// cannot wrap past Nyquist: modes with |k_a| > n/2 − bw_a(g) are zeroed,
/// where bw_a(g) is g's per-axis bandwidth (capped at n/4). Without the
/// clip, the wrapped modes pick up the wrong wavenumber under the spectral
/// derivatives inside the telescoping of R_N and the divergence identity
/// degrades by the tail mass *amplified* by D^N; with it, the identity is
/// exact on the clipped factor and the clipped mass is tail-sized.
fn dealias_against(f: &ScalarField, g: &ScalarField) -> ScalarField {
    let grid = f.grid();
    let ny = (grid.points_per_axis() / 2) as i64;
    let cap = (grid.points_per_axis() / 4) as i64;
    let bw: Vec<i64> = g
        .spectrum()
        .per_axis_bandwidth(1e-13)
        .iter()
        .map(|&b| b.min(cap))
        .collect();
    // |k_a| + bw_a ≥ n/2 wraps; the Nyquist plane itself is clipped in
    // every axis because the odd-order derivatives drop it asymmetrically.
    f.apply_multiplier(|k| {
        let wraps = k.iter().zip(&bw).any(|(&ka, &ba)| ka.abs() + ba >= ny);
        Complex64::new(if wraps { 0.0 } else { 1.0 }, 0.0)
    })
}

/// R_N without the aliasing gate, for content whose resolution is already
/// guaranteed by the construction's resolution rule. The first factor is
/// dealiased against g's bandwidth (see [`dealias_against`]).
pub(crate) fn antidiv_bilinear_unchecked(
    f: &ScalarField,
    g: &ScalarField,
    n_order: usize,
) -> VectorField {
    let grid = f.grid();
    assert_eq!(grid, g.grid(), "R_N factors must share one grid");
    let f = &dealias_against(f, g);
    let n = n_order as i64;
    let mut acc = VectorField::zeros(grid);
    for k in 0..n {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let term = if k % 2 == 0 {
            // scalar D^k f times vector D^{−k−1} g
            let df = d_even(f, k);
            let dg = d_odd(g, -k - 1);
            dg.scale_pointwise(&df)
        } else {
            // vector D^k f times scalar D^{−k−1} g
            let df = d_odd(f, k);
            let dg = d_even(g, -k - 1);
            df.scale_pointwise(&dg)
        };
        acc = VectorField::linear_comb(&[(1.0, &acc), (sign, &term)]);
    }
    let sign_n = if n % 2 == 0 { 1.0 } else { -1.0 };
    let last = if n % 2 == 0 {
        d_even(f, n).mul(&d_even(g, -n))
    } else {
        d_odd(f, n).dot(&d_odd(g, -n))
    }
    .scale(sign_n);
    // Subtract the measured grid mean (numerically exact stand-in for ∫fg,
    // to which it agrees by discrete partial integration).
    let tail_term = d_odd(&last.remove_mean(), -1);
    VectorField::linear_comb(&[(1.0, &acc), (1.0, &tail_term)])
}

/// Residual of the improved Hölder inequality for fast oscillations:
/// returns |‖f·g_λ‖_{L^p} − ‖f‖_{L^p}·‖g‖_{L^p}|, which the inequality
/// bounds by C_p·λ^{−1/p}·‖f‖_{C¹}‖g‖_{L^p}.
pub fn improved_holder_residual(
    f: &ScalarField,
    g: &ScalarField,
    lambda: u64,
    p: f64,
) -> Result<f64> {
    assert_eq!(f.grid(), g.grid(), "factors must share one grid");
    let g_fast = dilate(g, lambda)?;
    let product_norm = f.mul(&g_fast).lp_norm(p)?;
    Ok((product_norm - f.lp_norm(p)? * g.lp_norm(p)?).abs())
}

/// Which inequality a ratio probe measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    /// Calderon-Zygmund: ‖f‖_{W^{2,p}} / ‖Δf‖_{L^p}, p ∈ (1,∞).
    Cz,
    /// Antiderivative estimate: ‖D^{−k}f‖_{W^{k,p}} / ‖f‖_{L^p}, p ∈ (1,∞).
    AntiderivEst,
    /// End-point estimate: ‖D^{−k}f‖_{W^{k−1,p}} / ‖f‖_{L^p}, p ∈ [1,∞].
    AntiderivEnd,
}

impl ProbeKind {
    fn name(&self) -> &'static str {
        match self {
            ProbeKind::Cz => "cz",
            ProbeKind::AntiderivEst => "antideriv_est",
            ProbeKind::AntiderivEnd => "antideriv_end",
        }
    }
}

/// Outcome of a single operator ratio probe.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct OperatorProbeReport {
    /// Inequality probed.
    pub kind: ProbeKind,
    /// Grid dimension.
    pub d: usize,
    /// Lebesgue exponent.
    pub p: f64,
    /// Antiderivative order (0 for the Calderon-Zygmund probe).
    pub k: usize,
    /// Measured left-hand side / right-hand side of the inequality.
    pub ratio: f64,
    /// Budget for the ratio, calibrated per (kind, d, p, k).
    pub budget: f64,
    /// ratio ≤ budget.
    pub pass: bool,
}

/// Measured norm ratio of one of the §-inequalities on a concrete field.
///
/// The field must be zero-mean; `k` is the antiderivative order (ignored
/// for the Calderon-Zygmund probe). Passing means the measured ratio stays
/// within the frozen corpus budget for (kind, d, p, k).
pub fn operator_ratio_probe(
    kind: ProbeKind,
    f: &ScalarField,
    p: f64,
    k: usize,
) -> Result<OperatorProbeReport> {
    match kind {
        ProbeKind::Cz | ProbeKind::AntiderivEst => {
            if !(p > 1.0 && p.is_finite()) {
                return Err(Error::Domain(format!(
                    "{} probe needs p ∈ (1, ∞), got {p}",
                    kind.name()
                )));
            }
        }
        ProbeKind::AntiderivEnd => {
            if p.is_nan() || p < 1.0 {
                return Err(Error::Domain(format!(
                    "antideriv_end probe needs p ∈ [1, ∞], got {p}"
                )));
            }
        }
    }
    if kind != ProbeKind::Cz && k == 0 {
        return Err(Error::Domain("antiderivative probes need k ≥ 1".into()));
    }
    f.require_zero_mean("probe input")?;
    let ratio = probe_ratio(kind, f, p, k)?;
    let d = f.grid().dim();
    let budget = probe_budget(kind, d, p, k);
    Ok(OperatorProbeReport {
        kind,
        d,
        p,
        k: if kind == ProbeKind::Cz { 0 } else { k },
        ratio,
        budget,
        pass: ratio <= budget,
    })
}

fn probe_ratio(kind: ProbeKind, f: &ScalarField, p: f64, k: usize) -> Result<f64> {
    Ok(match kind {
        ProbeKind::Cz => {
            let lap = d_even(f, 2);
            f.sobolev_norm(2, p)? / lap.lp_norm(p)?
        }
        ProbeKind::AntiderivEst => {
            let anti = cal_d(-(k as i64), f)?;
            anti.sobolev_norm(k, p)? / f.lp_norm(p)?
        }
        ProbeKind::AntiderivEnd => {
            let anti = cal_d(-(k as i64), f)?;
            anti.sobolev_norm(k - 1, p)? / f.lp_norm(p)?
        }
    })
}

/// Frozen probe budgets, keyed by (kind, d, p·4 as integer, k).
///
/// Calibrated once per tuple by [`run_calibration`]; the same procedure
/// recalibrates on demand (with a process-local cache) for tuples outside
/// the frozen table.
fn frozen_budgets() -> &'static HashMap<(ProbeKind, usize, u64, usize), f64> {
    static TABLE: OnceLock<HashMap<(ProbeKind, usize, u64, usize), f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut m = HashMap::new();
        for (kind, d, p4, k, budget) in FROZEN_BUDGETS {
            m.insert((*kind, *d, *p4, *k), *budget);
        }
        m
    })
}

/// (kind, d, 4p, k) → budget (p = ∞ encoded as u64::MAX).
///
/// Generated by the `print_probe_calibration` test; see [`run_calibration`]
/// for the corpus.
const FROZEN_BUDGETS: &[(ProbeKind, usize, u64, usize, f64)] = &[
    (ProbeKind::AntiderivEnd, 2, 4, 1, 0.259809),
    (ProbeKind::AntiderivEnd, 2, 4, 2, 0.354059),
    (ProbeKind::AntiderivEnd, 2, 4, 3, 0.445852),
    (ProbeKind::Cz, 2, 6, 0, 2.670521),
    (ProbeKind::AntiderivEst, 2, 6, 1, 2.461541),
    (ProbeKind::AntiderivEnd, 2, 6, 1, 0.235090),
    (ProbeKind::AntiderivEst, 2, 6, 2, 2.744883),
    (ProbeKind::AntiderivEnd, 2, 6, 2, 0.348838),
    (ProbeKind::AntiderivEst, 2, 6, 3, 3.001636),
    (ProbeKind::AntiderivEnd, 2, 6, 3, 0.407734),
    (ProbeKind::Cz, 2, 8, 0, 2.654460),
    (ProbeKind::AntiderivEst, 2, 8, 1, 2.327013),
    (ProbeKind::AntiderivEnd, 2, 8, 1, 0.227923),
    (ProbeKind::AntiderivEst, 2, 8, 2, 2.688138),
    (ProbeKind::AntiderivEnd, 2, 8, 2, 0.343570),
    (ProbeKind::AntiderivEst, 2, 8, 3, 2.817816),
    (ProbeKind::AntiderivEnd, 2, 8, 3, 0.393473),
    (ProbeKind::Cz, 2, 12, 0, 2.619839),
    (ProbeKind::AntiderivEst, 2, 12, 1, 2.207504),
    (ProbeKind::AntiderivEnd, 2, 12, 1, 0.222984),
    (ProbeKind::AntiderivEst, 2, 12, 2, 2.629701),
    (ProbeKind::AntiderivEnd, 2, 12, 2, 0.333437),
    (ProbeKind::AntiderivEst, 2, 12, 3, 2.654971),
    (ProbeKind::AntiderivEnd, 2, 12, 3, 0.370963),
    (ProbeKind::Cz, 2, 16, 0, 2.593487),
    (ProbeKind::AntiderivEst, 2, 16, 1, 2.165626),
    (ProbeKind::AntiderivEnd, 2, 16, 1, 0.219284),
    (ProbeKind::AntiderivEst, 2, 16, 2, 2.622900),
    (ProbeKind::AntiderivEnd, 2, 16, 2, 0.324397),
    (ProbeKind::AntiderivEst, 2, 16, 3, 2.597746),
    (ProbeKind::AntiderivEnd, 2, 16, 3, 0.353614),
    (ProbeKind::AntiderivEnd, 2, u64::MAX, 1, 0.185900),
    (ProbeKind::AntiderivEnd, 2, u64::MAX, 2, 0.289024),
    (ProbeKind::AntiderivEnd, 2, u64::MAX, 3, 0.284243),
    (ProbeKind::AntiderivEnd, 3, 4, 1, 0.239940),
    (ProbeKind::AntiderivEnd, 3, 4, 2, 0.391857),
    (ProbeKind::AntiderivEnd, 3, 4, 3, 0.528470),
    (ProbeKind::Cz, 3, 6, 0, 3.470838),
    (ProbeKind::AntiderivEst, 3, 6, 1, 2.975270),
    (ProbeKind::AntiderivEnd, 3, 6, 1, 0.218623),
    (ProbeKind::AntiderivEst, 3, 6, 2, 3.589769),
    (ProbeKind::AntiderivEnd, 3, 6, 2, 0.380789),
    (ProbeKind::AntiderivEst, 3, 6, 3, 4.065394),
    (ProbeKind::AntiderivEnd, 3, 6, 3, 0.489239),
    (ProbeKind::Cz, 3, 8, 0, 3.439079),
    (ProbeKind::AntiderivEst, 3, 8, 1, 2.790235),
    (ProbeKind::AntiderivEnd, 3, 8, 1, 0.204141),
    (ProbeKind::AntiderivEst, 3, 8, 2, 3.541021),
    (ProbeKind::AntiderivEnd, 3, 8, 2, 0.373175),
    (ProbeKind::AntiderivEst, 3, 8, 3, 3.852321),
    (ProbeKind::AntiderivEnd, 3, 8, 3, 0.468001),
    (ProbeKind::Cz, 3, 12, 0, 3.406023),
    (ProbeKind::AntiderivEst, 3, 12, 1, 2.625958),
    (ProbeKind::AntiderivEnd, 3, 12, 1, 0.187469),
    (ProbeKind::AntiderivEst, 3, 12, 2, 3.514168),
    (ProbeKind::AntiderivEnd, 3, 12, 2, 0.366815),
    (ProbeKind::AntiderivEst, 3, 12, 3, 3.627936),
    (ProbeKind::AntiderivEnd, 3, 12, 3, 0.441517),
    (ProbeKind::Cz, 3, 16, 0, 3.414715),
    (ProbeKind::AntiderivEst, 3, 16, 1, 2.532249),
    (ProbeKind::AntiderivEnd, 3, 16, 1, 0.177424),
    (ProbeKind::AntiderivEst, 3, 16, 2, 3.503048),
    (ProbeKind::AntiderivEnd, 3, 16, 2, 0.362716),
    (ProbeKind::AntiderivEst, 3, 16, 3, 3.490340),
    (ProbeKind::AntiderivEnd, 3, 16, 3, 0.425011),
    (ProbeKind::AntiderivEnd, 3, u64::MAX, 1, 0.151410),
    (ProbeKind::AntiderivEnd, 3, u64::MAX, 2, 0.338756),
    (ProbeKind::AntiderivEnd, 3, u64::MAX, 3, 0.322215),
];

/// Budget for a probe: the frozen table when the tuple is covered, else a
/// deterministic on-demand calibration with the same corpus parameters.
pub fn probe_budget(kind: ProbeKind, d: usize, p: f64, k: usize) -> f64 {
    let key_k = if kind == ProbeKind::Cz { 0 } else { k };
    if p.is_finite() {
        let p4 = p * 4.0;
        if (p4 - p4.round()).abs() < 1e-12 {
            if let Some(b) = frozen_budgets().get(&(kind, d, p4.round() as u64, key_k)) {
                return *b;
            }
        }
    } else if let Some(b) = frozen_budgets().get(&(kind, d, u64::MAX, key_k)) {
        return *b;
    }
    calibrated_budget(kind, d, p, key_k)
}

fn calibrated_budget(kind: ProbeKind, d: usize, p: f64, k: usize) -> f64 {
    static CACHE: OnceLock<Mutex<HashMap<(ProbeKind, usize, u64, usize), f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (kind, d, p.to_bits(), k);
    if let Some(b) = cache.lock().expect("budget cache").get(&key) {
        return *b;
    }
    let b = run_calibration(kind, d, p, k);
    cache.lock().expect("budget cache").insert(key, b);
    b
}

/// Corpus maximum of the probe ratio times a 1.5 headroom factor.
///
/// This is the procedure that generated [`FROZEN_BUDGETS`]. The corpus
/// cycles the band limit through {1, 2, 4, 8} so that concentration at the
/// lowest frequencies — the extremal regime for the antiderivative ratios —
/// is represented, and the band limits are resolution-independent so the
/// recorded maxima are stable under grid refinement.
pub fn run_calibration(kind: ProbeKind, d: usize, p: f64, k: usize) -> f64 {
    let n: usize = match d {
        2 => 64,
        3 => 32,
        _ => 16,
    };
    let grid = GridSpec::new(d, n).expect("calibration grid");
    let mut rng = ChaCha8Rng::seed_from_u64(0xCAFE_BABE);
    let kmax_cycle = [1usize, 2, 4, 8];
    let mut worst = 0.0f64;
    for i in 0..100 {
        let kmax = kmax_cycle[i % kmax_cycle.len()].min(n / 4);
        let f = random_band_limited(grid, kmax, true, &mut rng);
        let r = probe_ratio(kind, &f, p, k.max(1)).expect("calibration ratio");
        worst = worst.max(r);
    }
    worst * 1.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus_grid::sample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rel_l2_diff(a: &ScalarField, b: &ScalarField) -> f64 {
        let diff = a.sub(b).lp_norm(2.0).unwrap();
        let scale = b.lp_norm(2.0).unwrap().max(1e-300);
        diff / scale
    }

    #[test]
    fn inv_laplacian_inverts_single_mode() {
        let g = GridSpec::new(2, 16).unwrap();
        let f = sample(g, |x| (2.0 * PI * x[0]).cos()).unwrap();
        let inv = inv_laplacian(&f).unwrap();
        let expect = sample(g, |x| -(2.0 * PI * x[0]).cos() / (4.0 * PI * PI)).unwrap();
        assert!(
            rel_l2_diff(&inv, &expect) < 1e-13,
            "Δ⁻¹cos(2πx₁) = −cos(2πx₁)/4π²"
        );
    }

    #[test]
    fn laplacian_matches_divergence_of_gradient() {
        let g = GridSpec::new(2, 64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let f = random_band_limited(g, 8, false, &mut rng);
        assert!(
            rel_l2_diff(&laplacian(&f), &divergence(&gradient(&f))) < 1e-12,
            "Δf = div ∇f"
        );
    }

    #[test]
    fn inv_laplacian_forward_check_on_random_fields() {
        let g = GridSpec::new(2, 64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let f = random_band_limited(g, 8, true, &mut rng);
            let back = d_even(&inv_laplacian(&f).unwrap(), 2);
            assert!(
                rel_l2_diff(&back, &f) <= 1e-10,
                "Δ(Δ⁻¹f) must reproduce f"
            );
        }
    }

    #[test]
    fn inv_laplacian_rejects_nonzero_mean() {
        let g = GridSpec::new(2, 16).unwrap();
        let f = ScalarField::constant(g, 1.0);
        assert!(matches!(inv_laplacian(&f), Err(Error::Mean { .. })));
    }

    #[test]
    fn cal_d_zero_is_identity_and_parity_decides_shape() {
        let g = GridSpec::new(2, 16).unwrap();
        let f = sample(g, |x| (2.0 * PI * x[0]).cos()).unwrap();
        match cal_d(0, &f).unwrap() {
            EitherField::Scalar(s) => assert!(rel_l2_diff(&s, &f) < 1e-15),
            EitherField::Vector(_) => panic!("D⁰ must be scalar"),
        }
        assert!(matches!(cal_d(1, &f).unwrap(), EitherField::Vector(_)));
        assert!(matches!(cal_d(2, &f).unwrap(), EitherField::Scalar(_)));
        assert!(matches!(cal_d(-1, &f).unwrap(), EitherField::Vector(_)));
    }

    #[test]
    fn cal_d_one_is_gradient_of_mode() {
        let g = GridSpec::new(2, 32).unwrap();
        let f = sample(g, |x| (2.0 * PI * x[0]).cos()).unwrap();
        let grad = cal_d(1, &f).unwrap().unwrap_vector();
        let expect0 = sample(g, |x| -2.0 * PI * (2.0 * PI * x[0]).sin()).unwrap();
        assert!(rel_l2_diff(grad.comp(0), &expect0) < 1e-12);
        assert!(grad.comp(1).max_abs() < 1e-12);
    }

    #[test]
    fn antidiv_std_of_single_mode_and_forward_check() {
        let g = GridSpec::new(2, 32).unwrap();
        let f = sample(g, |x| (2.0 * PI * x[1]).sin()).unwrap();
        let r = antidiv_std(&f).unwrap();
        // expected (0, −cos(2πx₂)/(2π))
        let expect1 = sample(g, |x| -(2.0 * PI * x[1]).cos() / (2.0 * PI)).unwrap();
        assert!(r.comp(0).max_abs() < 1e-13);
        assert!(rel_l2_diff(r.comp(1), &expect1) < 1e-12);
        let back = divergence(&r);
        assert!(rel_l2_diff(&back, &f) <= 1e-10, "div ∘ antidiv_std = id");
    }

    #[test]
    fn antidiv_bilinear_constant_first_factor_reduces_to_standard() {
        let g = GridSpec::new(2, 32).unwrap();
        let c = ScalarField::constant(g, 2.5);
        let f = sample(g, |x| (4.0 * PI * x[0]).sin()).unwrap();
        let rn = antidiv_bilinear(&c, &f, 3).unwrap();
        let expect = antidiv_std(&f).unwrap().scale(2.5);
        for (a, b) in rn.comps().iter().zip(expect.comps()) {
            assert!(
                rel_l2_diff(a, b) < 1e-12,
                "R_N(c, g) must equal c·D^{{-1}}g"
            );
        }
    }

    #[test]
    fn antidiv_bilinear_divergence_identity_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        for d in [2usize, 3] {
            let n = if d == 2 { 64 } else { 32 };
            let g = GridSpec::new(d, n).unwrap();
            for n_ord in [1usize, 2, 3] {
                let f = random_band_limited(g, n / 8, false, &mut rng);
                let gg = random_band_limited(g, n / 8, true, &mut rng);
                let r = antidiv_bilinear(&f, &gg, n_ord).unwrap();
                let div = divergence(&r);
                let fg = f.mul(&gg).remove_mean();
                assert!(
                    rel_l2_diff(&div, &fg) <= 1e-9,
                    "div R_{n_ord} = fg − mean failed at d={d}"
                );
            }
        }
    }

    #[test]
    fn antidiv_bilinear_leibniz_rule() {
        let g = GridSpec::new(2, 64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let f = random_band_limited(g, 6, false, &mut rng);
        let h = random_band_limited(g, 6, true, &mut rng);
        let n_ord = 2;
        let r = antidiv_bilinear(&f, &h, n_ord).unwrap();
        for j in 0..2 {
            let lhs = VectorField::new(r.comps().iter().map(|c| c.partial_deriv(j)).collect());
            let r1 = antidiv_bilinear_unchecked(&f.partial_deriv(j), &h, n_ord);
            let r2 = antidiv_bilinear_unchecked(&f, &h.partial_deriv(j), n_ord);
            let rhs = VectorField::linear_comb(&[(1.0, &r1), (1.0, &r2)]);
            let num = lhs.sub(&rhs).lp_norm(2.0).unwrap();
            let den = lhs.lp_norm(2.0).unwrap().max(1e-300);
            assert!(num / den <= 1e-9, "Leibniz rule along axis {j}: {}", num / den);
        }
    }

    #[test]
    fn antidiv_bilinear_requires_zero_mean_second_factor() {
        let g = GridSpec::new(2, 16).unwrap();
        let f = ScalarField::constant(g, 1.0);
        let gg = ScalarField::constant(g, 1.0);
        assert!(matches!(
            antidiv_bilinear(&f, &gg, 1),
            Err(Error::Mean { .. })
        ));
    }

    #[test]
    fn antidiv_bilinear_gains_the_oscillation_parameter() {
        // ‖R_N(f, g_ν)‖_{L¹} ∝ ν^{−1} for fixed smooth f, g.
        let g = GridSpec::new(2, 512).unwrap();
        let f = sample(g, |x| (2.0 * PI * x[0]).cos() + 0.3).unwrap();
        let base = sample(g, |x| (2.0 * PI * x[1]).sin()).unwrap();
        let mut nus = Vec::new();
        let mut norms = Vec::new();
        for nu in [8u64, 16, 32, 64] {
            let fast = dilate(&base, nu).unwrap();
            let r = antidiv_bilinear(&f, &fast, 3).unwrap();
            nus.push(nu as f64);
            norms.push(r.lp_norm(1.0).unwrap());
        }
        let slope = crate::fit::log_log_slope(&nus, &norms);
        assert!(
            (slope + 1.0).abs() <= 0.1,
            "R_N decay in ν must fit exponent −1 ± 0.1, got {slope}"
        );
    }

    #[test]
    fn improved_holder_residual_vanishes_for_constants() {
        let g = GridSpec::new(2, 64).unwrap();
        let ones = ScalarField::constant(g, 1.0);
        let gg = sample(g, |x| (2.0 * PI * x[0]).sin()).unwrap();
        let r = improved_holder_residual(&ones, &gg, 4, 2.0).unwrap();
        assert!(r < 1e-13, "f ≡ 1 must give zero residual, got {r}");
        let r = improved_holder_residual(&gg, &ones, 4, 2.0).unwrap();
        assert!(r < 1e-13, "g ≡ 1 must give zero residual, got {r}");
    }

    #[test]
    fn improved_holder_rate_at_p_two() {
        // Full-spectrum smooth f, so the λ-couplings are nonzero; the bound
        // only claims the decay is at least λ^{−1/2}, hence the one-sided
        // slope check. Residuals below the rounding floor are clamped so the
        // log-fit stays defined (a zero residual is maximal decay).
        let g = GridSpec::new(2, 512).unwrap();
        let f = sample(g, |x| (0.8 * (2.0 * PI * x[0]).sin()).exp()).unwrap();
        let base = sample(g, |x| (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos()).unwrap();
        let lambdas = [4u64, 8, 16, 32];
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for &lam in &lambdas {
            xs.push(lam as f64);
            let r = improved_holder_residual(&f, &base, lam, 2.0).unwrap();
            ys.push(r.max(1e-250));
        }
        let slope = crate::fit::log_log_slope(&xs, &ys);
        assert!(
            slope <= -0.5 + 0.1,
            "residual must decay at least like λ^{{−1/2}}, slope {slope}, residuals {ys:?}"
        );
    }

    #[test]
    fn partial_integration_identity() {
        // ∫ D^k f · D^{m+n} g = (−1)^n ∫ D^{k+n} f · D^m g for zero-mean f, g.
        let g = GridSpec::new(2, 64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_band_limited(g, 8, true, &mut rng);
        let h = random_band_limited(g, 8, true, &mut rng);
        let pairing = |a: &EitherField, b: &EitherField| -> f64 {
            match (a, b) {
                (EitherField::Scalar(x), EitherField::Scalar(y)) => x.mul(y).mean(),
                (EitherField::Vector(x), EitherField::Vector(y)) => x.dot(y).mean(),
                _ => panic!("mismatched parities"),
            }
        };
        for (k, m, nn) in [(0i64, 0i64, 2i64), (1, -1, 2), (-2, 1, 1), (2, -3, 3), (0, 1, -1)] {
            let lhs = pairing(&cal_d(k, &f).unwrap(), &cal_d(m + nn, &h).unwrap());
            let sign = if nn.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let rhs = sign * pairing(&cal_d(k + nn, &f).unwrap(), &cal_d(m, &h).unwrap());
            assert!(
                (lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1e-3),
                "partial integration failed for (k,m,n)=({k},{m},{nn}): {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn scaling_law_for_dilations() {
        // D^k(u_λ) = λ^k (D^k u)_λ.
        let g = GridSpec::new(2, 128).unwrap();
        let u = sample(g, |x| {
            (2.0 * PI * x[0]).sin() + 0.5 * (4.0 * PI * (x[0] + x[1])).cos()
        })
        .unwrap();
        for (k, lam) in [(1i64, 2u64), (2, 2), (-1, 4), (-2, 4), (3, 2)] {
            let lhs = cal_d(k, &dilate(&u, lam).unwrap()).unwrap();
            let scale = (lam as f64).powi(k as i32);
            let (lhs_n, rhs_n) = match (lhs, cal_d(k, &u).unwrap()) {
                (EitherField::Scalar(l), EitherField::Scalar(r)) => {
                    let rd = dilate(&r, lam).unwrap().scale(scale);
                    (l.sub(&rd).lp_norm(2.0).unwrap(), rd.lp_norm(2.0).unwrap())
                }
                (EitherField::Vector(l), EitherField::Vector(r)) => {
                    let comps: Result<Vec<_>> =
                        r.comps().iter().map(|c| dilate(c, lam).map(|f| f.scale(scale))).collect();
                    let rd = VectorField::new(comps.unwrap());
                    (l.sub(&rd).lp_norm(2.0).unwrap(), rd.lp_norm(2.0).unwrap())
                }
                _ => unreachable!("parities agree"),
            };
            assert!(
                lhs_n <= 1e-10 * rhs_n.max(1e-300),
                "scaling law failed for k={k}, λ={lam}"
            );
        }
    }

    #[test]
    fn cz_probe_on_single_mode_has_closed_form_ratio() {
        let g = GridSpec::new(2, 32).unwrap();
        let f = sample(g, |x| (2.0 * PI * x[0]).cos()).unwrap();
        let report = operator_ratio_probe(ProbeKind::Cz, &f, 2.0, 0).unwrap();
        let expect = (1.0 + 2.0 * PI + 4.0 * PI * PI) / (4.0 * PI * PI);
        assert!(
            (report.ratio - expect).abs() < 1e-10,
            "cz ratio for a single mode: got {}, want {expect}",
            report.ratio
        );
    }

    #[test]
    fn antideriv_end_probe_on_single_mode_passes() {
        let g = GridSpec::new(2, 32).unwrap();
        let f = sample(g, |x| (2.0 * PI * x[0]).cos()).unwrap();
        let report = operator_ratio_probe(ProbeKind::AntiderivEnd, &f, 2.0, 1).unwrap();
        assert!(report.ratio.is_finite() && report.ratio > 0.0);
        assert!(report.pass, "single-mode end-point probe must pass");
    }

    #[test]
    fn probe_rejects_out_of_range_p() {
        let g = GridSpec::new(2, 16).unwrap();
        let f = sample(g, |x| (2.0 * PI * x[0]).cos()).unwrap();
        assert!(matches!(
            operator_ratio_probe(ProbeKind::Cz, &f, 1.0, 0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            operator_ratio_probe(ProbeKind::AntiderivEst, &f, f64::INFINITY, 1),
            Err(Error::Domain(_))
        ));
        assert!(operator_ratio_probe(ProbeKind::AntiderivEnd, &f, 1.0, 1).is_ok());
    }

    #[test]
    fn probe_report_serializes_with_snake_case_kind() {
        let g = GridSpec::new(2, 32).unwrap();
        let f = sample(g, |x| (2.0 * PI * x[0]).cos()).unwrap();
        let report = operator_ratio_probe(ProbeKind::AntiderivEnd, &f, 2.0, 1).unwrap();
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"kind\":\"antideriv_end\""), "json: {json}");
        assert!(json.contains("\"ratio\""));
        assert!(json.contains("\"budget\""));
    }

    #[test]
    #[ignore = "calibration printer; run manually to regenerate FROZEN_BUDGETS"]
    fn print_probe_calibration() {
        for d in [2usize, 3] {
            for &p in &[1.0f64, 1.5, 2.0, 3.0, 4.0] {
                if p > 1.0 {
                    println!(
                        "(ProbeKind::Cz, {d}, {}, 0, {:.6}),",
                        (p * 4.0) as u64,
                        run_calibration(ProbeKind::Cz, d, p, 0)
                    );
                }
                for k in 1..=3usize {
                    if p > 1.0 {
                        println!(
                            "(ProbeKind::AntiderivEst, {d}, {}, {k}, {:.6}),",
                            (p * 4.0) as u64,
                            run_calibration(ProbeKind::AntiderivEst, d, p, k)
                        );
                    }
                    println!(
                        "(ProbeKind::AntiderivEnd, {d}, {}, {k}, {:.6}),",
                        (p * 4.0) as u64,
                        run_calibration(ProbeKind::AntiderivEnd, d, p, k)
                    );
                }
            }
            for k in 1..=3usize {
                println!(
                    "(ProbeKind::AntiderivEnd, {d}, u64::MAX, {k}, {:.6}), // p = ∞",
                    run_calibration(ProbeKind::AntiderivEnd, d, f64::INFINITY, k)
                );
            }
        }
    }
}
