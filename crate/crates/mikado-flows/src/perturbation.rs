//! Cutoffs, coefficient fields, and the Mikado perturbations.
//!
//! Given a defect field R₀ and a threshold δ, the construction adds to
//! (ρ₀, u₀) highly oscillatory perturbations built from the space-time
//! Mikado blocks of [`crate::mikado`]:
//!
//! ```text
//!     χ_j = H(|R_0^j|)              cutoff, 0 below δ/(4d), 1 above δ/(2d)
//!     a_j = η χ_j sgn(R_0^j)|R_0^j|^{1/p}
//!     b_j = η^{−1} χ_j |R_0^j|^{1/p′}          (so a_j b_j = χ_j² R_0^j)
//!
//!     ϑ = Σ_j a_j Θ^j       ϑ_c(t) = −∮ ϑ(t)
//!     w = Σ_j b_j W^j       w_c    = −Σ_j R_N(f_j, ψ_ν^j)
//!     q = Σ_j a_j b_j Q^j   q_c(t) = −∮ q(t)
//! ```
//!
//! with f_j = ∂_j(b_j · (φ̃_μ^j)_λ∘τ_{ωte_j}), so that ρ₁ = ρ₀ + ϑ + ϑ_c
//! + q + q_c stays mean-free and u₁ = u₀ + w + w_c stays divergence-free:
//! ψ_ν^j does not depend on x_j, hence div w = Σ_j f_j ψ_ν^j, which is
//! exactly what div w_c cancels (up to the grid means that the bilinear
//! antidivergence removes, and those vanish identically here).
//!
//! The transition function is H(v) = B((v − δ/(4d))/(δ/(4d))) with
//! B(x) = f(x)/(f(x) + f(1−x)) and f(x) = e^{−1/x} for x > 0, else 0: a
//! C^∞ ramp with exact plateaus, so every coefficient field is smooth even
//! though |v|^{1/p} is not — the cutoff vanishes identically near v = 0.
//! Time derivatives of the coefficients are evaluated by the chain rule
//! from ∂_t R₀ (analytic when the seed provides it, else the 4th-order
//! stencil).

use crate::calculus::antidiv_bilinear_unchecked;
use crate::error::{Error, Result};
use crate::mikado::MikadoSet;
use crate::tol;
use crate::torus_grid::{Field, GridSpec, ScalarField, TimeField, TimeGrid, VectorField};

/// f(x) = e^{−1/x} for x > 0, else 0 (the C^∞ ramp ingredient).
fn ramp(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

/// f′(x) = e^{−1/x}/x² for x > 0, else 0.
fn ramp_prime(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp() / (x * x)
    } else {
        0.0
    }
}

/// Smooth transition B(x) = f(x)/(f(x) + f(1−x)): 0 for x ≤ 0, 1 for
/// x ≥ 1, strictly monotone in between.
pub fn transition_b(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let f = ramp(x);
        f / (f + ramp(1.0 - x))
    }
}

/// Derivative B′(x) = (f′(x)f(1−x) + f(x)f′(1−x)) / (f(x)+f(1−x))².
pub fn transition_b_prime(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        let (f, fb) = (ramp(x), ramp(1.0 - x));
        let (df, dfb) = (ramp_prime(x), ramp_prime(1.0 - x));
        (df * fb + f * dfb) / ((f + fb) * (f + fb))
    }
}

/// Cutoff profile H(v) = B((v − δ/(4d))/(δ/(4d))) on v = |R_0^j|:
/// exactly 0 for v ≤ δ/(4d) and exactly 1 for v ≥ δ/(2d).
pub fn transition_h(v: f64, delta: f64, d: usize) -> f64 {
    let lower = delta / (4.0 * d as f64);
    transition_b((v - lower) / lower)
}

/// dH/dv, supported in the open transition band (δ/(4d), δ/(2d)).
pub fn transition_h_prime(v: f64, delta: f64, d: usize) -> f64 {
    let lower = delta / (4.0 * d as f64);
    transition_b_prime((v - lower) / lower) / lower
}

/// The family of smooth cutoffs χ_j = H(|R_0^j|), one per coordinate.
#[derive(Clone, Debug)]
pub struct CutoffFamily {
    chi: Vec<TimeField<ScalarField>>,
    delta: f64,
}

impl CutoffFamily {
    /// Dimension d (one cutoff per coordinate direction).
    pub fn dim(&self) -> usize {
        self.chi.len()
    }

    /// The cutoff field χ_j.
    pub fn chi(&self, j: usize) -> &TimeField<ScalarField> {
        &self.chi[j]
    }

    /// Threshold δ: χ_j plateaus at δ/(4d) and δ/(2d).
    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// Builds the cutoffs χ_j(t,x) = H(|R_0^j(t,x)|).
pub fn build_cutoffs(r0: &TimeField<VectorField>, delta: f64) -> CutoffFamily {
    assert!(
        delta.is_finite() && delta > 0.0,
        "cutoff threshold δ = {delta} must be positive"
    );
    let d = r0.snapshot(0).comps().len();
    let tg = r0.tgrid();
    let chi = (0..d)
        .map(|j| {
            let snaps = r0
                .snapshots()
                .iter()
                .map(|snap| snap.comp(j).map(|v| transition_h(v.abs(), delta, d)))
                .collect();
            TimeField::from_snapshots(tg, snaps).expect("cutoff snapshots match the grid")
        })
        .collect();
    CutoffFamily { chi, delta }
}

/// The coefficient fields a_j, b_j with their chain-rule time derivatives
/// and the product a_jb_j = χ_j²R_0^j.
#[derive(Clone, Debug)]
pub struct CoefficientFields {
    a: Vec<TimeField<ScalarField>>,
    b: Vec<TimeField<ScalarField>>,
    da_dt: Vec<TimeField<ScalarField>>,
    db_dt: Vec<TimeField<ScalarField>>,
    ab: Vec<TimeField<ScalarField>>,
    dab_dt: Vec<TimeField<ScalarField>>,
    eta: f64,
    p: f64,
    delta: f64,
}

impl CoefficientFields {
    /// a_j = η χ_j sgn(R_0^j)|R_0^j|^{1/p}.
    pub fn a(&self, j: usize) -> &TimeField<ScalarField> {
        &self.a[j]
    }

    /// b_j = η^{−1} χ_j |R_0^j|^{1/p′}.
    pub fn b(&self, j: usize) -> &TimeField<ScalarField> {
        &self.b[j]
    }

    /// ∂_t a_j by the chain rule.
    pub fn da_dt(&self, j: usize) -> &TimeField<ScalarField> {
        &self.da_dt[j]
    }

    /// ∂_t b_j by the chain rule.
    pub fn db_dt(&self, j: usize) -> &TimeField<ScalarField> {
        &self.db_dt[j]
    }

    /// a_jb_j = χ_j²R_0^j, evaluated directly from R_0^j.
    pub fn ab(&self, j: usize) -> &TimeField<ScalarField> {
        &self.ab[j]
    }

    /// ∂_t(a_jb_j) by the chain rule.
    pub fn dab_dt(&self, j: usize) -> &TimeField<ScalarField> {
        &self.dab_dt[j]
    }

    /// Dimension d.
    pub fn dim(&self) -> usize {
        self.a.len()
    }

    /// Oscillation balance parameter η.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Density integrability exponent p.
    pub fn p(&self) -> f64 {
        self.p
    }

    /// Cutoff threshold δ the coefficients were built with.
    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// Pointwise coefficient evaluations at one value v = R_0^j(t,x) with
/// time derivative s = ∂_tR_0^j(t,x). Returns (a, b, ∂_ta, ∂_tb, ab,
/// ∂_t(ab)) without the η factors.
fn coefficient_point(v: f64, s: f64, delta: f64, d: usize, p: f64) -> (f64, f64, f64, f64, f64, f64) {
    let va = v.abs();
    let h = transition_h(va, delta, d);
    if h == 0.0 {
        return (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    }
    let hp = transition_h_prime(va, delta, d);
    let pc = p / (p - 1.0); // conjugate exponent p′
    let sgn = if v >= 0.0 { 1.0 } else { -1.0 };
    let vp = va.powf(1.0 / p);
    let vpc = va.powf(1.0 / pc);
    let a = h * sgn * vp;
    let b = h * vpc;
    // d/dt a = s·(H′|v|^{1/p} + H·(1/p)|v|^{1/p−1}); the sgn factors of
    // d|v|/dt and of sgn(v)|v|^{1/p} cancel.
    let da = s * (hp * vp + h * vp / (p * va));
    let db = s * sgn * (hp * vpc + h * vpc / (pc * va));
    // ab = H²v, d/dt(ab) = s·(2HH′|v| + H²).
    let ab = h * h * v;
    let dab = s * (2.0 * h * hp * va + h * h);
    (a, b, da, db, ab, dab)
}

/// Builds a_j, b_j and their time derivatives from R_0 and the cutoffs.
pub fn build_coefficients(
    r0: &TimeField<VectorField>,
    cutoffs: &CutoffFamily,
    eta: f64,
    p: f64,
) -> CoefficientFields {
    assert!(eta.is_finite() && eta > 0.0, "η = {eta} must be positive");
    assert!(p > 1.0 && p.is_finite(), "p = {p} must lie in (1, ∞)");
    let d = r0.snapshot(0).comps().len();
    assert_eq!(cutoffs.dim(), d, "cutoffs and R_0 must agree on d");
    let delta = cutoffs.delta();
    let grid = r0.grid();
    let samples = r0.tgrid().num_samples();

    // one pass per sample: evaluate all six pointwise fields per j
    let mut a = vec![Vec::with_capacity(samples); d];
    let mut b = vec![Vec::with_capacity(samples); d];
    let mut da = vec![Vec::with_capacity(samples); d];
    let mut db = vec![Vec::with_capacity(samples); d];
    let mut ab = vec![Vec::with_capacity(samples); d];
    let mut dab = vec![Vec::with_capacity(samples); d];
    for k in 0..samples {
        let snap = r0.snapshot(k);
        let dsnap = r0.derivative_at(k);
        for j in 0..d {
            let vj = snap.comp(j).values();
            let sj = dsnap.comp(j).values();
            let nodes = vj.len();
            let mut fa = Vec::with_capacity(nodes);
            let mut fb = Vec::with_capacity(nodes);
            let mut fda = Vec::with_capacity(nodes);
            let mut fdb = Vec::with_capacity(nodes);
            let mut fab = Vec::with_capacity(nodes);
            let mut fdab = Vec::with_capacity(nodes);
            for (&v, &s) in vj.iter().zip(sj) {
                let (pa, pb, pda, pdb, pab, pdab) = coefficient_point(v, s, delta, d, p);
                fa.push(eta * pa);
                fb.push(pb / eta);
                fda.push(eta * pda);
                fdb.push(pdb / eta);
                fab.push(pab);
                fdab.push(pdab);
            }
            a[j].push(ScalarField::from_values_unchecked(grid, fa));
            b[j].push(ScalarField::from_values_unchecked(grid, fb));
            da[j].push(ScalarField::from_values_unchecked(grid, fda));
            db[j].push(ScalarField::from_values_unchecked(grid, fdb));
            ab[j].push(ScalarField::from_values_unchecked(grid, fab));
            dab[j].push(ScalarField::from_values_unchecked(grid, fdab));
        }
    }
    let tg = r0.tgrid();
    let wrap = |v: Vec<Vec<ScalarField>>| -> Vec<TimeField<ScalarField>> {
        v.into_iter()
            .map(|snaps| TimeField::from_snapshots(tg, snaps).expect("snapshots match the grid"))
            .collect()
    };
    CoefficientFields {
        a: wrap(a),
        b: wrap(b),
        da_dt: wrap(da),
        db_dt: wrap(db),
        ab: wrap(ab),
        dab_dt: wrap(dab),
        eta,
        p,
        delta,
    }
}

/// The perturbations ϑ, w, q with their correctors.
#[derive(Clone, Debug)]
pub struct PerturbationBundle {
    theta: TimeField<ScalarField>,
    w: TimeField<VectorField>,
    q: TimeField<ScalarField>,
    theta_c: Vec<f64>,
    q_c: Vec<f64>,
    w_c: TimeField<VectorField>,
    f: Vec<TimeField<ScalarField>>,
    n_order: usize,
}

impl PerturbationBundle {
    /// Density perturbation ϑ = Σ_j a_jΘ^j.
    pub fn theta(&self) -> &TimeField<ScalarField> {
        &self.theta
    }

    /// Field perturbation w = Σ_j b_jW^j.
    pub fn w(&self) -> &TimeField<VectorField> {
        &self.w
    }

    /// Quadratic corrector density q = Σ_j a_jb_jQ^j.
    pub fn q(&self) -> &TimeField<ScalarField> {
        &self.q
    }

    /// ϑ_c(t_k) = −∮ϑ(t_k), one number per sample.
    pub fn theta_c(&self) -> &[f64] {
        &self.theta_c
    }

    /// q_c(t_k) = −∮q(t_k), one number per sample.
    pub fn q_c(&self) -> &[f64] {
        &self.q_c
    }

    /// Solenoidal corrector w_c = −Σ_j R_N(f_j, ψ_ν^j).
    pub fn w_c(&self) -> &TimeField<VectorField> {
        &self.w_c
    }

    /// The scalar f_j = ∂_j(b_j·(φ̃_μ^j)_λ∘τ_{ωte_j}).
    pub fn f(&self, j: usize) -> &TimeField<ScalarField> {
        &self.f[j]
    }

    /// Antidivergence order N used for w_c.
    pub fn n_order(&self) -> usize {
        self.n_order
    }

    /// The time grid shared by every field in the bundle.
    pub fn tgrid(&self) -> TimeGrid {
        self.theta.tgrid()
    }

    /// The spatial grid shared by every field in the bundle.
    pub fn grid(&self) -> GridSpec {
        self.theta.grid()
    }
}

/// Per-sample slice of the perturbation construction (streaming form used
/// by the stepping pipeline; [`build_perturbations`] wraps it over a
/// whole time grid).
pub struct PerturbationSlice {
    /// ϑ(t).
    pub theta: ScalarField,
    /// w(t).
    pub w: VectorField,
    /// q(t).
    pub q: ScalarField,
    /// ϑ_c(t).
    pub theta_c: f64,
    /// q_c(t).
    pub q_c: f64,
    /// w_c(t).
    pub w_c: VectorField,
    /// f_j(t).
    pub f: Vec<ScalarField>,
}

/// Builds the slice at sample k from coefficient snapshots and the Mikado
/// set evaluated at t = t_k.
pub fn build_perturbation_slice(
    coeffs: &CoefficientFields,
    set: &MikadoSet,
    n_order: usize,
    k: usize,
    psi: &[ScalarField],
    psi_sq: &[ScalarField],
) -> Result<PerturbationSlice> {
    let d = coeffs.dim();
    let grid = coeffs.a(0).grid();
    let t = coeffs.a(0).tgrid().time(k);
    let omega = set.params().omega;
    let mut theta_parts: Vec<ScalarField> = Vec::with_capacity(d);
    let mut q_parts: Vec<ScalarField> = Vec::with_capacity(d);
    let mut w_comps: Vec<ScalarField> = Vec::with_capacity(d);
    let mut wc_parts: Vec<VectorField> = Vec::with_capacity(d);
    let mut f_fields: Vec<ScalarField> = Vec::with_capacity(d);
    for j in 0..d {
        let bump = set.bump_field(j, t, grid)?;
        let bump_tilde = set.bump_tilde_field(j, t, grid)?;
        let a_j = coeffs.a(j).snapshot(k);
        let b_j = coeffs.b(j).snapshot(k);
        let ab_j = coeffs.ab(j).snapshot(k);
        theta_parts.push(a_j.mul(&bump).mul(&psi[j]));
        w_comps.push(b_j.mul(&bump_tilde).mul(&psi[j]));
        q_parts.push(
            ab_j.mul(&bump)
                .mul(&bump_tilde)
                .mul(&psi_sq[j])
                .scale(1.0 / omega),
        );
        let f_j = b_j.mul(&bump_tilde).partial_deriv(j);
        wc_parts.push(antidiv_bilinear_unchecked(&f_j, &psi[j], n_order).scale(-1.0));
        f_fields.push(f_j);
    }
    let theta = ScalarField::linear_comb(
        &theta_parts.iter().map(|f| (1.0, f)).collect::<Vec<_>>(),
    );
    let q = ScalarField::linear_comb(&q_parts.iter().map(|f| (1.0, f)).collect::<Vec<_>>());
    let w_c = VectorField::linear_comb(&wc_parts.iter().map(|f| (1.0, f)).collect::<Vec<_>>());
    Ok(PerturbationSlice {
        theta_c: -theta.mean(),
        q_c: -q.mean(),
        theta,
        w: VectorField::new(w_comps),
        q,
        w_c,
        f: f_fields,
    })
}

/// Samples ψ_ν^j and (ψ_ν^j)² for every j (time-independent factors shared
/// by all samples); verifies the zero-mean requirement on ψ_ν^j.
pub fn psi_factors(set: &MikadoSet, grid: GridSpec) -> Result<(Vec<ScalarField>, Vec<ScalarField>)> {
    let d = set.dim();
    let mut psi = Vec::with_capacity(d);
    let mut psi_sq = Vec::with_capacity(d);
    for j in 0..d {
        let p = set.psi_field(j, grid)?;
        p.require_zero_mean("ψ_ν^j (second antidivergence factor)")?;
        psi_sq.push(p.mul(&p));
        psi.push(p);
    }
    Ok((psi, psi_sq))
}

/// Builds the full perturbation bundle over the coefficient time grid.
///
/// Requires the grid to satisfy the Mikado resolution rule; the bilinear
/// antidivergence order N comes from the exponent plan.
pub fn build_perturbations(
    coeffs: &CoefficientFields,
    set: &MikadoSet,
    n_order: usize,
) -> Result<PerturbationBundle> {
    assert!(n_order >= 1, "antidivergence order N must be ≥ 1");
    let grid = coeffs.a(0).grid();
    if grid.points_per_axis() < set.min_resolution() {
        return Err(Error::Resolution(format!(
            "grid n = {} violates the resolution rule n ≥ {} for these Mikado parameters",
            grid.points_per_axis(),
            set.min_resolution()
        )));
    }
    let tg = coeffs.a(0).tgrid();
    let (psi, psi_sq) = psi_factors(set, grid)?;
    let samples = tg.num_samples();
    let mut theta = Vec::with_capacity(samples);
    let mut w = Vec::with_capacity(samples);
    let mut q = Vec::with_capacity(samples);
    let mut theta_c = Vec::with_capacity(samples);
    let mut q_c = Vec::with_capacity(samples);
    let mut w_c = Vec::with_capacity(samples);
    let mut f: Vec<Vec<ScalarField>> = vec![Vec::with_capacity(samples); coeffs.dim()];
    for k in 0..samples {
        let slice = build_perturbation_slice(coeffs, set, n_order, k, &psi, &psi_sq)?;
        theta.push(slice.theta);
        w.push(slice.w);
        q.push(slice.q);
        theta_c.push(slice.theta_c);
        q_c.push(slice.q_c);
        w_c.push(slice.w_c);
        for (j, fj) in slice.f.into_iter().enumerate() {
            f[j].push(fj);
        }
    }
    Ok(PerturbationBundle {
        theta: TimeField::from_snapshots(tg, theta)?,
        w: TimeField::from_snapshots(tg, w)?,
        q: TimeField::from_snapshots(tg, q)?,
        theta_c,
        q_c,
        w_c: TimeField::from_snapshots(tg, w_c)?,
        f: f.into_iter()
            .map(|snaps| TimeField::from_snapshots(tg, snaps))
            .collect::<Result<_>>()?,
        n_order,
    })
}

/// Measured solenoidality of u-perturbation at sample k: returns
/// (‖div(w+w_c)(t_k)‖_{L²}, reference scale ‖w(t_k)‖_{W^{1,2}}).
pub fn solenoidality_residual(bundle: &PerturbationBundle, k: usize) -> Result<(f64, f64)> {
    let total = bundle.w.snapshot(k).add(bundle.w_c.snapshot(k));
    let div = crate::calculus::divergence(&total);
    let scale = bundle.w.snapshot(k).sobolev_norm_unchecked(1, 2.0)?;
    Ok((div.lp_norm(2.0)?, scale))
}

/// Verifies the bundle's mean and solenoidality invariants at sample k:
/// mean(ϑ+ϑ_c) and mean(q+q_c) at `mean_tol` relative to the L² norms,
/// div(w+w_c) at `SOLENOID_TOL_REL`. Violations are construction bugs.
pub fn verify_bundle_invariants(bundle: &PerturbationBundle, k: usize) -> Result<()> {
    let theta = bundle.theta.snapshot(k);
    let mean = theta.mean() + bundle.theta_c[k];
    let tol_theta = tol::MEAN_TOL_REL * theta.lp_norm(2.0)?.max(1.0);
    if mean.abs() > tol_theta {
        return Err(Error::Mean {
            context: format!("ϑ + ϑ_c at sample {k}"),
            mean,
            tol: tol_theta,
        });
    }
    let q = bundle.q.snapshot(k);
    let mean_q = q.mean() + bundle.q_c[k];
    let tol_q = tol::MEAN_TOL_REL * q.lp_norm(2.0)?.max(1.0);
    if mean_q.abs() > tol_q {
        return Err(Error::Mean {
            context: format!("q + q_c at sample {k}"),
            mean: mean_q,
            tol: tol_q,
        });
    }
    let (residual, scale) = solenoidality_residual(bundle, k)?;
    if residual > tol::SOLENOID_TOL_REL * scale.max(1.0) {
        return Err(Error::Solenoidality(format!(
            "‖div(w+w_c)‖_{{L²}} = {residual:.3e} exceeds {:.0e}·‖w‖_{{W^{{1,2}}}} = {:.3e} at sample {k}",
            tol::SOLENOID_TOL_REL,
            tol::SOLENOID_TOL_REL * scale.max(1.0),
        )));
    }
    Ok(())
}

/// One measured estimate row: a lemma's left-hand side against the
/// parameter dependence the construction predicts for it.
#[derive(Clone, Debug, serde::Serialize)]
pub struct EstimateRow {
    /// Which norm the row measures.
    pub law: String,
    /// Measured left-hand side.
    pub measured: f64,
    /// Predicted parameter dependence (without the unknown constant C).
    pub predicted_scale: f64,
    /// The M-weighted main term, for the two laws that pin the constant:
    /// (Mη/2)‖R₀‖₁^{1/p} for ϑ and (M/2η)‖R₀‖₁^{1/p′} for w.
    pub main_term: Option<f64>,
}

/// Measured estimates of the perturbation norms at sample k against their
/// predicted parameter dependences:
///
/// ```text
///     ‖ϑ‖_{L^p}        main (Mη/2)‖R₀‖₁^{1/p}, excess ∝ λ^{−1/p}
///     ‖q‖_{L^p}        ∝ μ^b/ω
///     |ϑ_c|            ∝ μ^{−b}
///     |q_c|            ∝ ω^{−1}
///     ‖w‖_{L^{p′}}     main (M/2η)‖R₀‖₁^{1/p′}, excess ∝ λ^{−1/p′}
///     ‖w‖_{W^{1,p̃}}   ∝ (λμ+ν)/μ^{1+ε}
///     ‖f_j‖_{L^{p′}}   ∝ λμ^{1+b−d/p′} = λμ (Lemma on f_j at k=h=0)
///     ‖w_c‖_{L^{p′}}   ∝ Σ_{k=1}^N (λμ/ν)^k + (λμ)^{N+1}/ν^N
///     ‖w_c‖_{W^{1,p̃}} ∝ ((λμ+ν)/μ^{1+ε})·(same geometric factor)
/// ```
///
/// Fitted exponents come from sweeping parameters and fitting the rows of
/// several reports (see [`crate::fit::log_log_slope`]); a single bundle
/// cannot identify an exponent.
pub fn perturbation_estimates(
    bundle: &PerturbationBundle,
    coeffs: &CoefficientFields,
    set: &MikadoSet,
    constants: &crate::mikado::MikadoConstants,
    r0: &TimeField<VectorField>,
    p_tilde: f64,
    k: usize,
) -> Result<Vec<EstimateRow>> {
    let p = coeffs.p();
    let pc = p / (p - 1.0);
    let eta = coeffs.eta();
    let params = set.params();
    let (lambda, mu, omega, nu) = (
        params.lambda as f64,
        params.mu,
        params.omega,
        params.nu as f64,
    );
    let lm = lambda * mu;
    let r0_l1 = r0.snapshot(k).lp_norm(1.0)?;
    let geometric: f64 = (1..=bundle.n_order()).map(|i| (lm / nu).powi(i as i32)).sum::<f64>()
        + lm.powi(bundle.n_order() as i32 + 1) / nu.powi(bundle.n_order() as i32);
    let w1p_scale = (lm + nu) / mu.powf(1.0 + constants.epsilon);
    let mut rows = vec![
        EstimateRow {
            law: "theta_lp".into(),
            measured: bundle.theta.snapshot(k).lp_norm(p)?,
            predicted_scale: lambda.powf(-1.0 / p),
            main_term: Some(constants.m * eta / 2.0 * r0_l1.powf(1.0 / p)),
        },
        EstimateRow {
            law: "q_lp".into(),
            measured: bundle.q.snapshot(k).lp_norm(p)?,
            predicted_scale: mu.powf(constants.b) / omega,
            main_term: None,
        },
        EstimateRow {
            law: "theta_c".into(),
            measured: bundle.theta_c[k].abs(),
            predicted_scale: mu.powf(-constants.b),
            main_term: None,
        },
        EstimateRow {
            law: "q_c".into(),
            measured: bundle.q_c[k].abs(),
            predicted_scale: 1.0 / omega,
            main_term: None,
        },
        EstimateRow {
            law: "w_lpc".into(),
            measured: bundle.w.snapshot(k).lp_norm(pc)?,
            predicted_scale: lambda.powf(-1.0 / pc),
            main_term: Some(constants.m / (2.0 * eta) * r0_l1.powf(1.0 / pc)),
        },
        EstimateRow {
            law: "w_w1pt".into(),
            measured: bundle.w.snapshot(k).sobolev_norm_unchecked(1, p_tilde)?,
            predicted_scale: w1p_scale,
            main_term: None,
        },
        EstimateRow {
            law: "wc_lpc".into(),
            measured: bundle.w_c.snapshot(k).lp_norm(pc)?,
            predicted_scale: geometric,
            main_term: None,
        },
        EstimateRow {
            law: "wc_w1pt".into(),
            measured: bundle.w_c.snapshot(k).sobolev_norm_unchecked(1, p_tilde)?,
            predicted_scale: w1p_scale * geometric,
            main_term: None,
        },
    ];
    for j in 0..coeffs.dim() {
        rows.push(EstimateRow {
            law: format!("f_{j}_lpc"),
            measured: bundle.f(j).snapshot(k).lp_norm(pc)?,
            predicted_scale: lm, // (λμ)^{0+0+1}·μ^{b−d/p′} with b = d/p′
            main_term: None,
        });
    }
    Ok(rows)
}
