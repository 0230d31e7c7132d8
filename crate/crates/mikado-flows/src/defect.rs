//! The new defect field R₁: its seven components, their assembly, the
//! continuity-defect residual check, and the transport-diffusion
//! augmentation.
//!
//! Given a solution (ρ₀, u₀, R₀) of the continuity-defect equation and the
//! perturbations (ϑ, w, q, w_c) built on top of it, the new defect
//! satisfies −div R₁ = ∂_tρ₁ + div(ρ₁u₁), where
//!
//! ```text
//!     −R₁ = R^χ + R^{time,1} + R^{quadr} + R^{lin} + R^{time,2} + R^q + R^{corr}
//!
//!     R^χ        = −Σ_j (1 − χ_j²) R₀^j e_j                     (algebraic)
//!     R^{time,1} = Σ_j D⁻¹( ∂_t(a_jb_j) Q^j − ∮ )
//!     R^{quadr}  = Σ_j R₁( ∂_j(a_jb_j)·(φ_μ^jφ̃_μ^j)_λ∘τ, (ψ_j² − 1)_ν )
//!              + Σ_j R₁( ∂_j(a_jb_j), (φ_μ^jφ̃_μ^j − 1)_λ∘τ )
//!     R^{lin}    = Σ_j D⁻¹( (∂_ta_j) Θ^j − ∮ ) + ϑu₀ + ρ₀w
//!     R^{time,2} = −λω Σ_j R_N( a_j (∂_jφ_μ^j)_λ∘τ, ψ_ν^j )
//!     R^q        = q (u₀ + w)
//!     R^{corr}   = (ρ₀ + ϑ + q) w_c
//! ```
//!
//! with τ = τ_{ωte_j} the phase translation. The two quadratic parts use
//! the bilinear antidivergence at order 1; the time-2 part uses the plan's
//! order N (the same N as the velocity corrector). Expected magnitudes,
//! with G = Σ_{k=1}^N (λμ/ν)^k + (λμ)^{N+1}/ν^N and constants untracked:
//!
//! ```text
//!     ‖R^χ‖_{L¹} ≤ δ/2                ‖R^{time,1}‖_{L¹} ≲ 1/ω
//!     ‖R^{quadr}‖_{L¹} ≲ λμ/ν + 1/λ    ‖R^{lin}‖_{L¹}    ≲ μ^{−a} + μ^{−b}
//!     ‖R^{time,2}‖_{L¹} ≲ (ω/μ^b)·G    ‖R^q‖_{L¹}        ≲ μ^b/ω
//!     ‖R^{corr}‖_{L¹} ≲ (1 + λ^{−1/p} + μ^b/ω)·G
//! ```
//!
//! Mean subtractions inside the D⁻¹ arguments are performed numerically.
//! Factors that the construction guarantees to be mean-free — the second
//! factors of the bilinear antidivergences — are asserted so before use:
//! the trigonometric ψ factors at quadrature accuracy, the bump product
//! (φ_μφ̃_μ − 1) at the bump quadrature floor. A violation signals a
//! construction bug (a wrong profile normalization), not a numerical
//! artifact, and aborts with diagnostics.

use crate::calculus::{antidiv_bilinear_unchecked, antidiv_std, divergence, gradient};
use crate::error::{Error, Result};
use crate::mikado::{MikadoConstants, MikadoParams, MikadoSet};
use crate::perturbation::{psi_factors, CoefficientFields, PerturbationBundle};
use crate::tol;
use crate::torus_grid::{Field, GridSpec, ScalarField, TimeField, TimeGrid, VectorField};

/// The seven defect components, in assembly order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentKind {
    /// R^χ: the part of R₀ kept where the cutoffs are inactive.
    Chi,
    /// R^{time,1}: antidivergence of ∂_t(a_jb_j)Q^j.
    Time1,
    /// R^{quadr}: the two oscillatory quadratic parts.
    Quadr,
    /// R^{lin}: linear interaction terms with (ρ₀, u₀).
    Lin,
    /// R^{time,2}: antidivergence of a_j∂_tΘ^j.
    Time2,
    /// R^q: the density corrector transported by u₀ + w.
    Q,
    /// R^{corr}: everything multiplying the velocity corrector w_c.
    Corr,
}

impl ComponentKind {
    /// All seven kinds in assembly order.
    pub const ALL: [ComponentKind; 7] = [
        ComponentKind::Chi,
        ComponentKind::Time1,
        ComponentKind::Quadr,
        ComponentKind::Lin,
        ComponentKind::Time2,
        ComponentKind::Q,
        ComponentKind::Corr,
    ];

    /// Stable lowercase label, matching the JSON encoding.
    pub fn label(self) -> &'static str {
        match self {
            ComponentKind::Chi => "chi",
            ComponentKind::Time1 => "time1",
            ComponentKind::Quadr => "quadr",
            ComponentKind::Lin => "lin",
            ComponentKind::Time2 => "time2",
            ComponentKind::Q => "q",
            ComponentKind::Corr => "corr",
        }
    }

    fn index(self) -> usize {
        ComponentKind::ALL.iter().position(|&k| k == self).unwrap()
    }
}

impl std::fmt::Display for ComponentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// A solution triple (ρ, u, R) of the continuity-defect equation
///
/// ```text
///     ∂_tρ + div(ρu) = −div R,   div u = 0,
/// ```
///
/// together with the exponents and smallness parameters it was built for.
/// ρ must be mean-free at every sample (checked at construction); the
/// divergence-freeness of u is certified separately by
/// [`DefectState::verify_divergence_free`] because its attainable floor
/// depends on the grid resolution. With `diffusive` set (by
/// [`diffusion_augment`]) the state is interpreted against the
/// transport-diffusion equation ∂_tρ + div(ρu) − Δρ = −div R instead.
#[derive(Clone)]
pub struct DefectState {
    rho: TimeField<ScalarField>,
    u: TimeField<VectorField>,
    r: TimeField<VectorField>,
    p: f64,
    p_tilde: f64,
    delta: f64,
    eta: f64,
    diffusive: bool,
    params: Option<MikadoParams>,
}

impl DefectState {
    /// Validated state: all three fields on one grid and time grid,
    /// p ∈ (1, ∞), p̃ ∈ [1, ∞), δ, η > 0, and mean ρ(t_k) = 0 at every
    /// sample (relative to the L² size of ρ).
    pub fn new(
        rho: TimeField<ScalarField>,
        u: TimeField<VectorField>,
        r: TimeField<VectorField>,
        p: f64,
        p_tilde: f64,
        delta: f64,
        eta: f64,
    ) -> Result<Self> {
        if rho.grid() != u.grid() || rho.grid() != r.grid() {
            return Err(Error::Param("ρ, u, R must share one spatial grid".into()));
        }
        if rho.tgrid() != u.tgrid() || rho.tgrid() != r.tgrid() {
            return Err(Error::Param("ρ, u, R must share one time grid".into()));
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::Param(format!("p must lie in (1, ∞), got {p}")));
        }
        if !(p_tilde >= 1.0 && p_tilde.is_finite()) {
            return Err(Error::Param(format!("p̃ must lie in [1, ∞), got {p_tilde}")));
        }
        if !(delta > 0.0 && delta.is_finite()) || !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::Param(format!(
                "δ and η must be positive, got δ = {delta}, η = {eta}"
            )));
        }
        for (k, snap) in rho.snapshots().iter().enumerate() {
            let mean = snap.mean();
            let scale = snap.lp_norm(2.0)?.max(1.0);
            if mean.abs() > tol::MEAN_TOL_REL * scale {
                return Err(Error::Mean {
                    context: format!("ρ at sample {k} (the density must be mean-free)"),
                    mean,
                    tol: tol::MEAN_TOL_REL * scale,
                });
            }
        }
        Ok(DefectState {
            rho,
            u,
            r,
            p,
            p_tilde,
            delta,
            eta,
            diffusive: false,
            params: None,
        })
    }

    /// Records the oscillation parameters the state was built with.
    pub fn with_params(mut self, params: MikadoParams) -> Self {
        self.params = Some(params);
        self
    }

    /// The density ρ.
    pub fn rho(&self) -> &TimeField<ScalarField> {
        &self.rho
    }

    /// The vector field u.
    pub fn u(&self) -> &TimeField<VectorField> {
        &self.u
    }

    /// The defect field R.
    pub fn r(&self) -> &TimeField<VectorField> {
        &self.r
    }

    /// The density exponent p.
    pub fn p(&self) -> f64 {
        self.p
    }

    /// The velocity regularity exponent p̃.
    pub fn p_tilde(&self) -> f64 {
        self.p_tilde
    }

    /// The smallness target δ.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// The L^p/L^{p′} balance parameter η.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Whether the state is measured against the transport-diffusion
    /// equation (set by [`diffusion_augment`]).
    pub fn diffusive(&self) -> bool {
        self.diffusive
    }

    /// The oscillation parameters used to build the state, if recorded.
    pub fn params(&self) -> Option<MikadoParams> {
        self.params
    }

    /// The spatial grid.
    pub fn grid(&self) -> GridSpec {
        self.rho.grid()
    }

    /// The time grid.
    pub fn tgrid(&self) -> TimeGrid {
        self.rho.tgrid()
    }

    /// Certifies ‖div u(t_k)‖_{L²} ≤ tol·‖u(t_k)‖_{W^{1,2}} at every
    /// sample with the solenoidality tolerance. The bound is attainable
    /// only when the grid resolves the corrector's bump tails (in d = 2
    /// this needs n = 1024 at λμ = 1); coarser grids should read the
    /// per-sample values from [`residual_check`] instead.
    pub fn verify_divergence_free(&self) -> Result<()> {
        for (k, snap) in self.u.snapshots().iter().enumerate() {
            let div = divergence(snap).lp_norm(2.0)?;
            let scale = snap.sobolev_norm_unchecked(1, 2.0)?;
            if div > tol::SOLENOID_TOL_REL * scale.max(1.0) {
                return Err(Error::Solenoidality(format!(
                    "‖div u‖_L² = {div:.3e} at sample {k} exceeds {:.1e}·‖u‖_W¹² = {:.3e}",
                    tol::SOLENOID_TOL_REL,
                    tol::SOLENOID_TOL_REL * scale.max(1.0)
                )));
            }
        }
        Ok(())
    }
}

/// Per-direction oscillatory factors shared by all components: ψ_ν^j
/// (mean-free by construction, asserted at sampling time) and the
/// mean-removed (ψ_j² − 1)_ν.
struct OscillatorFactors {
    psi: Vec<ScalarField>,
    psi_sq_minus_one: Vec<ScalarField>,
}

impl OscillatorFactors {
    fn build(set: &MikadoSet, grid: GridSpec) -> Result<Self> {
        let (psi, psi_sq) = psi_factors(set, grid)?;
        let psi_sq_minus_one = psi_sq
            .iter()
            .map(|ps2| {
                let shifted = ps2.map(|v| v - 1.0);
                check_arg_mean(
                    &shifted,
                    "(ψ² − 1)_ν (second quadratic factor)",
                    tol::QUADRATURE_TOL,
                )?;
                Ok(shifted.remove_mean())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(OscillatorFactors {
            psi,
            psi_sq_minus_one,
        })
    }
}

/// Asserts that a factor the construction promises to be mean-free is so
/// within the stated tolerance (quadrature accuracy for trigonometric
/// factors, the bump quadrature floor for bump-product factors).
fn check_arg_mean(f: &ScalarField, context: &str, tol: f64) -> Result<()> {
    let mean = f.mean();
    if mean.abs() > tol {
        return Err(Error::Mean {
            context: context.into(),
            mean,
            tol,
        });
    }
    Ok(())
}

fn validate_component_inputs(
    state: &DefectState,
    bundle: &PerturbationBundle,
    coeffs: &CoefficientFields,
    set: &MikadoSet,
    n_order: usize,
) -> Result<()> {
    if n_order == 0 {
        return Err(Error::Domain("antidivergence order N must be ≥ 1".into()));
    }
    if state.grid() != bundle.grid() {
        return Err(Error::Param(
            "state and perturbation bundle must share one spatial grid".into(),
        ));
    }
    if state.tgrid() != bundle.tgrid() {
        return Err(Error::Param(
            "state and perturbation bundle must share one time grid".into(),
        ));
    }
    if coeffs.dim() != set.dim() || state.grid().dim() != set.dim() {
        return Err(Error::Param(format!(
            "dimension mismatch: state d = {}, coefficients d = {}, Mikado d = {}",
            state.grid().dim(),
            coeffs.dim(),
            set.dim()
        )));
    }
    Ok(())
}

/// One component at one time sample. The slow×fast antidivergence factors
/// are assembled here exactly as in the defining formulas.
fn component_snapshot(
    kind: ComponentKind,
    k: usize,
    state: &DefectState,
    bundle: &PerturbationBundle,
    coeffs: &CoefficientFields,
    set: &MikadoSet,
    n_order: usize,
    osc: &OscillatorFactors,
) -> Result<VectorField> {
    let grid = state.grid();
    let d = grid.dim();
    let t = state.tgrid().time(k);
    let params = set.params();
    let lambda = params.lambda as f64;
    let omega = params.omega;
    match kind {
        ComponentKind::Chi => {
            // −(1 − χ_j²)R₀^j = a_jb_j − R₀^j, exactly (a_jb_j = χ_j²R₀^j).
            let r0 = state.r().snapshot(k);
            let comps = (0..d)
                .map(|j| coeffs.ab(j).snapshot(k).sub(r0.comp(j)))
                .collect();
            Ok(VectorField::new(comps))
        }
        ComponentKind::Time1 => {
            let mut parts = Vec::with_capacity(d);
            for j in 0..d {
                let q_j = set.q_field(j, t, grid)?;
                let arg = coeffs.dab_dt(j).snapshot(k).mul(&q_j).remove_mean();
                parts.push(antidiv_std(&arg)?);
            }
            Ok(sum_vectors(grid, &parts))
        }
        ComponentKind::Quadr => {
            let mut parts = Vec::with_capacity(2 * d);
            for j in 0..d {
                let dab = coeffs.ab(j).snapshot(k).partial_deriv(j);
                let bumps = set.bump_field(j, t, grid)?.mul(&set.bump_tilde_field(j, t, grid)?);
                parts.push(antidiv_bilinear_unchecked(
                    &dab.mul(&bumps),
                    &osc.psi_sq_minus_one[j],
                    1,
                ));
                let bumps_shifted = bumps.map(|v| v - 1.0);
                check_arg_mean(
                    &bumps_shifted,
                    "(φ_μφ̃_μ − 1)_λ (second quadratic factor)",
                    tol::BUMP_MEAN_TOL,
                )?;
                parts.push(antidiv_bilinear_unchecked(
                    &dab,
                    &bumps_shifted.remove_mean(),
                    1,
                ));
            }
            Ok(sum_vectors(grid, &parts))
        }
        ComponentKind::Lin => {
            let mut parts = Vec::with_capacity(d + 2);
            for j in 0..d {
                let theta_j = set.theta_field(j, t, grid)?;
                let arg = coeffs.da_dt(j).snapshot(k).mul(&theta_j).remove_mean();
                parts.push(antidiv_std(&arg)?);
            }
            parts.push(state.u().snapshot(k).scale_pointwise(bundle.theta().snapshot(k)));
            parts.push(bundle.w().snapshot(k).scale_pointwise(state.rho().snapshot(k)));
            Ok(sum_vectors(grid, &parts))
        }
        ComponentKind::Time2 => {
            let mut parts = Vec::with_capacity(d);
            for j in 0..d {
                let f = coeffs.a(j).snapshot(k).mul(&set.bump_dj_field(j, t, grid)?);
                parts.push(antidiv_bilinear_unchecked(&f, &osc.psi[j], n_order));
            }
            Ok(sum_vectors(grid, &parts).scale(-lambda * omega))
        }
        ComponentKind::Q => {
            let transport = state.u().snapshot(k).add(bundle.w().snapshot(k));
            Ok(transport.scale_pointwise(bundle.q().snapshot(k)))
        }
        ComponentKind::Corr => {
            let slow = state
                .rho()
                .snapshot(k)
                .add(bundle.theta().snapshot(k))
                .add(bundle.q().snapshot(k));
            Ok(bundle.w_c().snapshot(k).scale_pointwise(&slow))
        }
    }
}

fn sum_vectors(grid: GridSpec, parts: &[VectorField]) -> VectorField {
    if parts.is_empty() {
        return VectorField::zeros(grid);
    }
    let weighted: Vec<(f64, &VectorField)> = parts.iter().map(|p| (1.0, p)).collect();
    VectorField::linear_comb(&weighted)
}

/// One defect component as a time-sampled vector field.
///
/// `state` is the solution being perturbed, `bundle`/`coeffs` the
/// perturbations and coefficients built on it, `set` the Mikado family,
/// and `n_order` the plan's antidivergence order N (used by the time-2
/// component; the quadratic parts always use order 1).
pub fn defect_component(
    kind: ComponentKind,
    state: &DefectState,
    bundle: &PerturbationBundle,
    coeffs: &CoefficientFields,
    set: &MikadoSet,
    n_order: usize,
) -> Result<TimeField<VectorField>> {
    validate_component_inputs(state, bundle, coeffs, set, n_order)?;
    let osc = OscillatorFactors::build(set, state.grid())?;
    let snaps = (0..state.tgrid().num_samples())
        .map(|k| component_snapshot(kind, k, state, bundle, coeffs, set, n_order, &osc))
        .collect::<Result<Vec<_>>>()?;
    TimeField::from_snapshots(state.tgrid(), snaps)
}

/// All seven components, retained individually (for reports and rate
/// studies; the assembly path that only needs their sum should prefer
/// [`build_r1`], which streams sample by sample).
pub struct DefectComponents {
    parts: Vec<TimeField<VectorField>>,
}

impl DefectComponents {
    /// Builds every component on the shared grid of the inputs.
    pub fn build(
        state: &DefectState,
        bundle: &PerturbationBundle,
        coeffs: &CoefficientFields,
        set: &MikadoSet,
        n_order: usize,
    ) -> Result<Self> {
        validate_component_inputs(state, bundle, coeffs, set, n_order)?;
        let osc = OscillatorFactors::build(set, state.grid())?;
        let parts = ComponentKind::ALL
            .iter()
            .map(|&kind| {
                let snaps = (0..state.tgrid().num_samples())
                    .map(|k| {
                        component_snapshot(kind, k, state, bundle, coeffs, set, n_order, &osc)
                    })
                    .collect::<Result<Vec<_>>>()?;
                TimeField::from_snapshots(state.tgrid(), snaps)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DefectComponents { parts })
    }

    /// The component of the given kind.
    pub fn component(&self, kind: ComponentKind) -> &TimeField<VectorField> {
        &self.parts[kind.index()]
    }

    /// The shared time grid.
    pub fn tgrid(&self) -> TimeGrid {
        self.parts[0].tgrid()
    }
}

/// R₁ = −Σ components, from individually retained components.
pub fn assemble_r1(components: &DefectComponents) -> TimeField<VectorField> {
    let tgrid = components.tgrid();
    let snaps = (0..tgrid.num_samples())
        .map(|k| {
            let weighted: Vec<(f64, &VectorField)> = components
                .parts
                .iter()
                .map(|part| (-1.0, part.snapshot(k)))
                .collect();
            VectorField::linear_comb(&weighted)
        })
        .collect();
    TimeField::from_snapshots(tgrid, snaps).expect("components share one grid by construction")
}

/// R₁ built sample by sample without retaining the individual components
/// (the memory-lean path for full steps).
pub fn build_r1(
    state: &DefectState,
    bundle: &PerturbationBundle,
    coeffs: &CoefficientFields,
    set: &MikadoSet,
    n_order: usize,
) -> Result<TimeField<VectorField>> {
    validate_component_inputs(state, bundle, coeffs, set, n_order)?;
    let osc = OscillatorFactors::build(set, state.grid())?;
    let snaps = (0..state.tgrid().num_samples())
        .map(|k| {
            let mut acc = VectorField::zeros(state.grid());
            for &kind in ComponentKind::ALL.iter() {
                let part =
                    component_snapshot(kind, k, state, bundle, coeffs, set, n_order, &osc)?;
                acc = VectorField::linear_comb(&[(1.0, &acc), (-1.0, &part)]);
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    TimeField::from_snapshots(state.tgrid(), snaps)
}

/// The equation residual and divergence defect at one time sample.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct ResidualSample {
    /// Sample time t_k.
    pub t: f64,
    /// ‖∂_tρ + div(ρu) + div R‖_{L²} (minus Δρ inside the norm when the
    /// state is diffusive).
    pub residual_l2: f64,
    /// ‖div u‖_{L²}.
    pub div_u_l2: f64,
}

/// Residual of the continuity-defect equation (or its diffusive variant)
/// at every time sample: space derivatives are spectral, the time
/// derivative is the analytic evaluator when the state carries one and
/// the 4th-order stencil otherwise. K ≥ 8 is guaranteed by [`TimeGrid`].
/// In the diffusive case Δρ is evaluated as div ∇ρ, the same operator
/// composition that [`diffusion_augment`] folds into the defect, so the
/// two cancel exactly rather than up to Nyquist-plane handling.
pub fn residual_check(state: &DefectState) -> Result<Vec<ResidualSample>> {
    let tgrid = state.tgrid();
    let mut out = Vec::with_capacity(tgrid.num_samples());
    for k in 0..tgrid.num_samples() {
        let rho_k = state.rho().snapshot(k);
        let u_k = state.u().snapshot(k);
        let d_rho = state.rho().derivative_at(k);
        let mut resid = d_rho
            .add(&divergence(&u_k.scale_pointwise(rho_k)))
            .add(&divergence(state.r().snapshot(k)));
        if state.diffusive() {
            resid = resid.sub(&divergence(&gradient(rho_k)));
        }
        out.push(ResidualSample {
            t: tgrid.time(k),
            residual_l2: resid.lp_norm(2.0)?,
            div_u_l2: divergence(u_k).lp_norm(2.0)?,
        });
    }
    Ok(out)
}

/// The reference scale ‖ρ(t_k)‖_{W^{1,2}}·(1 + ‖u(t_k)‖_{C⁰}) against
/// which the residual tolerance is read.
pub fn residual_scale(state: &DefectState, k: usize) -> Result<f64> {
    let rho_norm = state.rho().snapshot(k).sobolev_norm_unchecked(1, 2.0)?;
    Ok(rho_norm * (1.0 + state.u().snapshot(k).max_abs()))
}

/// Switches a state to the transport-diffusion equation
/// ∂_tρ + div(ρu) − Δρ = −div R by absorbing the Laplacian into the
/// defect: R ← R + ∇(ρ − ρ_prev), where ρ_prev is the previous iterate's
/// density (whose gradient the previous diffusive defect already
/// carried). Requires p′ < d and a positive diffusive ε
/// (min{d/p + d/p̃ − d − 1, d/p′ − 1} > 0).
pub fn diffusion_augment(
    state: &DefectState,
    rho_prev: &TimeField<ScalarField>,
) -> Result<DefectState> {
    let d = state.grid().dim() as f64;
    let p_conj = state.p() / (state.p() - 1.0);
    if p_conj >= d {
        return Err(Error::Infeasible(format!(
            "diffusion needs p′ < d, got p′ = {p_conj:.4} with d = {d}"
        )));
    }
    let eps_diffusive = (d / state.p() + d / state.p_tilde() - d - 1.0).min(d / p_conj - 1.0);
    if eps_diffusive <= 0.0 {
        return Err(Error::Infeasible(format!(
            "diffusive ε = min{{d/p + d/p̃ − d − 1, d/p′ − 1}} = {eps_diffusive:.4} is not positive"
        )));
    }
    if rho_prev.grid() != state.grid() || rho_prev.tgrid() != state.tgrid() {
        return Err(Error::Param(
            "previous density must share the state's grids".into(),
        ));
    }
    let snaps = (0..state.tgrid().num_samples())
        .map(|k| {
            let increment = state.rho().snapshot(k).sub(rho_prev.snapshot(k));
            state.r().snapshot(k).add(&gradient(&increment))
        })
        .collect();
    let r = TimeField::from_snapshots(state.tgrid(), snaps)?;
    Ok(DefectState {
        r,
        diffusive: true,
        ..state.clone()
    })
}

/// One row of the component norm report.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct ComponentReport {
    /// Which component.
    pub kind: ComponentKind,
    /// Sample time.
    pub t: f64,
    /// Measured ‖component(t)‖_{L¹}.
    pub l1_norm: f64,
    /// The parameter part of the component's expected magnitude.
    pub predicted_scale: f64,
    /// Log-log slope of measured vs predicted scale when a sweep was
    /// fitted; absent for single-point reports.
    pub fitted_exponent: Option<f64>,
    /// Whether the measurement is within the component's budget.
    pub pass: bool,
}

/// The parameter part of a component's expected L¹ magnitude (the
/// constants, which depend on ‖R₀‖ and the profile norms, are not
/// tracked; p is recovered from the constants as d/a).
pub fn predicted_scale(
    kind: ComponentKind,
    set: &MikadoSet,
    constants: &MikadoConstants,
    delta: f64,
    n_order: usize,
) -> f64 {
    let params = set.params();
    let lambda = params.lambda as f64;
    let mu = params.mu;
    let omega = params.omega;
    let nu = params.nu as f64;
    let p = set.dim() as f64 / constants.a;
    let geometric = geometric_scale(lambda * mu, nu, n_order);
    match kind {
        ComponentKind::Chi => delta / 2.0,
        ComponentKind::Time1 => 1.0 / omega,
        ComponentKind::Quadr => (lambda * mu / nu).max(1.0 / lambda),
        ComponentKind::Lin => mu.powf(-constants.a) + mu.powf(-constants.b),
        ComponentKind::Time2 => omega / mu.powf(constants.b) * geometric,
        ComponentKind::Q => mu.powf(constants.b) / omega,
        ComponentKind::Corr => {
            (1.0 + lambda.powf(-1.0 / p) + mu.powf(constants.b) / omega) * geometric
        }
    }
}

/// G = Σ_{k=1}^N (λμ/ν)^k + (λμ)^{N+1}/ν^N, the bilinear-antidivergence
/// telescope scale.
fn geometric_scale(lambda_mu: f64, nu: f64, n_order: usize) -> f64 {
    let ratio = lambda_mu / nu;
    let sum: f64 = (1..=n_order).map(|k| ratio.powi(k as i32)).sum();
    sum + lambda_mu.powi(n_order as i32 + 1) / nu.powi(n_order as i32)
}

/// Empirical budget multiplier for each component: the measured L¹ norm is
/// expected to stay below budget·predicted_scale. The values were
/// calibrated on the d = 2 reference scenario of the test suite (unit
/// oscillation parameters, ‖R₀‖_{C⁰} ≈ 2) with a 3–4× headroom; they
/// bound the untracked constants — ‖R₀‖-sized factors and the profile
/// norms, which for R^q reach ≈ 58 through sup φ̃_μ — and flag
/// regressions, not sharp estimates.
pub fn component_budget(kind: ComponentKind) -> f64 {
    match kind {
        ComponentKind::Chi => 1.0,
        ComponentKind::Time1 => 10.0,
        ComponentKind::Quadr => 10.0,
        ComponentKind::Lin => 10.0,
        ComponentKind::Time2 => 10.0,
        ComponentKind::Q => 200.0,
        ComponentKind::Corr => 20.0,
    }
}

/// Per-kind, per-sample norm report rows. `fitted_exponent` is left empty;
/// sweep drivers fill it from their own fits.
pub fn component_reports(
    components: &DefectComponents,
    set: &MikadoSet,
    constants: &MikadoConstants,
    delta: f64,
    n_order: usize,
) -> Result<Vec<ComponentReport>> {
    let tgrid = components.tgrid();
    let mut rows = Vec::new();
    for &kind in ComponentKind::ALL.iter() {
        let scale = predicted_scale(kind, set, constants, delta, n_order);
        for k in 0..tgrid.num_samples() {
            let l1 = components.component(kind).snapshot(k).lp_norm(1.0)?;
            rows.push(ComponentReport {
                kind,
                t: tgrid.time(k),
                l1_norm: l1,
                predicted_scale: scale,
                fitted_exponent: None,
                pass: l1 <= component_budget(kind) * scale,
            });
        }
    }
    Ok(rows)
}
