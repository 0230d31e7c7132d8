//! Space-time Mikado densities, fields, and quadratic correctors.
//!
//! The building blocks are, for j = 1..d and parameters (λ, μ, ω, ν),
//!
//! ```text
//!     Θ^j(t,x) = φ_μ^j(λ(x − ωt e_j)) · ψ^j(νx),
//!     W^j(t,x) = φ̃_μ^j(λ(x − ωt e_j)) · ψ^j(νx) · e_j,
//!     Q^j(t,x) = ω^{−1} (φ_μ^j φ̃_μ^j)(λ(x − ωt e_j)) · (ψ^j(νx))²,
//! ```
//!
//! where φ_μ = μ^a φ(μ·) and φ̃_μ = μ^b φ(μ·) are concentrations of one
//! smooth bump φ supported in B(P, r₀) ⊂ (0,1)^d with ∫φ² = 1, periodized
//! and translated to the anchor ζ_j = (j/d)e_j of the j-th Mikado line,
//! and ψ^j is a transverse profile independent of x_j with mean zero and
//! mean-square one. The exponents a = d/p, b = d/p′ satisfy a + b = d, so
//! ∫ φ_μ φ̃_μ = 1 at every concentration.
//!
//! Because ψ^j does not depend on x_j, the blocks solve the continuity
//! equation exactly: ∂_tQ^j + div(Θ^jW^j) = 0, and blocks with different j
//! have disjoint supports (the anchors keep the moving bump centers at
//! torus distance > 2r for every time). Both facts are verified
//! numerically here, together with the norm bounds
//!
//! ```text
//!     ‖Θ^j‖_{L^p} ≤ M/(2d),   ‖Θ^j‖_{L¹} ≤ M/μ^b,
//!     ‖W^j‖_{L^{p'}} ≤ M/(2d), ‖W^j‖_{L¹} ≤ M/μ^a,  ‖W^j‖_{C⁰} ≤ Mμ^b,
//!     ‖Q^j‖_{L^p} ≤ Mμ^b/ω,   ‖Q^j‖_{L¹} ≤ M/ω,
//!     ‖W^j‖_{W^{1,p̃}} ≤ M(λμ + ν)/μ^{1+ε},
//! ```
//!
//! with M a global constant computed from profile sup-norms and
//! ε = d/p + d/p̃ − d − 1 > 0 under the standing exponent condition
//! 1/p + 1/p̃ > 1 + 1/d.

use crate::error::{Error, Result};
use crate::tol;
use crate::torus_grid::{sample, GridSpec, ScalarField, VectorField};
use std::f64::consts::PI;
use std::sync::Arc;

/// Number of s-samples per period when minimizing the line distance.
const LINE_SAMPLES: usize = 10_000;

/// Safety margin on the separation radius: r = 0.95·(min distance)/2.
const LINE_SAFETY: f64 = 0.95;

/// Support radius of the bump relative to the separation radius:
/// r₀ = 0.9·r keeps a margin after grid discretization of the support.
const BUMP_RADIUS_FACTOR: f64 = 0.9;

/// Largest grid admitted per dimension when an operation chooses its own
/// resolution (memory bound: n^d nodes at 8 bytes each, plus transforms).
pub(crate) fn max_grid_n(d: usize) -> usize {
    match d {
        2 => 4096,
        3 => 256,
        _ => 64,
    }
}

/// The d axis-parallel Mikado lines x_j(s) = ζ_j + s e_j and their
/// separation radius.
#[derive(Clone, Debug, serde::Serialize)]
pub struct MikadoLines {
    d: usize,
    anchors: Vec<Vec<f64>>,
    r: f64,
}

/// Torus distance between two points of [0,1)^d.
fn torus_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            let diff = (a - b).rem_euclid(1.0);
            let wrapped = diff.min(1.0 - diff);
            wrapped * wrapped
        })
        .sum::<f64>()
        .sqrt()
}

/// Anchors ζ_j = (j/d)e_j (j = 1..d) with the separation radius r chosen
/// as half the minimal pairwise distance of the moving points
/// x_j(s) = ζ_j + s e_j over a dense s-grid, minus a 5% safety margin.
pub fn build_lines(d: usize) -> MikadoLines {
    assert!(d >= 2, "Mikado lines need dimension at least 2");
    let anchors: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let mut z = vec![0.0; d];
            z[j] = ((j + 1) as f64 / d as f64).rem_euclid(1.0);
            z
        })
        .collect();
    let mut min_dist = f64::INFINITY;
    let mut xi = vec![0.0; d];
    let mut xj = vec![0.0; d];
    for step in 0..LINE_SAMPLES {
        let s = step as f64 / LINE_SAMPLES as f64;
        for i in 0..d {
            for j in (i + 1)..d {
                xi.copy_from_slice(&anchors[i]);
                xi[i] += s;
                xj.copy_from_slice(&anchors[j]);
                xj[j] += s;
                min_dist = min_dist.min(torus_dist(&xi, &xj));
            }
        }
    }
    let r = LINE_SAFETY * min_dist / 2.0;
    assert!(r > 0.0, "line separation must be positive");
    MikadoLines { d, anchors, r }
}

impl MikadoLines {
    /// Dimension d.
    pub fn dim(&self) -> usize {
        self.d
    }

    /// Anchor ζ_j for the 0-based line index j (paper index j+1).
    pub fn anchor(&self, j: usize) -> &[f64] {
        &self.anchors[j]
    }

    /// Separation radius r: the moving points stay at distance > 2r.
    pub fn separation_radius(&self) -> f64 {
        self.r
    }

    /// Minimal pairwise torus distance of x_i(s), x_j(s) at a given s.
    pub fn min_pair_distance(&self, s: f64) -> f64 {
        let d = self.d;
        let mut min_dist = f64::INFINITY;
        for i in 0..d {
            for j in (i + 1)..d {
                let mut xi = self.anchors[i].clone();
                xi[i] += s;
                let mut xj = self.anchors[j].clone();
                xj[j] += s;
                min_dist = min_dist.min(torus_dist(&xi, &xj));
            }
        }
        min_dist
    }
}

/// The concentration bump φ, transverse profile ψ, and the exponents
/// a = d/p, b = d/p′.
#[derive(Clone, Debug, serde::Serialize)]
pub struct MikadoProfiles {
    d: usize,
    p: f64,
    a: f64,
    b: f64,
    r0: f64,
    /// Normalization with ∫_{R^d} φ² = 1.
    c: f64,
}

/// exp(−1/(1−u)) for u < 1, 0 otherwise (u is the squared relative radius).
fn bump_shape(u: f64) -> f64 {
    if u < 1.0 {
        (-1.0 / (1.0 - u)).exp()
    } else {
        0.0
    }
}

/// d/du of [`bump_shape`].
fn bump_shape_prime(u: f64) -> f64 {
    if u < 1.0 {
        let inv = 1.0 - u;
        -(-1.0 / inv).exp() / (inv * inv)
    } else {
        0.0
    }
}

/// Surface measure of the unit sphere S^{d−1} ⊂ R^d.
fn sphere_surface(d: usize) -> f64 {
    match d {
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        4 => 2.0 * PI * PI,
        _ => panic!("unsupported dimension {d}"),
    }
}

/// Adaptive Simpson quadrature on [a, b].
fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &impl Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), fm)
    }
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        fm: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (left, flm) = simpson(f, a, fa, m, fm);
        let (right, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, left, flm, 0.5 * tol, depth - 1)
                + recurse(f, m, fm, b, fb, right, frm, 0.5 * tol, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, fm, tol, 40)
}

/// ∫_{R^d} φ^q via the radial representation (φ is radial about P).
fn phi_power_integral(d: usize, c: f64, r0: f64, q: f64) -> f64 {
    let integrand = move |rho: f64| {
        let u = (rho / r0) * (rho / r0);
        (c * bump_shape(u)).powf(q) * rho.powi(d as i32 - 1)
    };
    sphere_surface(d) * adaptive_simpson(&integrand, 0.0, r0, 1e-14)
}

/// Mean over one period of |ψ|^q for ψ(y) = √2·cos(2πy).
fn psi_power_mean(q: f64) -> f64 {
    let integrand = move |y: f64| (2.0f64.sqrt() * (2.0 * PI * y).cos()).abs().powf(q);
    adaptive_simpson(&integrand, 0.0, 1.0, 1e-14)
}

/// Concrete profiles: φ(x) = c·exp(−1/(1 − |x−P|²/r₀²)) on B(P, r₀) with
/// ∫φ² = 1 fixed by radial quadrature, ψ(y) = √2·cos(2πy₁), and the
/// exponents a = d/p, b = d − a = d/p′.
pub fn build_profiles(lines: &MikadoLines, p: f64) -> MikadoProfiles {
    assert!((1.0..f64::INFINITY).contains(&p), "p must lie in [1, ∞)");
    let d = lines.dim();
    let r0 = BUMP_RADIUS_FACTOR * lines.separation_radius();
    let unnormalized = phi_power_integral(d, 1.0, r0, 2.0);
    let c = 1.0 / unnormalized.sqrt();
    let a = d as f64 / p;
    let b = d as f64 - a;
    MikadoProfiles { d, p, a, b, r0, c }
}

impl MikadoProfiles {
    /// Dimension d.
    pub fn dim(&self) -> usize {
        self.d
    }

    /// The Lebesgue exponent p the profiles were built for.
    pub fn p(&self) -> f64 {
        self.p
    }

    /// Concentration exponent a = d/p.
    pub fn a(&self) -> f64 {
        self.a
    }

    /// Concentration exponent b = d/p′ (so a + b = d exactly).
    pub fn b(&self) -> f64 {
        self.b
    }

    /// Bump support radius r₀.
    pub fn r0(&self) -> f64 {
        self.r0
    }

    /// Normalization constant c of the bump.
    pub fn normalization(&self) -> f64 {
        self.c
    }

    /// φ at squared relative radius u = |x−P|²/r₀².
    pub fn phi_of_u(&self, u: f64) -> f64 {
        self.c * bump_shape(u)
    }

    /// dφ/du at squared relative radius u.
    fn dphi_du(&self, u: f64) -> f64 {
        self.c * bump_shape_prime(u)
    }

    /// φ as a radial function of the distance ρ = |x − P|.
    pub fn phi_radial(&self, rho: f64) -> f64 {
        self.phi_of_u((rho / self.r0) * (rho / self.r0))
    }

    /// ψ(y) = √2·cos(2πy).
    pub fn psi(&self, y: f64) -> f64 {
        2.0f64.sqrt() * (2.0 * PI * y).cos()
    }

    /// ‖φ‖_{L^r(R^d)} by radial quadrature.
    pub fn phi_lr_norm(&self, r: f64) -> f64 {
        phi_power_integral(self.d, self.c, self.r0, r).powf(1.0 / r)
    }

    /// ‖ψ‖_{L^r} over one period.
    pub fn psi_lr_norm(&self, r: f64) -> f64 {
        psi_power_mean(r).powf(1.0 / r)
    }

    /// ‖φ‖_{L^∞} = c·e^{−1} (the bump peaks at its center).
    pub fn phi_sup(&self) -> f64 {
        self.c * (-1.0f64).exp()
    }

    /// ‖∇φ‖_{L^∞} by dense radial sampling, refined around the maximum.
    pub fn dphi_sup(&self) -> f64 {
        // |∇φ|(ρ) = |dφ/dρ| = |dφ/du|·2ρ/r₀².
        let grad = |rho: f64| {
            let u = (rho / self.r0) * (rho / self.r0);
            (self.dphi_du(u) * 2.0 * rho / (self.r0 * self.r0)).abs()
        };
        let mut lo = 0.0;
        let mut hi = self.r0;
        let mut best = 0.0f64;
        let mut arg = 0.0f64;
        for _ in 0..4 {
            let steps = 250_000;
            for i in 0..=steps {
                let rho = lo + (hi - lo) * i as f64 / steps as f64;
                let g = grad(rho);
                if g > best {
                    best = g;
                    arg = rho;
                }
            }
            let window = (hi - lo) / steps as f64 * 4.0;
            lo = (arg - window).max(0.0);
            hi = (arg + window).min(self.r0);
        }
        best
    }

    /// ‖ψ‖_{L^∞} = √2.
    pub fn psi_sup(&self) -> f64 {
        2.0f64.sqrt()
    }

    /// ‖ψ′‖_{L^∞} = 2π√2.
    pub fn dpsi_sup(&self) -> f64 {
        2.0 * PI * 2.0f64.sqrt()
    }
}

/// Oscillation, concentration, phase speed, and transverse oscillation.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct MikadoParams {
    /// Fast oscillation λ (positive integer).
    pub lambda: u64,
    /// Concentration μ ≥ 1.
    pub mu: f64,
    /// Phase speed ω > 0.
    pub omega: f64,
    /// Very fast oscillation ν, a positive integer multiple of λ.
    pub nu: u64,
}

impl MikadoParams {
    /// Validated parameter tuple; ν must be a positive multiple of λ,
    /// μ ≥ 1, ω > 0.
    pub fn new(lambda: u64, mu: f64, omega: f64, nu: u64) -> Result<Self> {
        if lambda == 0 {
            return Err(Error::Param("λ must be a positive integer".into()));
        }
        if nu == 0 || nu % lambda != 0 {
            return Err(Error::Param(format!(
                "ν must be a positive integer multiple of λ, got ν = {nu}, λ = {lambda}"
            )));
        }
        if !(mu >= 1.0 && mu.is_finite()) {
            return Err(Error::Param(format!("μ must satisfy μ ≥ 1, got {mu}")));
        }
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::Param(format!("ω must be positive, got {omega}")));
        }
        Ok(MikadoParams {
            lambda,
            mu,
            omega,
            nu,
        })
    }

    /// Fastest oscillation parameter max(λμ, ν) of the resolution rule.
    pub fn fast_scale(&self) -> f64 {
        (self.lambda as f64 * self.mu).max(self.nu as f64)
    }

    /// Smallest admissible points-per-axis under the resolution rule.
    pub fn min_resolution(&self) -> usize {
        let required = (tol::RESOLUTION_FACTOR as f64 * self.fast_scale()).ceil() as usize;
        required.max(4).next_power_of_two()
    }
}

/// The assembled Mikado family: pure analytic evaluators for Θ^j, W^j,
/// Q^j, ∂_tΘ^j, ∂_tQ^j, and div W^j, j = 0..d−1 (0-based).
#[derive(Clone, Debug)]
pub struct MikadoSet {
    lines: MikadoLines,
    profiles: MikadoProfiles,
    params: MikadoParams,
}

/// Validates the inputs and assembles the evaluator set.
pub fn build_mikado_set(
    profiles: &MikadoProfiles,
    lines: &MikadoLines,
    params: MikadoParams,
) -> Result<MikadoSet> {
    if profiles.dim() != lines.dim() {
        return Err(Error::Param(format!(
            "profiles are {}-dimensional but lines are {}-dimensional",
            profiles.dim(),
            lines.dim()
        )));
    }
    // revalidate (MikadoParams may have been deserialized)
    let params = MikadoParams::new(params.lambda, params.mu, params.omega, params.nu)?;
    Ok(MikadoSet {
        lines: lines.clone(),
        profiles: profiles.clone(),
        params,
    })
}

impl MikadoSet {
    /// Dimension d.
    pub fn dim(&self) -> usize {
        self.lines.dim()
    }

    /// The parameter tuple.
    pub fn params(&self) -> MikadoParams {
        self.params
    }

    /// The profiles.
    pub fn profiles(&self) -> &MikadoProfiles {
        &self.profiles
    }

    /// The lines.
    pub fn lines(&self) -> &MikadoLines {
        &self.lines
    }

    /// Axis carrying the transverse profile for line j: the first
    /// coordinate different from j (ψ^j drops coordinate x_j).
    pub fn transverse_axis(&self, j: usize) -> usize {
        if j == 0 {
            1
        } else {
            0
        }
    }

    /// The periodized bump argument: z = λ(x − ωt e_j) − ζ_j mod 1, then
    /// w = μz − P. Returns |w|²/r₀² and w_j (needed for ∂_j evaluations).
    fn bump_coords(&self, j: usize, t: f64, x: &[f64]) -> (f64, f64) {
        let d = self.dim();
        let lam = self.params.lambda as f64;
        let mu = self.params.mu;
        let r0 = self.profiles.r0();
        let shift = self.params.omega * t;
        let mut usq = 0.0;
        let mut wj = 0.0;
        for c in 0..d {
            let xc = if c == j { x[c] - shift } else { x[c] };
            let z = (lam * xc - self.lines.anchor(j)[c]).rem_euclid(1.0);
            let w = mu * z - 0.5;
            usq += w * w;
            if c == j {
                wj = w;
            }
        }
        (usq / (r0 * r0), wj)
    }

    /// (φ_μ^j)_λ ∘ τ_{ωt e_j} at x: the traveling density bump μ^a φ(μ·).
    pub fn bump(&self, j: usize, t: f64, x: &[f64]) -> f64 {
        let (u, _) = self.bump_coords(j, t, x);
        self.params.mu.powf(self.profiles.a()) * self.profiles.phi_of_u(u)
    }

    /// (φ̃_μ^j)_λ ∘ τ_{ωt e_j} at x: the traveling field bump μ^b φ(μ·).
    pub fn bump_tilde(&self, j: usize, t: f64, x: &[f64]) -> f64 {
        let (u, _) = self.bump_coords(j, t, x);
        self.params.mu.powf(self.profiles.b()) * self.profiles.phi_of_u(u)
    }

    /// ((∂_j φ_μ^j))_λ ∘ τ_{ωt e_j} at x (without the outer λ factor).
    pub fn bump_dj(&self, j: usize, t: f64, x: &[f64]) -> f64 {
        let (u, wj) = self.bump_coords(j, t, x);
        let r0 = self.profiles.r0();
        let mu = self.params.mu;
        mu.powf(self.profiles.a() + 1.0) * self.profiles.dphi_du(u) * 2.0 * wj / (r0 * r0)
    }

    /// ((∂_j φ̃_μ^j))_λ ∘ τ_{ωt e_j} at x (without the outer λ factor).
    pub fn bump_tilde_dj(&self, j: usize, t: f64, x: &[f64]) -> f64 {
        let (u, wj) = self.bump_coords(j, t, x);
        let r0 = self.profiles.r0();
        let mu = self.params.mu;
        mu.powf(self.profiles.b() + 1.0) * self.profiles.dphi_du(u) * 2.0 * wj / (r0 * r0)
    }

    /// ψ_ν^j(x) = ψ^j(νx) = √2 cos(2πν x_σ) with σ the transverse axis.
    pub fn psi_nu(&self, j: usize, x: &[f64]) -> f64 {
        let y = self.params.nu as f64 * x[self.transverse_axis(j)];
        self.profiles.psi(y)
    }

    /// Mikado density Θ^j(t, x).
    pub fn theta(&self, j: usize, t: f64, x: &[f64]) -> f64 {
        self.bump(j, t, x) * self.psi_nu(j, x)
    }

    /// Component j of the Mikado field W^j(t, x) (all others vanish).
    pub fn w_component(&self, j: usize, t: f64, x: &[f64]) -> f64 {
        self.bump_tilde(j, t, x) * self.psi_nu(j, x)
    }

    /// Quadratic corrector Q^j(t, x).
    pub fn q(&self, j: usize, t: f64, x: &[f64]) -> f64 {
        let (u, _) = self.bump_coords(j, t, x);
        let phi = self.profiles.phi_of_u(u);
        let psi = self.psi_nu(j, x);
        self.params.mu.powf(self.dim() as f64) * phi * phi * psi * psi / self.params.omega
    }

    /// ∂_tΘ^j(t, x) = −λω((∂_jφ_μ^j)_λ ∘ τ_{ωte_j})ψ_ν^j.
    pub fn theta_dt(&self, j: usize, t: f64, x: &[f64]) -> f64 {
        -(self.params.lambda as f64) * self.params.omega
            * self.bump_dj(j, t, x)
            * self.psi_nu(j, x)
    }

    /// div W^j(t, x) = λ((∂_jφ̃_μ^j)_λ ∘ τ_{ωte_j})ψ_ν^j.
    pub fn w_div(&self, j: usize, t: f64, x: &[f64]) -> f64 {
        self.params.lambda as f64 * self.bump_tilde_dj(j, t, x) * self.psi_nu(j, x)
    }

    /// ∂_tQ^j(t, x) = −λ((∂_j(φ_μ^jφ̃_μ^j))_λ ∘ τ_{ωte_j})(ψ_ν^j)².
    pub fn q_dt(&self, j: usize, t: f64, x: &[f64]) -> f64 {
        let (u, wj) = self.bump_coords(j, t, x);
        let r0 = self.profiles.r0();
        let mu = self.params.mu;
        let phi = self.profiles.phi_of_u(u);
        let dphi = self.profiles.dphi_du(u);
        let psi = self.psi_nu(j, x);
        let d_prod = 2.0 * phi * dphi * 2.0 * wj / (r0 * r0);
        -(self.params.lambda as f64) * mu.powf(self.dim() as f64 + 1.0) * d_prod * psi * psi
    }

    /// Samples Θ^j(t) onto a grid.
    pub fn theta_field(&self, j: usize, t: f64, grid: GridSpec) -> Result<ScalarField> {
        let set = Arc::new(self.clone());
        sample(grid, move |x| set.theta(j, t, x))
    }

    /// Samples W^j(t) onto a grid (single nonzero component j).
    pub fn w_field(&self, j: usize, t: f64, grid: GridSpec) -> Result<VectorField> {
        let set = Arc::new(self.clone());
        let mut comps = Vec::with_capacity(self.dim());
        for c in 0..self.dim() {
            if c == j {
                let set = Arc::clone(&set);
                comps.push(sample(grid, move |x| set.w_component(j, t, x))?);
            } else {
                comps.push(ScalarField::zeros(grid));
            }
        }
        Ok(VectorField::new(comps))
    }

    /// Samples Q^j(t) onto a grid.
    pub fn q_field(&self, j: usize, t: f64, grid: GridSpec) -> Result<ScalarField> {
        let set = Arc::new(self.clone());
        sample(grid, move |x| set.q(j, t, x))
    }

    /// Samples (φ_μ^j)_λ ∘ τ_{ωte_j} onto a grid.
    pub fn bump_field(&self, j: usize, t: f64, grid: GridSpec) -> Result<ScalarField> {
        let set = Arc::new(self.clone());
        sample(grid, move |x| set.bump(j, t, x))
    }

    /// Samples (φ̃_μ^j)_λ ∘ τ_{ωte_j} onto a grid.
    pub fn bump_tilde_field(&self, j: usize, t: f64, grid: GridSpec) -> Result<ScalarField> {
        let set = Arc::new(self.clone());
        sample(grid, move |x| set.bump_tilde(j, t, x))
    }

    /// Samples ((∂_jφ_μ^j))_λ ∘ τ_{ωte_j} onto a grid (no outer λ factor).
    pub fn bump_dj_field(&self, j: usize, t: f64, grid: GridSpec) -> Result<ScalarField> {
        let set = Arc::new(self.clone());
        sample(grid, move |x| set.bump_dj(j, t, x))
    }

    /// Samples ψ_ν^j onto a grid (time-independent).
    pub fn psi_field(&self, j: usize, grid: GridSpec) -> Result<ScalarField> {
        let set = Arc::new(self.clone());
        sample(grid, move |x| set.psi_nu(j, x))
    }

    /// Samples ∂_tQ^j(t) onto a grid.
    pub fn q_dt_field(&self, j: usize, t: f64, grid: GridSpec) -> Result<ScalarField> {
        let set = Arc::new(self.clone());
        sample(grid, move |x| set.q_dt(j, t, x))
    }

    /// Smallest admissible grid under the resolution rule.
    pub fn min_resolution(&self) -> usize {
        self.params.min_resolution()
    }
}

/// The global constants of the construction.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct MikadoConstants {
    /// ε = d/p + d/p̃ − d − 1 (positive under the exponent condition).
    pub epsilon: f64,
    /// M = 2d·max_{k∈{0,1}}{‖D^kφ‖_∞‖D^kψ‖_∞, ‖φ‖²_∞‖ψ‖²_∞}.
    pub m: f64,
    /// a = d/p.
    pub a: f64,
    /// b = d/p′.
    pub b: f64,
}

/// Computes ε and the global constant M from the profile sup-norms.
///
/// Fails with `InfeasibleError` when 1/p + 1/p̃ ≤ 1 + 1/d (ε ≤ 0).
pub fn derive_constants(
    p: f64,
    p_tilde: f64,
    d: usize,
    profiles: &MikadoProfiles,
) -> Result<MikadoConstants> {
    let df = d as f64;
    let epsilon = df / p + df / p_tilde - df - 1.0;
    if epsilon <= 0.0 {
        return Err(Error::Infeasible(format!(
            "exponent condition 1/p + 1/p̃ > 1 + 1/d fails: 1/{p} + 1/{p_tilde} ≤ 1 + 1/{d} (ε = {epsilon})"
        )));
    }
    let k0 = profiles.phi_sup() * profiles.psi_sup();
    let k1 = profiles.dphi_sup() * profiles.dpsi_sup();
    let sq = profiles.phi_sup().powi(2) * profiles.psi_sup().powi(2);
    let m = 2.0 * df * k0.max(k1).max(sq);
    Ok(MikadoConstants {
        epsilon,
        m,
        a: profiles.a(),
        b: profiles.b(),
    })
}

/// Which Mikado function a norm request refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MikadoFunction {
    /// The density Θ^j.
    Theta,
    /// The field W^j.
    W,
    /// The quadratic corrector Q^j.
    Q,
}

/// Norm descriptor for [`mikado_norms`].
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum NormDescriptor {
    /// L^p norm (covers L^p, L^{p′}, L¹ by choice of exponent).
    Lp(f64),
    /// Sup norm C⁰.
    C0,
    /// W^{1,p} Sobolev norm.
    Sobolev1(f64),
}

/// Outcome of a dual-route norm computation.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct MikadoNormReport {
    /// Grid-quadrature value (the authoritative result when available).
    pub value: f64,
    /// Factorized semi-analytic value from the scaling identities, when
    /// such a route exists for the descriptor.
    pub semi_analytic: Option<f64>,
    /// |grid − semi|/grid when both routes ran.
    pub disagreement: Option<f64>,
    /// Set when the routes disagree beyond the quadrature tolerance (the
    /// factorization neglects the coupling between bump and transverse
    /// oscillation, so this flags visible coupling, not an error).
    pub flagged: bool,
    /// Points per axis of the grid route (0 when only semi-analytic ran).
    pub n_used: usize,
}

/// Factorized semi-analytic norm: profile-factor norm (exact under the
/// scaling identities) times transverse-factor norm.
fn semi_analytic_norm(set: &MikadoSet, which: MikadoFunction, norm: NormDescriptor) -> Option<f64> {
    let prof = set.profiles();
    let d = set.dim() as f64;
    let mu = set.params().mu;
    match norm {
        NormDescriptor::Lp(r) => Some(match which {
            MikadoFunction::Theta => {
                mu.powf(prof.a() - d / r) * prof.phi_lr_norm(r) * prof.psi_lr_norm(r)
            }
            MikadoFunction::W => {
                mu.powf(prof.b() - d / r) * prof.phi_lr_norm(r) * prof.psi_lr_norm(r)
            }
            MikadoFunction::Q => {
                // Q = ω^{−1} μ^d φ²(μ·)·ψ², and ‖φ²‖_{L^r} = ‖φ‖²_{L^{2r}}.
                mu.powf(d - d / r) * prof.phi_lr_norm(2.0 * r).powi(2)
                    * prof.psi_lr_norm(2.0 * r).powi(2)
                    / set.params().omega
            }
        }),
        NormDescriptor::C0 => Some(match which {
            MikadoFunction::Theta => mu.powf(prof.a()) * prof.phi_sup() * prof.psi_sup(),
            MikadoFunction::W => mu.powf(prof.b()) * prof.phi_sup() * prof.psi_sup(),
            MikadoFunction::Q => {
                mu.powf(d) * prof.phi_sup().powi(2) * prof.psi_sup().powi(2) / set.params().omega
            }
        }),
        NormDescriptor::Sobolev1(_) => None,
    }
}

/// Norm of a Mikado function at time t, computed by grid quadrature at
/// (at least) the resolution rule and cross-checked against the
/// semi-analytic scaling route.
///
/// The norms are independent of the line index j (the blocks are
/// coordinate permutations and translations of each other); j = 0 is used
/// internally. When the rule demands a grid beyond the per-dimension
/// memory cap, the semi-analytic value is returned if it exists
/// (`n_used = 0`), otherwise `ResolutionError`.
pub fn mikado_norms(
    set: &MikadoSet,
    which: MikadoFunction,
    norm: NormDescriptor,
    t: f64,
) -> Result<MikadoNormReport> {
    if let NormDescriptor::Lp(r) | NormDescriptor::Sobolev1(r) = norm {
        if r < 1.0 {
            return Err(Error::Domain(format!("norm exponent must be ≥ 1, got {r}")));
        }
    }
    let semi = semi_analytic_norm(set, which, norm);
    let n_min = set.min_resolution();
    if n_min > max_grid_n(set.dim()) {
        return match semi {
            Some(value) => Ok(MikadoNormReport {
                value,
                semi_analytic: Some(value),
                disagreement: None,
                flagged: false,
                n_used: 0,
            }),
            None => Err(Error::Resolution(format!(
                "resolution rule needs n ≥ {n_min} (beyond the {}-d cap {}) and no semi-analytic route exists for {norm:?}",
                set.dim(),
                max_grid_n(set.dim())
            ))),
        };
    }
    let grid = GridSpec::new(set.dim(), n_min)?;
    let j = 0;
    let value = match which {
        MikadoFunction::Theta | MikadoFunction::Q => {
            let f = match which {
                MikadoFunction::Theta => set.theta_field(j, t, grid)?,
                _ => set.q_field(j, t, grid)?,
            };
            match norm {
                NormDescriptor::Lp(r) => f.lp_norm(r)?,
                NormDescriptor::C0 => f.max_abs(),
                NormDescriptor::Sobolev1(r) => f.sobolev_norm_unchecked(1, r)?,
            }
        }
        MikadoFunction::W => {
            let f = set.w_field(j, t, grid)?;
            match norm {
                NormDescriptor::Lp(r) => f.lp_norm(r)?,
                NormDescriptor::C0 => f.max_abs(),
                NormDescriptor::Sobolev1(r) => f.sobolev_norm_unchecked(1, r)?,
            }
        }
    };
    let disagreement = semi.map(|s| (value - s).abs() / value.abs().max(f64::MIN_POSITIVE));
    let flagged = disagreement.map(|d| d > tol::QUADRATURE_TOL).unwrap_or(false);
    Ok(MikadoNormReport {
        value,
        semi_analytic: semi,
        disagreement,
        flagged,
        n_used: n_min,
    })
}

/// One row of the cancellation report.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct CancellationRow {
    /// Line index (0-based).
    pub j: usize,
    /// ‖∂_tQ^j + div(Θ^jW^j)‖_{L²} with analytic ∂_t and spectral div.
    pub residual: f64,
    /// Reference scale ω·‖Q^j‖_{W^{1,2}}.
    pub scale: f64,
    /// residual ≤ CANCELLATION_TOL · scale.
    pub pass: bool,
}

/// Verifies ∂_tQ^j + div(Θ^jW^j) = 0 for every j at time t.
///
/// Θ^jW^j = ωQ^j e_j pointwise, so the divergence reduces to ω∂_jQ^j,
/// computed spectrally from the sampled Q^j; ∂_tQ^j is evaluated
/// analytically. The identity is exact, so the measured residual is pure
/// spectral truncation of the sampled product, and the bump's Gevrey tails
/// can need a much finer grid than the resolution rule's floor: the grid is
/// doubled until the line passes `CANCELLATION_TOL` or the dimension cap is
/// hit, in which case the row reports `pass: false` with the best residual.
/// Fails with `ResolutionError` only when even the capped grid cannot
/// satisfy the resolution rule.
pub fn verify_cancellation(set: &MikadoSet, t: f64) -> Result<Vec<CancellationRow>> {
    let n_min = set.min_resolution();
    let cap = max_grid_n(set.dim());
    if n_min > cap {
        return Err(Error::Resolution(format!(
            "resolution rule needs n ≥ {n_min}, beyond the {}-d cap {cap}",
            set.dim()
        )));
    }
    let omega = set.params().omega;
    let mut rows = Vec::with_capacity(set.dim());
    for j in 0..set.dim() {
        let mut n = n_min;
        let row = loop {
            let grid = GridSpec::new(set.dim(), n)?;
            let q = set.q_field(j, t, grid)?;
            let q_dt = set.q_dt_field(j, t, grid)?;
            let div = q.partial_deriv(j).scale(omega);
            let residual = q_dt.add(&div).lp_norm(2.0)?;
            let scale = omega * q.sobolev_norm_unchecked(1, 2.0)?;
            let pass = residual <= tol::CANCELLATION_TOL * scale;
            if pass || n >= cap {
                break CancellationRow {
                    j,
                    residual,
                    scale,
                    pass,
                };
            }
            n = (n * 2).min(cap);
        };
        rows.push(row);
    }
    Ok(rows)
}

/// One entry of the Mikado verification report.
#[derive(Clone, Debug, serde::Serialize)]
pub struct MikadoVerificationRow {
    /// Which identity or bound the row verifies.
    pub identity: String,
    /// The parameter tuple used.
    pub params: MikadoParams,
    /// Measured residual, for identity rows.
    pub residual: Option<f64>,
    /// The bound's right-hand side, for bound rows.
    pub bound: Option<f64>,
    /// The measured left-hand side, for bound rows.
    pub measured: Option<f64>,
    /// Whether the row passed.
    pub pass: bool,
}

/// Full verification report for one Mikado set at time t: the
/// cancellation identity per j, disjointness of supports, the pointwise
/// Q = ω^{−1}ΘW·e_j identity, and the norm bounds with constant M.
pub fn mikado_verification_report(
    set: &MikadoSet,
    constants: &MikadoConstants,
    p: f64,
    p_prime: f64,
    p_tilde: f64,
    t: f64,
) -> Result<Vec<MikadoVerificationRow>> {
    let params = set.params();
    let mut rows = Vec::new();
    for row in verify_cancellation(set, t)? {
        rows.push(MikadoVerificationRow {
            identity: format!("cancellation ∂_tQ^{j} + div(Θ^{j}W^{j}) = 0", j = row.j + 1),
            params,
            residual: Some(row.residual / row.scale.max(f64::MIN_POSITIVE)),
            bound: Some(tol::CANCELLATION_TOL),
            measured: None,
            pass: row.pass,
        });
    }
    // disjoint supports on the rule grid at t and a shifted time
    let n = set.min_resolution().min(max_grid_n(set.dim()));
    let grid = GridSpec::new(set.dim(), n)?;
    let mut worst = 0.0f64;
    for &tt in &[t, t + 0.137] {
        for i in 0..set.dim() {
            for j in 0..set.dim() {
                if i == j {
                    continue;
                }
                let th = set.theta_field(i, tt, grid)?;
                let wj = set.w_field(j, tt, grid)?;
                worst = worst.max(th.mul(wj.comp(j)).max_abs());
            }
        }
    }
    rows.push(MikadoVerificationRow {
        identity: "disjoint supports Θ^i·W^j = 0 (i≠j)".into(),
        params,
        residual: Some(worst),
        bound: Some(0.0),
        measured: None,
        pass: worst == 0.0,
    });
    // norm bounds of the proposition
    let m = constants.m;
    let d = set.dim() as f64;
    let checks: Vec<(String, MikadoFunction, NormDescriptor, f64)> = vec![
        ("‖Θ‖_{L^p} ≤ M/2d".into(), MikadoFunction::Theta, NormDescriptor::Lp(p), m / (2.0 * d)),
        (
            "‖W‖_{L^{p'}} ≤ M/2d".into(),
            MikadoFunction::W,
            NormDescriptor::Lp(p_prime),
            m / (2.0 * d),
        ),
        (
            "‖Q‖_{L^p} ≤ Mμ^b/ω".into(),
            MikadoFunction::Q,
            NormDescriptor::Lp(p),
            m * params.mu.powf(constants.b) / params.omega,
        ),
        (
            "‖Θ‖_{L¹} ≤ M/μ^b".into(),
            MikadoFunction::Theta,
            NormDescriptor::Lp(1.0),
            m / params.mu.powf(constants.b),
        ),
        (
            "‖W‖_{L¹} ≤ M/μ^a".into(),
            MikadoFunction::W,
            NormDescriptor::Lp(1.0),
            m / params.mu.powf(constants.a),
        ),
        (
            "‖Q‖_{L¹} ≤ M/ω".into(),
            MikadoFunction::Q,
            NormDescriptor::Lp(1.0),
            m / params.omega,
        ),
        (
            "‖W‖_{C⁰} ≤ Mμ^b".into(),
            MikadoFunction::W,
            NormDescriptor::C0,
            m * params.mu.powf(constants.b),
        ),
        (
            "‖W‖_{W^{1,p̃}} ≤ M(λμ+ν)/μ^{1+ε}".into(),
            MikadoFunction::W,
            NormDescriptor::Sobolev1(p_tilde),
            m * (params.lambda as f64 * params.mu + params.nu as f64)
                / params.mu.powf(1.0 + constants.epsilon),
        ),
    ];
    for (identity, which, norm, bound) in checks {
        let report = mikado_norms(set, which, norm, t)?;
        rows.push(MikadoVerificationRow {
            identity,
            params,
            residual: None,
            bound: Some(bound),
            measured: Some(report.value),
            pass: report.value <= bound,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(d: usize, p: f64) -> (MikadoLines, MikadoProfiles) {
        let lines = build_lines(d);
        let profiles = build_profiles(&lines, p);
        (lines, profiles)
    }

    #[test]
    fn lines_d2_match_closed_form() {
        let lines = build_lines(2);
        assert_eq!(lines.anchor(0), &[0.5, 0.0], "ζ₁ = (1/2, 0)");
        assert_eq!(lines.anchor(1), &[0.0, 0.0], "ζ₂ = (0, 0) mod Z²");
        // min distance √2/4, so r ≈ 0.95·√2/8
        let expect = 0.95 * 2f64.sqrt() / 8.0;
        assert!(
            (lines.separation_radius() - expect).abs() < 1e-4,
            "r = {}, want ≈ {expect}",
            lines.separation_radius()
        );
    }

    #[test]
    fn lines_d3_stay_separated() {
        let lines = build_lines(3);
        assert!(lines.separation_radius() > 0.0);
        for step in 0..100 {
            let s = step as f64 / 100.0;
            assert!(
                lines.min_pair_distance(s) > 2.0 * lines.separation_radius(),
                "pairwise distance must exceed 2r at s = {s}"
            );
        }
    }

    #[test]
    fn profiles_normalize_phi_square() {
        for d in [2usize, 3] {
            let (_, prof) = setup(d, 2.0);
            let integral = phi_power_integral(d, prof.normalization(), prof.r0(), 2.0);
            assert!(
                (integral - 1.0).abs() < 1e-8,
                "∫φ² = {integral} must be 1 within 1e−8 (d = {d})"
            );
        }
    }

    #[test]
    fn profiles_exponents_by_direct_substitution() {
        let (_, prof) = setup(2, 2.0);
        assert_eq!(prof.a(), 1.0, "d=2, p=2 → a = 1");
        assert_eq!(prof.b(), 1.0, "d=2, p=2 → b = 1");
        assert_eq!(prof.a() + prof.b(), 2.0, "a + b = d exactly");
        let (_, prof) = setup(3, 1.5);
        assert_eq!(prof.a(), 2.0);
        assert_eq!(prof.b(), 1.0);
    }

    #[test]
    fn psi_mean_conditions_hold() {
        // ψ = √2cos(2πy): mean 0 and mean-square 1 by mode identities;
        // verify via the quadrature used for the norm routes.
        assert!((psi_power_mean(2.0) - 1.0).abs() < 1e-10, "∫ψ² = 1");
        let mean = adaptive_simpson(
            &|y: f64| 2.0f64.sqrt() * (2.0 * PI * y).cos(),
            0.0,
            1.0,
            1e-14,
        );
        assert!(mean.abs() < 1e-10, "∫ψ = 0");
    }

    #[test]
    fn params_validate_divisibility() {
        assert!(MikadoParams::new(2, 1.0, 1.0, 6).is_ok());
        assert!(matches!(
            MikadoParams::new(2, 1.0, 1.0, 3),
            Err(Error::Param(_))
        ));
        assert!(matches!(
            MikadoParams::new(2, 0.5, 1.0, 4),
            Err(Error::Param(_))
        ));
        assert!(matches!(
            MikadoParams::new(0, 1.0, 1.0, 4),
            Err(Error::Param(_))
        ));
        assert!(matches!(
            MikadoParams::new(2, 1.0, -1.0, 4),
            Err(Error::Param(_))
        ));
    }

    #[test]
    fn unit_parameters_give_plain_product() {
        let (lines, prof) = setup(2, 2.0);
        let params = MikadoParams::new(1, 1.0, 1.0, 1).unwrap();
        let set = build_mikado_set(&prof, &lines, params).unwrap();
        // Θ^j(0,x) = φ^j(x)ψ^j(x) pointwise at t = 0
        for j in 0..2 {
            for x in [[0.3, 0.7], [0.52, 0.11], [0.47, 0.53]] {
                let theta = set.theta(j, 0.0, &x);
                // direct product: φ periodized at x − ζ_j, times ψ^j(x)
                let z: Vec<f64> = (0..2)
                    .map(|c| (x[c] - lines.anchor(j)[c]).rem_euclid(1.0))
                    .collect();
                let rho = ((z[0] - 0.5).powi(2) + (z[1] - 0.5).powi(2)).sqrt();
                let direct = prof.phi_radial(rho) * prof.psi(x[set.transverse_axis(j)]);
                assert!(
                    (theta - direct).abs() <= 1e-12 * direct.abs().max(1.0),
                    "Θ^{j}(0,{x:?}) = {theta} vs direct {direct}"
                );
            }
        }
    }

    #[test]
    fn q_is_theta_w_over_omega_pointwise() {
        let (lines, prof) = setup(2, 2.0);
        let params = MikadoParams::new(2, 2.0, 3.0, 4).unwrap();
        let set = build_mikado_set(&prof, &lines, params).unwrap();
        for j in 0..2 {
            for x in [[0.26, 0.13], [0.51, 0.49], [0.12, 0.93]] {
                for t in [0.0, 0.37] {
                    let lhs = set.q(j, t, &x);
                    let rhs = set.theta(j, t, &x) * set.w_component(j, t, &x) / 3.0;
                    assert!(
                        (lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0),
                        "Q = ω^{{−1}}ΘW_j failed at j={j}, x={x:?}, t={t}"
                    );
                }
            }
        }
    }

    #[test]
    fn disjoint_supports_across_lines() {
        for d in [2usize, 3] {
            let (lines, prof) = setup(d, 2.0);
            let params = MikadoParams::new(2, 2.0, 1.7, 4).unwrap();
            let set = build_mikado_set(&prof, &lines, params).unwrap();
            let grid = GridSpec::new(d, set.min_resolution().min(64)).unwrap();
            for step in 0..10 {
                let t = step as f64 * 0.0917;
                for i in 0..d {
                    for j in 0..d {
                        if i == j {
                            continue;
                        }
                        let th = set.theta_field(i, t, grid).unwrap();
                        let w = set.w_field(j, t, grid).unwrap();
                        let prod_max = th.mul(w.comp(j)).max_abs();
                        assert_eq!(
                            prod_max, 0.0,
                            "Θ^{i}·W^{j} must vanish identically (d={d}, t={t})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn translated_bump_product_integrates_to_one() {
        // ∫ (φ_μ^i ∘ τ_{se_i})·(φ̃_μ^i ∘ τ_{se_i}) = 1 for sampled s.
        let (lines, prof) = setup(2, 2.0);
        for mu in [1.0f64, 2.0, 4.0] {
            let params = MikadoParams::new(1, mu, 1.0, 1).unwrap();
            let set = build_mikado_set(&prof, &lines, params).unwrap();
            let n = 512;
            let grid = GridSpec::new(2, n).unwrap();
            for s in [0.0, 0.31, 0.77] {
                // products of the traveling bumps at ωt = s (ω = 1, t = s)
                let set2 = set.clone();
                let f = sample(grid, move |x| {
                    set2.bump(0, s, x) * set2.bump_tilde(0, s, x)
                })
                .unwrap();
                let integral = f.mean();
                assert!(
                    (integral - 1.0).abs() < 1e-6,
                    "∫φ_μφ̃_μ = {integral} at μ={mu}, s={s}"
                );
            }
        }
    }

    #[test]
    fn constants_follow_closed_forms() {
        let (_, prof3) = setup(3, 1.0);
        let c = derive_constants(1.0, 2.0, 3, &prof3).unwrap();
        assert!((c.epsilon - 0.5).abs() < 1e-12, "d=3,p=1,p̃=2 → ε = 1/2");
        let (_, prof2) = setup(2, 1.5);
        let c = derive_constants(1.5, 1.0, 2, &prof2).unwrap();
        assert!(
            (c.epsilon - 1.0 / 3.0).abs() < 1e-12,
            "d=2,p=1.5,p̃=1 → ε = 1/3, got {}",
            c.epsilon
        );
        assert!(c.m > 0.0);
        assert!(matches!(
            derive_constants(2.0, 1.0, 2, &prof2),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn cancellation_identity_at_spec_parameters() {
        let (lines, prof) = setup(2, 2.0);
        let params = MikadoParams::new(2, 2.0, 3.0, 4).unwrap();
        let set = build_mikado_set(&prof, &lines, params).unwrap();
        let rows = verify_cancellation(&set, 0.37).unwrap();
        for row in &rows {
            assert!(
                row.pass,
                "cancellation residual {} exceeds 1e−8·{} at j={}",
                row.residual, row.scale, row.j
            );
        }
    }

    #[test]
    fn cancellation_identity_with_unit_parameters() {
        let (lines, prof) = setup(2, 2.0);
        let params = MikadoParams::new(1, 1.0, 1.0, 1).unwrap();
        let set = build_mikado_set(&prof, &lines, params).unwrap();
        let rows = verify_cancellation(&set, 0.0).unwrap();
        assert!(rows.iter().all(|r| r.pass), "identity is parameter-free");
    }

    #[test]
    fn cancellation_uniform_over_time_samples() {
        let (lines, prof) = setup(2, 2.0);
        let params = MikadoParams::new(2, 1.5, 2.0, 4).unwrap();
        let set = build_mikado_set(&prof, &lines, params).unwrap();
        for step in 0..4 {
            let t = step as f64 / 4.0;
            let rows = verify_cancellation(&set, t).unwrap();
            assert!(rows.iter().all(|r| r.pass), "residual must stay bounded at t={t}");
        }
    }

    #[test]
    fn theta_lp_bound_and_w_l1_concentration_fit() {
        // (p, p̃) = (1.5, 1) is feasible in d = 2: ε = 4/3 + 2 − 3 = 1/3.
        let p = 1.5;
        let (lines, prof) = setup(2, p);
        let constants = derive_constants(p, 1.0, 2, &prof).unwrap();
        let mut mus = Vec::new();
        let mut l1 = Vec::new();
        // Scale ν with μ so the transverse profile stays fast relative to
        // the shrinking bump; otherwise the factorized L¹ law picks up a
        // spurious dependence on where the bump sits within one ψ period.
        for mu in [2.0f64, 4.0, 8.0] {
            let params = MikadoParams::new(1, mu, 1.0, 8 * mu as u64).unwrap();
            let set = build_mikado_set(&prof, &lines, params).unwrap();
            let theta_lp = mikado_norms(&set, MikadoFunction::Theta, NormDescriptor::Lp(p), 0.2)
                .unwrap()
                .value;
            assert!(
                theta_lp <= constants.m / 4.0,
                "‖Θ‖_p = {theta_lp} must stay below M/2d = {}",
                constants.m / 4.0
            );
            let w_l1 = mikado_norms(&set, MikadoFunction::W, NormDescriptor::Lp(1.0), 0.2)
                .unwrap()
                .value;
            assert!(
                w_l1 <= constants.m / mu.powf(constants.a),
                "‖W‖_{{L¹}} = {w_l1} must stay below M/μ^a at μ={mu}"
            );
            mus.push(mu);
            l1.push(w_l1);
        }
        let slope = crate::fit::log_log_slope(&mus, &l1);
        assert!(
            (slope + constants.a).abs() <= 0.1 * constants.a,
            "‖W‖_{{L¹}} must fit μ^{{−a}} within ±10%: slope {slope}, a = {}",
            constants.a
        );
    }

    #[test]
    fn q_l1_halves_when_omega_doubles() {
        let (lines, prof) = setup(2, 2.0);
        let mut values = Vec::new();
        for omega in [1.0f64, 2.0] {
            let params = MikadoParams::new(1, 2.0, omega, 2).unwrap();
            let set = build_mikado_set(&prof, &lines, params).unwrap();
            values.push(
                mikado_norms(&set, MikadoFunction::Q, NormDescriptor::Lp(1.0), 0.1)
                    .unwrap()
                    .value,
            );
        }
        let ratio = values[1] / values[0];
        assert!(
            (ratio - 0.5).abs() < 0.005,
            "doubling ω must halve ‖Q‖_{{L¹}} within 1%, ratio {ratio}"
        );
    }

    #[test]
    fn bump_factor_norms_are_mu_invariant() {
        // ‖φ_μ^j‖_{L^p} is μ-independent by the scaling identity; measure
        // the grid values across μ with matched relative resolution.
        let p = 2.0;
        let (lines, prof) = setup(2, p);
        let mut values = Vec::new();
        for mu in [1.0f64, 2.0, 4.0, 8.0] {
            let params = MikadoParams::new(1, mu, 1.0, 1).unwrap();
            let set = build_mikado_set(&prof, &lines, params).unwrap();
            let n = (64.0 * mu) as usize;
            let grid = GridSpec::new(2, n.next_power_of_two()).unwrap();
            let set2 = set.clone();
            let f = sample(grid, move |x| set2.bump(0, 0.0, x)).unwrap();
            values.push(f.lp_norm(p).unwrap());
        }
        let base = values[0];
        for (i, v) in values.iter().enumerate() {
            assert!(
                (v - base).abs() / base <= tol::QUADRATURE_TOL,
                "‖φ_μ‖_p must be μ-invariant: μ index {i} gave {v} vs {base}"
            );
        }
    }

    #[test]
    fn w_sobolev_bound_fits_predicted_parameter_dependence() {
        // ‖W‖_{W^{1,p̃}} against (λμ + ν)/μ^{1+ε}: slope 1 ± 0.15. The pair
        // (p, p̃) = (1.5, 1.1) is feasible in d = 2 (ε = 5/33); ν/λμ = 8 on
        // every tuple so the ν-term dominates the gradient uniformly.
        let p = 1.5;
        let p_tilde = 1.1;
        let (lines, prof) = setup(2, p);
        let constants = derive_constants(p, p_tilde, 2, &prof).unwrap();
        let mut predicted = Vec::new();
        let mut measured = Vec::new();
        for (lambda, mu, nu) in [(1u64, 1.0f64, 8u64), (2, 1.0, 16), (4, 1.0, 32), (2, 2.0, 32)] {
            let params = MikadoParams::new(lambda, mu, 1.0, nu).unwrap();
            let set = build_mikado_set(&prof, &lines, params).unwrap();
            let norm = mikado_norms(&set, MikadoFunction::W, NormDescriptor::Sobolev1(p_tilde), 0.3)
                .unwrap()
                .value;
            predicted
                .push((lambda as f64 * mu + nu as f64) / mu.powf(1.0 + constants.epsilon));
            measured.push(norm);
            assert!(
                norm <= constants.m * predicted.last().unwrap(),
                "W^{{1,p̃}} bound violated at λ={lambda}, μ={mu}, ν={nu}: {norm}"
            );
        }
        let slope = crate::fit::log_log_slope(&predicted, &measured);
        assert!(
            (slope - 1.0).abs() <= 0.15,
            "W^{{1,p̃}} norm must scale linearly in (λμ+ν)/μ^{{1+ε}}: slope {slope}"
        );
    }

    #[test]
    fn norm_report_cross_checks_semi_analytic_route() {
        let (lines, prof) = setup(2, 2.0);
        let params = MikadoParams::new(1, 1.0, 1.0, 8).unwrap();
        let set = build_mikado_set(&prof, &lines, params).unwrap();
        let report = mikado_norms(&set, MikadoFunction::Theta, NormDescriptor::Lp(2.0), 0.0).unwrap();
        let semi = report.semi_analytic.unwrap();
        assert!(report.value > 0.0 && semi > 0.0);
        // with ν ≫ λμ the factorization error is tiny
        assert!(
            report.disagreement.unwrap() < 1e-3,
            "factorized route should approximate the grid value, got {} vs {semi}",
            report.value
        );
    }
}
