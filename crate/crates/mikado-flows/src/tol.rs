//! Numerical tolerances and the resolution policy, fixed in one place.
//!
//! Every tolerance used by the library is a named constant here with its
//! rationale, so that tests, reports, and documentation cannot drift apart.
//! Tolerances fall into two groups: *exactness* tolerances guard identities
//! that hold to rounding error on resolved grids (spectral calculus,
//! quadrature of Fourier modes), while *discretization* tolerances budget
//! for quadrature of the compactly supported bump profiles and for the
//! finite-difference time stencil.

/// Relative tolerance on grid means: a field counts as zero-mean when
/// |mean| ≤ `MEAN_TOL_REL`·‖f‖_{L²}. Grid means of resolved periodic
/// functions are spectrally accurate, so anything above rounding noise
/// signals a construction bug.
pub const MEAN_TOL_REL: f64 = 1e-12;

/// Maximal fraction of spectral energy allowed above the resolved band
/// (modes with |k|_∞ > n/4). Operations that differentiate or multiply
/// fields refuse inputs whose tail carries more than this fraction.
pub const TAIL_TOL: f64 = 1e-8;

/// Agreement required between an analytic evaluator attached to a field
/// and the stored samples (used when cross-validating snapshots).
pub const SAMPLING_TOL: f64 = 1e-12;

/// Relative agreement required between grid quadrature and the
/// semi-analytic scaling route when a norm is computed both ways. The
/// bump profiles are smooth but concentrated; at the mandated resolution
/// rule their quadrature error stays well below this.
pub const QUADRATURE_TOL: f64 = 1e-6;

/// Base relative tolerance for the continuity-defect residual,
/// calibrated at `RESIDUAL_REF_K` time intervals. The residual of an
/// exact construction is limited by the 4th-order time stencil, so the
/// tolerance for other K scales as (RESIDUAL_REF_K/K)⁴.
pub const RESIDUAL_TOL_REL: f64 = 1e-5;

/// Reference number of time intervals at which `RESIDUAL_TOL_REL` holds.
pub const RESIDUAL_REF_K: f64 = 64.0;

/// Relative solenoidality tolerance: ‖div u‖_{L²} ≤ this × ‖u‖_{W^{1,2}}.
pub const SOLENOID_TOL_REL: f64 = 1e-9;

/// Sanity bound on |grid mean of φ_μφ̃_μ − 1|. The bump product is
/// normalized to unit integral, but unlike the trigonometric ψ factors
/// its grid mean carries genuine quadrature error — roughly e^{−√s} at
/// s grid nodes per bump period, ≈ 3·10⁻³ at the 16-nodes-per-fastest-
/// oscillation resolution floor. A violation of this loose bound
/// therefore signals a broken normalization, not discretization; the
/// sharp unit-integral check lives with the profile quadrature tests on
/// fine grids.
pub const BUMP_MEAN_TOL: f64 = 1e-2;

/// Relative tolerance for the Mikado cancellation identity
/// ∂_tQ^j + div(Θ^jW^j) = 0: the measured L² residual must stay below
/// `CANCELLATION_TOL`·ω·‖Q^j‖_{W^{1,2}}.
pub const CANCELLATION_TOL: f64 = 1e-8;

/// Nodes required per fastest oscillation: a construction whose fastest
/// feature has parameter m (= max(λμ, ν) for the Mikado content) needs
/// n ≥ `RESOLUTION_FACTOR`·m points per axis. One period of the fastest
/// transverse mode then spans ≥ 16 nodes, enough for the bump profiles.
pub const RESOLUTION_FACTOR: usize = 16;

/// Residual tolerance adjusted to a time grid with `k` intervals.
///
/// 4th-order stencil: halving the step divides the residual by 16.
pub fn residual_tol_at(k: usize) -> f64 {
    let ratio = RESIDUAL_REF_K / k as f64;
    RESIDUAL_TOL_REL * ratio.powi(4)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residual_tolerance_scales_at_fourth_order() {
        assert_eq!(residual_tol_at(64), RESIDUAL_TOL_REL);
        let loose = residual_tol_at(32);
        assert!(
            (loose / RESIDUAL_TOL_REL - 16.0).abs() < 1e-12,
            "halving K must relax the tolerance 16-fold, got factor {}",
            loose / RESIDUAL_TOL_REL
        );
    }
}
