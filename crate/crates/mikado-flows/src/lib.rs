//! Spectral toolkit for convex-integration constructions on the flat torus.
//!
//! The library builds and verifies the objects behind a convex-integration
//! scheme for the *continuity-defect equation* on T^d = [0,1)^d:
//!
//! ```text
//!     ∂_t ρ + div(ρ u) = −div R,        div u = 0,
//! ```
//!
//! where the vector field R (the "defect") measures how far (ρ, u) is from
//! solving the continuity equation. A single step of the scheme adds fast
//! oscillating perturbations built from *space-time Mikado flows* —
//! concentrated bump profiles travelling along pairwise disjoint lines,
//! modulated by a very fast transverse oscillation — and produces a new
//! triple (ρ₁, u₁, R₁) with a strictly smaller defect. Iterating drives the
//! defect to zero and exhibits non-unique bounded solutions of the
//! continuity equation when 1/p + 1/p̃ > 1 + 1/d.
//!
//! Everything is discretized pseudo-spectrally: fields live on a uniform
//! tensor grid with n (a power of two) points per axis, derivatives and all
//! antidivergence operators are diagonal Fourier multipliers, and time uses
//! uniform samples with 4th-order difference stencils. The modules follow
//! the construction:
//!
//! * [`torus_grid`] — grids, scalar/vector fields, transforms, norms, time
//!   sampling, binary field dumps;
//! * [`calculus`] — the operators D^k, the inverse Laplacian, the standard
//!   and bilinear antidivergences, and empirical inequality probes;
//! * [`mikado`] — the building blocks Θ^j, W^j, Q^j with their profiles,
//!   lines, constants, and identity verifiers;
//! * [`perturbation`] — cutoffs, coefficient fields, the perturbations
//!   ϑ, w, q and their correctors;
//! * [`defect`] — the seven components of the new defect field R₁ and the
//!   residual checks;
//! * [`scheme`] — exponent planning, λ selection, the single step, the
//!   outer iteration, and seed scenarios;
//! * [`cli`] — the command-line front end used by the `mkf` binary.

pub mod calculus;
pub mod cli;
pub mod defect;
mod error;
pub mod fit;
pub mod mikado;
pub mod perturbation;
pub mod scheme;
pub mod tol;
pub mod torus_grid;

pub use error::{Error, Result};
