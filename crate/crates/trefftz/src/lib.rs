//! Trefftz-type finite elements on curvilinear polygon meshes.
//!
//! The method solves Poisson problems on meshes whose cells may be arbitrary
//! curvilinear polygons (any number of edges, edges curved, cells nonconvex).
//! On every cell `K` the local space splits as
//!
//! ```text
//! V_p(K) = V_p^K(K) ⊕ V_p^∂K(K)
//! ```
//!
//! where the interior part consists of polynomial-Laplacian "bubbles"
//! (Δφ ∈ P_{p-2}(K), φ = 0 on ∂K) and the boundary part of harmonic
//! functions with edgewise-polynomial traces.  Nothing in the space is known
//! in closed form; every pointwise value and every integral is produced by
//! boundary-integral identities:
//!
//! * local Dirichlet problems are solved by a Nyström discretization of the
//!   second-kind integral equation for the *harmonic conjugate* of the
//!   solution ([`bie`]),
//! * stiffness, load, and error integrals reduce to boundary integrals by
//!   integration by parts against the conjugate, so no interior quadrature
//!   and no numerical differentiation enters the assembled numbers
//!   ([`localspace`], [`assembly`]),
//! * interior evaluation uses Cauchy's integral formula ([`bie::cauchy_eval`]).
//!
//! Edgewise polynomial trace spaces on curved edges are constructed by
//! Gaussian elimination with complete pivoting on a Gram matrix of a
//! hierarchical spanning set ([`edgespace`]); their dimension depends on the
//! algebraic degree of the edge curve.
//!
//! The [`assembly`] module glues local spaces into a conforming global space,
//! and [`interpolation`] provides the quasi-interpolant used in approximation
//! studies.  The companion CLI crate drives the convergence experiments
//! (L-shaped domain with an enriched refined core cell, pegboard / shuriken /
//! jigsaw families) and reproduces their reference tables.

pub mod assembly;
pub mod bie;
pub mod edgespace;
pub mod geometry;
pub mod interpolation;
pub mod linalg;
pub mod localspace;
pub mod polynomial;

pub use geometry::Pt;

/// Errors surfaced by mesh construction, validation, and solves.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A mesh failed validation; the string lists the violations.
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    /// A linear solve failed (singular factorization, SPD violation, or a
    /// non-converging iteration).
    #[error("linear solve failed: {0}")]
    Solve(String),
    /// Inconsistent configuration (unknown family, unsupported parameter
    /// combination, malformed input file).
    #[error("configuration error: {0}")]
    Config(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
