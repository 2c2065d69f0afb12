//! Parametric edge curves.
//!
//! Every edge is a regular parametric curve on `t ∈ [0, 1]` with distinct
//! endpoints (no edge is a closed contour; closed boundaries like a circle
//! are split into at least two edges).  The serializable mesh format supports
//! three kinds — straight segments, circular arcs, and sinusoidally perturbed
//! segments — and the [`Curve`] trait lets test-only curves (the hyperbola of
//! the edge-basis example) reuse the same quadrature and Gram machinery.

use super::Pt;
use serde::{Deserialize, Serialize};

/// Geometry evaluation interface shared by mesh edges and standalone curves.
pub trait Curve {
    fn position(&self, t: f64) -> Pt;
    fn velocity(&self, t: f64) -> Pt;
    fn acceleration(&self, t: f64) -> Pt;

    /// Signed curvature of the parametrization, `(x′ × x″)/|x′|³`.
    fn curvature(&self, t: f64) -> f64 {
        let v = self.velocity(t);
        let a = self.acceleration(t);
        v.cross(a) / v.norm().powi(3)
    }
}

/// Serializable edge geometry; tagged `"kind"` in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveSpec {
    /// Straight segment from `a` to `b`.
    Line { a: Pt, b: Pt },
    /// Circular arc `center + radius·(cos θ, sin θ)`, `θ` linear from
    /// `theta0` to `theta1` (either direction).
    CircularArc { center: Pt, radius: f64, theta0: f64, theta1: f64 },
    /// Straight chord `a → b` plus a sinusoidal displacement of the given
    /// amplitude along the left unit normal, vanishing at both endpoints:
    /// `x(t) = a + t(b-a) + amplitude·sin(halfwaves·π·t)·n̂`.
    SinePerturbedLine { a: Pt, b: Pt, amplitude: f64, halfwaves: u32 },
}

impl CurveSpec {
    /// Degree of an algebraic curve containing the edge (`None` if the edge
    /// is not algebraic, as for the sinusoid).  Drives the expected dimension
    /// of restricted polynomial spaces on the edge.
    pub fn algebraic_degree(&self) -> Option<usize> {
        match self {
            CurveSpec::Line { .. } => Some(1),
            CurveSpec::CircularArc { .. } => Some(2),
            CurveSpec::SinePerturbedLine { .. } => None,
        }
    }
}

impl Curve for CurveSpec {
    fn position(&self, t: f64) -> Pt {
        match *self {
            CurveSpec::Line { a, b } => a + (b - a) * t,
            CurveSpec::CircularArc { center, radius, theta0, theta1 } => {
                let th = theta0 + t * (theta1 - theta0);
                center + Pt::new(th.cos(), th.sin()) * radius
            }
            CurveSpec::SinePerturbedLine { a, b, amplitude, halfwaves } => {
                let d = b - a;
                let n = d.rot_ccw().unit();
                let phase = halfwaves as f64 * std::f64::consts::PI * t;
                a + d * t + n * (amplitude * phase.sin())
            }
        }
    }

    fn velocity(&self, t: f64) -> Pt {
        match *self {
            CurveSpec::Line { a, b } => b - a,
            CurveSpec::CircularArc { center: _, radius, theta0, theta1 } => {
                let dth = theta1 - theta0;
                let th = theta0 + t * dth;
                Pt::new(-th.sin(), th.cos()) * (radius * dth)
            }
            CurveSpec::SinePerturbedLine { a, b, amplitude, halfwaves } => {
                let d = b - a;
                let n = d.rot_ccw().unit();
                let k = halfwaves as f64 * std::f64::consts::PI;
                d + n * (amplitude * k * (k * t).cos())
            }
        }
    }

    fn acceleration(&self, t: f64) -> Pt {
        match *self {
            CurveSpec::Line { .. } => Pt::ZERO,
            CurveSpec::CircularArc { center: _, radius, theta0, theta1 } => {
                let dth = theta1 - theta0;
                let th = theta0 + t * dth;
                Pt::new(th.cos(), th.sin()) * (-radius * dth * dth)
            }
            CurveSpec::SinePerturbedLine { a, b, amplitude, halfwaves } => {
                let d = b - a;
                let n = d.rot_ccw().unit();
                let k = halfwaves as f64 * std::f64::consts::PI;
                n * (-amplitude * k * k * (k * t).sin())
            }
        }
    }
}

/// The hyperbola edge `x(t) = (cosh t, sinh t / 2)`, `t ∈ [0, 1]` — lies on
/// the algebraic curve `x² − 4y² = 1` (degree 2).  Used by the edge-basis
/// selection example and the `edgebasis` CLI subcommand.
#[derive(Debug, Clone, Copy)]
pub struct Hyperbola;

impl Curve for Hyperbola {
    fn position(&self, t: f64) -> Pt {
        Pt::new(t.cosh(), 0.5 * t.sinh())
    }

    fn velocity(&self, t: f64) -> Pt {
        Pt::new(t.sinh(), 0.5 * t.cosh())
    }

    fn acceleration(&self, t: f64) -> Pt {
        Pt::new(t.cosh(), 0.5 * t.sinh())
    }
}
