//! Canonical domains and boundary-condition profiles.
//!
//! Four reference domains are supported: the upper half-plane, the unit
//! disc, the horizontal strip of height pi, and the annulus
//! `A_p = { e^{-p} < |z| < 1 }`.  Marked boundary points split the boundary
//! into arcs, each carrying a boundary condition.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::KernelError;

pub const BOUNDARY_TOL: f64 = 1e-12;

/// Kind of canonical domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    HalfPlane,
    Disc,
    Strip,
    Annulus,
}

/// Boundary condition on one arc.
///
/// The Riemann-Hilbert condition is `alpha * dM/dn + beta * dM/dtau = 0`
/// with `(alpha, beta) = (cos(pi theta), -sin(pi theta))`; the endpoints
/// `theta = +-1/2` degenerate to Dirichlet conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    Dirichlet { value: f64 },
    Neumann,
    RiemannHilbert { theta: f64 },
}

impl BoundaryCondition {
    pub fn validate(&self) -> Result<(), KernelError> {
        if let BoundaryCondition::RiemannHilbert { theta } = self {
            if !(theta.abs() < 0.5) {
                return Err(KernelError::ThetaOutOfRange(*theta));
            }
        }
        Ok(())
    }

    /// True when a Riemann-Hilbert parameter sits at a Dirichlet endpoint.
    pub fn is_degenerate_rh(theta: f64) -> bool {
        (theta.abs() - 0.5).abs() < 1e-14
    }
}

/// An arc of the boundary together with its condition.  Arcs are described
/// by their endpoints in boundary order; for circle boundaries the arc runs
/// counterclockwise from `from` to `to`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryArc {
    pub from: Complex64,
    pub to: Complex64,
    pub condition: BoundaryCondition,
}

/// A canonical domain with marked boundary points and an arc profile.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DomainSpec {
    pub kind: DomainKind,
    /// Annulus modulus p > 0 (`A_p = { e^{-p} < |z| < 1 }`); ignored otherwise.
    pub modulus: Option<f64>,
    pub marked: Vec<Complex64>,
    pub arcs: Vec<BoundaryArc>,
}

impl DomainSpec {
    pub fn half_plane() -> Self {
        DomainSpec { kind: DomainKind::HalfPlane, modulus: None, marked: vec![], arcs: vec![] }
    }

    pub fn disc() -> Self {
        DomainSpec { kind: DomainKind::Disc, modulus: None, marked: vec![], arcs: vec![] }
    }

    pub fn strip() -> Self {
        DomainSpec { kind: DomainKind::Strip, modulus: None, marked: vec![], arcs: vec![] }
    }

    pub fn annulus(p: f64) -> Self {
        DomainSpec { kind: DomainKind::Annulus, modulus: Some(p), marked: vec![], arcs: vec![] }
    }

    pub fn with_marked(mut self, marked: Vec<Complex64>) -> Self {
        self.marked = marked;
        self
    }

    pub fn annulus_modulus(&self) -> Result<f64, KernelError> {
        match (self.kind, self.modulus) {
            (DomainKind::Annulus, Some(p)) if p > 0.0 => Ok(p),
            (DomainKind::Annulus, _) => Err(KernelError::InvalidModulus),
            _ => Err(KernelError::DomainMismatch("modulus only defined for annulus".into())),
        }
    }

    /// Distance from `z` to the boundary of the domain.
    pub fn boundary_distance(&self, z: Complex64) -> f64 {
        match self.kind {
            DomainKind::HalfPlane => z.im,
            DomainKind::Disc => 1.0 - z.norm(),
            DomainKind::Strip => z.im.min(PI - z.im),
            DomainKind::Annulus => {
                let p = self.modulus.unwrap_or(f64::INFINITY);
                let r = z.norm();
                (1.0 - r).min(r - (-p).exp())
            }
        }
    }

    pub fn contains(&self, z: Complex64) -> bool {
        self.boundary_distance(z) > 0.0
    }

    /// Check a point lies on the boundary to `BOUNDARY_TOL`; returns which
    /// component for the annulus (0 = outer, 1 = inner).
    pub fn boundary_component(&self, x: Complex64) -> Result<usize, KernelError> {
        let ok0: bool;
        let mut comp = 0usize;
        match self.kind {
            DomainKind::HalfPlane => ok0 = x.im.abs() < BOUNDARY_TOL,
            DomainKind::Disc => ok0 = (x.norm() - 1.0).abs() < BOUNDARY_TOL,
            DomainKind::Strip => {
                let on_bottom = x.im.abs() < BOUNDARY_TOL;
                let on_top = (x.im - PI).abs() < BOUNDARY_TOL;
                if on_top {
                    comp = 1;
                }
                ok0 = on_bottom || on_top;
            }
            DomainKind::Annulus => {
                let p = self.annulus_modulus()?;
                let on_outer = (x.norm() - 1.0).abs() < BOUNDARY_TOL;
                let on_inner = (x.norm() - (-p).exp()).abs() < BOUNDARY_TOL;
                if on_inner {
                    comp = 1;
                }
                ok0 = on_outer || on_inner;
            }
        }
        if ok0 {
            Ok(comp)
        } else {
            Err(KernelError::NotOnBoundary(x))
        }
    }

    /// Positively oriented unit tangent at a boundary point (domain on the
    /// left).  On circle boundaries of the annulus the outer circle is
    /// traversed counterclockwise and the inner clockwise.
    pub fn unit_tangent(&self, x: Complex64) -> Result<Complex64, KernelError> {
        let i = Complex64::new(0.0, 1.0);
        match self.kind {
            DomainKind::HalfPlane => Ok(Complex64::new(1.0, 0.0)),
            DomainKind::Disc => Ok(i * x),
            DomainKind::Strip => {
                if self.boundary_component(x)? == 0 {
                    Ok(Complex64::new(1.0, 0.0))
                } else {
                    Ok(Complex64::new(-1.0, 0.0))
                }
            }
            DomainKind::Annulus => {
                if self.boundary_component(x)? == 0 {
                    Ok(i * x / x.norm())
                } else {
                    Ok(-i * x / x.norm())
                }
            }
        }
    }

    /// Validate the invariants: modulus positivity, marked points on the
    /// boundary, arcs meeting only at marked points.
    pub fn validate(&self) -> Result<(), KernelError> {
        if self.kind == DomainKind::Annulus {
            self.annulus_modulus()?;
        }
        for &m in &self.marked {
            self.boundary_component(m)?;
        }
        for arc in &self.arcs {
            arc.condition.validate()?;
            self.boundary_component(arc.from)?;
            self.boundary_component(arc.to)?;
        }
        Ok(())
    }
}

/// Counterclockwise arc length from `a` to `b` on the unit circle, in (0, 2pi].
pub fn ccw_arc_length(a: Complex64, b: Complex64) -> f64 {
    let mut d = b.arg() - a.arg();
    while d <= 0.0 {
        d += 2.0 * PI;
    }
    while d > 2.0 * PI {
        d -= 2.0 * PI;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annulus_modulus_must_be_positive() {
        let d = DomainSpec::annulus(-1.0);
        assert!(d.annulus_modulus().is_err());
        assert!(DomainSpec::annulus(2.0).annulus_modulus().is_ok());
    }

    #[test]
    fn boundary_components() {
        let a = DomainSpec::annulus(1.0);
        assert_eq!(a.boundary_component(Complex64::new(1.0, 0.0)).unwrap(), 0);
        let q = (-1.0f64).exp();
        assert_eq!(a.boundary_component(Complex64::new(0.0, q)).unwrap(), 1);
        assert!(a.boundary_component(Complex64::new(0.5, 0.0)).is_err());
    }

    #[test]
    fn rh_theta_range() {
        assert!(BoundaryCondition::RiemannHilbert { theta: 0.49 }.validate().is_ok());
        assert!(BoundaryCondition::RiemannHilbert { theta: 0.5 }.validate().is_err());
        assert!(BoundaryCondition::is_degenerate_rh(0.5));
    }

    #[test]
    fn ccw_length() {
        let a = Complex64::new(1.0, 0.0);
        let b = Complex64::new(0.0, 1.0);
        assert!((ccw_arc_length(a, b) - PI / 2.0).abs() < 1e-12);
        assert!((ccw_arc_length(b, a) - 3.0 * PI / 2.0).abs() < 1e-12);
    }
}
