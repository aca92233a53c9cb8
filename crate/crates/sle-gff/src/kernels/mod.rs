//! Schwarz, Poisson and Green kernels in the four canonical domains.
//!
//! Closed forms are used wherever they exist (half-plane, disc, strip with
//! Riemann-Hilbert data, the mixed strip via quarter-plane images); annulus
//! kernels use truncated mode series with a modular image-series fallback
//! for thin annuli; anything else drops to the lattice solver.

pub mod annulus;
pub mod lattice;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::domain::{DomainKind, DomainSpec};
use crate::error::KernelError;

pub use annulus::{AnnulusInnerBc, AnnulusKernel};
pub use lattice::{harmonic_solve, Grid, LatticeBc, LatticeProblem};

pub const SINGULAR_EVAL_TOL: f64 = 1e-12;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Boundary-condition profile for kernel evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcProfile {
    /// Zero Dirichlet data everywhere (delta at the kernel point).
    Dirichlet,
    /// Annulus: Dirichlet (delta) on the outer circle, Neumann inner.
    AnnulusNeumannInner,
    /// Strip: Dirichlet on the bottom line, zero Neumann on the top.
    StripNeumannTop,
    /// Strip: Dirichlet bottom, Riemann-Hilbert with parameter theta on top.
    StripRiemannHilbertTop { theta: f64 },
}

/// Evaluator handle: domain + profile + series controls.
#[derive(Debug, Clone)]
pub struct KernelHandle {
    pub domain: DomainSpec,
    pub profile: BcProfile,
    pub tolerance: f64,
    pub max_truncation: usize,
    annulus: Option<AnnulusKernel>,
}

impl KernelHandle {
    pub fn new(domain: DomainSpec, profile: BcProfile) -> Result<Self, KernelError> {
        Self::with_tolerance(domain, profile, 1e-13, 4000)
    }

    pub fn with_tolerance(
        domain: DomainSpec,
        profile: BcProfile,
        tolerance: f64,
        max_truncation: usize,
    ) -> Result<Self, KernelError> {
        domain.validate()?;
        let annulus = if domain.kind == DomainKind::Annulus {
            let p = domain.annulus_modulus()?;
            let inner = match profile {
                BcProfile::Dirichlet => AnnulusInnerBc::DirichletConst,
                BcProfile::AnnulusNeumannInner => AnnulusInnerBc::Neumann,
                _ => return Err(KernelError::UnsupportedProfile),
            };
            Some(AnnulusKernel::new(p, inner, tolerance, max_truncation)?)
        } else {
            None
        };
        Ok(KernelHandle { domain, profile, tolerance, max_truncation, annulus })
    }

    pub fn annulus_kernel(&self) -> Option<&AnnulusKernel> {
        self.annulus.as_ref()
    }

    /// Schwarz kernel value at interior `z` for boundary point `x`.
    pub fn schwarz(&self, x: Complex64, z: Complex64) -> Result<Complex64, KernelError> {
        match self.domain.kind {
            DomainKind::Annulus => self.annulus.as_ref().unwrap().schwarz(x, z),
            DomainKind::HalfPlane | DomainKind::Disc => {
                schwarz_closed_form(&self.domain, 0.0, x, z)
            }
            DomainKind::Strip => {
                let theta = match self.profile {
                    BcProfile::StripRiemannHilbertTop { theta } => theta,
                    BcProfile::StripNeumannTop => 0.0,
                    BcProfile::Dirichlet => {
                        // Zero-constant Dirichlet-top kernel: (i/2pi) coth(w/2).
                        let w = z - x;
                        check_singular(w)?;
                        return Ok(I / (2.0 * PI) * (w / 2.0).coth());
                    }
                    _ => return Err(KernelError::UnsupportedProfile),
                };
                schwarz_closed_form(&self.domain, theta, x, z)
            }
        }
    }

    /// Poisson kernel: real part of the dispatched Schwarz kernel, with the
    /// logarithmic correction for the all-Dirichlet annulus profile.
    pub fn poisson(&self, x: Complex64, z: Complex64) -> Result<f64, KernelError> {
        let s = self.schwarz(x, z)?;
        match (self.domain.kind, &self.profile) {
            (DomainKind::Annulus, BcProfile::Dirichlet) => {
                let p = self.domain.annulus_modulus()?;
                Ok(s.re + z.norm().ln() / (2.0 * PI * p))
            }
            _ => Ok(s.re),
        }
    }

    /// Green's function for the handle's profile.
    pub fn greens(&self, z1: Complex64, z2: Complex64) -> Result<GreensValue, KernelError> {
        greens_eval(self, z1, z2)
    }
}

/// Result of a Green's function evaluation; `lattice_fallback` flags values
/// that came from the lattice backend rather than a closed form or series.
#[derive(Debug, Clone, Copy)]
pub struct GreensValue {
    pub value: f64,
    pub lattice_fallback: bool,
}

fn check_singular(w: Complex64) -> Result<(), KernelError> {
    if w.norm() < SINGULAR_EVAL_TOL {
        return Err(KernelError::SingularEvaluation(w.norm()));
    }
    Ok(())
}

#[allow(dead_code)]
trait ComplexHyp {
    fn coth(self) -> Complex64;
    fn csch(self) -> Complex64;
}

impl ComplexHyp for Complex64 {
    fn coth(self) -> Complex64 {
        self.cosh() / self.sinh()
    }
    fn csch(self) -> Complex64 {
        Complex64::new(1.0, 0.0) / self.sinh()
    }
}

/// Closed-form Schwarz kernels.
///
/// Half-plane: `i / (pi (z - x))`; disc: `(x + z) / (2 pi (x - z))`;
/// strip: `(i / 2 pi) e^{theta (z - x)} / sinh((z - x)/2)` (theta only
/// meaningful for the strip).  The annulus has no closed form here.
pub fn schwarz_closed_form(
    domain: &DomainSpec,
    theta: f64,
    x: Complex64,
    z: Complex64,
) -> Result<Complex64, KernelError> {
    let w = z - x;
    check_singular(w)?;
    match domain.kind {
        DomainKind::HalfPlane => Ok(I / (PI * w)),
        DomainKind::Disc => Ok((x + z) / (2.0 * PI * (x - z))),
        DomainKind::Strip => {
            if theta.abs() > 0.5 {
                return Err(KernelError::ThetaOutOfRange(theta));
            }
            Ok(I / (2.0 * PI) * (theta * w).exp() / (w / 2.0).sinh())
        }
        DomainKind::Annulus => Err(KernelError::DomainMismatch(
            "use schwarz_annulus for the annulus".into(),
        )),
    }
}

/// z-derivative of the closed-form kernels.
pub fn schwarz_closed_form_dz(
    domain: &DomainSpec,
    theta: f64,
    x: Complex64,
    z: Complex64,
) -> Result<Complex64, KernelError> {
    let w = z - x;
    check_singular(w)?;
    match domain.kind {
        DomainKind::HalfPlane => Ok(-I / (PI * w * w)),
        DomainKind::Disc => Ok(x / (PI * (x - z) * (x - z))),
        DomainKind::Strip => {
            let h = (w / 2.0).sinh();
            let c = (w / 2.0).cosh();
            Ok(I / (2.0 * PI) * (theta * w).exp() * (theta / h - c / (2.0 * h * h)))
        }
        DomainKind::Annulus => Err(KernelError::DomainMismatch(
            "use schwarz_annulus for the annulus".into(),
        )),
    }
}

/// Annulus Schwarz kernel for `x` on the outer circle.
pub fn schwarz_annulus(
    p: f64,
    bc_inner: AnnulusInnerBc,
    x: Complex64,
    z: Complex64,
) -> Result<Complex64, KernelError> {
    AnnulusKernel::new(p, bc_inner, 1e-13, 4000)?.schwarz(x, z)
}

/// Inverted annulus kernel for `y` on the inner circle:
/// `S^{inv;p}_y(z) = S^p_{e^{-p}/y}(e^{-p}/z)` with the Dirichlet-constant
/// inner condition.
pub fn schwarz_annulus_inverted(
    p: f64,
    y: Complex64,
    z: Complex64,
) -> Result<Complex64, KernelError> {
    let k = AnnulusKernel::new(p, AnnulusInnerBc::DirichletConst, 1e-13, 4000)?;
    k.schwarz_inverted(y, z)
}

/// Dirichlet Green's function closed forms for the simply connected domains.
fn greens_dirichlet_simply_connected(
    kind: DomainKind,
    z1: Complex64,
    z2: Complex64,
) -> f64 {
    match kind {
        DomainKind::HalfPlane => {
            -(1.0 / (2.0 * PI)) * ((z1 - z2) / (z1 - z2.conj())).norm().ln()
        }
        DomainKind::Disc => {
            -(1.0 / (2.0 * PI))
                * ((z1 - z2) / (Complex64::new(1.0, 0.0) - z1 * z2.conj())).norm().ln()
        }
        DomainKind::Strip => {
            // Conformal pullback through e^z to the half-plane.
            greens_dirichlet_simply_connected(DomainKind::HalfPlane, z1.exp(), z2.exp())
        }
        DomainKind::Annulus => unreachable!(),
    }
}

/// Quarter-plane Green's function, Dirichlet on the positive real axis and
/// Neumann on the positive imaginary axis, by images.
fn greens_quarter_plane(u1: Complex64, u2: Complex64) -> f64 {
    let l = |a: Complex64| a.norm().ln();
    -(1.0 / (2.0 * PI))
        * (l(u1 - u2) - l(u1 - u2.conj()) + l(u1 + u2.conj()) - l(u1 + u2))
}

/// Green's function under a handle's profile.
///
/// Closed forms: Dirichlet half-plane/disc/strip; mixed strip
/// (Dirichlet bottom, Neumann top) through the quarter-plane image formula;
/// annulus profiles by mode series.  Riemann-Hilbert profiles fall back to
/// the lattice oracle and set the warning flag.
pub fn greens_eval(
    handle: &KernelHandle,
    z1: Complex64,
    z2: Complex64,
) -> Result<GreensValue, KernelError> {
    if (z1 - z2).norm() < SINGULAR_EVAL_TOL {
        return Err(KernelError::CoincidentPoints);
    }
    let kind = handle.domain.kind;
    match (&handle.profile, kind) {
        (BcProfile::Dirichlet, DomainKind::HalfPlane | DomainKind::Disc | DomainKind::Strip) => {
            Ok(GreensValue {
                value: greens_dirichlet_simply_connected(kind, z1, z2),
                lattice_fallback: false,
            })
        }
        (BcProfile::StripNeumannTop, DomainKind::Strip) => Ok(GreensValue {
            value: greens_quarter_plane((z1 / 2.0).exp(), (z2 / 2.0).exp()),
            lattice_fallback: false,
        }),
        (BcProfile::Dirichlet, DomainKind::Annulus)
        | (BcProfile::AnnulusNeumannInner, DomainKind::Annulus) => {
            let p = handle.domain.annulus_modulus()?;
            let inner = match handle.profile {
                BcProfile::Dirichlet => AnnulusInnerBc::DirichletConst,
                _ => AnnulusInnerBc::Neumann,
            };
            Ok(GreensValue {
                value: annulus::greens_annulus(p, inner, z1, z2, handle.tolerance)?,
                lattice_fallback: false,
            })
        }
        (BcProfile::StripRiemannHilbertTop { theta }, DomainKind::Strip) => {
            let value = lattice::greens_strip_rh_lattice(*theta, z1, z2, 384)?;
            Ok(GreensValue { value, lattice_fallback: true })
        }
        _ => Err(KernelError::UnsupportedProfile),
    }
}

/// Expansion coefficient `mu` of a Schwarz kernel at its boundary point.
///
/// Half-plane/strip normalization: `S = i/(pi w) + i mu / pi + o(1)`, and
/// `mu = (pi / i) lim (S - i/(pi w))`; circle normalization:
/// `S = -x/(pi w) + c + O(w)` and the constant `c` itself is returned.
/// Computed by Richardson extrapolation along the inward normal.
pub fn kernel_mu(handle: &KernelHandle, x: Complex64) -> Result<f64, KernelError> {
    let circle = matches!(handle.domain.kind, DomainKind::Disc | DomainKind::Annulus);
    let nu = inward_normal(&handle.domain, x)?;
    let sample = |eps: f64| -> Result<Complex64, KernelError> {
        let z = x + eps * nu;
        let s = handle.schwarz(x, z)?;
        let w = z - x;
        if circle {
            Ok(s + x / (PI * w))
        } else {
            Ok((PI / I) * (s - I / (PI * w)))
        }
    };
    richardson_limit(sample).map(|c| c.re)
}

pub(crate) fn inward_normal(domain: &DomainSpec, x: Complex64) -> Result<Complex64, KernelError> {
    let comp = domain.boundary_component(x)?;
    Ok(match domain.kind {
        DomainKind::HalfPlane => I,
        DomainKind::Disc => -x / x.norm(),
        DomainKind::Strip => {
            if comp == 0 {
                I
            } else {
                -I
            }
        }
        DomainKind::Annulus => {
            if comp == 0 {
                -x / x.norm()
            } else {
                x / x.norm()
            }
        }
    })
}

/// Richardson extrapolation of `f(eps)` to `eps -> 0`, assuming an expansion
/// `f = c0 + c1 eps + c2 eps^2 + ...`.
pub(crate) fn richardson_limit<F>(mut f: F) -> Result<Complex64, KernelError>
where
    F: FnMut(f64) -> Result<Complex64, KernelError>,
{
    let eps0 = 1e-3;
    let mut vals = Vec::new();
    for k in 0..5 {
        vals.push(f(eps0 / 2f64.powi(k))?);
    }
    // Triangular Richardson table with ratio 2.
    let mut table = vals.clone();
    let n = table.len();
    for order in 1..n {
        let fac = 2f64.powi(order as i32);
        for i in 0..(n - order) {
            table[i] = (fac * table[i + 1] - table[i]) / (fac - 1.0);
        }
    }
    let contraction = (table[0] - vals[n - 1]).norm();
    let raw_spread = (vals[0] - vals[n - 1]).norm();
    if raw_spread > 1e-12 && contraction > raw_spread {
        return Err(KernelError::ExtrapolationDivergence);
    }
    Ok(table[0])
}

/// Strip Riemann-Hilbert kernel value, z- and x-derivatives; `x` real on the
/// bottom boundary, derivatives with respect to boundary length in `x`.
pub fn strip_rh_kernel(theta: f64, x: Complex64, z: Complex64) -> Result<Complex64, KernelError> {
    let d = DomainSpec::strip();
    schwarz_closed_form(&d, theta, x, z)
}

pub fn strip_rh_kernel_dz(
    theta: f64,
    x: Complex64,
    z: Complex64,
) -> Result<Complex64, KernelError> {
    let d = DomainSpec::strip();
    schwarz_closed_form_dz(&d, theta, x, z)
}

/// d/dx of the strip kernel: the kernel depends on w = z - x only, so this
/// is minus the z-derivative.
pub fn strip_rh_kernel_dx(
    theta: f64,
    x: Complex64,
    z: Complex64,
) -> Result<Complex64, KernelError> {
    Ok(-strip_rh_kernel_dz(theta, x, z)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn half_plane_kernel_value() {
        let d = DomainSpec::half_plane();
        let s = schwarz_closed_form(&d, 0.0, c(0.0, 0.0), c(0.0, 1.0)).unwrap();
        assert_relative_eq!(s.re, 1.0 / PI, max_relative = 1e-14);
        assert!(s.im.abs() < 1e-15);
        assert_relative_eq!(s.re, 0.3183098862, max_relative = 1e-9);
    }

    #[test]
    fn disc_kernel_center_value() {
        let d = DomainSpec::disc();
        let s = schwarz_closed_form(&d, 0.0, c(1.0, 0.0), c(0.0, 0.0)).unwrap();
        assert_relative_eq!(s.re, 1.0 / (2.0 * PI), max_relative = 1e-14);
        assert_relative_eq!(s.re, 0.1591549431, max_relative = 1e-9);
    }

    #[test]
    fn strip_kernel_value() {
        let d = DomainSpec::strip();
        let s = schwarz_closed_form(&d, 0.0, c(0.0, 0.0), c(0.0, PI / 2.0)).unwrap();
        assert_relative_eq!(s.re, 1.0 / (PI * 2f64.sqrt()), max_relative = 1e-13);
        assert_relative_eq!(s.re, 0.2250790790, max_relative = 1e-9);
        assert!(s.im.abs() < 1e-15);
    }

    #[test]
    fn singular_evaluation_rejected() {
        let d = DomainSpec::half_plane();
        let err = schwarz_closed_form(&d, 0.0, c(0.0, 0.0), c(0.0, 1e-13));
        assert!(matches!(err, Err(KernelError::SingularEvaluation(_))));
    }

    #[test]
    fn annulus_requires_dedicated_evaluator() {
        let d = DomainSpec::annulus(1.0);
        let err = schwarz_closed_form(&d, 0.0, c(1.0, 0.0), c(0.5, 0.0));
        assert!(matches!(err, Err(KernelError::DomainMismatch(_))));
    }

    #[test]
    fn poisson_half_plane_values() {
        let h = KernelHandle::new(DomainSpec::half_plane(), BcProfile::Dirichlet).unwrap();
        let x = c(0.0, 0.0);
        assert_relative_eq!(h.poisson(x, c(0.0, 1.0)).unwrap(), 1.0 / PI, max_relative = 1e-14);
        assert_relative_eq!(
            h.poisson(x, c(0.0, 2.0)).unwrap(),
            1.0 / (2.0 * PI),
            max_relative = 1e-14
        );
    }

    #[test]
    fn poisson_strip_vanishes_on_real_axis() {
        let h = KernelHandle::new(DomainSpec::strip(), BcProfile::StripNeumannTop).unwrap();
        for &u in &[0.3, -0.7, 2.0, -4.0] {
            let v = h.poisson(c(0.0, 0.0), c(u, 0.0)).unwrap();
            assert!(v.abs() < 1e-14, "poisson on boundary = {v}");
        }
    }

    #[test]
    fn greens_half_plane_value_and_symmetry() {
        let h = KernelHandle::new(DomainSpec::half_plane(), BcProfile::Dirichlet).unwrap();
        let g = h.greens(c(0.0, 1.0), c(0.0, 2.0)).unwrap();
        assert_relative_eq!(g.value, 3f64.ln() / (2.0 * PI), max_relative = 1e-13);
        assert_relative_eq!(g.value, 0.17485, max_relative = 1e-4);
        let mut rng_state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((rng_state >> 11) as f64) / ((1u64 << 53) as f64)
        };
        for _ in 0..100 {
            let z1 = c(next() * 4.0 - 2.0, next() * 2.0 + 0.05);
            let z2 = c(next() * 4.0 - 2.0, next() * 2.0 + 0.05);
            if (z1 - z2).norm() < 1e-6 {
                continue;
            }
            let a = h.greens(z1, z2).unwrap().value;
            let b = h.greens(z2, z1).unwrap().value;
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn greens_coincident_points_rejected() {
        let h = KernelHandle::new(DomainSpec::half_plane(), BcProfile::Dirichlet).unwrap();
        assert!(matches!(
            h.greens(c(0.0, 1.0), c(0.0, 1.0)),
            Err(KernelError::CoincidentPoints)
        ));
    }

    #[test]
    fn strip_mixed_greens_boundary_conditions() {
        // Dirichlet bottom: G -> 0; Neumann top: normal difference -> 0.
        let h = KernelHandle::new(DomainSpec::strip(), BcProfile::StripNeumannTop).unwrap();
        let z2 = c(0.3, 1.1);
        let near_bottom = h.greens(c(-0.5, 1e-7), z2).unwrap().value;
        assert!(near_bottom.abs() < 1e-6);
        let d = 1e-4;
        let a = h.greens(c(0.8, PI - d), z2).unwrap().value;
        let b = h.greens(c(0.8, PI - 2.0 * d), z2).unwrap().value;
        assert!(((a - b) / d).abs() < 1e-3, "normal derivative at Neumann top: {}", (a - b) / d);
    }

    #[test]
    fn mu_strip_rh_equals_theta() {
        for &theta in &[0.0, 0.3, -0.45] {
            let h = KernelHandle::new(
                DomainSpec::strip(),
                BcProfile::StripRiemannHilbertTop { theta },
            )
            .unwrap();
            let mu = kernel_mu(&h, c(0.0, 0.0)).unwrap();
            assert_relative_eq!(mu, theta, epsilon = 1e-8);
        }
    }

    #[test]
    fn cauchy_riemann_residual_closed_forms() {
        // Finite-difference CR residual < 1e-8 at interior points.
        let h = 3e-6;
        let mut state = 42u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(99);
            ((state >> 11) as f64) / ((1u64 << 53) as f64)
        };
        let dom_h = DomainSpec::half_plane();
        let dom_s = DomainSpec::strip();
        for _ in 0..300 {
            let z = c(next() * 4.0 - 2.0, 0.2 + next() * 1.5);
            for (dom, th) in [(&dom_h, 0.0), (&dom_s, 0.25)] {
                if dom.kind == DomainKind::Strip && z.im >= PI - 0.2 {
                    continue;
                }
                let f = |zz: Complex64| schwarz_closed_form(dom, th, c(0.0, 0.0), zz).unwrap();
                let dx = (f(z + c(h, 0.0)) - f(z - c(h, 0.0))) / (2.0 * h);
                let dy = (f(z + c(0.0, h)) - f(z - c(0.0, h))) / (2.0 * h);
                let res = (dx - dy / I).norm();
                assert!(res < 1e-8, "CR residual {res} at {z}");
            }
        }
    }

    #[test]
    fn residue_normalization() {
        let eps = 1e-4;
        let x0 = c(0.0, 0.0);
        let dh = DomainSpec::half_plane();
        let s = schwarz_closed_form(&dh, 0.0, x0, x0 + eps * I).unwrap();
        assert!(((eps * I) * s - I / PI).norm() < 1e-6);
        let ds = DomainSpec::strip();
        let s = schwarz_closed_form(&ds, 0.2, x0, x0 + eps * I).unwrap();
        assert!(((eps * I) * s - I / PI).norm() < 1e-4);
        let x1 = c(1.0, 0.0);
        let dd = DomainSpec::disc();
        let s = schwarz_closed_form(&dd, 0.0, x1, x1 * (1.0 - eps)).unwrap();
        assert!(((-eps * x1) * s - (-x1 / PI)).norm() < 1e-4);
    }
}
