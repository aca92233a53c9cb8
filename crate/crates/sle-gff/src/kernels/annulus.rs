//! Annulus kernels by Fourier-mode matching, with a modular image-series
//! evaluator for thin annuli.
//!
//! For `A_p = { q < |z| < 1 }`, `q = e^{-p}`, and `x` on the outer circle the
//! kernel splits into the disc kernel plus a geometrically convergent
//! correction:
//!
//! Dirichlet-constant inner circle (`Re S = 1/(2 pi)` there):
//!   `S_x(z) = (x+z)/(2 pi (x-z)) + (1/pi) sum c_n [(z/x)^n - (x/z)^n]`,
//!   `c_n = q^{2n}/(1 - q^{2n})`;
//! Neumann inner circle (`Im S = 0` there):
//!   same with `c_n -> -d_n`, `d_n = q^{2n}/(1 + q^{2n})`, and the opposite
//!   sign on the `(x/z)^n` term.
//!
//! For small `p` the nome `q -> 1` kills the mode series; there the kernel is
//! evaluated as an image sum of strip kernels in `w = -i pi log(z/x) / p`
//! with period `Lambda = 2 pi^2 / p`, which converges in one or two terms.

use num_complex::Complex64;
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::KernelError;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Inner-circle condition for the annulus Schwarz kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnnulusInnerBc {
    /// `Re S = 1/(2 pi)` on the inner circle (single-valued flow kernel).
    DirichletConst,
    /// `Im S = 0` on the inner circle.
    Neumann,
}

/// Crossover modulus between the mode series and the image series.
const DUAL_THRESHOLD: f64 = 1.0;

#[derive(Debug, Clone)]
enum Backend {
    /// Mode series with precomputed coefficients.
    Modes { coeffs: Vec<f64> },
    /// Image series: k ranges over [-k_max, k_max], period `lambda` in w.
    Images { lambda: f64, k_max: i32 },
}

#[derive(Debug, Clone)]
pub struct AnnulusKernel {
    pub p: f64,
    pub q: f64,
    pub inner: AnnulusInnerBc,
    backend: Backend,
}

impl AnnulusKernel {
    pub fn new(
        p: f64,
        inner: AnnulusInnerBc,
        tolerance: f64,
        max_truncation: usize,
    ) -> Result<Self, KernelError> {
        if !(p > 0.0) {
            return Err(KernelError::InvalidModulus);
        }
        let q = (-p).exp();
        let backend = if p >= DUAL_THRESHOLD {
            // Tail of the correction series is bounded by q^N / (1 - q).
            let n = (((tolerance * (1.0 - q)).ln() / q.ln()).ceil() as usize).max(4);
            if n > max_truncation {
                return Err(KernelError::TruncationFailure {
                    bound: q.powi(n as i32) / (1.0 - q),
                    tol: tolerance,
                    n_max: max_truncation,
                });
            }
            let coeffs = (1..=n)
                .map(|k| {
                    let q2k = q.powi(2 * k as i32);
                    match inner {
                        AnnulusInnerBc::DirichletConst => q2k / (1.0 - q2k),
                        AnnulusInnerBc::Neumann => q2k / (1.0 + q2k),
                    }
                })
                .collect();
            Backend::Modes { coeffs }
        } else {
            let lambda = 2.0 * PI * PI / p;
            let k_max = ((40.0 / lambda).ceil() as i32).max(1);
            Backend::Images { lambda, k_max }
        };
        Ok(AnnulusKernel { p, q, inner, backend })
    }

    fn check_args(&self, x: Complex64, z: Complex64) -> Result<(), KernelError> {
        if (x.norm() - 1.0).abs() > 1e-9 {
            return Err(KernelError::NotOnBoundary(x));
        }
        let r = z.norm();
        if r >= 1.0 + 1e-7 || r <= self.q * (1.0 - 1e-7) {
            return Err(KernelError::DomainMismatch(format!(
                "|z| = {r} outside annulus ({}, 1)",
                self.q
            )));
        }
        if (z - x).norm() < crate::kernels::SINGULAR_EVAL_TOL {
            return Err(KernelError::SingularEvaluation((z - x).norm()));
        }
        Ok(())
    }

    /// Kernel value `S_x(z)`.
    pub fn schwarz(&self, x: Complex64, z: Complex64) -> Result<Complex64, KernelError> {
        self.check_args(x, z)?;
        Ok(self.eval(x, z, 0))
    }

    /// z-derivative `S_x'(z)`.
    pub fn schwarz_dz(&self, x: Complex64, z: Complex64) -> Result<Complex64, KernelError> {
        self.check_args(x, z)?;
        Ok(self.eval(x, z, 1))
    }

    /// Second z-derivative `S_x''(z)`.
    pub fn schwarz_dzz(&self, x: Complex64, z: Complex64) -> Result<Complex64, KernelError> {
        self.check_args(x, z)?;
        Ok(self.eval(x, z, 2))
    }

    /// Derivative of the kernel in the angle of `x` (counterclockwise):
    /// rotation invariance gives `d_alpha S_x(z) = -i z S_x'(z)`.
    pub fn schwarz_dx(&self, x: Complex64, z: Complex64) -> Result<Complex64, KernelError> {
        Ok(-I * z * self.schwarz_dz(x, z)?)
    }

    /// Second angle derivative: `d^2_alpha S = -z (S' + z S'')`.
    pub fn schwarz_dxx(&self, x: Complex64, z: Complex64) -> Result<Complex64, KernelError> {
        let s1 = self.schwarz_dz(x, z)?;
        let s2 = self.schwarz_dzz(x, z)?;
        Ok(-z * (s1 + z * s2))
    }

    /// Inverted kernel `S^{inv;p}_y(z) = S^p_{q/y}(q/z)` for `y` on the
    /// inner circle (Dirichlet-constant kernel only).
    pub fn schwarz_inverted(&self, y: Complex64, z: Complex64) -> Result<Complex64, KernelError> {
        if (y.norm() - self.q).abs() > 1e-9 {
            return Err(KernelError::NotOnBoundary(y));
        }
        self.schwarz(self.q / y, self.q / z)
    }

    /// Angle derivative of the inverted kernel in `arg y`:
    /// with `x = q/y`, `arg x = -arg y`, so
    /// `d_{arg y} S^{inv}_y(z) = -d_alpha S_x(q/z)`.
    pub fn schwarz_inverted_dy(
        &self,
        y: Complex64,
        z: Complex64,
    ) -> Result<Complex64, KernelError> {
        if (y.norm() - self.q).abs() > 1e-9 {
            return Err(KernelError::NotOnBoundary(y));
        }
        Ok(-self.schwarz_dx(self.q / y, self.q / z)?)
    }

    /// z-derivative of the inverted kernel.
    pub fn schwarz_inverted_dz(
        &self,
        y: Complex64,
        z: Complex64,
    ) -> Result<Complex64, KernelError> {
        let w = self.q / z;
        Ok(self.schwarz_dz(self.q / y, w)? * (-self.q / (z * z)))
    }

    fn eval(&self, x: Complex64, z: Complex64, order: u8) -> Complex64 {
        match &self.backend {
            Backend::Modes { coeffs } => self.eval_modes(coeffs, x, z, order),
            Backend::Images { lambda, k_max } => self.eval_images(*lambda, *k_max, x, z, order),
        }
    }

    fn eval_modes(&self, coeffs: &[f64], x: Complex64, z: Complex64, order: u8) -> Complex64 {
        let sign = match self.inner {
            AnnulusInnerBc::DirichletConst => 1.0,
            AnnulusInnerBc::Neumann => -1.0,
        };
        let zx = z / x;
        let xz = x / z;
        let mut zx_n = Complex64::new(1.0, 0.0);
        let mut xz_n = Complex64::new(1.0, 0.0);
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, &cn) in coeffs.iter().enumerate() {
            let n = (k + 1) as f64;
            zx_n *= zx;
            xz_n *= xz;
            let term = match order {
                0 => zx_n - xz_n,
                1 => (n / z) * (zx_n + xz_n),
                _ => (n * (n - 1.0) * zx_n - n * (n + 1.0) * xz_n) / (z * z),
            };
            acc += sign * cn * term;
        }
        let disc = match order {
            0 => (x + z) / (2.0 * PI * (x - z)),
            1 => x / (PI * (x - z) * (x - z)),
            _ => 2.0 * x / (PI * (x - z) * (x - z) * (x - z)),
        };
        disc + acc / PI
    }

    fn eval_images(
        &self,
        lambda: f64,
        k_max: i32,
        x: Complex64,
        z: Complex64,
        order: u8,
    ) -> Complex64 {
        let p = self.p;
        let zeta = (z / x).ln(); // principal branch
        let w = -I * zeta * (PI / p);
        let dwdzeta = -I * PI / p;
        // T(zeta) and its zeta-derivatives, then convert to z-derivatives.
        let mut t0 = Complex64::new(0.0, 0.0);
        let mut t1 = Complex64::new(0.0, 0.0);
        let mut t2 = Complex64::new(0.0, 0.0);
        for k in -k_max..=k_max {
            let wk = (w + lambda * k as f64) / 2.0;
            match self.inner {
                AnnulusInnerBc::DirichletConst => {
                    let ch = coth_reg(wk, k);
                    t0 += ch;
                    let cs2 = csch2(wk);
                    t1 += -0.5 * cs2 * dwdzeta;
                    // d/dw csch^2(w/2) = -csch^2(w/2) coth(w/2)
                    t2 += 0.5 * cs2 * coth_raw(wk) * dwdzeta * dwdzeta;
                }
                AnnulusInnerBc::Neumann => {
                    let cs = csch(wk);
                    t0 += cs;
                    let ct = coth_raw(wk);
                    t1 += -0.5 * cs * ct * dwdzeta;
                    // d/dw [csch coth] = -csch coth^2 - csch^3, halved twice
                    t2 += 0.25 * (cs * ct * ct + cs * cs * cs) * dwdzeta * dwdzeta;
                }
            }
        }
        let pref = I / (2.0 * p);
        let mut f0 = pref * t0;
        let mut f1 = pref * t1;
        let f2 = pref * t2;
        if self.inner == AnnulusInnerBc::DirichletConst {
            f0 -= zeta / (2.0 * PI * p);
            f1 -= Complex64::new(1.0 / (2.0 * PI * p), 0.0);
        }
        match order {
            0 => f0,
            1 => f1 / z,
            _ => (f2 - f1) / (z * z),
        }
    }
}

fn coth_raw(w: Complex64) -> Complex64 {
    w.cosh() / w.sinh()
}

/// coth with the +-1 plateau subtracted for off-center images, keeping the
/// image sum convergent.
fn coth_reg(w: Complex64, k: i32) -> Complex64 {
    let c = coth_raw(w);
    if k > 0 {
        c - 1.0
    } else if k < 0 {
        c + 1.0
    } else {
        c
    }
}

fn csch(w: Complex64) -> Complex64 {
    Complex64::new(1.0, 0.0) / w.sinh()
}

fn csch2(w: Complex64) -> Complex64 {
    let s = w.sinh();
    Complex64::new(1.0, 0.0) / (s * s)
}

/// Annulus Green's function, Dirichlet on the outer circle and
/// `inner` condition on the inner circle, by mode matching.
pub fn greens_annulus(
    p: f64,
    inner: AnnulusInnerBc,
    z1: Complex64,
    z2: Complex64,
    tolerance: f64,
) -> Result<f64, KernelError> {
    if !(p > 0.0) {
        return Err(KernelError::InvalidModulus);
    }
    if (z1 - z2).norm() < crate::kernels::SINGULAR_EVAL_TOL {
        return Err(KernelError::CoincidentPoints);
    }
    let q = (-p).exp();
    let rho_w = z2.norm();
    let rho_z = z1.norm();
    for r in [rho_w, rho_z] {
        if r >= 1.0 || r <= q {
            return Err(KernelError::DomainMismatch(format!(
                "radius {r} outside annulus ({q}, 1)"
            )));
        }
    }
    // Rotate so the source sits on the positive real axis.
    let rot = z2 / rho_w;
    let z = z1 / rot;
    let phi = z.arg();
    let r = rho_z;

    let gamma = -(1.0 / (2.0 * PI)) * (z1 - z2).norm().ln();

    // Zero mode of h.
    let (a0, b0) = match inner {
        AnnulusInnerBc::DirichletConst => {
            // a0 + b0 ln 1 = 0 ; a0 + b0 ln q = (1/2pi) ln rho_w
            let b0 = rho_w.ln() / (2.0 * PI * q.ln());
            (0.0, b0)
        }
        AnnulusInnerBc::Neumann => (0.0, 0.0),
    };
    let mut h = a0 + b0 * r.ln();

    // Mode n >= 1: data coefficients (cos n phi):
    // outer: -(1/(2 pi n)) rho_w^n ; inner Dirichlet: -(1/(2 pi n)) (q/rho_w)^n
    // inner Neumann (radial derivative): -(1/(2 pi)) q^{n-1} / rho_w^n.
    let ratio = r.max(q / r).max(rho_w).max(q / rho_w).min(0.999_999);
    let n_max =
        (((tolerance * (1.0 - ratio)).ln() / ratio.ln()).ceil() as usize).clamp(8, 20_000);
    for n in 1..=n_max {
        let nf = n as f64;
        let dn_out = -(1.0 / (2.0 * PI * nf)) * rho_w.powi(n as i32);
        let (an, bn) = match inner {
            AnnulusInnerBc::DirichletConst => {
                let dn_in = -(1.0 / (2.0 * PI * nf)) * (q / rho_w).powi(n as i32);
                // an + bn = dn_out ; an q^n + bn q^{-n} = dn_in
                let qn = q.powi(n as i32);
                let det = qn.recip() - qn;
                let an = (dn_out / qn - dn_in) / det;
                let bn = dn_out - an;
                (an, bn)
            }
            AnnulusInnerBc::Neumann => {
                let dn_in = -(1.0 / (2.0 * PI)) * q.powi(n as i32 - 1) / rho_w.powi(n as i32);
                // an + bn = dn_out ; n (an q^{n-1} - bn q^{-n-1}) = dn_in
                let qn1 = q.powi(n as i32 - 1);
                let qm1 = q.powi(-(n as i32) - 1);
                let det = nf * (qn1 + qm1);
                let an = (dn_in + nf * qm1 * dn_out) / det;
                let bn = dn_out - an;
                (an, bn)
            }
        };
        let radial = an * r.powi(n as i32) + bn * r.powi(-(n as i32));
        h += radial * (nf * phi).cos();
        if radial.abs() < tolerance * 1e-3 && n > 8 {
            break;
        }
    }
    Ok(gamma + h)
}

/// Binary sidecar cache for mode-series coefficients, keyed by
/// `(p, profile, N)`.  Layout: magic, tag, p, n, coefficients (LE f64).
pub fn write_coeff_cache(kernel: &AnnulusKernel, path: &Path) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(b"ANNK")?;
    let tag: u8 = match kernel.inner {
        AnnulusInnerBc::DirichletConst => 0,
        AnnulusInnerBc::Neumann => 1,
    };
    f.write_all(&[tag])?;
    f.write_all(&kernel.p.to_le_bytes())?;
    let coeffs: &[f64] = match &kernel.backend {
        Backend::Modes { coeffs } => coeffs,
        Backend::Images { .. } => &[],
    };
    f.write_all(&(coeffs.len() as u64).to_le_bytes())?;
    for c in coeffs {
        f.write_all(&c.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_coeff_cache(path: &Path) -> std::io::Result<Option<AnnulusKernel>> {
    let mut f = std::fs::File::open(path)?;
    let mut magic = [0u8; 4];
    f.read_exact(&mut magic)?;
    if &magic != b"ANNK" {
        return Ok(None);
    }
    let mut tag = [0u8; 1];
    f.read_exact(&mut tag)?;
    let inner = if tag[0] == 0 { AnnulusInnerBc::DirichletConst } else { AnnulusInnerBc::Neumann };
    let mut buf8 = [0u8; 8];
    f.read_exact(&mut buf8)?;
    let p = f64::from_le_bytes(buf8);
    f.read_exact(&mut buf8)?;
    let n = u64::from_le_bytes(buf8) as usize;
    let mut coeffs = Vec::with_capacity(n);
    for _ in 0..n {
        f.read_exact(&mut buf8)?;
        coeffs.push(f64::from_le_bytes(buf8));
    }
    if coeffs.is_empty() {
        return Ok(AnnulusKernel::new(p, inner, 1e-13, 4000).ok());
    }
    Ok(Some(AnnulusKernel { p, q: (-p).exp(), inner, backend: Backend::Modes { coeffs } }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn dirichlet_inner_boundary_value() {
        // Re S = 1/(2 pi) on the inner circle away from x.
        let p = 1.0;
        let k = AnnulusKernel::new(p, AnnulusInnerBc::DirichletConst, 1e-13, 4000).unwrap();
        let q = (-p).exp();
        let x = c(1.0, 0.0);
        for &ang in &[0.4f64, 1.5, 3.0, 4.5, 6.0] {
            let z = q * c(ang.cos(), ang.sin()) * (1.0 + 1e-12);
            let s = k.schwarz(x, z).unwrap();
            assert_relative_eq!(s.re, 1.0 / (2.0 * PI), epsilon = 1e-10);
        }
    }

    #[test]
    fn neumann_inner_boundary_value() {
        // Im S = 0 on the inner circle.
        let p = 0.8; // exercises the image-series backend
        let k = AnnulusKernel::new(p, AnnulusInnerBc::Neumann, 1e-13, 4000).unwrap();
        let q = (-p).exp();
        let x = c(1.0, 0.0);
        for &ang in &[0.7f64, 2.0, 3.3, 5.1] {
            let z = q * c(ang.cos(), ang.sin()) * (1.0 + 1e-12);
            let s = k.schwarz(x, z).unwrap();
            assert!(s.im.abs() < 1e-10, "Im S = {} on inner circle", s.im);
        }
    }

    #[test]
    fn outer_boundary_delta_profile() {
        // Re S = 0 on the outer circle away from x.
        let k = AnnulusKernel::new(1.3, AnnulusInnerBc::DirichletConst, 1e-13, 4000).unwrap();
        let x = c(1.0, 0.0);
        for &ang in &[0.5f64, 1.2, 2.8, 4.0, 5.5] {
            let z = c(ang.cos(), ang.sin()) * (1.0 - 1e-9);
            let s = k.schwarz(x, z).unwrap();
            assert!(s.re.abs() < 1e-7, "Re S = {} on outer circle", s.re);
        }
    }

    #[test]
    fn disc_limit_large_modulus() {
        let k = AnnulusKernel::new(8.0, AnnulusInnerBc::DirichletConst, 1e-15, 4000).unwrap();
        let x = c(1.0, 0.0);
        // The exact correction is (q^2/pi)|z/x - x/z| + O(q^4); points where
        // that bound sits below 1e-8.
        for &(re, im) in &[(0.9, 0.0), (0.95, 0.05), (0.93, -0.04)] {
            let z = c(re, im);
            let disc = (x + z) / (2.0 * PI * (x - z));
            let s = k.schwarz(x, z).unwrap();
            assert!((s - disc).norm() < 1e-8, "disc limit gap {}", (s - disc).norm());
        }
        // At z = 0.5 the exact correction is about 5.4e-8.
        let z = c(0.5, 0.0);
        let disc = (x + z) / (2.0 * PI * (x - z));
        let s = k.schwarz(x, z).unwrap();
        assert!((s - disc).norm() < 1e-7);
    }

    #[test]
    fn mode_and_image_backends_agree() {
        // p slightly above and below the crossover must agree by continuity;
        // check both backends at the same p by constructing them directly.
        let p = 1.0;
        let x = c(0.6f64.cos(), 0.6f64.sin());
        let modes = AnnulusKernel::new(p, AnnulusInnerBc::DirichletConst, 1e-14, 4000).unwrap();
        let mut images = modes.clone();
        images.backend = Backend::Images { lambda: 2.0 * PI * PI / p, k_max: 3 };
        for &(r, ang) in &[(0.5, 1.0), (0.8, 2.5), (0.45, -2.0), (0.95, 0.9)] {
            let z = r * c(f64::cos(ang), f64::sin(ang));
            let a = modes.schwarz(x, z).unwrap();
            let b = images.schwarz(x, z).unwrap();
            assert!((a - b).norm() < 1e-10, "backend mismatch {} at {z}", (a - b).norm());
            let da = modes.schwarz_dz(x, z).unwrap();
            let db = images.schwarz_dz(x, z).unwrap();
            assert!((da - db).norm() < 1e-9, "dz mismatch {}", (da - db).norm());
            let da2 = modes.schwarz_dzz(x, z).unwrap();
            let db2 = images.schwarz_dzz(x, z).unwrap();
            assert!(
                (da2 - db2).norm() < 1e-7 * (1.0 + da2.norm()),
                "dzz mismatch {}",
                (da2 - db2).norm()
            );
        }
        let neum_m = AnnulusKernel::new(p, AnnulusInnerBc::Neumann, 1e-14, 4000).unwrap();
        let mut neum_i = neum_m.clone();
        neum_i.backend = Backend::Images { lambda: 2.0 * PI * PI / p, k_max: 3 };
        let z = 0.62 * c(0.9f64.cos(), 0.9f64.sin());
        assert!((neum_m.schwarz(x, z).unwrap() - neum_i.schwarz(x, z).unwrap()).norm() < 1e-10);
    }

    #[test]
    fn rotation_equivariance() {
        let k = AnnulusKernel::new(1.0, AnnulusInnerBc::DirichletConst, 1e-13, 4000).unwrap();
        let x = c(1.0, 0.0);
        let z = c(0.3, 0.5);
        let alpha = 0.77f64;
        let rot = c(alpha.cos(), alpha.sin());
        let a = k.schwarz(x, z).unwrap();
        let b = k.schwarz(rot * x, rot * z).unwrap();
        assert!((a - b).norm() < 1e-12);
        // Inverted kernel equivariance.
        let q = k.q;
        let y = q * c(0.3f64.cos(), 0.3f64.sin());
        let a = k.schwarz_inverted(y, z).unwrap();
        let b = k.schwarz_inverted(rot * y, rot * z).unwrap();
        assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn inverted_kernel_matches_definition() {
        let p = 1.0;
        let k = AnnulusKernel::new(p, AnnulusInnerBc::DirichletConst, 1e-13, 4000).unwrap();
        let q = k.q;
        let y = q * c(1.0, 0.0);
        let z = c(0.5, 0.1);
        let direct = k.schwarz_inverted(y, z).unwrap();
        let manual = k.schwarz(q / y, q / z).unwrap();
        assert!((direct - manual).norm() < 1e-14);
    }

    #[test]
    fn residue_at_x() {
        // (z - x) S_x(z) -> -x/pi along the inward normal.
        let k = AnnulusKernel::new(1.0, AnnulusInnerBc::DirichletConst, 1e-13, 4000).unwrap();
        let x = c(1.0, 0.0);
        let eps = 1e-4;
        let z = x * (1.0 - eps);
        let s = k.schwarz(x, z).unwrap();
        assert!(((z - x) * s - (-x / PI)).norm() < 1e-4);
    }

    #[test]
    fn zeroth_fourier_mode_of_re_on_outer_circle() {
        // delta_x has mean 1/(2 pi) over the unit circle; integrate Re S on
        // a circle slightly inside.
        let k = AnnulusKernel::new(1.2, AnnulusInnerBc::DirichletConst, 1e-13, 4000).unwrap();
        let x = c(1.0, 0.0);
        let r = 0.995;
        let n = 4096;
        let mut mean = 0.0;
        for j in 0..n {
            let ang = 2.0 * PI * (j as f64 + 0.5) / n as f64;
            mean += k.schwarz(x, r * c(ang.cos(), ang.sin())).unwrap().re;
        }
        mean /= n as f64;
        assert_relative_eq!(mean, 1.0 / (2.0 * PI), epsilon = 1e-6);
    }

    #[test]
    fn greens_annulus_symmetry_and_bc() {
        let p = 1.0;
        let z1 = c(0.6, 0.0);
        let z2 = c(0.0, 0.6);
        for inner in [AnnulusInnerBc::DirichletConst, AnnulusInnerBc::Neumann] {
            let a = greens_annulus(p, inner, z1, z2, 1e-12).unwrap();
            let b = greens_annulus(p, inner, z2, z1, 1e-12).unwrap();
            assert!((a - b).abs() < 1e-10, "greens asymmetry {}", (a - b).abs());
        }
        // Dirichlet outer: G -> 0 near |z| = 1.
        let g = greens_annulus(p, AnnulusInnerBc::DirichletConst, c(0.999, 0.0), z2, 1e-12)
            .unwrap();
        assert!(g.abs() < 1e-3);
        // Dirichlet inner: G -> 0 near |z| = q.
        let q = (-p).exp();
        let g = greens_annulus(
            p,
            AnnulusInnerBc::DirichletConst,
            c(0.0, q * 1.001),
            z2,
            1e-12,
        )
        .unwrap();
        assert!(g.abs() < 1e-3);
        // Neumann inner: radial difference vanishes near |z| = q.
        let d = 1e-4;
        let ga = greens_annulus(p, AnnulusInnerBc::Neumann, c(q + d, 0.0), z2, 1e-12).unwrap();
        let gb =
            greens_annulus(p, AnnulusInnerBc::Neumann, c(q + 2.0 * d, 0.0), z2, 1e-12).unwrap();
        assert!(((ga - gb) / d).abs() < 2e-3, "neumann normal derivative {}", (ga - gb) / d);
    }

    #[test]
    fn coeff_cache_roundtrip() {
        let dir = std::env::temp_dir().join("slegff_cache_test.bin");
        let k = AnnulusKernel::new(1.5, AnnulusInnerBc::Neumann, 1e-13, 4000).unwrap();
        write_coeff_cache(&k, &dir).unwrap();
        let k2 = read_coeff_cache(&dir).unwrap().unwrap();
        let x = c(1.0, 0.0);
        let z = c(0.4, 0.3);
        assert!((k.schwarz(x, z).unwrap() - k2.schwarz(x, z).unwrap()).norm() < 1e-14);
        let _ = std::fs::remove_file(&dir);
    }
}
