//! Field models: the mean `M` as the imaginary part of a branch-tracked
//! analytic representation `F` plus finite-variation corrections, and the
//! matching covariance (Green's function) for every boundary profile.
//!
//! Means are anchored rotation/translation covariantly: `M(z; x) = M_1(z
//! xbar)` on circles, `M(z; x) = M_0(z - x)` on lines, which pins the
//! additive constants so that `dF/dx = 2 i lambda S` holds with no residual
//! constant.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::constants::{alpha_kappa, lambda_kappa};
use crate::domain::DomainKind;
use crate::error::{FieldError, KernelError};
use crate::kernels::annulus::{greens_annulus, AnnulusInnerBc, AnnulusKernel};
use crate::kernels::{greens_eval, BcProfile, KernelHandle};
use crate::loewner::TrackedPoint;
use crate::sle::TopSegmentBc;
use crate::DomainSpec;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Field variant; annulus moduli are the initial `p`, positions of marked
/// points travel in the [`ChainConfig`].
#[derive(Debug, Clone, PartialEq)]
pub enum FieldVariant {
    Chordal,
    Radial,
    Dipolar,
    StripRh { theta: f64 },
    StripMulti { segments: Vec<TopSegmentBc> },
    AnnulusNeumann { p: f64 },
    /// Extra outer jump `-2 lambda_1` at the marked point.
    AnnulusNeumannRho { p: f64, lambda1: f64 },
    AnnulusDirichlet { p: f64, mu_inner: f64 },
    AnnulusInner { p: f64 },
}

impl FieldVariant {
    pub fn domain_kind(&self) -> DomainKind {
        match self {
            FieldVariant::Chordal => DomainKind::HalfPlane,
            FieldVariant::Radial => DomainKind::Disc,
            FieldVariant::Dipolar | FieldVariant::StripRh { .. } | FieldVariant::StripMulti { .. } => {
                DomainKind::Strip
            }
            _ => DomainKind::Annulus,
        }
    }

    pub fn modulus(&self) -> Option<f64> {
        match self {
            FieldVariant::AnnulusNeumann { p }
            | FieldVariant::AnnulusNeumannRho { p, .. }
            | FieldVariant::AnnulusDirichlet { p, .. }
            | FieldVariant::AnnulusInner { p } => Some(*p),
            _ => None,
        }
    }
}

/// Mean + covariance model; `kappa != 4` is supported for the chordal field
/// (winding term) and the Dirichlet-annulus family (mean rescale), which is
/// exactly where domain-determined corrections exist.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldModel {
    pub kappa: f64,
    pub variant: FieldVariant,
}

impl FieldModel {
    pub fn new4(variant: FieldVariant) -> Self {
        FieldModel { kappa: 4.0, variant }
    }

    pub fn lambda(&self) -> f64 {
        lambda_kappa(self.kappa)
    }

    /// Rescale a kappa = 4 Dirichlet-annulus model to another kappa:
    /// `M_kappa = sqrt(4/kappa) M_4 - alpha_kappa arg z`; the covariance is
    /// unchanged (still the Dirichlet Green's function).
    pub fn mean_kappa_rescale(&self, kappa: f64) -> Result<FieldModel, FieldError> {
        match self.variant {
            FieldVariant::AnnulusDirichlet { .. } | FieldVariant::AnnulusInner { .. } => {
                if self.kappa != 4.0 {
                    return Err(FieldError::Kernel(KernelError::UnsupportedProfile));
                }
                Ok(FieldModel { kappa, variant: self.variant.clone() })
            }
            _ => Err(FieldError::Kernel(KernelError::UnsupportedProfile)),
        }
    }

    /// Declared monodromy of the mean per counterclockwise loop around the
    /// inner boundary component (0 for single-valued means).
    pub fn declared_monodromy(&self) -> f64 {
        let l4 = lambda_kappa(4.0);
        match self.variant {
            FieldVariant::Radial | FieldVariant::AnnulusNeumann { .. } => -2.0 * l4,
            FieldVariant::AnnulusNeumannRho { lambda1, .. } => -2.0 * l4 - 2.0 * lambda1,
            FieldVariant::AnnulusInner { .. } => {
                if self.kappa == 4.0 {
                    -2.0 * l4
                } else {
                    (self.kappa - 6.0) * lambda_kappa(self.kappa)
                }
            }
            FieldVariant::AnnulusDirichlet { .. } => {
                if self.kappa == 4.0 {
                    0.0
                } else {
                    // Only the -alpha_kappa arg z term winds.
                    -2.0 * PI * alpha_kappa(self.kappa)
                }
            }
            _ => 0.0,
        }
    }
}

/// Current chain configuration: driving value and mapped marked points,
/// with their continuous boundary-length parameters.
#[derive(Debug, Clone)]
pub struct ChainConfig {
    pub t: f64,
    pub x: Complex64,
    pub x_param: f64,
    pub marked: Vec<Complex64>,
    pub marked_params: Vec<f64>,
}

impl ChainConfig {
    pub fn initial(x: Complex64, marked: &[Complex64], kind: DomainKind) -> Self {
        let param = |w: Complex64| match kind {
            DomainKind::Disc | DomainKind::Annulus => w.arg(),
            _ => w.re,
        };
        ChainConfig {
            t: 0.0,
            x,
            x_param: param(x),
            marked: marked.to_vec(),
            marked_params: marked.iter().map(|&m| param(m)).collect(),
        }
    }

    pub fn modulus_remaining(&self, model: &FieldModel) -> Option<f64> {
        self.remaining(model.variant.modulus())
    }

    fn remaining(&self, p: Option<f64>) -> Option<f64> {
        p.map(|p| p - self.t)
    }
}

/// Image data of one evaluation point under the chain.
#[derive(Debug, Clone, Copy)]
pub struct ChainPoint {
    pub g: Complex64,
    pub log_dg: Complex64,
    pub arg_g: f64,
}

impl ChainPoint {
    pub fn initial(z: Complex64) -> Self {
        ChainPoint { g: z, log_dg: Complex64::new(0.0, 0.0), arg_g: z.arg() }
    }
}

impl From<&TrackedPoint> for ChainPoint {
    fn from(p: &TrackedPoint) -> Self {
        ChainPoint { g: p.g, log_dg: p.log_dg, arg_g: p.arg_g }
    }
}

/// Branch record: evaluations pick the branch minimizing the jump from the
/// previous value at the same point.
#[derive(Debug, Clone, Default)]
pub struct BranchState {
    last: Option<f64>,
}

impl BranchState {
    pub fn new() -> Self {
        BranchState { last: None }
    }

    /// Snap `principal` to the branch lattice `principal + k1 p1 + k2 p2`
    /// closest to the previous value.
    pub fn snap(&mut self, principal: f64, periods: &[f64]) -> Result<f64, FieldError> {
        let val = match self.last {
            None => principal,
            Some(prev) => {
                let mut best = principal;
                let mut best_d = (principal - prev).abs();
                let p1 = periods.first().copied().unwrap_or(0.0);
                let p2 = periods.get(1).copied().unwrap_or(0.0);
                for k1 in -3i32..=3 {
                    for k2 in -3i32..=3 {
                        if p2 == 0.0 && k2 != 0 {
                            continue;
                        }
                        let cand = principal + k1 as f64 * p1 + k2 as f64 * p2;
                        let d = (cand - prev).abs();
                        if d < best_d {
                            best_d = d;
                            best = cand;
                        }
                    }
                }
                let scale = periods.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
                if scale > 0.0 && best_d > 0.45 * scale {
                    return Err(FieldError::BranchAmbiguity(best_d));
                }
                best
            }
        };
        self.last = Some(val);
        Ok(val)
    }
}

// ---------------------------------------------------------------------------
// Anchored analytic representations.
// ---------------------------------------------------------------------------

/// Single-jump annulus mean with Neumann inner circle, anchored at x = 1:
/// boundary data -lambda_jump on the outer circle with a -2 lambda_jump jump
/// at 1, zero Neumann inside; `F_N(w)` with `M = Im F_N(z xbar)`.
#[derive(Debug, Clone)]
pub struct NeumannJumpF {
    pub p: f64,
    pub q: f64,
    pub lambda_jump: f64,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl NeumannJumpF {
    pub fn new(p: f64, lambda_jump: f64, tol: f64) -> Self {
        let q = (-p).exp();
        let n = (((tol * (1.0 - q)).ln() / q.ln()).ceil() as usize).clamp(8, 6000);
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        for k in 1..=n {
            let q2k = q.powi(2 * k as i32);
            a.push(1.0 / (1.0 + q2k));
            b.push(q2k / (1.0 + q2k));
        }
        NeumannJumpF { p, q, lambda_jump, a, b }
    }

    /// `F_N(w)`; `w` must avoid the branch point at 0 and the jump at 1.
    pub fn value(&self, w: Complex64) -> Complex64 {
        let l = self.lambda_jump;
        let mut acc = Complex64::new(0.0, 0.0);
        let mut wn = Complex64::new(1.0, 0.0);
        let mut wm = Complex64::new(1.0, 0.0);
        for (k, (&an, &bn)) in self.a.iter().zip(&self.b).enumerate() {
            let n = (k + 1) as f64;
            wn *= w;
            wm /= w;
            acc += (an * wn - bn * wm) / n;
        }
        -(l / PI) * w.ln() - (2.0 * l / PI) * acc
    }

    pub fn d_dw(&self, w: Complex64) -> Complex64 {
        let l = self.lambda_jump;
        let mut acc = Complex64::new(0.0, 0.0);
        let mut wn = Complex64::new(1.0, 0.0); // w^{n-1}
        let mut wm = 1.0 / w; // w^{-n-1} starts at w^{-2}
        for (&an, &bn) in self.a.iter().zip(&self.b) {
            wm /= w;
            acc += an * wn + bn * wm;
            wn *= w;
        }
        -(l / PI) / w - (2.0 * l / PI) * acc
    }

    pub fn d2_dw2(&self, w: Complex64) -> Complex64 {
        let l = self.lambda_jump;
        let mut acc = Complex64::new(0.0, 0.0);
        let mut wn = 1.0 / w; // (n-1) w^{n-2} term base
        let mut wm = 1.0 / (w * w); // w^{-n-2} base
        for (k, (&an, &bn)) in self.a.iter().zip(&self.b).enumerate() {
            let n = (k + 1) as f64;
            wm /= w;
            acc += an * (n - 1.0) * wn - bn * (n + 1.0) * wm;
            wn *= w;
        }
        (l / PI) / (w * w) - (2.0 * l / PI) * acc
    }
}

/// Base multivalued mean of the inner-marked variant: jumps `-2 lambda` at
/// angle 0 on both circles, monodromy `-2 lambda`; `F\hat(z)`.
#[derive(Debug, Clone)]
pub struct BothCirclesJumpF {
    pub p: f64,
    pub q: f64,
    lambda: f64,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl BothCirclesJumpF {
    pub fn new(p: f64, tol: f64) -> Self {
        let lambda = lambda_kappa(4.0);
        let q = (-p).exp();
        let n = (((tol * (1.0 - q)).ln() / q.ln()).ceil() as usize).clamp(8, 6000);
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        for k in 1..=n {
            let qn = q.powi(k as i32);
            let qmn = 1.0 / qn;
            let det = qmn - qn;
            a.push((qmn - 1.0) / det);
            b.push((1.0 - qn) / det);
        }
        BothCirclesJumpF { p, q, lambda, a, b }
    }

    pub fn value(&self, z: Complex64) -> Complex64 {
        let l = self.lambda;
        let mut acc = Complex64::new(0.0, 0.0);
        let mut zn = Complex64::new(1.0, 0.0);
        let mut zm = Complex64::new(1.0, 0.0);
        for (k, (&an, &bn)) in self.a.iter().zip(&self.b).enumerate() {
            let n = (k + 1) as f64;
            zn *= z;
            zm /= z;
            acc += (an * zn - bn * zm) / n;
        }
        -(l / PI) * z.ln() - (2.0 * l / PI) * acc
    }
}

fn dipolar_mean(lambda: f64, w: Complex64) -> f64 {
    (2.0 * lambda / PI) * (w / 4.0).tanh().arg() - lambda
}

/// Strip Riemann-Hilbert mean by quadrature of the explicit kernel:
/// `F(z) = i lambda - 2 i lambda Int_{z0}^{z} S~(w - x) dw`, anchored far to
/// the left at height pi/2 where `M -> +lambda`.
fn strip_rh_mean(theta: f64, lambda: f64, x: f64, z: Complex64) -> Result<f64, FieldError> {
    let kernel = |w: Complex64| -> Complex64 {
        I / (2.0 * PI) * (theta * w).exp() / (w / 2.0).sinh()
    };
    let z0 = Complex64::new(x - 36.0, PI / 2.0);
    let mid = Complex64::new(z.re, PI / 2.0);
    let mut f = I * lambda;
    for (a, b) in [(z0, mid), (mid, z)] {
        if (b - a).norm() < 1e-15 {
            continue;
        }
        f += -2.0 * I * lambda * gauss_legendre_path(a, b, 448, |w| kernel(w - x));
    }
    Ok(f.im)
}

fn gauss_legendre_path(
    a: Complex64,
    b: Complex64,
    n: usize,
    f: impl Fn(Complex64) -> Complex64,
) -> Complex64 {
    // Composite 8-point Gauss-Legendre over n/8 panels.
    const XS: [f64; 4] = [0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363];
    const WS: [f64; 4] = [0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763];
    let panels = (n / 8).max(1);
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..panels {
        let t0 = k as f64 / panels as f64;
        let t1 = (k + 1) as f64 / panels as f64;
        let c = (t0 + t1) / 2.0;
        let h = (t1 - t0) / 2.0;
        for j in 0..4 {
            for s in [-1.0, 1.0] {
                let t = c + s * h * XS[j];
                let w = a + (b - a) * t;
                acc += WS[j] * h * f(w);
            }
        }
    }
    acc * (b - a)
}

/// Two-arc + inner-level annulus mean (the Dirichlet variant), as a mode
/// series; single-valued.
#[derive(Debug, Clone)]
pub struct TwoArcDirichletMean {
    pub p: f64,
    pub q: f64,
    pub lambda: f64,
    pub mu_inner: f64,
}

impl TwoArcDirichletMean {
    pub fn new(p: f64, mu_inner: f64) -> Self {
        TwoArcDirichletMean { p, q: (-p).exp(), lambda: lambda_kappa(4.0), mu_inner }
    }

    /// M at z for jump points `a = arg x` (level drops to -lambda ccw of a)
    /// and `b = arg x1` (back up to +lambda).
    pub fn eval(&self, a: f64, b: f64, z: Complex64) -> f64 {
        let lam = self.lambda;
        let mut arc = b - a;
        while arc <= 0.0 {
            arc += 2.0 * PI;
        }
        while arc > 2.0 * PI {
            arc -= 2.0 * PI;
        }
        let alpha0 = lam * (1.0 - arc / PI);
        let b0 = (alpha0 - self.mu_inner) / self.p;
        let r = z.norm();
        let theta = z.arg();
        let mut m = alpha0 + b0 * r.ln();
        let q = self.q;
        let n_max = (((1e-13f64 * (1.0 - r.max(q / r))).ln() / r.max(q / r).ln()).ceil()
            as usize)
            .clamp(16, 40_000);
        for n in 1..=n_max {
            let nf = n as f64;
            // c_n = (lam/(i pi n)) (e^{-i n (a+arc)} - e^{-i n a})
            let e1 = Complex64::new(0.0, -nf * (a + arc)).exp();
            let e0 = Complex64::new(0.0, -nf * a).exp();
            let cn = lam / (nf * PI) * ((e1 - e0) / I);
            let q2n = q.powi(2 * n as i32);
            let an = 1.0 / (1.0 - q2n);
            let bn = -q2n / (1.0 - q2n);
            let zn = Complex64::new(0.0, nf * theta).exp() * r.powi(n as i32);
            let zmn = Complex64::new(0.0, -nf * theta).exp() * r.powi(-(n as i32));
            let term = 2.0 * (cn * an * zn + cn.conj() * bn * zmn).re;
            m += term;
            if term.abs() < 1e-14 && n > 24 {
                break;
            }
        }
        m
    }
}

// ---------------------------------------------------------------------------
// Spec operations.
// ---------------------------------------------------------------------------

/// Mean of the field at the chain point, `Im F(g; X, marked) + Im E_t`.
pub fn mean_eval(
    model: &FieldModel,
    cfg: &ChainConfig,
    pt: &ChainPoint,
    branch: &mut BranchState,
) -> Result<f64, FieldError> {
    let kappa = model.kappa;
    let l4 = lambda_kappa(4.0);
    let lam = model.lambda();
    let g = pt.g;
    match &model.variant {
        FieldVariant::Chordal => {
            let m = (2.0 * lam / PI) * (g - cfg.x).arg() - lam;
            let e = (4.0 - kappa) * lam / (2.0 * PI) * pt.log_dg.im;
            Ok(m + e)
        }
        FieldVariant::Radial => {
            require_kappa4(kappa)?;
            let w = g * cfg.x.conj();
            let m = (l4 / PI) * (2.0 * (Complex64::new(1.0, 0.0) - w).arg() - w.arg());
            branch.snap(m, &[2.0 * l4])
        }
        FieldVariant::Dipolar => {
            require_kappa4(kappa)?;
            Ok(dipolar_mean(l4, g - cfg.x))
        }
        FieldVariant::StripRh { theta } => {
            require_kappa4(kappa)?;
            strip_rh_mean(*theta, l4, cfg.x.re, g)
        }
        FieldVariant::StripMulti { segments } => {
            require_kappa4(kappa)?;
            strip_multi_mean(segments, cfg, g)
        }
        FieldVariant::AnnulusNeumann { p } => {
            require_kappa4(kappa)?;
            let rem = p - cfg.t;
            let fnn = NeumannJumpF::new(rem, l4, 1e-12);
            let m = fnn.value(g * cfg.x.conj()).im;
            branch.snap(m, &[2.0 * l4])
        }
        FieldVariant::AnnulusNeumannRho { p, lambda1 } => {
            require_kappa4(kappa)?;
            let rem = p - cfg.t;
            let f0 = NeumannJumpF::new(rem, l4, 1e-12);
            let f1 = NeumannJumpF::new(rem, *lambda1, 1e-12);
            let m = f0.value(g * cfg.x.conj()).im + f1.value(g * cfg.marked[0].conj()).im;
            branch.snap(m, &[2.0 * l4, 2.0 * lambda1])
        }
        FieldVariant::AnnulusDirichlet { p, mu_inner } => {
            let rem = p - cfg.t;
            let mean = TwoArcDirichletMean::new(rem, *mu_inner);
            let m4 = mean.eval(cfg.x_param, cfg.marked_params[0], g);
            if kappa == 4.0 {
                Ok(m4)
            } else {
                let e = alpha_kappa(kappa) * (pt.log_dg.im - pt.arg_g);
                branch.snap((4.0f64 / kappa).sqrt() * m4 + e, &[model.declared_monodromy().abs()])
            }
        }
        FieldVariant::AnnulusInner { p } => {
            let rem = p - cfg.t;
            let m4 = annulus_inner_mean(rem, cfg, g)?;
            if kappa == 4.0 {
                branch.snap(m4, &[2.0 * l4])
            } else {
                let e = alpha_kappa(kappa) * (pt.log_dg.im - pt.arg_g);
                branch.snap(
                    (4.0f64 / kappa).sqrt() * m4 + e,
                    &[2.0 * l4 * (4.0f64 / kappa).sqrt(), 2.0 * PI * alpha_kappa(kappa).abs()],
                )
            }
        }
    }
}

fn require_kappa4(kappa: f64) -> Result<(), FieldError> {
    if kappa != 4.0 {
        // Non-Dirichlet profiles admit no domain-determined correction.
        return Err(FieldError::Kernel(KernelError::UnsupportedProfile));
    }
    Ok(())
}

fn strip_multi_mean(
    segments: &[TopSegmentBc],
    cfg: &ChainConfig,
    z: Complex64,
) -> Result<f64, FieldError> {
    let lam = lambda_kappa(4.0);
    let x = cfg.x.re;
    let marked: Vec<f64> = cfg.marked.iter().map(|m| m.re).collect();
    if segments.iter().all(|s| matches!(s, TopSegmentBc::Dirichlet { .. })) {
        // Closed form: bottom field + top steps.
        let level = |s: &TopSegmentBc| match s {
            TopSegmentBc::Dirichlet { level } => *level,
            _ => unreachable!(),
        };
        let w = z - x;
        let mut m = (2.0 * lam / PI) * (w.exp() - 1.0).ln().im - (lam / PI) * z.im - lam;
        m += level(&segments[0]) * z.im / PI;
        for (i, &ui) in marked.iter().enumerate() {
            let delta = level(&segments[i + 1]) - level(&segments[i]);
            m += (delta / PI) * ((z - ui).exp() + 1.0).ln().im;
        }
        Ok(m)
    } else if segments.len() == 1 {
        Ok(dipolar_mean(lam, z - x))
    } else {
        // Lattice fallback mirrors the drift solver's grid.
        Err(FieldError::Kernel(KernelError::UnsupportedProfile))
    }
}

/// Mean of the inner-marked annulus variant (kappa = 4 part), with
/// continuous angle parameters from the config.
fn annulus_inner_mean(rem: f64, cfg: &ChainConfig, z: Complex64) -> Result<f64, FieldError> {
    let l4 = lambda_kappa(4.0);
    let fhat = BothCirclesJumpF::new(rem, 1e-12);
    let a = cfg.x_param;
    let a1 = cfg.marked_params[0];
    let kernel = AnnulusKernel::new(rem, AnnulusInnerBc::DirichletConst, 1e-12, 6000)
        .map_err(FieldError::Kernel)?;
    let q = kernel.q;
    let mover_outer = gauss_legendre_path(
        Complex64::new(0.0, 0.0),
        Complex64::new(a, 0.0),
        64,
        |th| kernel.schwarz(Complex64::new(th.re.cos(), th.re.sin()), z).unwrap_or_default(),
    );
    let mover_inner = gauss_legendre_path(
        Complex64::new(0.0, 0.0),
        Complex64::new(a1, 0.0),
        64,
        |th| {
            kernel
                .schwarz_inverted(q * Complex64::new(th.re.cos(), th.re.sin()), z)
                .unwrap_or_default()
        },
    );
    let dt_minus_p = -rem;
    let logzx = (z / cfg.x).ln();
    let f = fhat.value(z)
        + 2.0 * l4 * I * mover_outer
        + 2.0 * l4 * I * mover_inner
        - 2.0 * l4 * I * logzx * a / (2.0 * PI * dt_minus_p)
        - 2.0 * l4 * I * (dt_minus_p - logzx) * a1 / (2.0 * PI * dt_minus_p);
    Ok(f.im)
}

/// The finite-variation winding correction `Im E_t` for the active variant.
///
/// Chordal: `(4-kappa) lambda_kappa/(2 pi) arg g'`; Dirichlet annuli at
/// kappa != 4: `alpha_kappa (arg g' - arg g)`; kappa = 4 gives 0.
pub fn winding_correction(
    model: &FieldModel,
    _cfg: &ChainConfig,
    pt: &ChainPoint,
) -> Result<f64, FieldError> {
    if pt.log_dg.re < -27.0 {
        return Err(FieldError::DerivativeUnderflow(pt.log_dg.re.exp()));
    }
    let kappa = model.kappa;
    if kappa == 4.0 {
        return Ok(0.0);
    }
    match model.variant {
        FieldVariant::Chordal => {
            Ok((4.0 - kappa) * lambda_kappa(kappa) / (2.0 * PI) * pt.log_dg.im)
        }
        FieldVariant::AnnulusDirichlet { .. } | FieldVariant::AnnulusInner { .. } => {
            Ok(alpha_kappa(kappa) * (pt.log_dg.im - pt.arg_g))
        }
        _ => Err(FieldError::Kernel(KernelError::UnsupportedProfile)),
    }
}

/// Accumulator for the strip Riemann-Hilbert `E_t` at kappa != 4: a path
/// functional `(4 - kappa) lambda_kappa Int_0^t Im(i dS~/dx (g_s(z); X_s)) ds`
/// that the paper shows is history dependent (not a domain functional).
#[derive(Debug, Clone, Default)]
pub struct StripRhWindingAccumulator {
    pub value: f64,
}

impl StripRhWindingAccumulator {
    pub fn accumulate(&mut self, theta: f64, kappa: f64, x: f64, g: Complex64, dt: f64) {
        let ds_dx = -strip_rh_kernel_dw(theta, g - x);
        self.value += (4.0 - kappa) * lambda_kappa(kappa) * (I * ds_dx).im * dt;
    }
}

fn strip_rh_kernel_dw(theta: f64, w: Complex64) -> Complex64 {
    let h = (w / 2.0).sinh();
    let c = (w / 2.0).cosh();
    I / (2.0 * PI) * (theta * w).exp() * (theta / h - c / (2.0 * h * h))
}

/// `dF/dx` (boundary-length derivative in the tip) at a mapped point.
pub fn f_derivative_x(
    model: &FieldModel,
    cfg: &ChainConfig,
    z: Complex64,
) -> Result<Complex64, FieldError> {
    let lam = model.lambda();
    let l4 = lambda_kappa(4.0);
    match &model.variant {
        FieldVariant::Chordal => Ok(-(2.0 * lam / PI) / (z - cfg.x)),
        FieldVariant::Radial => {
            let s = (cfg.x + z) / (2.0 * PI * (cfg.x - z));
            Ok(2.0 * I * l4 * s)
        }
        FieldVariant::Dipolar => {
            let s = I / (2.0 * PI) / ((z - cfg.x) / 2.0).sinh();
            Ok(2.0 * I * l4 * s)
        }
        FieldVariant::StripRh { theta } => {
            let w = z - cfg.x;
            let s = I / (2.0 * PI) * (theta * w).exp() / (w / 2.0).sinh();
            Ok(2.0 * I * l4 * s)
        }
        FieldVariant::AnnulusNeumann { p } | FieldVariant::AnnulusNeumannRho { p, .. } => {
            let rem = p - cfg.t;
            let k = AnnulusKernel::new(rem, AnnulusInnerBc::Neumann, 1e-13, 6000)
                .map_err(FieldError::Kernel)?;
            Ok(2.0 * I * l4 * k.schwarz(cfg.x, z).map_err(FieldError::Kernel)?)
        }
        FieldVariant::AnnulusDirichlet { p, mu_inner } => {
            let rem = p - cfg.t;
            let k = AnnulusKernel::new(rem, AnnulusInnerBc::DirichletConst, 1e-13, 6000)
                .map_err(FieldError::Kernel)?;
            let s = k.schwarz(cfg.x, z).map_err(FieldError::Kernel)?;
            let arc = crate::domain::ccw_arc_length(cfg.x, cfg.marked[0]);
            let dtp = -rem;
            let r1 = -I * (mu_inner / (2.0 * l4)) / dtp + I * (PI - arc) / (2.0 * PI * dtp)
                - (z / cfg.x).ln() / (2.0 * PI * dtp);
            Ok(2.0 * l4 * I * (s + r1))
        }
        FieldVariant::AnnulusInner { p } => {
            let rem = p - cfg.t;
            let k = AnnulusKernel::new(rem, AnnulusInnerBc::DirichletConst, 1e-13, 6000)
                .map_err(FieldError::Kernel)?;
            let s = k.schwarz(cfg.x, z).map_err(FieldError::Kernel)?;
            let dtp = -rem;
            let r1 = -(z / cfg.x).ln() / (2.0 * PI * dtp)
                + I * (cfg.x_param - cfg.marked_params[0]) / (2.0 * PI * dtp);
            Ok(2.0 * l4 * I * (s + r1))
        }
        FieldVariant::StripMulti { .. } => {
            Err(FieldError::Kernel(KernelError::UnsupportedProfile))
        }
    }
}

/// Angle derivative of F in the second marked point (annulus variants).
pub fn f_derivative_x1(
    model: &FieldModel,
    cfg: &ChainConfig,
    z: Complex64,
) -> Result<Complex64, FieldError> {
    let l4 = lambda_kappa(4.0);
    match &model.variant {
        FieldVariant::AnnulusNeumannRho { p, lambda1 } => {
            let rem = p - cfg.t;
            let k = AnnulusKernel::new(rem, AnnulusInnerBc::Neumann, 1e-13, 6000)
                .map_err(FieldError::Kernel)?;
            Ok(2.0 * I * lambda1 * k.schwarz(cfg.marked[0], z).map_err(FieldError::Kernel)?)
        }
        FieldVariant::AnnulusDirichlet { p, .. } => {
            let rem = p - cfg.t;
            let k = AnnulusKernel::new(rem, AnnulusInnerBc::DirichletConst, 1e-13, 6000)
                .map_err(FieldError::Kernel)?;
            let s1 = k.schwarz(cfg.marked[0], z).map_err(FieldError::Kernel)?;
            let dtp = -rem;
            let r2 = (z / cfg.x).ln() / (2.0 * PI * dtp);
            Ok(2.0 * l4 * I * (-s1 + r2))
        }
        FieldVariant::AnnulusInner { p } => {
            let rem = p - cfg.t;
            let k = AnnulusKernel::new(rem, AnnulusInnerBc::DirichletConst, 1e-13, 6000)
                .map_err(FieldError::Kernel)?;
            let sinv = k.schwarz_inverted(cfg.marked[0], z).map_err(FieldError::Kernel)?;
            let dtp = -rem;
            let r2 = -(1.0 / (2.0 * PI)) * (1.0 - (z / cfg.x).ln() / dtp);
            Ok(2.0 * l4 * I * (sinv + r2))
        }
        _ => Err(FieldError::Kernel(KernelError::UnsupportedProfile)),
    }
}

/// Covariance: the boundary-condition-matched Green's function pulled back
/// through the chain, `C_t(z1, z2) = G_{profile}(g(z1), g(z2))` on the
/// reference domain at the current modulus.
pub fn covariance_eval(
    model: &FieldModel,
    cfg: &ChainConfig,
    g1: Complex64,
    g2: Complex64,
) -> Result<f64, FieldError> {
    match &model.variant {
        FieldVariant::Chordal => {
            let h = KernelHandle::new(DomainSpec::half_plane(), BcProfile::Dirichlet)
                .map_err(FieldError::Kernel)?;
            Ok(greens_eval(&h, g1, g2).map_err(FieldError::Kernel)?.value)
        }
        FieldVariant::Radial => {
            let h = KernelHandle::new(DomainSpec::disc(), BcProfile::Dirichlet)
                .map_err(FieldError::Kernel)?;
            Ok(greens_eval(&h, g1, g2).map_err(FieldError::Kernel)?.value)
        }
        FieldVariant::Dipolar => {
            let h = KernelHandle::new(DomainSpec::strip(), BcProfile::StripNeumannTop)
                .map_err(FieldError::Kernel)?;
            Ok(greens_eval(&h, g1, g2).map_err(FieldError::Kernel)?.value)
        }
        FieldVariant::StripRh { theta } => {
            let h = KernelHandle::new(
                DomainSpec::strip(),
                BcProfile::StripRiemannHilbertTop { theta: *theta },
            )
            .map_err(FieldError::Kernel)?;
            Ok(greens_eval(&h, g1, g2).map_err(FieldError::Kernel)?.value)
        }
        FieldVariant::StripMulti { .. } => {
            Err(FieldError::Kernel(KernelError::UnsupportedProfile))
        }
        FieldVariant::AnnulusNeumann { p } | FieldVariant::AnnulusNeumannRho { p, .. } => {
            let rem = p - cfg.t;
            Ok(greens_annulus(rem, AnnulusInnerBc::Neumann, g1, g2, 1e-12)
                .map_err(FieldError::Kernel)?)
        }
        FieldVariant::AnnulusDirichlet { p, .. } | FieldVariant::AnnulusInner { p } => {
            let rem = p - cfg.t;
            Ok(greens_annulus(rem, AnnulusInnerBc::DirichletConst, g1, g2, 1e-12)
                .map_err(FieldError::Kernel)?)
        }
    }
}
