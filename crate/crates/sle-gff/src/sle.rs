//! Driving-process models for the SLE variants: drift functionals and
//! Euler-Maruyama path sampling coupled to the Loewner flow of marked
//! points.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;

use crate::constants::lambda4;
use crate::domain::{ccw_arc_length, DomainKind};
use crate::error::{KernelError, SleError};
use crate::kernels::annulus::{AnnulusInnerBc, AnnulusKernel};
use crate::kernels::lattice::Grid;
use crate::loewner::{DrivingPath, Interpolation};

const I: Complex64 = Complex64::new(0.0, 1.0);

pub const FORCE_POINT_TOL: f64 = 1e-8;
pub const DRIFT_BLOWUP: f64 = 1e6;

/// Which end of the strip carries the force point of `SLE_kappa(rho)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StripEnd {
    MinusInfinity,
    PlusInfinity,
}

/// Boundary condition of one top-boundary segment of the strip.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopSegmentBc {
    Dirichlet { level: f64 },
    Neumann,
}

/// SLE variant: the drift functional together with its marked-point data.
#[derive(Debug, Clone, PartialEq)]
pub enum Variant {
    /// Chordal SLE in the half-plane from 0 toward infinity.
    Chordal,
    /// Radial SLE in the disc from 1 toward 0.
    Radial,
    /// Dipolar SLE in the strip.
    Dipolar,
    /// `SLE_kappa(rho_vec)` in the half-plane with force points on the real line.
    ChordalRhoVec { rho: Vec<f64>, x: Vec<f64> },
    /// Strip with a Riemann-Hilbert top: constant drift `2 theta`.
    StripTheta { theta: f64 },
    /// Strip `SLE_kappa(rho)` with the force point at one end.
    StripRho { rho: f64, force_end: StripEnd },
    /// Strip with marked points on the top boundary; `segments[i]` rules
    /// `(marked[i-1], marked[i])` with the first segment left of all marks.
    StripMulti { marked: Vec<f64>, segments: Vec<TopSegmentBc> },
    /// Standard annulus SLE (driftless circle Brownian motion).
    AnnulusStandard { p: f64 },
    /// Annulus with Neumann inner circle and a marked outer point.
    AnnulusNeumannRho { p: f64, rho: f64, x1: Complex64 },
    /// Annulus with Dirichlet inner level and a marked outer point
    /// (`rho = -2` variant).
    AnnulusDirichlet { p: f64, mu_inner: f64, x1: Complex64 },
    /// Annulus with the second marked point on the inner circle; the branch
    /// fixes the initial winding `arg x1 - arg x + 2 pi w`.
    AnnulusInner { p: f64, x1: Complex64, winding_branch: f64 },
}

impl Variant {
    pub fn domain_kind(&self) -> DomainKind {
        match self {
            Variant::Chordal | Variant::ChordalRhoVec { .. } => DomainKind::HalfPlane,
            Variant::Radial => DomainKind::Disc,
            Variant::Dipolar
            | Variant::StripTheta { .. }
            | Variant::StripRho { .. }
            | Variant::StripMulti { .. } => DomainKind::Strip,
            _ => DomainKind::Annulus,
        }
    }

    pub fn modulus(&self) -> Option<f64> {
        match self {
            Variant::AnnulusStandard { p }
            | Variant::AnnulusNeumannRho { p, .. }
            | Variant::AnnulusDirichlet { p, .. }
            | Variant::AnnulusInner { p, .. } => Some(*p),
            _ => None,
        }
    }
}

/// Driving model: quadratic-variation speed and variant.
#[derive(Debug, Clone, PartialEq)]
pub struct DrivingModel {
    pub kappa: f64,
    pub variant: Variant,
}

impl DrivingModel {
    pub fn new(kappa: f64, variant: Variant) -> Self {
        DrivingModel { kappa, variant }
    }
}

/// `sum rho_j / (X - x_j)` for chordal `SLE(rho_vec)`.
pub fn drift_chordal_rho(x: f64, mapped: &[f64], rho: &[f64]) -> Result<f64, SleError> {
    let mut acc = 0.0;
    for (&xj, &rj) in mapped.iter().zip(rho) {
        let d = x - xj;
        if d.abs() < FORCE_POINT_TOL {
            return Err(SleError::CollisionWithForcePoint(d.abs()));
        }
        acc += rj / d;
    }
    Ok(acc)
}

/// Constant strip drift for Riemann-Hilbert parameter `theta`; the model is
/// equivalent to strip `SLE_4(rho)` with `rho = 2 theta - 1` and the force
/// point at minus infinity.
pub fn drift_strip_theta(theta: f64) -> Result<f64, SleError> {
    if !(theta.abs() < 0.5) {
        return Err(SleError::ThetaOutOfRange(theta));
    }
    Ok(2.0 * theta)
}

pub fn strip_theta_equivalent_rho(theta: f64) -> f64 {
    2.0 * theta - 1.0
}

/// Strip `SLE_kappa(rho)` drift, `-+(rho + (6 - kappa)/2)` with the sign set
/// by which end holds the force point.
pub fn drift_strip_rho(rho: f64, kappa: f64, force_end: StripEnd) -> f64 {
    let d = rho + (6.0 - kappa) / 2.0;
    match force_end {
        StripEnd::MinusInfinity => d,
        StripEnd::PlusInfinity => -d,
    }
}

/// Multi-marked strip drift at kappa = 4.
///
/// The drift is the unique constant cancelling the first-order singularity
/// of the martingale generator at the tip, `D = 2 mu_eff`, where `mu_eff` is
/// read off the regular part of `dF/dz` at `x` (equivalently, the expansion
/// coefficient of the effective Schwarz kernel `-dF/dz / (2 i lambda)`).
/// For all-Dirichlet tops this has the closed form
/// `D = [l_0 + sum_i (l_i - l_{i-1}) tau_i/(1 + tau_i)]/lambda`,
/// `tau_i = e^{x - u_i}`; with Neumann segments the regular part is
/// extracted from a lattice solve.
pub fn drift_strip_multi(
    x: f64,
    marked: &[f64],
    segments: &[TopSegmentBc],
) -> Result<f64, SleError> {
    if segments.len() != marked.len() + 1 {
        return Err(SleError::Kernel(KernelError::DomainMismatch(
            "need one more segment than marked points".into(),
        )));
    }
    for w in marked.windows(2) {
        if w[1] - w[0] < FORCE_POINT_TOL {
            return Err(SleError::CollisionWithForcePoint(w[1] - w[0]));
        }
    }
    let lambda = lambda4();
    if segments.iter().all(|s| matches!(s, TopSegmentBc::Neumann)) {
        // Homogeneous Neumann top: dipolar, the drift vanishes.
        return Ok(0.0);
    }
    if segments.iter().all(|s| matches!(s, TopSegmentBc::Dirichlet { .. })) {
        let level = |s: &TopSegmentBc| match s {
            TopSegmentBc::Dirichlet { level } => *level,
            TopSegmentBc::Neumann => unreachable!(),
        };
        let mut r0 = level(&segments[0]) / PI;
        for (i, &ui) in marked.iter().enumerate() {
            let delta = level(&segments[i + 1]) - level(&segments[i]);
            let tau = (x - ui).exp();
            r0 += (delta / PI) * (tau / (1.0 + tau));
        }
        return Ok(PI / lambda * r0);
    }
    // Lattice route: solve M, read Re dF/dz = dM/dy along the inward normal
    // at x and Richardson-extrapolate.  The tip must sit exactly on a grid
    // column: the odd part of the jump profile then cancels in the normal
    // derivative samples.
    let n_y = 129;
    let h = PI / (n_y - 1) as f64;
    let lo_raw = marked.iter().fold(x, |a, &u| a.min(u)) - 2.5 * PI;
    let hi = marked.iter().fold(x, |a, &u| a.max(u)) + 2.5 * PI;
    let lo = x - h * ((x - lo_raw) / h).ceil();
    let nx = ((hi - lo) / h).ceil() as usize + 1;
    let grid = Grid { nx, ny: n_y, hx: h, hy: h, x0: lo, y0: 0.0, periodic_x: false };
    let seg_at = |u: f64| -> TopSegmentBc {
        let mut idx = 0;
        for (i, &ui) in marked.iter().enumerate() {
            if u > ui {
                idx = i + 1;
            }
        }
        segments[idx]
    };
    let end_profile = |seg: TopSegmentBc, bottom_level: f64| -> (f64, f64) {
        match seg {
            TopSegmentBc::Dirichlet { level } => (bottom_level, (level - bottom_level) / PI),
            TopSegmentBc::Neumann => (bottom_level, 0.0),
        }
    };
    let (lb, ls) = end_profile(segments[0], lambda);
    let (rb, rs) = end_profile(segments[segments.len() - 1], -lambda);
    let mut prob = crate::kernels::lattice::LatticeProblem::new(grid);
    let g = prob.grid.clone();
    for i in 0..g.nx {
        let (u, _) = g.point(i, 0);
        let bv = if (u - x).abs() < 0.5 * h {
            0.0
        } else if u < x {
            lambda
        } else {
            -lambda
        };
        prob.set(i, 0, crate::kernels::lattice::LatticeBc::Dirichlet(bv));
        if let TopSegmentBc::Dirichlet { level } = seg_at(u) {
            prob.set(i, g.ny - 1, crate::kernels::lattice::LatticeBc::Dirichlet(level));
        }
    }
    for j in 1..g.ny - 1 {
        let (_, y) = g.point(0, j);
        prob.set(0, j, crate::kernels::lattice::LatticeBc::Dirichlet(lb + ls * y));
        prob.set(g.nx - 1, j, crate::kernels::lattice::LatticeBc::Dirichlet(rb + rs * y));
    }
    let sol = prob.solve(1e-12).map_err(SleError::Kernel)?;
    let dm_dy = |eps: f64| {
        let d = h;
        (sol.interpolate(x, eps + d) - sol.interpolate(x, eps - d)) / (2.0 * d)
    };
    let e0 = 12.0 * h;
    let f1 = dm_dy(e0);
    let f2 = dm_dy(e0 / 2.0);
    let f3 = dm_dy(e0 / 4.0);
    let r1 = 2.0 * f2 - f1;
    let r2 = 2.0 * f3 - f2;
    let r0 = (4.0 * r2 - r1) / 3.0;
    Ok(PI / lambda * r0)
}

/// Annulus drift with Neumann inner circle and marked outer point:
/// `-i pi rho S~_{x1}(X)` (real by the kernel's boundary conditions).
pub fn drift_annulus_neumann_rho(
    x: Complex64,
    x1: Complex64,
    modulus_remaining: f64,
    rho: f64,
) -> Result<f64, SleError> {
    if rho == 0.0 {
        return Ok(0.0);
    }
    let k = AnnulusKernel::new(modulus_remaining, AnnulusInnerBc::Neumann, 1e-13, 4000)
        .map_err(SleError::Kernel)?;
    let s = k.schwarz(x1, x).map_err(SleError::Kernel)?;
    let d = -I * PI * rho * s;
    debug_assert!(d.im.abs() < 1e-8, "drift must be real, Im = {}", d.im);
    Ok(d.re)
}

/// Annulus drift with Dirichlet inner level `mu_inner` (`rho = -2`):
/// `-i pi rho S_{x1}(X) + (2 pi/(p-t)) (mu/(2 lambda) + (l[X,x1] - pi)/(2 pi))`.
pub fn drift_annulus_dirichlet(
    x: Complex64,
    x1: Complex64,
    modulus_remaining: f64,
    mu_inner: f64,
    lambda: f64,
) -> Result<f64, SleError> {
    if modulus_remaining < 1e-6 {
        return Err(SleError::Loewner(crate::error::LoewnerError::ModulusExhausted(
            modulus_remaining,
        )));
    }
    let rho = -2.0;
    let k = AnnulusKernel::new(modulus_remaining, AnnulusInnerBc::DirichletConst, 1e-13, 4000)
        .map_err(SleError::Kernel)?;
    let s = k.schwarz(x1, x).map_err(SleError::Kernel)?;
    let lead = -I * PI * rho * s;
    debug_assert!(lead.im.abs() < 1e-8, "kernel drift must be real, Im = {}", lead.im);
    let arc = ccw_arc_length(x, x1);
    let correction = (2.0 * PI / modulus_remaining)
        * (mu_inner / (2.0 * lambda) + (arc - PI) / (2.0 * PI));
    Ok(lead.re + correction)
}

/// Annulus drift with the marked point on the inner circle:
/// `-2 pi i (S^{inv}_{x1}(X) - 1/(2 pi)) + (arg g(x1) - arg X)/(p - t)`;
/// the argument difference is the continuously tracked branch.
pub fn drift_annulus_inner(
    x: Complex64,
    x1_inner: Complex64,
    modulus_remaining: f64,
    delta_arg: f64,
) -> Result<f64, SleError> {
    if modulus_remaining < 1e-6 {
        return Err(SleError::Loewner(crate::error::LoewnerError::ModulusExhausted(
            modulus_remaining,
        )));
    }
    let k = AnnulusKernel::new(modulus_remaining, AnnulusInnerBc::DirichletConst, 1e-13, 4000)
        .map_err(SleError::Kernel)?;
    let s_inv = k.schwarz_inverted(x1_inner, x).map_err(SleError::Kernel)?;
    let lead = -2.0 * PI * I * (s_inv - 1.0 / (2.0 * PI));
    debug_assert!(lead.im.abs() < 1e-8, "drift must be real, Im = {}", lead.im);
    Ok(lead.re + delta_arg / modulus_remaining)
}

/// A marked boundary point carried by the sampler (boundary-length
/// parameter; circles use the angle and remember the component).
#[derive(Debug, Clone)]
pub struct MarkedParam {
    pub param: f64,
    pub on_inner: bool,
}

/// Incremental Euler-Maruyama sampler: driving length parameter plus the
/// Loewner images of the variant's marked points.
pub struct PathSampler {
    pub model: DrivingModel,
    pub t: f64,
    /// Driving boundary-length parameter (angle on circles), continuous.
    pub s: f64,
    pub marked: Vec<MarkedParam>,
    /// Continuous `arg g(x1) - arg X` for the inner-marked variant.
    pub delta_arg: Option<f64>,
    rng: ChaCha8Rng,
    times: Vec<f64>,
    values: Vec<Complex64>,
}

impl PathSampler {
    pub fn new(model: DrivingModel, seed: u64, stream: u64) -> Result<Self, SleError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let (s0, marked, delta) = initial_config(&model.variant)?;
        let x0 = embed(&model.variant, s0, 0.0);
        Ok(PathSampler {
            model,
            t: 0.0,
            s: s0,
            marked,
            delta_arg: delta,
            rng,
            times: vec![0.0],
            values: vec![x0],
        })
    }

    pub fn x(&self) -> Complex64 {
        embed(&self.model.variant, self.s, self.t)
    }

    pub fn modulus_remaining(&self) -> Option<f64> {
        self.model.variant.modulus().map(|p| p - self.t)
    }

    /// Current mapped marked points (embedded on the boundary at time `t`).
    pub fn mapped_marked(&self) -> Vec<Complex64> {
        self.marked
            .iter()
            .map(|m| embed_marked(&self.model.variant, m, self.t))
            .collect()
    }

    /// Drift of the driving process at the current configuration.
    pub fn drift(&self) -> Result<f64, SleError> {
        let x = self.x();
        let rem = self.modulus_remaining();
        let d = match &self.model.variant {
            Variant::Chordal | Variant::Radial | Variant::Dipolar
            | Variant::AnnulusStandard { .. } => 0.0,
            Variant::ChordalRhoVec { rho, .. } => {
                let mapped: Vec<f64> = self.marked.iter().map(|m| m.param).collect();
                drift_chordal_rho(self.s, &mapped, rho)?
            }
            Variant::StripTheta { theta } => drift_strip_theta(*theta)?,
            Variant::StripRho { rho, force_end } => {
                drift_strip_rho(*rho, self.model.kappa, *force_end)
            }
            Variant::StripMulti { segments, .. } => {
                let marked: Vec<f64> = self.marked.iter().map(|m| m.param).collect();
                drift_strip_multi(self.s, &marked, segments)?
            }
            Variant::AnnulusNeumannRho { rho, .. } => {
                let x1 = embed_marked(&self.model.variant, &self.marked[0], self.t);
                drift_annulus_neumann_rho(x, x1, rem.unwrap(), *rho)?
            }
            Variant::AnnulusDirichlet { mu_inner, .. } => {
                let x1 = embed_marked(&self.model.variant, &self.marked[0], self.t);
                drift_annulus_dirichlet(x, x1, rem.unwrap(), *mu_inner, lambda4())?
            }
            Variant::AnnulusInner { .. } => {
                let x1 = embed_marked(&self.model.variant, &self.marked[0], self.t);
                drift_annulus_inner(x, x1, rem.unwrap(), self.delta_arg.unwrap())?
            }
        };
        if d.abs() > DRIFT_BLOWUP {
            return Err(SleError::DriftBlowup(d.abs()));
        }
        Ok(d)
    }

    /// One Euler-Maruyama step of size `dt`.
    pub fn step(&mut self, dt: f64) -> Result<(), SleError> {
        let d = self.drift()?;
        let xi: f64 = StandardNormal.sample(&mut self.rng);
        let ds = self.model.kappa.sqrt() * xi * dt.sqrt() + d * dt;
        self.advance_marked(dt)?;
        self.s += ds;
        self.t += dt;
        if let Some(da) = self.delta_arg.as_mut() {
            *da -= ds;
        }
        let x = embed(&self.model.variant, self.s, self.t);
        self.times.push(self.t);
        self.values.push(x);
        Ok(())
    }

    fn advance_marked(&mut self, dt: f64) -> Result<(), SleError> {
        if self.marked.is_empty() {
            return Ok(());
        }
        let variant = self.model.variant.clone();
        let t = self.t;
        let s = self.s;
        // Midpoint rule on the boundary-parameter ODEs.
        let vel = |params: &[f64], tt: f64| -> Result<Vec<f64>, SleError> {
            let x = embed(&variant, s, tt);
            let mut out = Vec::with_capacity(params.len());
            match &variant {
                Variant::ChordalRhoVec { .. } => {
                    for &u in params {
                        let d = u - x.re;
                        if d.abs() < FORCE_POINT_TOL {
                            return Err(SleError::CollisionWithForcePoint(d.abs()));
                        }
                        out.push(2.0 / d);
                    }
                }
                Variant::StripMulti { .. } => {
                    for &u in params {
                        out.push(((u - x.re) / 2.0).tanh());
                    }
                }
                Variant::AnnulusNeumannRho { p, .. }
                | Variant::AnnulusDirichlet { p, .. }
                | Variant::AnnulusInner { p, .. } => {
                    let rem = p - tt;
                    let k = AnnulusKernel::new(rem, AnnulusInnerBc::DirichletConst, 1e-12, 4000)
                        .map_err(SleError::Kernel)?;
                    for (mk, &phi) in self.marked.iter().zip(params) {
                        let z = if mk.on_inner {
                            (-rem).exp() * Complex64::new(phi.cos(), phi.sin())
                        } else {
                            Complex64::new(phi.cos(), phi.sin())
                        };
                        if (z - x).norm() < FORCE_POINT_TOL {
                            return Err(SleError::CollisionWithForcePoint((z - x).norm()));
                        }
                        out.push(2.0 * PI * k.schwarz(x, z).map_err(SleError::Kernel)?.im);
                    }
                }
                _ => out.extend(params.iter().map(|_| 0.0)),
            }
            Ok(out)
        };
        let params: Vec<f64> = self.marked.iter().map(|m| m.param).collect();
        let k1 = vel(&params, t)?;
        let mid: Vec<f64> =
            params.iter().zip(&k1).map(|(p, v)| p + 0.5 * dt * v).collect();
        let k2 = vel(&mid, t + 0.5 * dt)?;
        for ((m, v), p0) in self.marked.iter_mut().zip(&k2).zip(&params) {
            m.param = p0 + dt * v;
        }
        if let Some(da) = self.delta_arg.as_mut() {
            // marked[0] is the inner point for AnnulusInner.
            *da += dt * k2[0];
        }
        Ok(())
    }

    /// Finished path so far.
    pub fn path(&self) -> DrivingPath {
        DrivingPath::new(
            self.times.clone(),
            self.values.clone(),
            Interpolation::Linear,
            self.model.variant.domain_kind(),
        )
    }
}

fn initial_config(
    variant: &Variant,
) -> Result<(f64, Vec<MarkedParam>, Option<f64>), SleError> {
    Ok(match variant {
        Variant::Chordal | Variant::Dipolar | Variant::StripTheta { .. }
        | Variant::StripRho { .. } => (0.0, vec![], None),
        Variant::Radial | Variant::AnnulusStandard { .. } => (0.0, vec![], None),
        Variant::ChordalRhoVec { x, rho } => {
            if x.len() != rho.len() {
                return Err(SleError::Kernel(KernelError::DomainMismatch(
                    "rho and x length mismatch".into(),
                )));
            }
            (0.0, x.iter().map(|&u| MarkedParam { param: u, on_inner: false }).collect(), None)
        }
        Variant::StripMulti { marked, .. } => (
            0.0,
            marked.iter().map(|&u| MarkedParam { param: u, on_inner: false }).collect(),
            None,
        ),
        Variant::AnnulusNeumannRho { x1, .. } | Variant::AnnulusDirichlet { x1, .. } => (
            0.0,
            vec![MarkedParam { param: x1.arg(), on_inner: false }],
            None,
        ),
        Variant::AnnulusInner { x1, winding_branch, .. } => {
            let delta0 = x1.arg() + 2.0 * PI * winding_branch;
            (0.0, vec![MarkedParam { param: x1.arg(), on_inner: true }], Some(delta0))
        }
    })
}

fn embed(variant: &Variant, s: f64, _t: f64) -> Complex64 {
    match variant.domain_kind() {
        DomainKind::HalfPlane | DomainKind::Strip => Complex64::new(s, 0.0),
        DomainKind::Disc | DomainKind::Annulus => Complex64::new(s.cos(), s.sin()),
    }
}

fn embed_marked(variant: &Variant, m: &MarkedParam, t: f64) -> Complex64 {
    match variant {
        Variant::ChordalRhoVec { .. } => Complex64::new(m.param, 0.0),
        Variant::StripMulti { .. } => Complex64::new(m.param, PI),
        Variant::AnnulusNeumannRho { .. } | Variant::AnnulusDirichlet { .. } => {
            Complex64::new(m.param.cos(), m.param.sin())
        }
        Variant::AnnulusInner { p, .. } => {
            let r = (-(p - t)).exp();
            r * Complex64::new(m.param.cos(), m.param.sin())
        }
        _ => Complex64::new(m.param, 0.0),
    }
}

/// Sample a full driving path (spec entry point).
pub fn sample_path(
    model: &DrivingModel,
    dt: f64,
    t_end: f64,
    seed: u64,
    stream: u64,
) -> Result<DrivingPath, SleError> {
    if let Some(p) = model.variant.modulus() {
        if t_end >= p {
            return Err(SleError::Loewner(crate::error::LoewnerError::ModulusExhausted(t_end)));
        }
    }
    let mut sampler = PathSampler::new(model.clone(), seed, stream)?;
    let n = (t_end / dt).round() as usize;
    for _ in 0..n {
        sampler.step(dt)?;
    }
    Ok(sampler.path())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn chordal_rho_values() {
        assert_relative_eq!(drift_chordal_rho(0.0, &[1.0], &[2.0]).unwrap(), -2.0);
        assert_relative_eq!(
            drift_chordal_rho(0.0, &[1.0, -1.0], &[1.0, -1.0]).unwrap(),
            -2.0
        );
        assert!(matches!(
            drift_chordal_rho(1.0, &[1.0 + 1e-9], &[1.0]),
            Err(SleError::CollisionWithForcePoint(_))
        ));
    }

    #[test]
    fn chordal_rho_matches_half_plane_kernel() {
        // rho/(X - x1) = -i pi rho S^H_{x1}(X).
        let mut state = 5u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(7);
            ((state >> 11) as f64) / ((1u64 << 53) as f64)
        };
        for _ in 0..100 {
            let x = next() * 4.0 - 2.0;
            let x1 = x + (next() - 0.5).signum() * (0.1 + next());
            let rho = next() * 3.0 - 1.5;
            let d = drift_chordal_rho(x, &[x1], &[rho]).unwrap();
            let s = I / (PI * (c(x, 0.0) - c(x1, 0.0)));
            let d2 = (-I * PI * rho * s).re;
            assert_relative_eq!(d, d2, max_relative = 1e-12);
        }
    }

    #[test]
    fn strip_theta_drift() {
        assert_eq!(drift_strip_theta(0.0).unwrap(), 0.0);
        assert_relative_eq!(drift_strip_theta(0.25).unwrap(), 0.5);
        assert_relative_eq!(strip_theta_equivalent_rho(0.25), -0.5);
        assert!(drift_strip_theta(0.5).is_err());
        // theta -> 1/2: rho -> 0, chordal drift toward +infinity = rho + 1.
        let theta = 0.4999;
        let d = drift_strip_theta(theta).unwrap();
        let rho = strip_theta_equivalent_rho(theta);
        assert_relative_eq!(d, drift_strip_rho(rho, 4.0, StripEnd::MinusInfinity), epsilon = 1e-12);
    }

    #[test]
    fn strip_multi_trivial_cases() {
        // Entire top Neumann: dipolar, zero drift.
        let d = drift_strip_multi(0.3, &[], &[TopSegmentBc::Neumann]).unwrap();
        assert!(d.abs() < 1e-10);
        // Entire top Dirichlet at level 0: also coupled with dipolar.
        let d = drift_strip_multi(-0.2, &[], &[TopSegmentBc::Dirichlet { level: 0.0 }]).unwrap();
        assert!(d.abs() < 1e-10);
        // Constant top at level A: drift A/lambda (theta-family consistency).
        let lambda = lambda4();
        let a = 0.37;
        let d = drift_strip_multi(0.1, &[], &[TopSegmentBc::Dirichlet { level: a }]).unwrap();
        assert_relative_eq!(d, a / lambda, max_relative = 1e-12);
    }

    #[test]
    fn strip_multi_far_jump_matches_single_rho() {
        // Jump of 2 lambda_1 at x1 far to the left: levels (lambda, lambda + 2 lambda_1)
        // approach strip SLE_4(rho), rho = 2 lambda_1 / lambda, D = rho + 1.
        let lambda = lambda4();
        let lambda1 = 0.3 * lambda;
        let rho = 2.0 * lambda1 / lambda;
        let segs = [
            TopSegmentBc::Dirichlet { level: lambda },
            TopSegmentBc::Dirichlet { level: lambda + 2.0 * lambda1 },
        ];
        let d_far = drift_strip_multi(0.0, &[-8.0], &segs).unwrap();
        let d_exact = drift_strip_rho(rho, 4.0, StripEnd::MinusInfinity);
        assert_relative_eq!(d_far, d_exact, max_relative = 0.05);
        let d_mid = drift_strip_multi(0.0, &[-2.0], &segs).unwrap();
        assert!((d_mid - d_exact).abs() > (d_far - d_exact).abs());
    }

    #[test]
    fn strip_multi_lattice_agrees_with_closed_form() {
        // A Dirichlet-only profile solved through the lattice path by
        // inserting a redundant Neumann far segment is compared against the
        // analytic route on a profile where the Neumann part is far away.
        let lambda = lambda4();
        let segs_closed = [
            TopSegmentBc::Dirichlet { level: 0.0 },
            TopSegmentBc::Dirichlet { level: 0.8 * lambda },
        ];
        let d_closed = drift_strip_multi(0.2, &[-1.0], &segs_closed).unwrap();
        let segs_lattice = [
            TopSegmentBc::Neumann,
            TopSegmentBc::Dirichlet { level: 0.0 },
            TopSegmentBc::Dirichlet { level: 0.8 * lambda },
        ];
        // Neumann segment far to the left barely affects the drift at x=0.2.
        let d_lat = drift_strip_multi(0.2, &[-14.0, -1.0], &segs_lattice).unwrap();
        assert_relative_eq!(d_closed, d_lat, max_relative = 0.05);
    }

    #[test]
    fn annulus_neumann_rho_zero_is_driftless() {
        let d = drift_annulus_neumann_rho(c(1.0, 0.0), c(-1.0, 0.0), 1.0, 0.0).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn annulus_neumann_drift_is_real() {
        let mut state = 11u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(13);
            ((state >> 11) as f64) / ((1u64 << 53) as f64)
        };
        for _ in 0..100 {
            let a = next() * 2.0 * PI;
            let b = a + 0.3 + next() * (2.0 * PI - 0.6);
            let x = c(a.cos(), a.sin());
            let x1 = c(b.cos(), b.sin());
            let p = 0.5 + next() * 2.0;
            let rho = next() * 4.0 - 2.0;
            // drift_annulus_neumann_rho asserts realness internally
            let k = AnnulusKernel::new(p, AnnulusInnerBc::Neumann, 1e-13, 4000).unwrap();
            let s = k.schwarz(x1, x).unwrap();
            let d = -I * PI * rho * s;
            assert!(d.im.abs() < 1e-10, "Im drift = {}", d.im);
        }
    }

    #[test]
    fn annulus_dirichlet_bracket_terms() {
        // mu = 0, antipodal x1: the arc-length bracket vanishes.
        let p = 1.0;
        let x = c(1.0, 0.0);
        let x1 = c(-1.0, 0.0);
        let d = drift_annulus_dirichlet(x, x1, p, 0.0, lambda4()).unwrap();
        let k = AnnulusKernel::new(p, AnnulusInnerBc::DirichletConst, 1e-13, 4000).unwrap();
        let lead = (2.0 * PI * I * k.schwarz(x1, x).unwrap()).re;
        assert_relative_eq!(d, lead, epsilon = 1e-12);
        // mu = lambda: bracket contributes (2 pi / p) (1/2 + (l - pi)/(2 pi)).
        let lam = lambda4();
        let d2 = drift_annulus_dirichlet(x, x1, p, lam, lam).unwrap();
        assert_relative_eq!(d2 - d, (2.0 * PI / p) * 0.5, epsilon = 1e-12);
    }

    #[test]
    fn annulus_inner_zero_branch_term() {
        let p = 2.0f64;
        let q = (-p).exp();
        let x = c(1.0, 0.0);
        let x1 = q * c(1.0, 0.0); // arg difference 0
        let d = drift_annulus_inner(x, x1, p, 0.0).unwrap();
        let k = AnnulusKernel::new(p, AnnulusInnerBc::DirichletConst, 1e-13, 4000).unwrap();
        let lead = (-2.0 * PI * I * (k.schwarz_inverted(x1, x).unwrap() - 1.0 / (2.0 * PI))).re;
        assert_relative_eq!(d, lead, epsilon = 1e-12);
    }

    #[test]
    fn annulus_inner_drift_is_real() {
        let mut state = 17u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(19);
            ((state >> 11) as f64) / ((1u64 << 53) as f64)
        };
        for _ in 0..100 {
            let p = 0.4 + next() * 2.0;
            let q = (-p).exp();
            let a = next() * 2.0 * PI;
            let b = next() * 2.0 * PI;
            let x = c(a.cos(), a.sin());
            let y = q * c(b.cos(), b.sin());
            let k = AnnulusKernel::new(p, AnnulusInnerBc::DirichletConst, 1e-13, 4000).unwrap();
            let v = -2.0 * PI * I * (k.schwarz_inverted(y, x).unwrap() - 1.0 / (2.0 * PI));
            assert!(v.im.abs() < 1e-10, "Im part {}", v.im);
        }
    }

    #[test]
    fn drift_linearity_in_jump_data() {
        // Multi-jump drift is the lambda_j/lambda weighted sum of
        // single-jump drifts (all-Dirichlet closed form).
        let lambda = lambda4();
        let l1 = 0.4 * lambda;
        let l2 = -0.7 * lambda;
        let base = 0.0;
        let segs = [
            TopSegmentBc::Dirichlet { level: base },
            TopSegmentBc::Dirichlet { level: base + 2.0 * l1 },
            TopSegmentBc::Dirichlet { level: base + 2.0 * l1 + 2.0 * l2 },
        ];
        let d12 = drift_strip_multi(0.0, &[-1.0, 1.5], &segs).unwrap();
        let s1 = [
            TopSegmentBc::Dirichlet { level: base },
            TopSegmentBc::Dirichlet { level: base + 2.0 * l1 },
        ];
        let s2 = [
            TopSegmentBc::Dirichlet { level: base },
            TopSegmentBc::Dirichlet { level: base + 2.0 * l2 },
        ];
        let d1 = drift_strip_multi(0.0, &[-1.0], &s1).unwrap();
        let d2 = drift_strip_multi(0.0, &[1.5], &s2).unwrap();
        // Subtract the common zero-jump background (here zero).
        assert_relative_eq!(d12, d1 + d2, epsilon = 1e-10);
    }

    #[test]
    fn sampler_variance_rate_chordal() {
        let model = DrivingModel::new(4.0, Variant::Chordal);
        let n = 4000;
        let t_end = 1.0;
        let dt = 1e-3;
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        for k in 0..n {
            let path = sample_path(&model, dt, t_end, 42, k as u64).unwrap();
            let xt = path.values.last().unwrap().re;
            acc += xt;
            acc2 += xt * xt;
        }
        let mean = acc / n as f64;
        let var = acc2 / n as f64 - mean * mean;
        assert!((var / t_end - 4.0).abs() < 0.3, "Var(X_T)/T = {}", var / t_end);
    }

    #[test]
    fn sampler_annulus_stays_on_circle() {
        let model = DrivingModel::new(4.0, Variant::AnnulusStandard { p: 1.0 });
        let path = sample_path(&model, 1e-3, 0.5, 7, 0).unwrap();
        for v in &path.values {
            assert!((v.norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn sampler_strip_theta_mean_slope() {
        let model = DrivingModel::new(4.0, Variant::StripTheta { theta: 0.25 });
        let n = 2000;
        let t_end = 2.0;
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        for k in 0..n {
            let path = sample_path(&model, 2e-3, t_end, 9, k as u64).unwrap();
            let slope = path.values.last().unwrap().re / t_end;
            acc += slope;
            acc2 += slope * slope;
        }
        let mean = acc / n as f64;
        let sd = (acc2 / n as f64 - mean * mean).sqrt();
        let se = sd / (n as f64).sqrt();
        assert!(
            (mean - 0.5).abs() <= 3.0 * se,
            "mean slope {mean}, target 0.5, se {se}"
        );
    }

    #[test]
    fn sampler_reproducible_by_seed() {
        let model = DrivingModel::new(4.0, Variant::Chordal);
        let a = sample_path(&model, 1e-3, 0.2, 123, 5).unwrap();
        let b = sample_path(&model, 1e-3, 0.2, 123, 5).unwrap();
        assert_eq!(a.values.len(), b.values.len());
        for (x, y) in a.values.iter().zip(&b.values) {
            assert_eq!(x, y);
        }
        let c_ = sample_path(&model, 1e-3, 0.2, 124, 5).unwrap();
        assert!(a.values.iter().zip(&c_.values).any(|(x, y)| x != y));
    }
}
