//! Theorem-checking harness: drift-identity residuals, Hadamard
//! finite-difference checks against slit-map and lattice oracles, Monte
//! Carlo martingale tests of the coupling conditions, the commutation
//! functional, and capacity checks.

use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

use crate::constants::lambda_kappa;
use crate::domain::{DomainKind, DomainSpec};
use crate::error::VerifyError;
use crate::fields::{
    covariance_eval, f_derivative_x, f_derivative_x1, mean_eval, BranchState, ChainConfig,
    ChainPoint, FieldModel, FieldVariant,
};
use crate::kernels::annulus::{AnnulusInnerBc, AnnulusKernel};
use crate::kernels::lattice::{Grid, LatticeBc, LatticeProblem};
use crate::loewner::{
    local_capacity, rk4_tracked, trace_from_driving, DrivingPath, Flow, Interpolation,
    LoewnerState, TrackedPoint,
};
use crate::sle::{DrivingModel, PathSampler, Variant};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Monte Carlo report; `pass` holds at `|z| <= 3`.
#[derive(Debug, Clone, Serialize)]
pub struct McReport {
    pub check: String,
    pub params: String,
    pub estimate: f64,
    pub target: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub z_score: f64,
    pub pass: bool,
}

impl McReport {
    pub fn new(check: &str, params: &str, estimate: f64, target: f64, se: f64, n: usize) -> Self {
        let z = (estimate - target) / se;
        McReport {
            check: check.to_string(),
            params: params.to_string(),
            estimate,
            target,
            std_error: se,
            n_paths: n,
            z_score: z,
            pass: z.abs() <= 3.0,
        }
    }
}

// ---------------------------------------------------------------------------
// Drift residuals.
// ---------------------------------------------------------------------------

/// Imaginary part of the martingale generator applied to `F` at `z`:
/// `Im{ (kappa/2) d2F/dx2 + V_x(z) dF/dz + D dF/dx
///      + sum_j (angular velocity of x_j) dF/dx_j + dF/dt }`.
///
/// Marked-point derivatives are analytic (series or closed form); the
/// annulus time derivative is a centered difference in the modulus.
pub fn drift_residual(
    field: &FieldModel,
    cfg: &ChainConfig,
    drift: f64,
    z: Complex64,
) -> Result<f64, VerifyError> {
    let kappa = field.kappa;
    let x = cfg.x;
    match &field.variant {
        FieldVariant::Chordal => {
            let lam = lambda_kappa(kappa);
            let w = z - x;
            let dx = -(2.0 * lam / PI) / w;
            let d2x = -(2.0 * lam / PI) / (w * w);
            let dz = (2.0 * lam / PI) / w;
            let v = 2.0 / w;
            Ok(((kappa / 2.0) * d2x + v * dz + drift * dx).im)
        }
        FieldVariant::Radial => {
            let l4 = lambda_kappa(4.0);
            let w = z * x.conj();
            let one = Complex64::new(1.0, 0.0);
            let fp = (l4 / PI) * (-2.0 / (one - w) - 1.0 / w);
            let fpp = (l4 / PI) * (-2.0 / ((one - w) * (one - w)) + 1.0 / (w * w));
            let dx = -I * w * fp;
            let d2x = -w * w * fpp - w * fp;
            let dz = fp * x.conj();
            let v = -z * (z + x) / (z - x);
            Ok(((kappa / 2.0) * d2x + v * dz + drift * dx).im)
        }
        FieldVariant::StripRh { theta } => {
            let l4 = lambda_kappa(4.0);
            let w = z - x;
            let s = I / (2.0 * PI) * (theta * w).exp() / (w / 2.0).sinh();
            let sh = (w / 2.0).sinh();
            let ch = (w / 2.0).cosh();
            let sp = I / (2.0 * PI) * (theta * w).exp() * (theta / sh - ch / (2.0 * sh * sh));
            let dx = 2.0 * I * l4 * s;
            let d2x = -2.0 * I * l4 * sp;
            let dz = -dx;
            let v = ch / sh;
            Ok(((kappa / 2.0) * d2x + v * dz + drift * dx).im)
        }
        FieldVariant::AnnulusNeumann { .. } | FieldVariant::AnnulusNeumannRho { .. } => {
            annulus_neumann_residual(field, cfg, drift, z)
        }
        FieldVariant::AnnulusDirichlet { .. } | FieldVariant::AnnulusInner { .. } => {
            annulus_dirichlet_residual(field, cfg, drift, z)
        }
        _ => Err(VerifyError::Field(crate::error::FieldError::Kernel(
            crate::error::KernelError::UnsupportedProfile,
        ))),
    }
}

fn annulus_time_derivative_im(
    field: &FieldModel,
    cfg: &ChainConfig,
    z: Complex64,
) -> Result<f64, VerifyError> {
    let delta = 1e-5;
    let mut cfg_p = cfg.clone();
    cfg_p.t = cfg.t + delta;
    let mut cfg_m = cfg.clone();
    cfg_m.t = cfg.t - delta;
    let pt = ChainPoint::initial(z);
    let mp = mean_eval(field, &cfg_p, &pt, &mut BranchState::new())?;
    let mm = mean_eval(field, &cfg_m, &pt, &mut BranchState::new())?;
    Ok((mp - mm) / (2.0 * delta))
}

fn annulus_neumann_residual(
    field: &FieldModel,
    cfg: &ChainConfig,
    drift: f64,
    z: Complex64,
) -> Result<f64, VerifyError> {
    let kappa = field.kappa;
    let l4 = lambda_kappa(4.0);
    let (p, lambda1) = match field.variant {
        FieldVariant::AnnulusNeumann { p } => (p, None),
        FieldVariant::AnnulusNeumannRho { p, lambda1 } => (p, Some(lambda1)),
        _ => unreachable!(),
    };
    let rem = p - cfg.t;
    let x = cfg.x;
    let fj = crate::fields::NeumannJumpF::new(rem, l4, 1e-13);
    let w = z * x.conj();
    let dx = -I * w * fj.d_dw(w);
    let d2x = -w * w * fj.d2_dw2(w) - w * fj.d_dw(w);
    let mut dz = fj.d_dw(w) * x.conj();
    let mut marked_term = Complex64::new(0.0, 0.0);
    let kflow = AnnulusKernel::new(rem, AnnulusInnerBc::DirichletConst, 1e-13, 6000)
        .map_err(VerifyError::Kernel)?;
    if let Some(l1) = lambda1 {
        let x1 = cfg.marked[0];
        let f1 = crate::fields::NeumannJumpF::new(rem, l1, 1e-13);
        let w1 = z * x1.conj();
        dz += f1.d_dw(w1) * x1.conj();
        let dx1 = -I * w1 * f1.d_dw(w1);
        let vel = 2.0 * PI * kflow.schwarz(x, x1).map_err(VerifyError::Kernel)?.im;
        marked_term = vel * dx1;
    }
    let v = 2.0 * PI * z * kflow.schwarz(x, z).map_err(VerifyError::Kernel)?;
    let dt_im = annulus_time_derivative_im(field, cfg, z)?;
    Ok(((kappa / 2.0) * d2x + v * dz + drift * dx + marked_term).im + dt_im)
}

fn annulus_dirichlet_residual(
    field: &FieldModel,
    cfg: &ChainConfig,
    drift: f64,
    z: Complex64,
) -> Result<f64, VerifyError> {
    let kappa = field.kappa;
    let l4 = lambda_kappa(4.0);
    let p = field.variant.modulus().unwrap();
    let rem = p - cfg.t;
    let x = cfg.x;
    let x1 = cfg.marked[0];
    let k = AnnulusKernel::new(rem, AnnulusInnerBc::DirichletConst, 1e-13, 6000)
        .map_err(VerifyError::Kernel)?;
    let dx = f_derivative_x(field, cfg, z)?;
    let dx1 = f_derivative_x1(field, cfg, z)?;
    // d2F/dx2 = 2 lambda i (d_alpha S_x(z) + d_alpha R1); d_alpha R1 =
    // i/(pi (t - p)) for both Dirichlet-family variants.
    let ds_dx = k.schwarz_dx(x, z).map_err(VerifyError::Kernel)?;
    let d2x = 2.0 * l4 * I * (ds_dx + I / (PI * -rem));
    // Rotation invariance: i z dF/dz + dF/dx + dF/dx1 = 0.
    let dz = I * (dx + dx1) / z;
    let v = 2.0 * PI * z * k.schwarz(x, z).map_err(VerifyError::Kernel)?;
    let vel = 2.0 * PI * k.schwarz(x, x1).map_err(VerifyError::Kernel)?.im;
    let dt_im = annulus_time_derivative_im(field, cfg, z)?;
    Ok(((kappa / 2.0) * d2x + v * dz + drift * dx + vel * dx1).im + dt_im)
}

/// Boundedness-vs-divergence protocol: evaluate `res(eps)` along an inward
/// ray at the tip and classify.  Returns (bounded, log-log slope).
pub fn boundedness_protocol(
    mut res: impl FnMut(f64) -> Result<f64, VerifyError>,
    epsilons: &[f64],
) -> Result<(bool, f64), VerifyError> {
    let vals: Vec<f64> = epsilons
        .iter()
        .map(|&e| res(e).map(f64::abs))
        .collect::<Result<_, _>>()?;
    let max = vals.iter().cloned().fold(0.0f64, f64::max);
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let bounded = max < 1e-6 || max / min.max(1e-300) < 2.0;
    let n = vals.len() as f64;
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&e, &v) in epsilons.iter().zip(&vals) {
        let lx = e.ln();
        let ly = v.max(1e-300).ln();
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    Ok((bounded, slope))
}

// ---------------------------------------------------------------------------
// Hadamard checks.
// ---------------------------------------------------------------------------

/// Half-plane Hadamard check with the explicit slit-map oracle:
/// `fd = (G(g_t z1, g_t z2) - G(z1, z2))/t` against `-2 pi P(x,z1) P(x,z2)`.
pub fn hadamard_fd_half_plane(x: f64, z1: Complex64, z2: Complex64, t_small: f64) -> (f64, f64) {
    let g = |z: Complex64| -> Complex64 {
        let u = z - x;
        let r = (u * u + 4.0 * t_small).sqrt();
        x + if r.im < 0.0 { -r } else { r }
    };
    let fd = if (z1 - z2).norm() < 1e-12 {
        // Coincident points: the log singularities cancel in the
        // difference, G_t(z,z) - G_0(z,z) = -(1/2pi)[ln|g'| - ln(Im g/Im z)].
        let dg = (z1 - x) / (g(z1) - x);
        (-(1.0 / (2.0 * PI)) * (dg.norm().ln() - (g(z1).im / z1.im).ln())) / t_small
    } else {
        let green = |a: Complex64, b: Complex64| -> f64 {
            -(1.0 / (2.0 * PI)) * ((a - b) / (a - b.conj())).norm().ln()
        };
        (green(g(z1), g(z2)) - green(z1, z2)) / t_small
    };
    let pk = |z: Complex64| (I / (PI * (z - x))).re;
    let reference = -2.0 * PI * pk(z1) * pk(z2);
    (fd, reference)
}

/// Mixed-BC strip Hadamard check against the lattice Green oracle: Dirichlet
/// bottom, reflecting top, slit of capacity `t_small` at `x = 0`.  Returns
/// `(fd, reference)` per (z1, z2) pair.
pub fn hadamard_fd_strip_lattice(
    pairs: &[(Complex64, Complex64)],
    t_small: f64,
    ny: usize,
) -> Result<Vec<(f64, f64)>, VerifyError> {
    let h = PI / (ny - 1) as f64;
    let span = 2.4 * PI;
    let nx = (2.0 * span / h).ceil() as usize | 1;
    let grid = Grid { nx, ny, hx: h, hy: h, x0: -span, y0: 0.0, periodic_x: false };
    let build = |slit_height: f64| -> LatticeProblem {
        let mut prob = LatticeProblem::new(grid.clone());
        let g = prob.grid.clone();
        for i in 0..g.nx {
            prob.set(i, 0, LatticeBc::Dirichlet(0.0));
        }
        for j in 1..g.ny - 1 {
            prob.set(0, j, LatticeBc::Dirichlet(0.0));
            prob.set(g.nx - 1, j, LatticeBc::Dirichlet(0.0));
        }
        if slit_height > 0.0 {
            let ic = ((0.0 - g.x0) / g.hx).round() as usize;
            let jmax = ((slit_height / g.hy) - 0.5).round().max(1.0) as usize;
            for j in 1..=jmax.min(g.ny - 2) {
                prob.set(ic, j, LatticeBc::Dirichlet(0.0));
            }
        }
        prob
    };
    let site = |z: Complex64| -> (usize, usize) {
        (((z.re - grid.x0) / grid.hx).round() as usize, (z.im / grid.hy).round() as usize)
    };
    let slit = 2.0 * t_small.sqrt();
    let prob0 = build(0.0);
    let prob1 = build(slit);
    let mut out = Vec::with_capacity(pairs.len());
    for &(z1, z2) in pairs {
        let src = site(z2);
        let pr = site(z1);
        let g0 = crate::kernels::lattice::greens_lattice_oracle(&prob0, src, &[pr])
            .map_err(VerifyError::Kernel)?[0];
        let g1 = crate::kernels::lattice::greens_lattice_oracle(&prob1, src, &[pr])
            .map_err(VerifyError::Kernel)?[0];
        let fd = (g1 - g0) / t_small;
        let ptil = |z: Complex64| (I / (2.0 * PI) / (z / 2.0).sinh()).re;
        let reference = -2.0 * PI * ptil(z1) * ptil(z2);
        out.push((fd, reference));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Monte Carlo martingale and quadratic-variation checks.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct StoppingRule {
    /// Stop when any probe image comes within this distance of the driving.
    pub rho_stop: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct McOptions {
    pub dt: f64,
    /// Interior points advance once per this many driving steps.
    pub sub_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions { dt: 1e-4, sub_steps: 5, n_paths: 10_000, seed: 7 }
    }
}

struct PathOutcome {
    means: Vec<f64>,
    cov_pairs: Vec<f64>,
    stopped_at_zero: bool,
}

fn chain_config_of(sampler: &PathSampler) -> ChainConfig {
    ChainConfig {
        t: sampler.t,
        x: sampler.x(),
        x_param: sampler.s,
        marked: sampler.mapped_marked(),
        marked_params: sampler.marked.iter().map(|m| m.param).collect(),
    }
}

fn needs_branch_tracking(field: &FieldModel) -> bool {
    matches!(
        field.variant,
        FieldVariant::Radial
            | FieldVariant::AnnulusNeumann { .. }
            | FieldVariant::AnnulusNeumannRho { .. }
            | FieldVariant::AnnulusInner { .. }
    ) || field.kappa != 4.0
}

fn flow_of(variant: &Variant) -> Flow {
    match variant.modulus() {
        Some(p) => Flow::Annulus { p },
        None => match variant.domain_kind() {
            DomainKind::HalfPlane => Flow::HalfPlane,
            DomainKind::Disc => Flow::Disc,
            DomainKind::Strip => Flow::Strip,
            DomainKind::Annulus => unreachable!(),
        },
    }
}

fn run_coupled_path(
    field: &FieldModel,
    model: &DrivingModel,
    probes: &[Complex64],
    stop: StoppingRule,
    opts: &McOptions,
    stream: u64,
) -> Result<PathOutcome, VerifyError> {
    let mut sampler = PathSampler::new(model.clone(), opts.seed, stream)?;
    let flow = flow_of(&model.variant);
    let mut pts: Vec<TrackedPoint> = probes
        .iter()
        .enumerate()
        .map(|(id, &z)| TrackedPoint {
            id,
            start: z,
            g: z,
            log_dg: Complex64::new(0.0, 0.0),
            arg_g: z.arg(),
            swallowed: false,
        })
        .collect();
    let mut branches: Vec<BranchState> = probes.iter().map(|_| BranchState::new()).collect();
    let track = needs_branch_tracking(field);
    let n_steps = (stop.t_end / opts.dt).round() as usize;
    let mut k = 0usize;
    let mut stopped_at_zero = false;
    while k < n_steps {
        let t0 = sampler.t;
        let sub = opts.sub_steps.min(n_steps - k);
        let mut xs: Vec<(f64, Complex64)> = Vec::with_capacity(sub + 1);
        xs.push((t0, sampler.x()));
        for _ in 0..sub {
            sampler.step(opts.dt).map_err(VerifyError::Sle)?;
            xs.push((sampler.t, sampler.x()));
        }
        k += sub;
        let x_at = |t: f64| -> Complex64 {
            if t <= xs[0].0 {
                return xs[0].1;
            }
            let last = xs.len() - 1;
            if t >= xs[last].0 {
                return xs[last].1;
            }
            let idx = ((t - xs[0].0) / opts.dt).floor() as usize;
            let idx = idx.min(last - 1);
            let (ta, xa) = xs[idx];
            let (tb, xb) = xs[idx + 1];
            let w = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
            xa * (1.0 - w) + xb * w
        };
        let h_macro = sampler.t - t0;
        for pt in pts.iter_mut() {
            if pt.swallowed {
                continue;
            }
            let mut s = 0.0;
            while s < h_macro - 1e-15 {
                let d = (pt.g - x_at(t0 + s)).norm();
                if d < crate::loewner::SWALLOW_RADIUS {
                    pt.swallowed = true;
                    break;
                }
                let h = (0.5 * d * d).min(h_macro - s).max(1e-12);
                match rk4_tracked(&flow, &x_at, t0 + s, h, pt) {
                    Ok(()) => s += h,
                    Err(_) => {
                        pt.swallowed = true;
                        break;
                    }
                }
            }
        }
        if track {
            let cfg = chain_config_of(&sampler);
            for (pt, br) in pts.iter().zip(branches.iter_mut()) {
                if !pt.swallowed {
                    let _ = mean_eval(field, &cfg, &ChainPoint::from(pt), br);
                }
            }
        }
        let x_now = sampler.x();
        let mut stop_now = false;
        for pt in &pts {
            if pt.swallowed || (pt.g - x_now).norm() < stop.rho_stop {
                stop_now = true;
            }
        }
        if stop_now {
            if k <= opts.sub_steps {
                stopped_at_zero = true;
            }
            break;
        }
    }
    let cfg = chain_config_of(&sampler);
    let mut means = Vec::with_capacity(probes.len());
    for (pt, br) in pts.iter().zip(branches.iter_mut()) {
        means.push(mean_eval(field, &cfg, &ChainPoint::from(pt), br)?);
    }
    let mut cov_pairs = Vec::new();
    for i in 0..probes.len() {
        for j in (i + 1)..probes.len() {
            cov_pairs.push(covariance_eval(field, &cfg, pts[i].g, pts[j].g)?);
        }
    }
    Ok(PathOutcome { means, cov_pairs, stopped_at_zero })
}

/// Monte Carlo verification of the mean and covariance coupling conditions:
/// z-scores for `E[M_tau(z)] - M_0(z)` at every probe and for
/// `E[M_tau M_tau + C_tau] - (M_0 M_0 + C_0)` at every distinct pair.
pub fn martingale_mc(
    field: &FieldModel,
    model: &DrivingModel,
    probes: &[Complex64],
    stop: StoppingRule,
    opts: &McOptions,
) -> Result<Vec<McReport>, VerifyError> {
    let cfg0 = ChainConfig::initial(
        initial_x(&model.variant),
        &initial_marked(&model.variant),
        model.variant.domain_kind(),
    );
    let mut m0 = Vec::new();
    for &z in probes {
        m0.push(mean_eval(field, &cfg0, &ChainPoint::initial(z), &mut BranchState::new())?);
    }
    let mut c0 = Vec::new();
    for i in 0..probes.len() {
        for j in (i + 1)..probes.len() {
            c0.push(covariance_eval(field, &cfg0, probes[i], probes[j])?);
        }
    }
    let n = opts.n_paths;
    let mut mean_acc = vec![(0.0f64, 0.0f64); probes.len()];
    let mut pair_acc = vec![(0.0f64, 0.0f64); c0.len()];
    let mut zero_stops = 0usize;
    for path in 0..n {
        let out = run_coupled_path(field, model, probes, stop, opts, path as u64)?;
        if out.stopped_at_zero {
            zero_stops += 1;
        }
        for (acc, &m) in mean_acc.iter_mut().zip(&out.means) {
            acc.0 += m;
            acc.1 += m * m;
        }
        let mut idx = 0;
        for i in 0..probes.len() {
            for j in (i + 1)..probes.len() {
                let v = out.means[i] * out.means[j] + out.cov_pairs[idx];
                pair_acc[idx].0 += v;
                pair_acc[idx].1 += v * v;
                idx += 1;
            }
        }
    }
    if zero_stops * 2 > n {
        return Err(VerifyError::DegenerateStopping);
    }
    let mut reports = Vec::new();
    for (j, &z) in probes.iter().enumerate() {
        let mean = mean_acc[j].0 / n as f64;
        let var = (mean_acc[j].1 / n as f64 - mean * mean).max(0.0);
        let se = (var / n as f64).sqrt().max(1e-300);
        reports.push(McReport::new("m_weak", &format!("z = {z}"), mean, m0[j], se, n));
    }
    let mut idx = 0;
    for i in 0..probes.len() {
        for j in (i + 1)..probes.len() {
            let mean = pair_acc[idx].0 / n as f64;
            let var = (pair_acc[idx].1 / n as f64 - mean * mean).max(0.0);
            let se = (var / n as f64).sqrt().max(1e-300);
            let target = m0[i] * m0[j] + c0[idx];
            reports.push(McReport::new(
                "c_weak",
                &format!("z1 = {}, z2 = {}", probes[i], probes[j]),
                mean,
                target,
                se,
                n,
            ));
            idx += 1;
        }
    }
    Ok(reports)
}

fn initial_x(variant: &Variant) -> Complex64 {
    match variant.domain_kind() {
        DomainKind::HalfPlane | DomainKind::Strip => Complex64::new(0.0, 0.0),
        DomainKind::Disc | DomainKind::Annulus => Complex64::new(1.0, 0.0),
    }
}

fn initial_marked(variant: &Variant) -> Vec<Complex64> {
    match variant {
        Variant::ChordalRhoVec { x, .. } => x.iter().map(|&u| Complex64::new(u, 0.0)).collect(),
        Variant::StripMulti { marked, .. } => {
            marked.iter().map(|&u| Complex64::new(u, PI)).collect()
        }
        Variant::AnnulusNeumannRho { x1, .. }
        | Variant::AnnulusDirichlet { x1, .. }
        | Variant::AnnulusInner { x1, .. } => vec![*x1],
        _ => vec![],
    }
}

/// Pathwise check of `<M(z1), M(z2)>_t = C_0 - C_t`: realized
/// cross-variation of the means against the covariance drop; reports the
/// mean absolute deviation normalized by `C_0 - C_tau`.
pub fn qv_check(
    field: &FieldModel,
    model: &DrivingModel,
    z1: Complex64,
    z2: Complex64,
    t_end: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<McReport, VerifyError> {
    let probes = [z1, z2];
    let mut devs = Vec::with_capacity(n_paths);
    for path in 0..n_paths {
        let mut sampler = PathSampler::new(model.clone(), seed, path as u64)?;
        let flow = flow_of(&model.variant);
        let mut pts: Vec<TrackedPoint> = probes
            .iter()
            .enumerate()
            .map(|(id, &z)| TrackedPoint {
                id,
                start: z,
                g: z,
                log_dg: Complex64::new(0.0, 0.0),
                arg_g: z.arg(),
                swallowed: false,
            })
            .collect();
        let mut branches = [BranchState::new(), BranchState::new()];
        let cfg0 = chain_config_of(&sampler);
        let c_0 = covariance_eval(field, &cfg0, z1, z2)?;
        let mut m_prev = [
            mean_eval(field, &cfg0, &ChainPoint::from(&pts[0]), &mut branches[0])?,
            mean_eval(field, &cfg0, &ChainPoint::from(&pts[1]), &mut branches[1])?,
        ];
        let mut qv = 0.0;
        let n_steps = (t_end / dt).round() as usize;
        for _ in 0..n_steps {
            let t0 = sampler.t;
            let x0 = sampler.x();
            sampler.step(dt).map_err(VerifyError::Sle)?;
            let x1v = sampler.x();
            let x_at = move |t: f64| {
                let w = ((t - t0) / dt).clamp(0.0, 1.0);
                x0 * (1.0 - w) + x1v * w
            };
            let mut dead = false;
            for pt in pts.iter_mut() {
                let mut s = 0.0;
                while s < dt - 1e-15 {
                    let d = (pt.g - x_at(t0 + s)).norm();
                    if d < 10.0 * crate::loewner::SWALLOW_RADIUS {
                        dead = true;
                        break;
                    }
                    let h = (0.5 * d * d).min(dt - s).max(1e-12);
                    if rk4_tracked(&flow, &x_at, t0 + s, h, pt).is_err() {
                        dead = true;
                        break;
                    }
                    s += h;
                }
            }
            if dead {
                break;
            }
            let cfg = chain_config_of(&sampler);
            let m_now = [
                mean_eval(field, &cfg, &ChainPoint::from(&pts[0]), &mut branches[0])?,
                mean_eval(field, &cfg, &ChainPoint::from(&pts[1]), &mut branches[1])?,
            ];
            qv += (m_now[0] - m_prev[0]) * (m_now[1] - m_prev[1]);
            m_prev = m_now;
        }
        let cfg = chain_config_of(&sampler);
        let c_tau = covariance_eval(field, &cfg, pts[0].g, pts[1].g)?;
        let drop = c_0 - c_tau;
        if drop.abs() > 1e-12 {
            devs.push((qv - drop).abs() / drop.abs());
        }
    }
    let n = devs.len().max(1);
    let mean = devs.iter().sum::<f64>() / n as f64;
    let var = devs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n as f64;
    let se = (var / n as f64).sqrt();
    Ok(McReport::new(
        "qv_vs_covariance_drop",
        &format!("z1 = {z1}, z2 = {z2}"),
        mean,
        0.0,
        se.max(1e-12),
        n,
    ))
}

// ---------------------------------------------------------------------------
// Commutation functional.
// ---------------------------------------------------------------------------

/// `J`-kernel choices with analytic derivatives.
#[derive(Debug, Clone, Copy)]
pub enum ProbeKernel {
    /// `J_x(z) = c/(z - x)^2` with the half-plane field `V = 2/(z - x)`.
    ChordalInverseSquare { c: f64 },
    /// `J_x(z) = c dS~/dx` with the strip field `V = coth((z - x)/2)`.
    StripKernelDx { c: f64, theta: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct CommutationProbe {
    pub kernel: ProbeKernel,
    pub xi_plus: f64,
    pub xi_minus: f64,
    pub z: Complex64,
}

impl CommutationProbe {
    fn j(&self, x: f64, z: Complex64) -> Complex64 {
        match self.kernel {
            ProbeKernel::ChordalInverseSquare { c } => c / ((z - x) * (z - x)),
            ProbeKernel::StripKernelDx { c, theta } => {
                -c * strip_kernel_dw(theta, z - Complex64::new(x, 0.0))
            }
        }
    }

    fn j_dx(&self, x: f64, z: Complex64) -> Complex64 {
        match self.kernel {
            ProbeKernel::ChordalInverseSquare { c } => 2.0 * c / ((z - x) * (z - x) * (z - x)),
            ProbeKernel::StripKernelDx { c, theta } => {
                c * strip_kernel_dww(theta, z - Complex64::new(x, 0.0))
            }
        }
    }

    fn j_dz(&self, x: f64, z: Complex64) -> Complex64 {
        match self.kernel {
            ProbeKernel::ChordalInverseSquare { c } => -2.0 * c / ((z - x) * (z - x) * (z - x)),
            ProbeKernel::StripKernelDx { c, theta } => {
                -c * strip_kernel_dww(theta, z - Complex64::new(x, 0.0))
            }
        }
    }

    fn v(&self, x: f64, z: Complex64) -> Complex64 {
        match self.kernel {
            ProbeKernel::ChordalInverseSquare { .. } => 2.0 / (z - x),
            ProbeKernel::StripKernelDx { .. } => {
                let w = (z - Complex64::new(x, 0.0)) / 2.0;
                w.cosh() / w.sinh()
            }
        }
    }

    fn v_dz(&self, x: f64, z: Complex64) -> Complex64 {
        match self.kernel {
            ProbeKernel::ChordalInverseSquare { .. } => -2.0 / ((z - x) * (z - x)),
            ProbeKernel::StripKernelDx { .. } => {
                let w = (z - Complex64::new(x, 0.0)) / 2.0;
                let s = w.sinh();
                -0.5 / (s * s)
            }
        }
    }
}

fn strip_kernel_dw(theta: f64, w: Complex64) -> Complex64 {
    let h = (w / 2.0).sinh();
    let c = (w / 2.0).cosh();
    I / (2.0 * PI) * (theta * w).exp() * (theta / h - c / (2.0 * h * h))
}

fn strip_kernel_dww(theta: f64, w: Complex64) -> Complex64 {
    // d^2/dw^2 of (i/2pi) e^{theta w} / sinh(w/2).
    let h = (w / 2.0).sinh();
    let c = (w / 2.0).cosh();
    let base = (theta * w).exp() * I / (2.0 * PI);
    base * (theta * theta / h - theta * c / (h * h) + (c * c) / (2.0 * h * h * h)
        - 1.0 / (4.0 * h))
}

/// The six-term commutation bracket.
pub fn commutation_delta(p: &CommutationProbe) -> Complex64 {
    let (xp, xm, z) = (p.xi_plus, p.xi_minus, p.z);
    let xpc = Complex64::new(xp, 0.0);
    let xmc = Complex64::new(xm, 0.0);
    2.0 * p.v_dz(xm, xpc) * p.j(xp, z) - 2.0 * p.v_dz(xp, xmc) * p.j(xm, z)
        + p.v(xm, xpc) * p.j_dx(xp, z)
        - p.v(xp, xmc) * p.j_dx(xm, z)
        + p.v(xm, z) * p.j_dz(xp, z)
        - p.v(xp, z) * p.j_dz(xm, z)
}

/// Direct two-ordering oracle: grow hulls of capacities `(eps-, eps+)` at
/// the two roots in both orders by integrating the deterministic flow, and
/// return `(E_A - E_B)/(eps+ eps-)`.
pub fn commutation_two_ordering(
    p: &CommutationProbe,
    eps_plus: f64,
    eps_minus: f64,
) -> Result<Complex64, VerifyError> {
    let flow = match p.kernel {
        ProbeKernel::ChordalInverseSquare { .. } => Flow::HalfPlane,
        ProbeKernel::StripKernelDx { .. } => Flow::Strip,
    };
    let kind = flow.domain_kind();
    let order =
        |xi_first: f64, e1: f64, xi_second: f64, e2: f64| -> Result<Complex64, VerifyError> {
            let x_first = Complex64::new(xi_first, 0.0);
            let driving = DrivingPath::constant(x_first, e1, kind);
            let st =
                LoewnerState::new(flow, x_first, &[p.z, Complex64::new(xi_second, 1e-9)]);
            let out = crate::loewner::evolve(&st, &driving, e1 / 64.0, e1)
                .map_err(VerifyError::Loewner)?;
            let gz = out.tracked[0].g;
            let gxi = out.tracked[1].g;
            let dgxi = out.tracked[1].log_dg.exp();
            let e2_im = e2 * dgxi.norm_sqr();
            Ok(e1 * p.j(xi_first, p.z) + e2_im * p.j(gxi.re, gz))
        };
    let ea = order(p.xi_minus, eps_minus, p.xi_plus, eps_plus)?;
    let eb = order(p.xi_plus, eps_plus, p.xi_minus, eps_minus)?;
    Ok((ea - eb) / (eps_plus * eps_minus))
}

// ---------------------------------------------------------------------------
// Capacity checks.
// ---------------------------------------------------------------------------

/// `d/dt` of the local half-plane capacity at `t = 0` for the given flow,
/// one estimate per radius in `r_sequence`; the limit target is 2.
pub fn capacity_check(
    flow: Flow,
    x0: Complex64,
    r_sequence: &[f64],
    resolution: usize,
) -> Result<Vec<f64>, VerifyError> {
    let domain = match flow {
        Flow::HalfPlane => DomainSpec::half_plane(),
        Flow::Disc => DomainSpec::disc(),
        Flow::Strip => DomainSpec::strip(),
        Flow::Annulus { p } => DomainSpec::annulus(p),
    };
    let mut out = Vec::with_capacity(r_sequence.len());
    for &r in r_sequence {
        let t = (r / 6.0) * (r / 6.0);
        let n = 40;
        let times: Vec<f64> = (0..=n).map(|k| t * k as f64 / n as f64).collect();
        let values = vec![x0; n + 1];
        let driving = DrivingPath::new(times, values, Interpolation::Linear, domain.kind);
        let hull = trace_from_driving(&domain, &driving).map_err(VerifyError::Loewner)?;
        let cap =
            local_capacity(&domain, &hull, x0, r, resolution).map_err(VerifyError::Loewner)?;
        out.push(cap / t);
    }
    Ok(out)
}
