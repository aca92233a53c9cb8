//! Five-point lattice solver for harmonic extensions and discrete Green's
//! functions under Dirichlet / Neumann / Riemann-Hilbert site conditions.
//!
//! Interior rows are the unnormalized graph Laplacian: `deg(u) u - sum u_nb`,
//! where edges to absent sites are simply dropped (variational, reflecting
//! Neumann).  Riemann-Hilbert sites carry the one-sided rotated stencil
//! `alpha * (normal difference) + beta * (tangential difference) = 0` and
//! make the system nonsymmetric, so those problems are solved with
//! BiCGStab; everything else uses plain conjugate gradients.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::KernelError;

/// Per-site lattice classification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LatticeBc {
    Interior,
    Dirichlet(f64),
    /// Rotated one-sided derivative on the top row (experimental):
    /// `alpha * dM/dn + beta * dM/dtau = 0` with inward normal.
    RhTop { alpha: f64, beta: f64 },
    Absent,
}

/// Rectangular grid geometry; `periodic_x` wraps the x direction (used by
/// the log-polar annulus chart).
#[derive(Debug, Clone)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    pub x0: f64,
    pub y0: f64,
    pub periodic_x: bool,
}

impl Grid {
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn point(&self, i: usize, j: usize) -> (f64, f64) {
        (self.x0 + i as f64 * self.hx, self.y0 + j as f64 * self.hy)
    }

    fn neighbor(&self, i: usize, j: usize, dir: usize) -> Option<(usize, usize)> {
        match dir {
            0 => {
                if i + 1 < self.nx {
                    Some((i + 1, j))
                } else if self.periodic_x {
                    Some((0, j))
                } else {
                    None
                }
            }
            1 => {
                if i > 0 {
                    Some((i - 1, j))
                } else if self.periodic_x {
                    Some((self.nx - 1, j))
                } else {
                    None
                }
            }
            2 => (j + 1 < self.ny).then_some((i, j + 1)),
            _ => (j > 0).then_some((i, j - 1)),
        }
    }
}

/// A lattice boundary-value problem: grid, per-site classification, source.
#[derive(Debug, Clone)]
pub struct LatticeProblem {
    pub grid: Grid,
    pub kind: Vec<LatticeBc>,
    pub source: Vec<f64>,
}

/// Solution on the grid (values at Dirichlet sites are the data, absent
/// sites are 0).
#[derive(Debug, Clone)]
pub struct LatticeSolution {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub residual: f64,
}

impl LatticeSolution {
    /// Bilinear interpolation at (x, y); panics outside the grid hull.
    pub fn interpolate(&self, x: f64, y: f64) -> f64 {
        let g = &self.grid;
        let fx = ((x - g.x0) / g.hx).clamp(0.0, (g.nx - 1) as f64 - 1e-9);
        let fy = ((y - g.y0) / g.hy).clamp(0.0, (g.ny - 1) as f64 - 1e-9);
        let i = fx.floor() as usize;
        let j = fy.floor() as usize;
        let tx = fx - i as f64;
        let ty = fy - j as f64;
        let v = |ii: usize, jj: usize| self.values[g.idx(ii, jj)];
        (1.0 - tx) * (1.0 - ty) * v(i, j)
            + tx * (1.0 - ty) * v(i + 1, j)
            + (1.0 - tx) * ty * v(i, j + 1)
            + tx * ty * v(i + 1, j + 1)
    }
}

impl LatticeProblem {
    pub fn new(grid: Grid) -> Self {
        let n = grid.nx * grid.ny;
        LatticeProblem { grid, kind: vec![LatticeBc::Interior; n], source: vec![0.0; n] }
    }

    pub fn set(&mut self, i: usize, j: usize, bc: LatticeBc) {
        let id = self.grid.idx(i, j);
        self.kind[id] = bc;
    }

    pub fn set_source(&mut self, i: usize, j: usize, s: f64) {
        let id = self.grid.idx(i, j);
        self.source[id] = s;
    }

    fn has_rh(&self) -> bool {
        self.kind.iter().any(|k| matches!(k, LatticeBc::RhTop { .. }))
    }

    /// Solve the boundary-value problem.  `tol` bounds the final residual of
    /// the discrete equations (max norm, relative to the data scale).
    pub fn solve(&self, tol: f64) -> Result<LatticeSolution, KernelError> {
        let n = self.grid.nx * self.grid.ny;
        let mut unknown_id = vec![usize::MAX; n];
        let mut unknowns = Vec::new();
        for s in 0..n {
            match self.kind[s] {
                LatticeBc::Interior | LatticeBc::RhTop { .. } => {
                    unknown_id[s] = unknowns.len();
                    unknowns.push(s);
                }
                _ => {}
            }
        }
        let m = unknowns.len();
        if m == 0 {
            return Ok(LatticeSolution {
                grid: self.grid.clone(),
                values: self.dirichlet_field(),
                residual: 0.0,
            });
        }

        // rhs: Dirichlet contributions + sources.
        let mut b = vec![0.0f64; m];
        for (row, &s) in unknowns.iter().enumerate() {
            let (i, j) = (s % self.grid.nx, s / self.grid.nx);
            match self.kind[s] {
                LatticeBc::Interior => {
                    b[row] += self.source[s];
                    for dir in 0..4 {
                        if let Some((ii, jj)) = self.grid.neighbor(i, j, dir) {
                            let ns = self.grid.idx(ii, jj);
                            if let LatticeBc::Dirichlet(v) = self.kind[ns] {
                                b[row] += v;
                            }
                        }
                    }
                }
                LatticeBc::RhTop { alpha, beta } => {
                    // alpha*(u(i,j-1) - u(i,j))/hy + beta*(u(i+1,j)-u(i-1,j))/(2 hx) = 0
                    let hy = self.grid.hy;
                    let hx = self.grid.hx;
                    let mut stencil: Vec<(usize, usize, f64)> = Vec::with_capacity(3);
                    if j > 0 {
                        stencil.push((i, j - 1, alpha / hy));
                    }
                    if let Some((ii, jj)) = self.grid.neighbor(i, j, 0) {
                        stencil.push((ii, jj, beta / (2.0 * hx)));
                    }
                    if let Some((ii, jj)) = self.grid.neighbor(i, j, 1) {
                        stencil.push((ii, jj, -beta / (2.0 * hx)));
                    }
                    for (ii, jj, c) in stencil {
                        let ns = self.grid.idx(ii, jj);
                        if let LatticeBc::Dirichlet(v) = self.kind[ns] {
                            b[row] -= c * v;
                        }
                    }
                }
                _ => unreachable!(),
            }
        }

        let apply = |x: &[f64], out: &mut [f64]| {
            for (row, &s) in unknowns.iter().enumerate() {
                let (i, j) = (s % self.grid.nx, s / self.grid.nx);
                match self.kind[s] {
                    LatticeBc::Interior => {
                        let mut deg = 0.0;
                        let mut acc = 0.0;
                        for dir in 0..4 {
                            if let Some((ii, jj)) = self.grid.neighbor(i, j, dir) {
                                let ns = self.grid.idx(ii, jj);
                                match self.kind[ns] {
                                    LatticeBc::Interior | LatticeBc::RhTop { .. } => {
                                        deg += 1.0;
                                        acc += x[unknown_id[ns]];
                                    }
                                    LatticeBc::Dirichlet(_) => {
                                        deg += 1.0;
                                    }
                                    LatticeBc::Absent => {}
                                }
                            }
                        }
                        out[row] = deg * x[row] - acc;
                    }
                    LatticeBc::RhTop { alpha, beta } => {
                        let hy = self.grid.hy;
                        let hx = self.grid.hx;
                        let mut acc = -(alpha / hy) * x[row];
                        let take = |ii: usize, jj: usize, c: f64, acc: &mut f64| {
                            let ns = self.grid.idx(ii, jj);
                            match self.kind[ns] {
                                LatticeBc::Interior | LatticeBc::RhTop { .. } => {
                                    *acc += c * x[unknown_id[ns]]
                                }
                                _ => {}
                            }
                        };
                        if j > 0 {
                            take(i, j - 1, alpha / hy, &mut acc);
                        }
                        if let Some((ii, jj)) = self.grid.neighbor(i, j, 0) {
                            take(ii, jj, beta / (2.0 * hx), &mut acc);
                        }
                        if let Some((ii, jj)) = self.grid.neighbor(i, j, 1) {
                            take(ii, jj, -beta / (2.0 * hx), &mut acc);
                        }
                        out[row] = acc;
                    }
                    _ => unreachable!(),
                }
            }
        };

        let x = if self.has_rh() {
            bicgstab(&apply, &b, tol)?
        } else {
            conjugate_gradient(&apply, &b, tol)?
        };

        // Assemble full field and measure the residual.
        let mut values = self.dirichlet_field();
        for (row, &s) in unknowns.iter().enumerate() {
            values[s] = x[row];
        }
        let mut out = vec![0.0; m];
        apply(&x, &mut out);
        let mut res: f64 = 0.0;
        for row in 0..m {
            res = res.max((out[row] - b[row]).abs());
        }
        Ok(LatticeSolution { grid: self.grid.clone(), values, residual: res })
    }

    fn dirichlet_field(&self) -> Vec<f64> {
        self.kind
            .iter()
            .map(|k| match k {
                LatticeBc::Dirichlet(v) => *v,
                _ => 0.0,
            })
            .collect()
    }
}

fn conjugate_gradient<F>(apply: &F, b: &[f64], tol: f64) -> Result<Vec<f64>, KernelError>
where
    F: Fn(&[f64], &mut [f64]),
{
    let m = b.len();
    let mut x = vec![0.0; m];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; m];
    let bnorm = norm2(b).max(1e-300);
    let mut rr = dot(&r, &r);
    let max_iter = 40 * (m as f64).sqrt() as usize + 200;
    for _ in 0..max_iter {
        if rr.sqrt() <= tol * bnorm {
            return Ok(x);
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap.abs() < 1e-300 {
            break;
        }
        let alpha = rr / pap;
        for k in 0..m {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for k in 0..m {
            p[k] = r[k] + beta * p[k];
        }
    }
    if rr.sqrt() <= tol * bnorm * 10.0 {
        return Ok(x);
    }
    Err(KernelError::SolverNonConvergence(rr.sqrt() / bnorm))
}

fn bicgstab<F>(apply: &F, b: &[f64], tol: f64) -> Result<Vec<f64>, KernelError>
where
    F: Fn(&[f64], &mut [f64]),
{
    let m = b.len();
    let mut x = vec![0.0; m];
    let mut r = b.to_vec();
    let r0 = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; m];
    let mut p = vec![0.0; m];
    let mut s = vec![0.0; m];
    let mut t = vec![0.0; m];
    let bnorm = norm2(b).max(1e-300);
    let max_iter = 80 * (m as f64).sqrt() as usize + 400;
    for _ in 0..max_iter {
        let rho_new = dot(&r0, &r);
        if rho_new.abs() < 1e-300 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for k in 0..m {
            p[k] = r[k] + beta * (p[k] - omega * v[k]);
        }
        apply(&p, &mut v);
        alpha = rho / dot(&r0, &v);
        for k in 0..m {
            s[k] = r[k] - alpha * v[k];
        }
        if norm2(&s) <= tol * bnorm {
            for k in 0..m {
                x[k] += alpha * p[k];
            }
            return Ok(x);
        }
        apply(&s, &mut t);
        omega = dot(&t, &s) / dot(&t, &t).max(1e-300);
        for k in 0..m {
            x[k] += alpha * p[k] + omega * s[k];
            r[k] = s[k] - omega * t[k];
        }
        if norm2(&r) <= tol * bnorm {
            return Ok(x);
        }
    }
    let rn = norm2(&r) / bnorm;
    if rn <= tol * 100.0 {
        return Ok(x);
    }
    Err(KernelError::SolverNonConvergence(rn))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Boundary data assignment for `harmonic_solve` on a rectangle:
/// closures give Dirichlet values on the four sides, or None for Neumann.
pub struct RectangleData<'a> {
    pub bottom: Option<&'a dyn Fn(f64) -> f64>,
    pub top: Option<&'a dyn Fn(f64) -> f64>,
    pub left: Option<&'a dyn Fn(f64) -> f64>,
    pub right: Option<&'a dyn Fn(f64) -> f64>,
    /// Riemann-Hilbert top condition overrides `top` when set.
    pub rh_top: Option<(f64, f64)>,
}

/// Discrete harmonic extension on a rectangle lattice.
///
/// Sides with `None` data are reflecting (zero normal difference).  The
/// returned solution satisfies the discrete equations to `1e-10`.
pub fn harmonic_solve(
    grid: Grid,
    data: RectangleData<'_>,
) -> Result<LatticeSolution, KernelError> {
    let mut prob = LatticeProblem::new(grid);
    let g = prob.grid.clone();
    for i in 0..g.nx {
        let (x, _) = g.point(i, 0);
        if let Some(f) = data.bottom {
            prob.set(i, 0, LatticeBc::Dirichlet(f(x)));
        }
        if let Some((alpha, beta)) = data.rh_top {
            prob.set(i, g.ny - 1, LatticeBc::RhTop { alpha, beta });
        } else if let Some(f) = data.top {
            prob.set(i, g.ny - 1, LatticeBc::Dirichlet(f(x)));
        }
    }
    if !g.periodic_x {
        for j in 0..g.ny {
            let (_, y) = g.point(0, j);
            if let Some(f) = data.left {
                if matches!(prob.kind[g.idx(0, j)], LatticeBc::Interior) {
                    prob.set(0, j, LatticeBc::Dirichlet(f(y)));
                }
            }
            if let Some(f) = data.right {
                if matches!(prob.kind[g.idx(g.nx - 1, j)], LatticeBc::Interior) {
                    prob.set(g.nx - 1, j, LatticeBc::Dirichlet(f(y)));
                }
            }
        }
    }
    prob.solve(1e-12)
}

/// Discrete Green's function oracle: `-Lap_h G = delta` with unit mass at
/// the source site, zero Dirichlet data on `Dirichlet` sites and reflecting
/// behaviour across `Absent` edges.  Symmetric by construction.
pub fn greens_lattice_oracle(
    prob: &LatticeProblem,
    source: (usize, usize),
    probe: &[(usize, usize)],
) -> Result<Vec<f64>, KernelError> {
    let mut p = prob.clone();
    p.set_source(source.0, source.1, 1.0);
    let sol = p.solve(1e-12)?;
    Ok(probe.iter().map(|&(i, j)| sol.values[p.grid.idx(i, j)]).collect())
}

/// Strip lattice with Dirichlet bottom and Riemann-Hilbert top; Green's
/// function fallback used by `greens_eval` for RH profiles.
pub fn greens_strip_rh_lattice(
    theta: f64,
    z1: Complex64,
    z2: Complex64,
    ny: usize,
) -> Result<f64, KernelError> {
    let span = 3.0 * PI + (z1.re.abs().max(z2.re.abs()) * 2.0);
    let hy = PI / (ny - 1) as f64;
    let nx = (2.0 * span / hy).ceil() as usize + 1;
    let grid = Grid { nx, ny, hx: hy, hy, x0: -span, y0: 0.0, periodic_x: false };
    let mut prob = LatticeProblem::new(grid);
    let g = prob.grid.clone();
    let (alpha, beta) = ((PI * theta).cos(), -(PI * theta).sin());
    for i in 0..g.nx {
        prob.set(i, 0, LatticeBc::Dirichlet(0.0));
        prob.set(i, g.ny - 1, LatticeBc::RhTop { alpha, beta });
    }
    for j in 1..g.ny - 1 {
        prob.set(0, j, LatticeBc::Dirichlet(0.0));
        prob.set(g.nx - 1, j, LatticeBc::Dirichlet(0.0));
    }
    let site = |z: Complex64| -> (usize, usize) {
        let i = ((z.re - g.x0) / g.hx).round() as usize;
        let j = ((z.im - g.y0) / g.hy).round() as usize;
        (i.min(g.nx - 1), j.min(g.ny - 1))
    };
    let src = site(z2);
    let pr = site(z1);
    let vals = greens_lattice_oracle(&prob, src, &[pr])?;
    Ok(vals[0])
}
