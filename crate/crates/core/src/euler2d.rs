//! Two-dimensional isentropic Euler equations with Mach-scaled pressure,
//!
//! `ρ_t + ∇·(ρu) = 0`, `(ρu)_t + ∇·(ρu⊗u) + ∇p(ρ)/M² = 0`, `p = ρ^γ`.
//!
//! Fields are point values at cell centres. The convective flux, together
//! with the nonlinear pressure remainder `(p(ρ) - c_ref² ρ)/M²`, is explicit
//! and discretised by flux-split finite differences with local Lax–Friedrichs
//! splitting at the material speed. The linearised acoustic flux
//! `(ρu, c_ref² ρ/M² I)` is implicit: fourth-order central differences for
//! the reference-solution discretisation, first-order Rusanov with speed
//! `c_ref/M` for the upwind one. Implicit systems are solved by FFT on
//! periodic grids and by a banded LU on Neumann grids.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::certify::ConvexScheme;
use crate::linalg::BandedMatrix;
use crate::metrics;
use crate::mood::{Detector, MoodHierarchy, MoodLevel, MoodStats};
use crate::reconstruct::{face_pair, Reconstruction};
use crate::stepper::{cfl_dt_acoustic, cfl_dt_euler, CflMode, SemiDiscreteProblem, TimeScheme};
use crate::tableaux::{self, SchemeId};
use crate::{Error, Result};

/// MOOD threshold relaxation used for the Euler runs.
pub const EULER_XI: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    /// Ghost cells copy the adjacent boundary cell.
    Neumann,
}

/// Uniform Cartesian grid; cell `(i, j)` is stored at `i + nx·j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub dx: f64,
    pub dy: f64,
    pub boundary: Boundary,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, (x0, x1): (f64, f64), (y0, y1): (f64, f64), boundary: Boundary) -> Result<Self> {
        if nx == 0 || ny == 0 || !(x1 > x0) || !(y1 > y0) {
            return Err(Error::Domain("grid needs cells and a nonempty box".into()));
        }
        Ok(Self { nx, ny, x0, y0, dx: (x1 - x0) / nx as f64, dy: (y1 - y0) / ny as f64, boundary })
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + (i as f64 + 0.5) * self.dx
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y0 + (j as f64 + 0.5) * self.dy
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx * self.dy
    }

    fn wrap(&self, k: isize, n: usize) -> usize {
        match self.boundary {
            Boundary::Periodic => k.rem_euclid(n as isize) as usize,
            Boundary::Neumann => k.clamp(0, n as isize - 1) as usize,
        }
    }

    /// Index of cell `(i, j)`, resolving ghost positions by the boundary rule.
    pub fn at(&self, i: isize, j: isize) -> usize {
        self.wrap(i, self.nx) + self.nx * self.wrap(j, self.ny)
    }
}

/// Mach number, gas exponent and the reference density of the linearised
/// pressure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerParams {
    pub mach: f64,
    pub gamma: f64,
    pub rho_ref: f64,
}

impl EulerParams {
    pub fn new(mach: f64, gamma: f64, rho_ref: f64) -> Result<Self> {
        if !(mach > 0.0) || !(gamma >= 1.0) || !(rho_ref > 0.0) {
            return Err(Error::Domain(format!("need M > 0, gamma >= 1, rho_ref > 0 (got {mach}, {gamma}, {rho_ref})")));
        }
        Ok(Self { mach, gamma, rho_ref })
    }

    pub fn pressure(&self, rho: f64) -> f64 {
        rho.powf(self.gamma)
    }

    /// `c = sqrt(γ ρ^{γ-1})`, before the `1/M` scaling.
    pub fn sound_speed(&self, rho: f64) -> f64 {
        (self.gamma * rho.powf(self.gamma - 1.0)).sqrt()
    }

    /// `c_ref² = γ ρ_ref^{γ-1}`.
    pub fn c_ref2(&self) -> f64 {
        self.gamma * self.rho_ref.powf(self.gamma - 1.0)
    }

    /// Coefficient `c_ref²/M²` of the linearised pressure.
    pub fn stiffness(&self) -> f64 {
        self.c_ref2() / (self.mach * self.mach)
    }

    /// Nonlinear pressure remainder `(p(ρ) - c_ref² ρ)/M²`.
    pub fn pressure_remainder(&self, rho: f64) -> f64 {
        (self.pressure(rho) - self.c_ref2() * rho) / (self.mach * self.mach)
    }

    /// Acoustic wave speeds `u·n ± c/M`.
    pub fn wave_speeds(&self, rho: f64, un: f64) -> (f64, f64) {
        let c = self.sound_speed(rho) / self.mach;
        (un - c, un + c)
    }
}

/// Density and momentum fields on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EulerState2D {
    pub grid: Grid2D,
    pub rho: Vec<f64>,
    pub mom_x: Vec<f64>,
    pub mom_y: Vec<f64>,
}

impl EulerState2D {
    pub fn from_vec(grid: Grid2D, w: &[f64]) -> Result<Self> {
        let n = grid.cells();
        if w.len() != 3 * n {
            return Err(Error::Shape(format!("state has {} entries, grid needs {}", w.len(), 3 * n)));
        }
        Ok(Self { grid, rho: w[..n].to_vec(), mom_x: w[n..2 * n].to_vec(), mom_y: w[2 * n..].to_vec() })
    }

    /// Stacked `[ρ, ρu_x, ρu_y]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(3 * self.rho.len());
        w.extend_from_slice(&self.rho);
        w.extend_from_slice(&self.mom_x);
        w.extend_from_slice(&self.mom_y);
        w
    }

    pub fn validate(&self) -> Result<()> {
        if self.rho.iter().chain(&self.mom_x).chain(&self.mom_y).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Euler state"));
        }
        if self.rho.iter().any(|&r| r <= 0.0) {
            return Err(Error::Domain("density must stay positive".into()));
        }
        Ok(())
    }

    pub fn mean_density(&self) -> f64 {
        self.rho.iter().sum::<f64>() / self.rho.len() as f64
    }

    pub fn total_mass(&self) -> f64 {
        self.rho.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn momentum_norm(&self) -> Vec<f64> {
        self.mom_x.iter().zip(&self.mom_y).map(|(a, b)| a.hypot(*b)).collect()
    }

    pub fn max_normal_speed(&self) -> f64 {
        (0..self.rho.len())
            .map(|c| (self.mom_x[c] / self.rho[c]).abs().max((self.mom_y[c] / self.rho[c]).abs()))
            .fold(0.0, f64::max)
    }
}

/// The five initial configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EulerCase {
    AcousticRp,
    ShearWave,
    Explosion,
    DoubleShear,
    Vortex,
}

impl std::str::FromStr for EulerCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "acoustic_rp" | "acoustic" | "rp" => Ok(EulerCase::AcousticRp),
            "shear_wave" | "shear" => Ok(EulerCase::ShearWave),
            "explosion" => Ok(EulerCase::Explosion),
            "double_shear" | "double_shear_layer" => Ok(EulerCase::DoubleShear),
            "vortex" => Ok(EulerCase::Vortex),
            _ => Err(Error::UnknownCase(s.to_string())),
        }
    }
}

impl std::fmt::Display for EulerCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            EulerCase::AcousticRp => "acoustic_rp",
            EulerCase::ShearWave => "shear_wave",
            EulerCase::Explosion => "explosion",
            EulerCase::DoubleShear => "double_shear",
            EulerCase::Vortex => "vortex",
        };
        f.write_str(s)
    }
}

/// Vortex width parameter.
pub const VORTEX_A: f64 = 8.0;
/// Shear-layer thickness, equal to the constant initial density.
pub const DOUBLE_SHEAR_RHO: f64 = PI / 15.0;

impl EulerCase {
    /// Numeric id stored in binary snapshots.
    pub fn id(self) -> f64 {
        match self {
            EulerCase::AcousticRp => 0.0,
            EulerCase::ShearWave => 1.0,
            EulerCase::Explosion => 2.0,
            EulerCase::DoubleShear => 3.0,
            EulerCase::Vortex => 4.0,
        }
    }

    /// Grid with `n` cells along x. The Riemann problems keep 3 cells in y.
    pub fn grid(self, n: usize) -> Result<Grid2D> {
        match self {
            EulerCase::AcousticRp | EulerCase::ShearWave => Grid2D::new(n, 3, (0.0, 2.0), (0.0, 1.0), Boundary::Neumann),
            EulerCase::Explosion => Grid2D::new(n, n, (-0.5, 0.5), (-0.5, 0.5), Boundary::Periodic),
            EulerCase::DoubleShear => Grid2D::new(n, n, (0.0, 2.0 * PI), (0.0, 2.0 * PI), Boundary::Periodic),
            EulerCase::Vortex => Grid2D::new(n, n, (0.0, 1.0), (0.0, 1.0), Boundary::Periodic),
        }
    }

    pub fn default_n(self) -> usize {
        match self {
            EulerCase::AcousticRp | EulerCase::ShearWave | EulerCase::Explosion => 100,
            EulerCase::DoubleShear => 25,
            EulerCase::Vortex => 64,
        }
    }

    pub fn default_t_final(self, mach: f64) -> f64 {
        match self {
            EulerCase::AcousticRp => 0.3 * mach,
            EulerCase::ShearWave => 0.25 * mach,
            EulerCase::Explosion => 0.125,
            EulerCase::DoubleShear => 10.0,
            EulerCase::Vortex => 0.2,
        }
    }

    pub fn default_nu(self) -> f64 {
        match self {
            EulerCase::AcousticRp => 0.5,
            EulerCase::ShearWave | EulerCase::DoubleShear | EulerCase::Vortex => 0.1,
            EulerCase::Explosion => 0.5,
        }
    }

    /// Fixed step count, when the case prescribes one.
    pub fn default_steps(self) -> Option<usize> {
        match self {
            EulerCase::Explosion => Some(24),
            _ => None,
        }
    }
}

/// Point values of the initial data.
pub fn init_case(case: EulerCase, mach: f64, gamma: f64, n: usize) -> Result<EulerState2D> {
    let grid = case.grid(n)?;
    let mut rho = vec![0.0; grid.cells()];
    let mut ux = vec![0.0; grid.cells()];
    let mut uy = vec![0.0; grid.cells()];
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let (x, y) = (grid.x(i), grid.y(j));
            let c = i + grid.nx * j;
            match case {
                EulerCase::AcousticRp | EulerCase::ShearWave => {
                    let left = x < 1.0;
                    rho[c] = if left { 1.0 + mach * mach } else { 1.0 };
                    if case == EulerCase::ShearWave {
                        uy[c] = if left { 1.0 + mach } else { 1.0 };
                    }
                }
                EulerCase::Explosion => {
                    rho[c] = if x.hypot(y) < 0.2 { 2.0 } else { 1.0 };
                }
                EulerCase::DoubleShear => {
                    let d = DOUBLE_SHEAR_RHO;
                    rho[c] = d;
                    ux[c] = if y <= PI { ((y - PI / 2.0) / d).tanh() } else { ((1.5 * PI - y) / d).tanh() };
                    uy[c] = 0.05 * x.sin();
                }
                EulerCase::Vortex => {
                    let a = VORTEX_A;
                    let (xr, yr) = (x - 0.5, y - 0.5);
                    let r2 = xr * xr + yr * yr;
                    let r = 1.0 - mach * mach / 8.0 * (-2.0 * a * a * r2).exp();
                    let amp = a * (gamma / 2.0).sqrt() * (-a * a * r2).exp() * r.powf(gamma / 2.0 - 1.0);
                    rho[c] = r;
                    ux[c] = amp * yr;
                    uy[c] = -amp * xr;
                }
            }
        }
    }
    let mom_x = rho.iter().zip(&ux).map(|(r, u)| r * u).collect();
    let mom_y = rho.iter().zip(&uy).map(|(r, u)| r * u).collect();
    let s = EulerState2D { grid, rho, mom_x, mom_y };
    s.validate()?;
    Ok(s)
}

/// `(Φ₋, Φ₊) = u·n ± (2/(γ-1)) c/M`, the Riemann invariants along `n`.
pub fn riemann_invariants(rho: f64, un: f64, params: &EulerParams) -> Result<(f64, f64)> {
    if !(rho > 0.0) {
        return Err(Error::Domain(format!("non-positive density {rho}")));
    }
    if params.gamma <= 1.0 {
        return Err(Error::Domain("Riemann invariants need gamma > 1".into()));
    }
    let k = 2.0 / (params.gamma - 1.0) * params.sound_speed(rho) / params.mach;
    Ok((un + k, un - k))
}

/// Cellwise `max(Φ₋, Φ₊)` over the four outward normals.
#[derive(Debug, Clone, Copy)]
pub struct RiemannInvariantDetector {
    pub params: EulerParams,
    pub cells: usize,
}

impl Detector for RiemannInvariantDetector {
    fn phi(&self, w: &[f64]) -> Result<Vec<f64>> {
        let n = self.cells;
        if w.len() != 3 * n {
            return Err(Error::Shape("detector state size".into()));
        }
        (0..n)
            .map(|c| {
                let rho = w[c];
                let (ux, uy) = (w[n + c] / rho, w[2 * n + c] / rho);
                let mut best = f64::NEG_INFINITY;
                for un in [ux, -ux, uy, -uy] {
                    let (m, p) = riemann_invariants(rho, un, &self.params)?;
                    best = best.max(m.max(p));
                }
                Ok(best)
            })
            .collect()
    }
}

/// `ω = ∂_x u_y - ∂_y u_x` by central differences.
pub fn vorticity(s: &EulerState2D) -> Vec<f64> {
    let g = s.grid;
    let vel = |c: usize| (s.mom_x[c] / s.rho[c], s.mom_y[c] / s.rho[c]);
    let mut out = vec![0.0; g.cells()];
    for j in 0..g.ny as isize {
        for i in 0..g.nx as isize {
            let dvy = (vel(g.at(i + 1, j)).1 - vel(g.at(i - 1, j)).1) / (2.0 * g.dx);
            let dux = (vel(g.at(i, j + 1)).0 - vel(g.at(i, j - 1)).0) / (2.0 * g.dy);
            out[g.at(i, j)] = dvy - dux;
        }
    }
    out
}

/// Space discretisation of one MOOD level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceDisc {
    /// Reference-solution IMEX: central implicit acoustics.
    RsImex,
    /// Rusanov implicit acoustics with speed `c_ref/M`.
    Upwind,
}

/// Fourier symbols of the implicit difference operators along one axis:
/// the derivative is `i·d(k)`, the dissipation `-s·g(k)`.
fn symbols(n: usize, h: f64, disc: SpaceDisc) -> (Vec<f64>, Vec<f64>) {
    (0..n)
        .map(|k| {
            let th = 2.0 * PI * k as f64 / n as f64;
            match disc {
                SpaceDisc::RsImex => ((8.0 * th.sin() - (2.0 * th).sin()) / (6.0 * h), 0.0),
                SpaceDisc::Upwind => (th.sin() / h, (1.0 - th.cos()) / h),
            }
        })
        .unzip()
}

struct Spectral {
    fx: Arc<dyn Fft<f64>>,
    ix: Arc<dyn Fft<f64>>,
    fy: Arc<dyn Fft<f64>>,
    iy: Arc<dyn Fft<f64>>,
    dx: Vec<f64>,
    gx: Vec<f64>,
    dy: Vec<f64>,
    gy: Vec<f64>,
}

impl Spectral {
    fn new(grid: &Grid2D, disc: SpaceDisc) -> Self {
        let mut planner = FftPlanner::new();
        let (dx, gx) = symbols(grid.nx, grid.dx, disc);
        let (dy, gy) = symbols(grid.ny, grid.dy, disc);
        Self {
            fx: planner.plan_fft_forward(grid.nx),
            ix: planner.plan_fft_inverse(grid.nx),
            fy: planner.plan_fft_forward(grid.ny),
            iy: planner.plan_fft_inverse(grid.ny),
            dx,
            gx,
            dy,
            gy,
        }
    }

    fn transform(&self, data: &mut [Complex<f64>], nx: usize, ny: usize, forward: bool) {
        let (tx, ty) = if forward { (&self.fx, &self.fy) } else { (&self.ix, &self.iy) };
        for row in data.chunks_mut(nx) {
            tx.process(row);
        }
        let mut col = vec![Complex::new(0.0, 0.0); ny];
        for i in 0..nx {
            for j in 0..ny {
                col[j] = data[i + nx * j];
            }
            ty.process(&mut col);
            for j in 0..ny {
                data[i + nx * j] = col[j];
            }
        }
    }
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Spectral")
    }
}

/// Semi-discrete Euler system for one space discretisation.
#[derive(Debug)]
pub struct EulerProblem {
    pub grid: Grid2D,
    pub params: EulerParams,
    pub disc: SpaceDisc,
    /// Reconstruction of the split explicit fluxes.
    pub reconstruction: Reconstruction,
    spectral: Option<Spectral>,
}

impl EulerProblem {
    pub fn new(grid: Grid2D, params: EulerParams, disc: SpaceDisc, reconstruction: Reconstruction) -> Self {
        let spectral = (grid.boundary == Boundary::Periodic).then(|| Spectral::new(&grid, disc));
        Self { grid, params, disc, reconstruction, spectral }
    }

    /// Stencil reach of the implicit operator.
    fn implicit_radius(&self) -> usize {
        match self.disc {
            SpaceDisc::RsImex => 2,
            SpaceDisc::Upwind => 1,
        }
    }

    /// Divergence of the split explicit fluxes along one axis, accumulated
    /// into the momentum tendencies.
    fn explicit_axis(&self, w: &[f64], axis: usize, out: &mut [f64]) {
        let g = self.grid;
        let n = g.cells();
        let p = &self.params;
        let (len, lines, h) = if axis == 0 { (g.nx, g.ny, g.dx) } else { (g.ny, g.nx, g.dy) };
        let cell = |line: usize, k: isize| if axis == 0 { g.at(k, line as isize) } else { g.at(line as isize, k) };
        let mut faces = vec![[0.0f64; 2]; len + 1];
        for line in 0..lines {
            // Point fluxes and conserved values of the two momentum components.
            let point = |k: isize| {
                let c = cell(line, k);
                let rho = w[c];
                let m = [w[n + c], w[2 * n + c]];
                let un = m[axis] / rho;
                let mut f = [m[0] * un, m[1] * un];
                f[axis] += p.pressure_remainder(rho);
                (f, m, un.abs())
            };
            for (fi, face) in faces.iter_mut().enumerate() {
                // Face between cells k and k+1.
                let k = fi as isize - 1;
                let st: Vec<_> = (-1..=2).map(|o| point(k + o)).collect();
                let alpha = st.iter().map(|s| s.2).fold(0.0, f64::max);
                for comp in 0..2 {
                    let plus = |s: &([f64; 2], [f64; 2], f64)| 0.5 * (s.0[comp] + alpha * s.1[comp]);
                    let minus = |s: &([f64; 2], [f64; 2], f64)| 0.5 * (s.0[comp] - alpha * s.1[comp]);
                    let fp = face_pair(self.reconstruction, plus(&st[0]), plus(&st[1]), plus(&st[2])).1;
                    let fm = face_pair(self.reconstruction, minus(&st[1]), minus(&st[2]), minus(&st[3])).0;
                    face[comp] = fp + fm;
                }
            }
            for k in 0..len {
                let c = cell(line, k as isize);
                for comp in 0..2 {
                    out[(1 + comp) * n + c] -= (faces[k + 1][comp] - faces[k][comp]) / h;
                }
            }
        }
    }

    /// Implicit tendency along one axis, accumulated into `out`.
    fn implicit_axis(&self, w: &[f64], axis: usize, out: &mut [f64]) {
        let g = self.grid;
        let n = g.cells();
        let k2 = self.params.stiffness();
        let h = if axis == 0 { g.dx } else { g.dy };
        let s = self.params.c_ref2().sqrt() / self.params.mach;
        for j in 0..g.ny as isize {
            for i in 0..g.nx as isize {
                let c = g.at(i, j);
                let nb = |o: isize| if axis == 0 { g.at(i + o, j) } else { g.at(i, j + o) };
                // Flux along the axis: mass gets the momentum, the momentum
                // component along the axis gets the linear pressure.
                let flux = |cc: usize| (w[(1 + axis) * n + cc], k2 * w[cc]);
                match self.disc {
                    SpaceDisc::RsImex => {
                        let (m2, m1, p1, p2) = (flux(nb(-2)), flux(nb(-1)), flux(nb(1)), flux(nb(2)));
                        let d = |a: f64, b: f64, c: f64, e: f64| (a - 8.0 * b + 8.0 * c - e) / (12.0 * h);
                        out[c] -= d(m2.0, m1.0, p1.0, p2.0);
                        out[(1 + axis) * n + c] -= d(m2.1, m1.1, p1.1, p2.1);
                    }
                    SpaceDisc::Upwind => {
                        let (m1, p1) = (flux(nb(-1)), flux(nb(1)));
                        out[c] -= (p1.0 - m1.0) / (2.0 * h);
                        out[(1 + axis) * n + c] -= (p1.1 - m1.1) / (2.0 * h);
                        let (a, b) = (nb(-1), nb(1));
                        for comp in 0..3 {
                            let o = comp * n;
                            out[o + c] += s / (2.0 * h) * (w[o + b] - 2.0 * w[o + c] + w[o + a]);
                        }
                    }
                }
            }
        }
    }

    fn solve_spectral(&self, sp: &Spectral, nu: f64, rhs: &[f64], out: &mut [f64]) {
        let g = self.grid;
        let n = g.cells();
        let k2 = self.params.stiffness();
        let s = self.params.c_ref2().sqrt() / self.params.mach;
        let load = |v: &[f64]| v.iter().map(|&x| Complex::new(x, 0.0)).collect::<Vec<_>>();
        let mut r = load(&rhs[..n]);
        let mut mx = load(&rhs[n..2 * n]);
        let mut my = load(&rhs[2 * n..]);
        for f in [&mut r, &mut mx, &mut my] {
            sp.transform(f, g.nx, g.ny, true);
        }
        let iu = Complex::new(0.0, 1.0);
        for ky in 0..g.ny {
            for kx in 0..g.nx {
                let c = kx + g.nx * ky;
                let (dx, dy) = (sp.dx[kx], sp.dy[ky]);
                let a = 1.0 + nu * s * (sp.gx[kx] + sp.gy[ky]);
                let den = a * a + nu * nu * k2 * (dx * dx + dy * dy);
                let rho = (r[c] * a - iu * nu * (mx[c] * dx + my[c] * dy)) / den;
                mx[c] = (mx[c] - iu * nu * dx * k2 * rho) / a;
                my[c] = (my[c] - iu * nu * dy * k2 * rho) / a;
                r[c] = rho;
            }
        }
        let scale = 1.0 / n as f64;
        for (k, f) in [&mut r, &mut mx, &mut my].into_iter().enumerate() {
            sp.transform(f, g.nx, g.ny, false);
            for (o, v) in out[k * n..(k + 1) * n].iter_mut().zip(f.iter()) {
                *o = v.re * scale;
            }
        }
    }

    /// Assembles `x - nu·I(x)` by colored probing and solves it with a
    /// banded LU; the short grid direction runs fastest in the ordering.
    fn solve_banded(&self, nu: f64, rhs: &[f64], out: &mut [f64]) -> Result<()> {
        let g = self.grid;
        let n = g.cells();
        let r = self.implicit_radius();
        let y_fast = g.ny <= g.nx;
        let nfast = if y_fast { g.ny } else { g.nx };
        let order = |i: usize, j: usize| if y_fast { j + g.ny * i } else { i + g.nx * j };
        let unknown = |i: usize, j: usize, comp: usize| 3 * order(i, j) + comp;
        let band = 3 * (r * nfast + r) + 2;
        let mut mat = BandedMatrix::zeros(3 * n, band, band);

        let period = 2 * r + 1;
        let (px, py) = (period.min(g.nx), period.min(g.ny));
        let mut probe = vec![0.0; 3 * n];
        let mut image = vec![0.0; 3 * n];
        for comp in 0..3 {
            for a in 0..px {
                for b in 0..py {
                    probe.iter_mut().for_each(|v| *v = 0.0);
                    for j in (b..g.ny).step_by(py) {
                        for i in (a..g.nx).step_by(px) {
                            probe[comp * n + i + g.nx * j] = 1.0;
                        }
                    }
                    image.iter_mut().for_each(|v| *v = 0.0);
                    self.implicit_op(0.0, &probe, &mut image);
                    for j in 0..g.ny {
                        for i in 0..g.nx {
                            // The unique column of this color within reach.
                            let ci = (i.saturating_sub(r)..=(i + r).min(g.nx - 1)).find(|q| q % px == a);
                            let cj = (j.saturating_sub(r)..=(j + r).min(g.ny - 1)).find(|q| q % py == b);
                            let (Some(ci), Some(cj)) = (ci, cj) else { continue };
                            for row_comp in 0..3 {
                                let row = unknown(i, j, row_comp);
                                let col = unknown(ci, cj, comp);
                                let mut v = -nu * image[row_comp * n + i + g.nx * j];
                                if row == col {
                                    v += 1.0;
                                }
                                if v != 0.0 {
                                    mat.set(row, col, v)?;
                                }
                            }
                        }
                    }
                }
            }
        }
        let lu = mat.factor()?;
        let mut b = vec![0.0; 3 * n];
        for j in 0..g.ny {
            for i in 0..g.nx {
                for comp in 0..3 {
                    b[unknown(i, j, comp)] = rhs[comp * n + i + g.nx * j];
                }
            }
        }
        lu.solve_in_place(&mut b)?;
        for j in 0..g.ny {
            for i in 0..g.nx {
                for comp in 0..3 {
                    out[comp * n + i + g.nx * j] = b[unknown(i, j, comp)];
                }
            }
        }
        Ok(())
    }
}

impl SemiDiscreteProblem for EulerProblem {
    fn dim(&self) -> usize {
        3 * self.grid.cells()
    }

    fn explicit_op(&self, _t: f64, w: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        self.explicit_axis(w, 0, out);
        self.explicit_axis(w, 1, out);
    }

    fn implicit_op(&self, _t: f64, w: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        self.implicit_axis(w, 0, out);
        self.implicit_axis(w, 1, out);
    }

    fn implicit_solve(&self, _t: f64, nu: f64, rhs: &[f64], out: &mut [f64]) -> Result<()> {
        if nu == 0.0 {
            out.copy_from_slice(rhs);
            return Ok(());
        }
        match &self.spectral {
            Some(sp) => self.solve_spectral(sp, nu, rhs, out),
            None => self.solve_banded(nu, rhs, out)?,
        }
        // Residual check against the assembled operator.
        let mut ix = vec![0.0; rhs.len()];
        self.implicit_op(0.0, out, &mut ix);
        let mut res: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for ((x, i), r) in out.iter().zip(&ix).zip(rhs) {
            res = res.max((x - nu * i - r).abs());
            scale = scale.max(r.abs()).max((nu * i).abs());
        }
        if !(res <= 1e-10 * scale.max(1e-300)) {
            return Err(Error::Solver(format!("implicit residual {res:e} relative to {scale:e}")));
        }
        Ok(())
    }
}

/// One level of an Euler method.
#[derive(Debug, Clone, Serialize)]
pub struct EulerLevel {
    pub name: String,
    pub time: TimeScheme,
    pub disc: SpaceDisc,
    pub reconstruction: Reconstruction,
}

#[derive(Debug, Clone, Serialize)]
pub struct EulerMethod {
    pub name: String,
    pub levels: Vec<EulerLevel>,
}

fn euler_level(spec: &str, upwind_recon: Reconstruction) -> Result<EulerLevel> {
    let (time_name, disc_name) = spec.split_once(':').unwrap_or((spec, ""));
    let time_key: String = time_name.to_ascii_lowercase().chars().filter(|c| c.is_ascii_alphanumeric()).collect();
    let time = match time_key.as_str() {
        "imex1" => TimeScheme::Convex(ConvexScheme::imex1()),
        "imex14" => TimeScheme::Convex(ConvexScheme::imex1_4()),
        "imex3" => TimeScheme::Plain(tableaux::builtin(SchemeId::Tvd3Family(tableaux::GAMMA_OPT))?),
        "imex34" => TimeScheme::Plain(tableaux::builtin(SchemeId::Tvd3x4)?),
        "ars233" | "ars223" => TimeScheme::Plain(tableaux::builtin(SchemeId::Ars233)?),
        "tvd3" => TimeScheme::Convex(ConvexScheme::tvd3_default()),
        "tvd34" => TimeScheme::Convex(ConvexScheme::tvd3_4()),
        _ => return Err(Error::UnknownScheme(spec.to_string())),
    };
    let default_disc = if matches!(time, TimeScheme::Plain(_)) { SpaceDisc::RsImex } else { SpaceDisc::Upwind };
    let disc = match disc_name.to_ascii_lowercase().as_str() {
        "" => default_disc,
        "rs" | "rs_imex" | "rsimex" => SpaceDisc::RsImex,
        "upwind" | "up" => SpaceDisc::Upwind,
        other => return Err(Error::UnknownScheme(format!("space discretisation '{other}'"))),
    };
    let reconstruction = match disc {
        SpaceDisc::RsImex => Reconstruction::Unlimited3,
        SpaceDisc::Upwind => upwind_recon,
    };
    Ok(EulerLevel { name: format!("{}:{}", time_key, if disc == SpaceDisc::RsImex { "rs" } else { "upwind" }), time, disc, reconstruction })
}

impl EulerMethod {
    /// Resolves a method name.
    ///
    /// Single levels are `scheme[:rs|:upwind]`; high-order tableaux default
    /// to the reference-solution discretisation, certified schemes to the
    /// upwind one. `mood3_4` is IMEX3(4):rs > TVD3(4):rs > TVD3(4):upwind,
    /// `ars_mood` is ARS(2,3,3):rs > TVD3(4):upwind, and any `a>b>...`
    /// chain is accepted.
    pub fn named(name: &str, upwind_recon: Reconstruction) -> Result<Self> {
        let key = name.trim().to_ascii_lowercase().replace(['(', ')'], "");
        let chain: Vec<&str> = match key.as_str() {
            "mood34" | "mood3_4" => vec!["imex3_4:rs", "tvd3_4:rs", "tvd3_4:upwind"],
            "mood3" => vec!["imex3:rs", "tvd3:rs", "tvd3:upwind"],
            "ars_mood" | "arsmood" | "ars-mood" => vec!["ars233:rs", "tvd3_4:upwind"],
            k => k.split('>').collect(),
        };
        let levels = chain.iter().map(|s| euler_level(s.trim(), upwind_recon)).collect::<Result<Vec<_>>>()?;
        Ok(Self { name: name.to_string(), levels })
    }
}

/// Setup of one Euler run.
#[derive(Debug, Clone, Serialize)]
pub struct EulerRunConfig {
    pub case: EulerCase,
    pub mach: f64,
    pub gamma: f64,
    pub n: usize,
    pub cfl_mode: CflMode,
    pub nu: f64,
    pub t_final: f64,
    /// Equal steps instead of the CFL formula.
    pub fixed_steps: Option<usize>,
}

impl EulerRunConfig {
    /// Case defaults at Mach number `mach`.
    pub fn for_case(case: EulerCase, mach: f64) -> Self {
        Self {
            case,
            mach,
            gamma: 1.4,
            n: case.default_n(),
            cfl_mode: CflMode::Material,
            nu: case.default_nu(),
            t_final: case.default_t_final(mach),
            fixed_steps: case.default_steps(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EulerRunResult {
    pub initial: EulerState2D,
    pub state: EulerState2D,
    pub steps: usize,
    pub t_final: f64,
    pub stats: MoodStats,
    /// Mass at every step, index 0 is the initial mass.
    pub mass: Vec<f64>,
}

fn euler_dt(mode: CflMode, nu: f64, s: &EulerState2D, params: &EulerParams) -> f64 {
    let h = s.grid.dx.min(s.grid.dy);
    match mode {
        CflMode::Material => cfl_dt_euler(nu, h, s.max_normal_speed()),
        CflMode::Acoustic => {
            let speed = (0..s.rho.len())
                .map(|c| {
                    let un = (s.mom_x[c] / s.rho[c]).abs().max((s.mom_y[c] / s.rho[c]).abs());
                    un + params.sound_speed(s.rho[c]) / params.mach
                })
                .fold(0.0, f64::max);
            cfl_dt_acoustic(nu, h, speed)
        }
    }
}

/// Runs an Euler method from the case's initial data.
pub fn run_euler(method: &EulerMethod, cfg: &EulerRunConfig) -> Result<EulerRunResult> {
    let initial = init_case(cfg.case, cfg.mach, cfg.gamma, cfg.n)?;
    run_euler_from(method, cfg, initial)
}

/// Runs an Euler method from a given state.
pub fn run_euler_from(method: &EulerMethod, cfg: &EulerRunConfig, initial: EulerState2D) -> Result<EulerRunResult> {
    if !(cfg.t_final > 0.0) {
        return Err(Error::Domain("final time must be positive".into()));
    }
    let grid = initial.grid;
    let params = EulerParams::new(cfg.mach, cfg.gamma, initial.mean_density())?;
    let problems: Vec<EulerProblem> =
        method.levels.iter().map(|l| EulerProblem::new(grid, params, l.disc, l.reconstruction)).collect();
    let levels: Vec<MoodLevel<'_>> = method
        .levels
        .iter()
        .zip(&problems)
        .map(|(l, p)| MoodLevel { name: l.name.clone(), scheme: &l.time, problem: p })
        .collect();
    let w0 = initial.to_vec();
    let detector = RiemannInvariantDetector { params, cells: grid.cells() };
    let mut h = MoodHierarchy::new(levels, Box::new(detector), EULER_XI, true, &w0)?;

    let mut w = w0;
    let mut t = 0.0;
    let mut steps = 0;
    let mut mass = vec![initial.total_mass()];
    let fixed_dt = cfg.fixed_steps.map(|k| cfg.t_final / k as f64);
    while t < cfg.t_final * (1.0 - 1e-12) {
        let state = EulerState2D::from_vec(grid, &w)?;
        let mut dt = fixed_dt.unwrap_or_else(|| euler_dt(cfg.cfl_mode, cfg.nu, &state, &params));
        if t + dt > cfg.t_final * (1.0 - 1e-12) {
            dt = cfg.t_final - t;
        }
        let out = h.step(t, dt, &w)?;
        w = out.state;
        t = if cfg.fixed_steps.is_some() { (steps + 1) as f64 * fixed_dt.unwrap_or(dt) } else { t + dt };
        steps += 1;
        mass.push(w[..grid.cells()].iter().sum::<f64>() * grid.cell_volume());
    }
    let state = EulerState2D::from_vec(grid, &w)?;
    Ok(EulerRunResult { initial, state, steps, t_final: t, stats: h.into_stats(), mass })
}

/// L² errors `(density, momentum norm)` against a reference state.
pub fn l2_errors(s: &EulerState2D, reference: &EulerState2D) -> (f64, f64) {
    let vol = s.grid.cell_volume();
    let dr: Vec<f64> = s.rho.iter().zip(&reference.rho).map(|(a, b)| a - b).collect();
    let dm: Vec<f64> = s.momentum_norm().iter().zip(reference.momentum_norm()).map(|(a, b)| a - b).collect();
    (metrics::l2(&dr, vol), metrics::l2(&dm, vol))
}

/// `L²(ρ - ρ̄)` with `ρ̄` the mean density.
pub fn density_deviation(s: &EulerState2D) -> f64 {
    let mean = s.mean_density();
    let d: Vec<f64> = s.rho.iter().map(|r| r - mean).collect();
    metrics::l2(&d, s.grid.cell_volume())
}

/// CSV snapshot with columns `x,y,rho,mom_x,mom_y,omega`.
pub fn snapshot_csv(s: &EulerState2D) -> String {
    let omega = vorticity(s);
    let g = s.grid;
    let mut out = String::from("x,y,rho,mom_x,mom_y,omega\n");
    for j in 0..g.ny {
        for i in 0..g.nx {
            let c = i + g.nx * j;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                metrics::fmt12(g.x(i)),
                metrics::fmt12(g.y(j)),
                metrics::fmt12(s.rho[c]),
                metrics::fmt12(s.mom_x[c]),
                metrics::fmt12(s.mom_y[c]),
                metrics::fmt12(omega[c])
            );
        }
    }
    out
}

/// Binary snapshot: 8 header values `(Nx, Ny, dx, dy, t, M, γ, case id)`
/// followed by `ρ`, `ρu_x`, `ρu_y`, all little-endian `f64`, row-major.
pub fn snapshot_binary(s: &EulerState2D, t: f64, params: &EulerParams, case: EulerCase) -> Vec<u8> {
    let g = s.grid;
    let header = [g.nx as f64, g.ny as f64, g.dx, g.dy, t, params.mach, params.gamma, case.id()];
    header
        .iter()
        .chain(&s.rho)
        .chain(&s.mom_x)
        .chain(&s.mom_y)
        .flat_map(|v| v.to_le_bytes())
        .collect()
}

/// Reads a binary snapshot back as `(header, state)`.
pub fn read_snapshot_binary(bytes: &[u8], boundary: Boundary) -> Result<([f64; 8], EulerState2D)> {
    if bytes.len() % 8 != 0 || bytes.len() < 64 {
        return Err(Error::Shape("truncated snapshot".into()));
    }
    let vals: Vec<f64> =
        bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    let mut header = [0.0; 8];
    header.copy_from_slice(&vals[..8]);
    let (nx, ny) = (header[0] as usize, header[1] as usize);
    let grid = Grid2D { nx, ny, x0: 0.0, y0: 0.0, dx: header[2], dy: header[3], boundary };
    let state = EulerState2D::from_vec(grid, &vals[8..])?;
    Ok((header, state))
}

pub fn write_snapshot_files(dir: &Path, stem: &str, s: &EulerState2D, t: f64, params: &EulerParams, case: EulerCase) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(format!("{stem}.csv")), snapshot_csv(s))?;
    let mut f = std::fs::File::create(dir.join(format!("{stem}.bin")))?;
    f.write_all(&snapshot_binary(s, t, params, case))?;
    Ok(())
}
