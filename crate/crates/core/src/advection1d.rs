//! The scalar two-scale advection problem `w_t + c_m w_x + (c_a/ε) w_x = 0`
//! on a periodic grid.
//!
//! The slow speed `c_m` is integrated explicitly, the fast one `c_a/ε`
//! implicitly. Explicit derivatives use an upwind flux on reconstructed
//! interface values, implicit derivatives are first-order upwind or central.

use serde::{Deserialize, Serialize};

use crate::certify::ConvexScheme;
use crate::linalg::{solve_cyclic_tridiagonal, solve_cyclic_upwind};
use crate::metrics::{self, Range};
use crate::mood::{MoodHierarchy, MoodLevel, MoodStats, ScalarBoundsDetector};
use crate::reconstruct::{face_pair, Reconstruction};
use crate::stepper::{step_count, SemiDiscreteProblem, TimeScheme};
use crate::tableaux::{self, SchemeId};
use crate::{Error, Result};

/// Physical and grid parameters of the scalar problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarProblemSpec {
    pub c_m: f64,
    pub c_a: f64,
    pub epsilon: f64,
    pub length: f64,
    pub n: usize,
}

impl ScalarProblemSpec {
    pub fn new(c_m: f64, c_a: f64, epsilon: f64, length: f64, n: usize) -> Result<Self> {
        if !(c_m > 0.0 && c_a > 0.0 && epsilon > 0.0 && length > 0.0) {
            return Err(Error::Domain("c_m, c_a, epsilon and length must be positive".into()));
        }
        if n < 3 {
            return Err(Error::Domain(format!("need at least 3 cells, got {n}")));
        }
        Ok(Self { c_m, c_a, epsilon, length, n })
    }

    /// Bump test: domain `(0, c_m + c_a/ε)` with `N = round(length/Δx)`.
    pub fn discontinuous(epsilon: f64, dx: f64) -> Result<Self> {
        let length = 1.0 + 1.0 / epsilon;
        Self::new(1.0, 1.0, epsilon, length, (length / dx).round() as usize)
    }

    /// Sine test: one wavelength `1/ε` on `n` cells.
    pub fn smooth(epsilon: f64, n: usize) -> Result<Self> {
        Self::new(1.0, 1.0, epsilon, 1.0 / epsilon, n)
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Fast speed `c_a/ε`.
    pub fn fast_speed(&self) -> f64 {
        self.c_a / self.epsilon
    }

    /// Total speed of the exact solution.
    pub fn total_speed(&self) -> f64 {
        self.c_m + self.fast_speed()
    }

    pub fn cell_center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dx()
    }
}

/// Cell averages with their cell size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridField1D {
    pub values: Vec<f64>,
    pub dx: f64,
}

impl GridField1D {
    pub fn new(values: Vec<f64>, dx: f64) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::Shape(format!("need at least 3 cells, got {}", values.len())));
        }
        if !(dx > 0.0) {
            return Err(Error::Domain(format!("dx must be positive, got {dx}")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("grid field"));
        }
        Ok(Self { values, dx })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `-speed (w_j - w_{j-1}) / Δx` with periodic wrap.
pub fn upwind_op(w: &[f64], speed: f64, dx: f64, out: &mut [f64]) {
    let n = w.len();
    let k = speed / dx;
    for j in 0..n {
        out[j] = -k * (w[j] - w[(j + n - 1) % n]);
    }
}

/// `-speed (w_{j+1} - w_{j-1}) / (2Δx)` with periodic wrap.
pub fn central_op(w: &[f64], speed: f64, dx: f64, out: &mut [f64]) {
    let n = w.len();
    let k = 0.5 * speed / dx;
    for j in 0..n {
        out[j] = -k * (w[(j + 1) % n] - w[(j + n - 1) % n]);
    }
}

/// Upwind flux difference on reconstructed right interface values.
pub fn reconstructed_upwind_op(mode: Reconstruction, w: &[f64], speed: f64, dx: f64, out: &mut [f64]) {
    let n = w.len();
    let plus: Vec<f64> = (0..n)
        .map(|j| face_pair(mode, w[(j + n - 1) % n], w[j], w[(j + 1) % n]).1)
        .collect();
    let k = speed / dx;
    for j in 0..n {
        out[j] = -k * (plus[j] - plus[(j + n - 1) % n]);
    }
}

/// Interface values `(w_{j,-}, w_{j,+})` of every cell.
pub fn reconstruct3(mode: Reconstruction, field: &GridField1D) -> Result<(Vec<f64>, Vec<f64>)> {
    if field.len() < 5 && mode != Reconstruction::FirstOrder {
        return Err(Error::Shape("third-order reconstruction needs N >= 5".into()));
    }
    let n = field.len();
    let mut minus = vec![0.0; n];
    let mut plus = vec![0.0; n];
    crate::reconstruct::reconstruct_periodic(mode, &field.values, &mut minus, &mut plus);
    Ok((minus, plus))
}

/// Solves `x_j + nu (x_j - x_{j-1}) = rhs_j` exactly.
pub fn implicit_solve_upwind(nu: f64, rhs: &GridField1D) -> Result<GridField1D> {
    let mut out = vec![0.0; rhs.len()];
    solve_cyclic_upwind(nu, &rhs.values, &mut out)?;
    Ok(GridField1D { values: out, dx: rhs.dx })
}

/// Implicit space discretisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImplicitSpace {
    Upwind,
    Central,
}

/// The semi-discrete scalar problem for one space discretisation.
#[derive(Debug, Clone, Copy)]
pub struct ScalarAdvection {
    pub spec: ScalarProblemSpec,
    pub explicit: Reconstruction,
    pub implicit: ImplicitSpace,
}

impl ScalarAdvection {
    pub fn new(spec: ScalarProblemSpec, explicit: Reconstruction, implicit: ImplicitSpace) -> Self {
        Self { spec, explicit, implicit }
    }
}

impl SemiDiscreteProblem for ScalarAdvection {
    fn dim(&self) -> usize {
        self.spec.n
    }

    fn explicit_op(&self, _t: f64, w: &[f64], out: &mut [f64]) {
        let dx = self.spec.dx();
        match self.explicit {
            Reconstruction::FirstOrder => upwind_op(w, self.spec.c_m, dx, out),
            mode => reconstructed_upwind_op(mode, w, self.spec.c_m, dx, out),
        }
    }

    fn implicit_op(&self, _t: f64, w: &[f64], out: &mut [f64]) {
        let dx = self.spec.dx();
        match self.implicit {
            ImplicitSpace::Upwind => upwind_op(w, self.spec.fast_speed(), dx, out),
            ImplicitSpace::Central => central_op(w, self.spec.fast_speed(), dx, out),
        }
    }

    fn implicit_solve(&self, _t: f64, nu: f64, rhs: &[f64], out: &mut [f64]) -> Result<()> {
        let mu = nu * self.spec.fast_speed() / self.spec.dx();
        match self.implicit {
            ImplicitSpace::Upwind => solve_cyclic_upwind(mu, rhs, out),
            ImplicitSpace::Central => {
                if nu == 0.0 {
                    out.copy_from_slice(rhs);
                    return Ok(());
                }
                let n = rhs.len();
                let k = 0.5 * mu;
                solve_cyclic_tridiagonal(&vec![-k; n], &vec![1.0; n], &vec![k; n], rhs, out)
            }
        }
    }
}

/// Sine solution `1 + ε/2 (1 + sin(2πε(x - (c_m + c_a/ε) t)))`.
pub fn exact_smooth(spec: &ScalarProblemSpec, t: f64, x: f64) -> f64 {
    let e = spec.epsilon;
    let k = 2.0 * std::f64::consts::PI * e;
    1.0 + 0.5 * e * (1.0 + (k * (x - spec.total_speed() * t)).sin())
}

/// Exact cell average of [`exact_smooth`] on cell `j`.
pub fn exact_smooth_average(spec: &ScalarProblemSpec, t: f64, j: usize) -> f64 {
    let e = spec.epsilon;
    let k = 2.0 * std::f64::consts::PI * e;
    let half = 0.5 * k * spec.dx();
    let damp = if half == 0.0 { 1.0 } else { half.sin() / half };
    let x = spec.cell_center(j);
    1.0 + 0.5 * e * (1.0 + damp * (k * (x - spec.total_speed() * t)).sin())
}

/// Rectangular bump of height ε on the middle half of the domain, advected
/// with the total speed.
///
/// The printed membership test divides the shifted position by the domain
/// length before taking the fractional part, which places the bump on
/// `(L/4, 3L/4)` as stated.
pub fn exact_discontinuous(spec: &ScalarProblemSpec, t: f64, x: f64) -> f64 {
    let l = spec.length;
    let phase = (x - spec.total_speed() * t) / l;
    let frac = phase - phase.floor();
    if frac > 0.25 && frac < 0.75 {
        1.0 + spec.epsilon
    } else {
        1.0
    }
}

/// Exact cell average of [`exact_discontinuous`] on cell `j`.
pub fn exact_discontinuous_average(spec: &ScalarProblemSpec, t: f64, j: usize) -> f64 {
    let l = spec.length;
    let dx = spec.dx();
    let shift = (spec.total_speed() * t).rem_euclid(l);
    let a = j as f64 * dx - shift;
    let b = a + dx;
    // Overlap of [a, b] with the periodic copies of (L/4, 3L/4).
    let mut covered = 0.0;
    let first = ((a - 0.75 * l) / l).floor() as i64;
    for m in first..=first + 2 {
        let lo = 0.25 * l + m as f64 * l;
        let hi = 0.75 * l + m as f64 * l;
        covered += (b.min(hi) - a.max(lo)).max(0.0);
    }
    // Snap roundoff so fully covered or empty cells hold the exact states.
    let frac = covered / dx;
    let frac = if frac < 1e-12 { 0.0 } else if frac > 1.0 - 1e-12 { 1.0 } else { frac };
    1.0 + spec.epsilon * frac
}

/// Initial data of the scalar experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialData {
    Smooth,
    Discontinuous,
}

impl std::str::FromStr for InitialData {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "smooth" | "sine" => Ok(InitialData::Smooth),
            "discontinuous" | "bump" | "step" => Ok(InitialData::Discontinuous),
            _ => Err(Error::UnknownCase(s.to_string())),
        }
    }
}

impl InitialData {
    pub fn cell_averages(self, spec: &ScalarProblemSpec, t: f64) -> Vec<f64> {
        (0..spec.n)
            .map(|j| match self {
                InitialData::Smooth => exact_smooth_average(spec, t, j),
                InitialData::Discontinuous => exact_discontinuous_average(spec, t, j),
            })
            .collect()
    }
}

/// One level of a scalar method: time scheme and space discretisation.
#[derive(Debug, Clone, Serialize)]
pub struct ScalarLevel {
    pub name: String,
    pub time: TimeScheme,
    pub explicit: Reconstruction,
    pub implicit: ImplicitSpace,
}

/// Knobs shared by the named scalar methods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodOptions {
    /// Explicit reconstruction of the certified TVD levels.
    pub parachute_reconstruction: Reconstruction,
    /// Force first-order upwind in space on every level.
    pub upwind_only: bool,
    /// Relaxation of the MOOD threshold.
    pub xi: f64,
}

impl Default for MethodOptions {
    fn default() -> Self {
        Self { parachute_reconstruction: Reconstruction::FirstOrder, upwind_only: false, xi: 0.0 }
    }
}

/// A scalar method: one level, or a MOOD cascade of several.
#[derive(Debug, Clone, Serialize)]
pub struct ScalarMethod {
    pub name: String,
    pub levels: Vec<ScalarLevel>,
    pub xi: f64,
}

fn plain(id: SchemeId) -> Result<TimeScheme> {
    Ok(TimeScheme::Plain(tableaux::builtin(id)?))
}

fn level(name: &str, opts: &MethodOptions) -> Result<ScalarLevel> {
    let high = (Reconstruction::Unlimited3, ImplicitSpace::Central);
    let tvd = (opts.parachute_reconstruction, ImplicitSpace::Upwind);
    let first = (Reconstruction::FirstOrder, ImplicitSpace::Upwind);
    let (time, (explicit, implicit)) = match name {
        "imex1" => (TimeScheme::Convex(ConvexScheme::imex1()), first),
        "imex1_4" => (TimeScheme::Convex(ConvexScheme::imex1_4()), first),
        "imex3" => (plain(SchemeId::Tvd3Family(tableaux::GAMMA_OPT))?, high),
        "imex3_4" => (plain(SchemeId::Tvd3x4)?, high),
        "ars233" => (plain(SchemeId::Ars233)?, high),
        "tvd3" => (TimeScheme::Convex(ConvexScheme::tvd3_default()), tvd),
        "tvd3_4" => (TimeScheme::Convex(ConvexScheme::tvd3_4()), tvd),
        other => return Err(Error::UnknownScheme(other.to_string())),
    };
    let (explicit, implicit) =
        if opts.upwind_only { (Reconstruction::FirstOrder, ImplicitSpace::Upwind) } else { (explicit, implicit) };
    Ok(ScalarLevel { name: name.to_string(), time, explicit, implicit })
}

fn canonical(name: &str) -> String {
    let key: String = name
        .trim()
        .to_ascii_lowercase()
        .chars()
        .filter(|c| !matches!(c, '(' | ')' | ',' | '-' | '_' | ' '))
        .collect();
    match key.as_str() {
        "imex14" => "imex1_4".into(),
        "imex34" => "imex3_4".into(),
        "tvd34" => "tvd3_4".into(),
        "ars223" | "ars233" => "ars233".into(),
        "mood34" => "mood3_4".into(),
        "mood34/imex14" => "mood3_4/imex1_4".into(),
        k if k.contains('>') => k.split('>').map(canonical).collect::<Vec<_>>().join(">"),
        other => other.to_string(),
    }
}

impl ScalarMethod {
    /// Resolves a method by name.
    ///
    /// Single levels: `imex1`, `imex1_4`, `imex3`, `imex3_4`, `ars233`,
    /// `tvd3`, `tvd3_4`. Cascades: `mood3` (IMEX3 then TVD3), `mood3_4`
    /// (IMEX3(4) then TVD3(4)), `mood3_4/imex1_4` (IMEX3(4) then IMEX1(4)),
    /// or any `a>b>c` chain of single levels.
    pub fn named(name: &str, opts: &MethodOptions) -> Result<Self> {
        let key = canonical(name);
        let chain: Vec<String> = match key.as_str() {
            "mood3" => vec!["imex3".into(), "tvd3".into()],
            "mood3_4" => vec!["imex3_4".into(), "tvd3_4".into()],
            "mood3_4/imex1_4" => vec!["imex3_4".into(), "imex1_4".into()],
            k if k.contains('>') => k.split('>').map(String::from).collect(),
            k => vec![k.to_string()],
        };
        let levels = chain.iter().map(|n| level(n, opts)).collect::<Result<Vec<_>>>()?;
        Ok(Self { name: name.to_string(), levels, xi: opts.xi })
    }

    pub fn is_mood(&self) -> bool {
        self.levels.len() > 1
    }
}

/// Setup of one scalar run.
#[derive(Debug, Clone, Serialize)]
pub struct ScalarRunConfig {
    pub spec: ScalarProblemSpec,
    pub initial: InitialData,
    pub dt: f64,
    pub t_final: f64,
}

/// Result of a scalar run.
#[derive(Debug, Clone, Serialize)]
pub struct ScalarRunResult {
    pub state: Vec<f64>,
    pub exact: Vec<f64>,
    pub dx: f64,
    pub steps: usize,
    pub t_final: f64,
    /// Range of the numerical solution, index 0 is the initial data.
    pub ranges: Vec<Range>,
    /// Range of the exact cell averages at the same times.
    pub exact_ranges: Vec<Range>,
    /// MOOD statistics; a single-level method reports level 0 throughout.
    pub stats: MoodStats,
}

impl ScalarRunResult {
    /// Largest excursion outside the initial range over the run.
    pub fn max_bound_violation(&self) -> f64 {
        let r0 = self.ranges[0];
        self.ranges.iter().map(|r| (r.max - r0.max).max(r0.min - r.min)).fold(0.0, f64::max)
    }

    /// Errors of the final state against the exact cell averages.
    pub fn error_field(&self) -> Vec<f64> {
        self.state.iter().zip(&self.exact).map(|(a, b)| a - b).collect()
    }
}

/// Runs `method` with equal steps of size at most `cfg.dt` up to `t_final`.
pub fn run_scalar(method: &ScalarMethod, cfg: &ScalarRunConfig) -> Result<ScalarRunResult> {
    let spec = cfg.spec;
    let problems: Vec<ScalarAdvection> =
        method.levels.iter().map(|l| ScalarAdvection::new(spec, l.explicit, l.implicit)).collect();
    let levels: Vec<MoodLevel<'_>> = method
        .levels
        .iter()
        .zip(&problems)
        .map(|(l, p)| MoodLevel { name: l.name.clone(), scheme: &l.time, problem: p })
        .collect();

    let w0 = cfg.initial.cell_averages(&spec, 0.0);
    let detector = ScalarBoundsDetector::from_initial(&w0);
    let mut hierarchy = MoodHierarchy::new(levels, Box::new(detector), method.xi, false, &w0)?;

    let steps = step_count(cfg.dt, cfg.t_final);
    let dt = cfg.t_final / steps as f64;
    let mut w = w0;
    let mut ranges = vec![metrics::range(&w)];
    let mut exact_ranges = vec![metrics::range(&cfg.initial.cell_averages(&spec, 0.0))];
    let mut t = 0.0;
    for n in 0..steps {
        let out = hierarchy.step(t, dt, &w)?;
        w = out.state;
        t = (n + 1) as f64 * dt;
        ranges.push(metrics::range(&w));
        exact_ranges.push(metrics::range(&cfg.initial.cell_averages(&spec, t)));
    }
    let exact = cfg.initial.cell_averages(&spec, t);
    Ok(ScalarRunResult {
        state: w,
        exact,
        dx: spec.dx(),
        steps,
        t_final: t,
        ranges,
        exact_ranges,
        stats: hierarchy.into_stats(),
    })
}
