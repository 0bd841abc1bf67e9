//! Multistart search for certifiable convex tableaux maximising `λ + Σθ`.
//!
//! The order conditions are eliminated in closed form, so every trial point
//! is a third-order tableau and the search only handles the certificate
//! inequalities, which enter through an exact penalty. The local solver is
//! Nelder–Mead; restarts are independent and merged by restart index, so the
//! result depends on the seed only.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::certify::{certificate, lemma1_theta3_opt, theorem1_certificate, ConvexScheme, LAMBDA_CAP};
use crate::tableaux::{self, order_check, ImexTableau};
use crate::{Error, Result};

/// Largest order-condition residual accepted for a returned scheme.
pub const ORDER_RESIDUAL_TOL: f64 = 1e-10;
const PENALTY: f64 = 1e3;
const STRICT_MARGIN: f64 = 1e-8;
const BAD: f64 = 1e6;

/// Search settings.
#[derive(Debug, Clone, Serialize)]
pub struct OptProblem {
    /// Stage count of the high-order tableau (3 or 4).
    pub stages: usize,
    pub lambda_floor: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Function evaluations per local search.
    pub max_evals: usize,
    /// Local searches around the incumbent after the random phase.
    pub refinements: usize,
}

impl OptProblem {
    pub fn new(stages: usize, lambda_floor: f64, restarts: usize, seed: u64) -> Self {
        Self { stages, lambda_floor, restarts, seed, max_evals: 4000, refinements: 8 }
    }

    fn validate(&self) -> Result<()> {
        if !(3..=4).contains(&self.stages) {
            return Err(Error::Domain(format!("stage count must be 3 or 4, got {}", self.stages)));
        }
        if self.restarts == 0 {
            return Err(Error::Domain("at least one restart is needed".into()));
        }
        if !(self.lambda_floor >= 0.0 && self.lambda_floor < LAMBDA_CAP) {
            return Err(Error::Domain(format!("lambda floor {} out of range", self.lambda_floor)));
        }
        Ok(())
    }
}

/// Best scheme found, with its certificate data.
#[derive(Debug, Clone, Serialize)]
pub struct OptResult {
    pub scheme: ConvexScheme,
    pub lambda: f64,
    pub objective: f64,
    pub order_residual: f64,
    pub binding_constraints: Vec<String>,
    /// Free parameters of the winning point.
    pub params: Vec<f64>,
    /// Restart that produced the winner (`restarts + k` for refinement `k`).
    pub best_restart: usize,
    /// Incumbent objective after each restart, in restart order.
    pub incumbent: Vec<f64>,
}

impl OptResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Maps free parameters to a tableau and θ.
trait Family: Sync {
    fn build(&self, x: &[f64]) -> Option<(ImexTableau, Vec<f64>)>;
    fn random_start(&self, rng: &mut ChaCha8Rng) -> Vec<f64>;
    /// Distance outside the parameter box.
    fn box_violation(&self, x: &[f64]) -> f64;
}

fn outside(v: f64, lo: f64, hi: f64) -> f64 {
    (lo - v).max(0.0) + (v - hi).max(0.0)
}

/// Four stages with shared abscissae and weights, explicit first stage and
/// zero first implicit column. Free: `c₂, c₃, c₄, a₃₃, a₄₄, ã₃₂, ã₄₃` and
/// `θ₂..θ₅`.
pub struct FourStage;

impl FourStage {
    /// Free parameters of a tableau of this form, followed by θ₂..θ₅.
    pub fn params_of(t: &ImexTableau, theta: &[f64]) -> Result<Vec<f64>> {
        if t.s != 4 || theta.len() != 5 {
            return Err(Error::Shape("expected a four-stage tableau with five weights".into()));
        }
        let c = &t.c_im;
        let mut x = vec![c[1], c[2], c[3], t.a_im[2][2], t.a_im[3][3], t.a_ex[2][1], t.a_ex[3][2]];
        x.extend_from_slice(&theta[1..]);
        Ok(x)
    }
}

fn tableau4(p: &[f64]) -> Option<ImexTableau> {
    let (c2, c3, c4, a33, a44, e32, e43) = (p[0], p[1], p[2], p[3], p[4], p[5], p[6]);
    // b from Σb = 1, b·c = 1/2, b·c² = 1/3 with b₁ = 0.
    let m = solve3(
        [[1.0, 1.0, 1.0], [c2, c3, c4], [c2 * c2, c3 * c3, c4 * c4]],
        [1.0, 0.5, 1.0 / 3.0],
    )?;
    let (b2, b3, b4) = (m[0], m[1], m[2]);
    if b4.abs() < 1e-12 || (c3 - c2).abs() < 1e-12 {
        return None;
    }
    // b·Ãc = 1/6 fixes ã₄₂.
    let e42 = (1.0 / 6.0 - b3 * e32 * c2 - b4 * e43 * c3) / (b4 * c2);
    let e31 = c3 - e32;
    let e41 = c4 - e42 - e43;
    // b·Ac = 1/6 with a₄₂ + a₄₃ = c₄ - a₄₄.
    let a22 = c2;
    let a32 = c3 - a33;
    let rest = 1.0 / 6.0 - b2 * a22 * c2 - b3 * (a32 * c2 + a33 * c3) - b4 * a44 * c4;
    let x = rest / b4;
    let sum = c4 - a44;
    let a43 = (x - c2 * sum) / (c3 - c2);
    let a42 = sum - a43;
    let b = vec![0.0, b2, b3, b4];
    let t = ImexTableau::from_parts(
        vec![vec![], vec![c2], vec![e31, e32], vec![e41, e42, e43]],
        vec![vec![0.0], vec![0.0, a22], vec![0.0, a32, a33], vec![0.0, a42, a43, a44]],
        b.clone(),
        b,
    )
    .ok()?;
    Some(t)
}

/// Cramer's rule for a 3×3 system; `None` when nearly singular.
fn solve3(m: [[f64; 3]; 3], r: [f64; 3]) -> Option<[f64; 3]> {
    let det = |a: &[[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d = det(&m);
    if !(d.abs() > 1e-14) {
        return None;
    }
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let mut mk = m;
        for i in 0..3 {
            mk[i][k] = r[i];
        }
        *o = det(&mk) / d;
    }
    Some(out)
}

impl Family for FourStage {
    fn build(&self, x: &[f64]) -> Option<(ImexTableau, Vec<f64>)> {
        let t = tableau4(&x[..7])?;
        let mut theta = vec![1.0];
        theta.extend(x[7..].iter().map(|v| v.clamp(0.0, 1.0)));
        Some((t, theta))
    }

    fn random_start(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut c: Vec<f64> = (0..3).map(|_| rng.random_range(0.05..1.0)).collect();
        c.sort_by(f64::total_cmp);
        let mut x = c;
        x.push(rng.random_range(0.0..0.5) * x[1]);
        x.push(rng.random_range(0.0..0.5) * x[2]);
        x.push(rng.random_range(0.0..1.0) * x[1]);
        x.push(rng.random_range(0.0..1.0) * x[2]);
        for _ in 0..4 {
            x.push(rng.random_range(0.3..1.0));
        }
        x
    }

    fn box_violation(&self, x: &[f64]) -> f64 {
        let coeffs: f64 = x[..7].iter().map(|&v| outside(v, -3.0, 3.0)).sum();
        let theta: f64 = x[7..].iter().map(|&v| outside(v, 0.0, 1.0)).sum();
        coeffs + theta
    }
}

/// Three-stage γ family with free `γ, θ₃, θ₄`.
pub struct ThreeStage;

impl Family for ThreeStage {
    fn build(&self, x: &[f64]) -> Option<(ImexTableau, Vec<f64>)> {
        let t = tableaux::build_tvd3_family(x[0]).ok()?;
        Some((t, vec![1.0, 1.0, x[1].clamp(0.0, 1.0), x[2].clamp(0.0, 1.0)]))
    }

    fn random_start(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        vec![rng.random_range(0.6..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..0.6)]
    }

    fn box_violation(&self, x: &[f64]) -> f64 {
        outside(x[0], 3f64.sqrt() / 3.0, 1.0) + outside(x[1], 0.0, 1.0) + outside(x[2], 0.0, 1.0)
    }
}

struct Eval {
    value: f64,
    objective: f64,
}

/// Penalised negative objective. Feasible points score `-(λ_max + Σθ)`.
fn evaluate(family: &dyn Family, x: &[f64], floor: f64) -> Eval {
    let bad = Eval { value: BAD, objective: f64::NEG_INFINITY };
    if x.iter().any(|v| !v.is_finite()) {
        return bad;
    }
    let Some((t, theta)) = family.build(x) else { return bad };
    let scheme = ConvexScheme { tableau: t, theta, lambda_max: 0.0 };
    let Ok(cert) = certificate(&scheme) else { return bad };
    let mut viol = family.box_violation(x);
    for c in &cert.constraints {
        let v = c.v0 + c.v1 * floor;
        if c.strict {
            viol += (STRICT_MARGIN - v).max(0.0);
        } else {
            viol += (-v).max(0.0);
        }
    }
    let lambda = cert.lambda_max_exact(LAMBDA_CAP);
    viol += (floor - lambda).max(0.0);
    let objective = lambda + scheme.theta.iter().sum::<f64>();
    Eval { value: -objective + PENALTY * viol, objective }
}

/// Nelder–Mead with dimension-adapted coefficients. Returns the best vertex
/// and its value.
pub fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], step: f64, max_evals: usize) -> (Vec<f64>, f64) {
    let n = x0.len();
    let nf = n as f64;
    let (alpha, beta, gamma, delta) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += if v[i].abs() > 1e-3 { step * v[i].abs() } else { step };
        simplex.push(v);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut evals = n + 1;
    while evals < max_evals {
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
        vals = idx.iter().map(|&i| vals[i]).collect();
        if (vals[n] - vals[0]).abs() <= 1e-13 * (1.0 + vals[0].abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / nf).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + t * (simplex[n][j] - centroid[j])).collect() };
        let xr = along(-alpha);
        let fr = f(&xr);
        evals += 1;
        if fr < vals[0] {
            let xe = along(-alpha * beta);
            let fe = f(&xe);
            evals += 1;
            if fe < fr {
                simplex[n] = xe;
                vals[n] = fe;
            } else {
                simplex[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            simplex[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[n] {
            let xc = along(-alpha * gamma);
            let fc = f(&xc);
            (xc, fc)
        } else {
            let xc = along(gamma);
            let fc = f(&xc);
            (xc, fc)
        };
        evals += 1;
        if fc < fr.min(vals[n]) {
            simplex[n] = xc;
            vals[n] = fc;
            continue;
        }
        for i in 1..=n {
            for j in 0..n {
                simplex[i][j] = simplex[0][j] + delta * (simplex[i][j] - simplex[0][j]);
            }
            vals[i] = f(&simplex[i]);
        }
        evals += n;
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).expect("nonempty simplex");
    (simplex[best].clone(), vals[best])
}

/// Repeated Nelder–Mead from the best point with shrinking steps.
fn local_search(family: &dyn Family, x0: &[f64], floor: f64, max_evals: usize) -> (Vec<f64>, f64) {
    let f = |x: &[f64]| evaluate(family, x, floor).value;
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut step = 0.1;
    for _ in 0..4 {
        let (y, fy) = nelder_mead(f, &x, step, max_evals / 4);
        if fy <= fx {
            x = y;
            fx = fy;
        }
        step *= 0.3;
    }
    (x, fx)
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn family_for(stages: usize) -> Box<dyn Family> {
    if stages == 3 {
        Box::new(ThreeStage)
    } else {
        Box::new(FourStage)
    }
}

/// Certifies a candidate and packages it; `None` if it fails any check.
fn finish(family: &dyn Family, x: &[f64], floor: f64) -> Option<(ConvexScheme, f64, f64, Vec<String>)> {
    let (t, theta) = family.build(x)?;
    if family.box_violation(x) > 0.0 {
        return None;
    }
    let order = order_check(&t, 3);
    let resid = order.max_residual();
    if resid > ORDER_RESIDUAL_TOL {
        return None;
    }
    let scheme = ConvexScheme::new(t, theta).ok()?;
    let lambda = scheme.lambda_max;
    if lambda < floor {
        return None;
    }
    let cert = theorem1_certificate(&scheme, lambda).ok()?;
    if !cert.feasible {
        return None;
    }
    let binding = cert.certificate.binding(lambda);
    Some((scheme, lambda, resid, binding))
}

fn search(problem: &OptProblem, starts: Vec<Vec<f64>>) -> Result<OptResult> {
    problem.validate()?;
    let family = family_for(problem.stages);
    let family = family.as_ref();
    let floor = problem.lambda_floor;
    let evals = problem.max_evals;

    let runs: Vec<(Vec<f64>, f64)> = starts.par_iter().map(|x0| local_search(family, x0, floor, evals)).collect();

    let mut incumbent = Vec::with_capacity(runs.len());
    let mut best: Option<(usize, Vec<f64>, f64)> = None;
    let consider = |k: usize, x: &[f64], best: &mut Option<(usize, Vec<f64>, f64)>| {
        if finish(family, x, floor).is_some() {
            let obj = evaluate(family, x, floor).objective;
            if best.as_ref().is_none_or(|b| obj > b.2) {
                *best = Some((k, x.to_vec(), obj));
            }
        }
    };
    for (k, (x, _)) in runs.iter().enumerate() {
        consider(k, x, &mut best);
        incumbent.push(best.as_ref().map_or(f64::NEG_INFINITY, |b| b.2));
    }

    // Refinement: perturbed restarts around the incumbent.
    if let Some((_, xb, _)) = best.clone() {
        let base = runs.len();
        let refined: Vec<(Vec<f64>, f64)> = (0..problem.refinements)
            .into_par_iter()
            .map(|k| {
                let mut rng = rng_for(problem.seed, (base + k) as u64);
                let x0: Vec<f64> = xb.iter().map(|v| v + 1e-3 * rng.random_range(-1.0..1.0)).collect();
                local_search(family, &x0, floor, evals)
            })
            .collect();
        for (k, (x, _)) in refined.iter().enumerate() {
            consider(base + k, x, &mut best);
            incumbent.push(best.as_ref().map_or(f64::NEG_INFINITY, |b| b.2));
        }
    }

    let (best_restart, params, _) =
        best.ok_or_else(|| Error::Infeasible(format!("no feasible scheme with lambda >= {floor} found")))?;
    let (scheme, lambda, order_residual, binding_constraints) =
        finish(family, &params, floor).expect("incumbent was certified");
    let objective = lambda + scheme.theta.iter().sum::<f64>();
    Ok(OptResult { scheme, lambda, objective, order_residual, binding_constraints, params, best_restart, incumbent })
}

/// Random multistart search.
pub fn optimize(problem: &OptProblem) -> Result<OptResult> {
    problem.validate()?;
    let family = family_for(problem.stages);
    let starts = (0..problem.restarts).map(|k| family.random_start(&mut rng_for(problem.seed, k as u64))).collect();
    search(problem, starts)
}

/// Search started from a given scheme. The first start is the point itself;
/// the others are small perturbations of it.
pub fn optimize_from(problem: &OptProblem, start: &ConvexScheme) -> Result<OptResult> {
    problem.validate()?;
    let x0 = match problem.stages {
        4 => FourStage::params_of(&start.tableau, &start.theta)?,
        _ => {
            let g = start
                .tableau
                .family_gamma
                .ok_or_else(|| Error::Structure("three-stage warm start must be a γ-family member".into()))?;
            vec![g, start.theta[2], start.theta[3]]
        }
    };
    let starts = (0..problem.restarts)
        .map(|k| {
            if k == 0 {
                return x0.clone();
            }
            let mut rng = rng_for(problem.seed, k as u64);
            x0.iter().map(|v| v + 1e-4 * rng.random_range(-1.0..1.0)).collect()
        })
        .collect();
    search(problem, starts)
}

/// γ maximising the admissible third-stage weight of the three-stage family,
/// by golden-section search on `[√3/3, 1]`.
pub fn gamma_scan_theta3() -> Result<(f64, f64)> {
    let f = |g: f64| lemma1_theta3_opt(g).unwrap_or(f64::NEG_INFINITY);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (3f64.sqrt() / 3.0, 1.0);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > 1e-12 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        }
    }
    let g = 0.5 * (a + b);
    Ok((g, lemma1_theta3_opt(g)?))
}
