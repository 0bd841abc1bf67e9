//! Subcommand bodies. Presets reuse the same runners.

use std::path::Path;

use anyhow::{bail, Context, Result};
use imex_tvd::advection1d::{run_scalar, InitialData, MethodOptions, ScalarMethod, ScalarProblemSpec, ScalarRunConfig, ScalarRunResult};
use imex_tvd::certify::{alpha_parameterization, certify_report, lemma1_theta4_max, CertifyReport, ConvexScheme};
use imex_tvd::euler2d::{
    density_deviation, l2_errors, run_euler, write_snapshot_files, EulerCase, EulerMethod, EulerParams,
    EulerRunConfig, EulerRunResult,
};
use imex_tvd::metrics::{self, eoc_table, spacetime_errors, ErrorSample, L1Weight};
use imex_tvd::reconstruct::Reconstruction;
use imex_tvd::stepper::{cfl_dt_scalar, CflMode, TimeScheme};
use imex_tvd::tab_opt::{optimize, optimize_from, OptProblem, OptResult};
use imex_tvd::tableaux::{self, ImexTableau, SchemeId, GAMMA_OPT};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::output::{slug, Artifacts, Csv};

// ---------------------------------------------------------------- scalar

/// Resolved scalar setup.
#[derive(Debug, Clone, Serialize)]
pub struct ScalarSetup {
    pub run: ScalarRunConfig,
    pub cfl_mode: CflMode,
    pub nu: f64,
}

pub fn scalar_setup(cfg: &ExperimentConfig) -> Result<ScalarSetup> {
    let eps = cfg.eps.unwrap_or(1.0);
    let initial: InitialData = cfg.initial.as_deref().unwrap_or("discontinuous").parse()?;
    let spec = match initial {
        InitialData::Discontinuous => {
            let dx = match (cfg.dx, cfg.n) {
                (Some(dx), _) => dx,
                (None, Some(n)) => (1.0 + 1.0 / eps) / n as f64,
                (None, None) => 0.1,
            };
            ScalarProblemSpec::discontinuous(eps, dx)?
        }
        InitialData::Smooth => {
            let n = match (cfg.n, cfg.dx) {
                (Some(n), _) => n,
                (None, Some(dx)) => (1.0 / (eps * dx)).round() as usize,
                (None, None) => 100,
            };
            ScalarProblemSpec::smooth(eps, n)?
        }
    };
    let cfl_mode = cfg.cfl_mode.unwrap_or(CflMode::Material);
    let nu = cfg.nu.unwrap_or(0.5);
    let dt = cfl_dt_scalar(cfl_mode, nu, spec.dx(), eps, spec.c_m, spec.c_a)?;
    let run = ScalarRunConfig { spec, initial, dt, t_final: cfg.t_final.unwrap_or(1.0) };
    Ok(ScalarSetup { run, cfl_mode, nu })
}

fn level_key(name: &str) -> String {
    let base = name.split(':').next().unwrap_or(name);
    base.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase()
}

/// Applies the γ/α/θ overrides of the configuration to one level.
fn override_time(level: &str, time: &TimeScheme, cfg: &ExperimentConfig) -> Result<TimeScheme> {
    let key = level_key(level);
    let gamma = cfg.gamma.unwrap_or(GAMMA_OPT);
    let custom_family = cfg.gamma.is_some() || cfg.alpha.is_some();
    Ok(match (key.as_str(), time) {
        ("imex3", _) if cfg.gamma.is_some() => TimeScheme::Plain(tableaux::builtin(SchemeId::Tvd3Family(gamma))?),
        ("tvd3", TimeScheme::Convex(_)) if custom_family || cfg.theta.is_some() => {
            if let Some(theta) = &cfg.theta {
                TimeScheme::Convex(ConvexScheme::new(tableaux::build_tvd3_family(gamma)?, theta.clone())?)
            } else {
                let theta4 = match cfg.alpha {
                    Some(a) => {
                        if (gamma - GAMMA_OPT).abs() > 1e-15 {
                            bail!("alpha is defined for gamma = 2/3 only");
                        }
                        alpha_parameterization(a)?.0
                    }
                    None => 0.5 * lemma1_theta4_max(gamma)?,
                };
                TimeScheme::Convex(ConvexScheme::tvd3(gamma, theta4)?)
            }
        }
        ("tvd34", TimeScheme::Convex(s)) if cfg.theta.is_some() => {
            TimeScheme::Convex(ConvexScheme::new(s.tableau.clone(), cfg.theta.clone().unwrap_or_default())?)
        }
        _ => time.clone(),
    })
}

pub fn scalar_method(name: &str, cfg: &ExperimentConfig) -> Result<ScalarMethod> {
    let mut opts = MethodOptions::default();
    if let Some(u) = cfg.upwind_only {
        opts.upwind_only = u;
    }
    if let Some(r) = cfg.parachute_reconstruction {
        opts.parachute_reconstruction = r;
    }
    let mut m = ScalarMethod::named(name, &opts)?;
    for l in &mut m.levels {
        l.time = override_time(&l.name, &l.time, cfg)?;
    }
    Ok(m)
}

/// Error summary of one scalar run.
#[derive(Debug, Clone, Serialize)]
pub struct ScalarSummary {
    pub scheme: String,
    pub n: usize,
    pub dx: f64,
    pub dt: f64,
    pub steps: usize,
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    pub l1o: f64,
    pub max_bound_violation: f64,
    pub e_st_mean: f64,
    pub e_st_max: f64,
    pub stats: imex_tvd::mood::MoodStats,
}

pub fn summarize_scalar(scheme: &str, r: &ScalarRunResult) -> Result<ScalarSummary> {
    let err = r.error_field();
    let (e_st_mean, e_st_max) = spacetime_errors(&r.exact_ranges, &r.ranges)?;
    Ok(ScalarSummary {
        scheme: scheme.to_string(),
        n: r.state.len(),
        dx: r.dx,
        dt: r.t_final / r.steps as f64,
        steps: r.steps,
        l1: metrics::l1(&err, r.dx, L1Weight::Volume),
        l2: metrics::l2(&err, r.dx),
        linf: metrics::linf(&err),
        l1o: metrics::l1o_error(&err, r.dx, &r.ranges, L1Weight::Volume),
        max_bound_violation: r.max_bound_violation(),
        e_st_mean,
        e_st_max,
        stats: r.stats.clone(),
    })
}

pub fn run_scalar_named(name: &str, cfg: &ExperimentConfig) -> Result<(ScalarSetup, ScalarRunResult)> {
    let setup = scalar_setup(cfg)?;
    let method = scalar_method(name, cfg)?;
    let r = run_scalar(&method, &setup.run).with_context(|| format!("scalar run with {name}"))?;
    Ok((setup, r))
}

pub fn advect(cfg: &ExperimentConfig) -> Result<()> {
    let scheme = cfg.scheme.clone().unwrap_or_else(|| "mood3_4".into());
    let mut art = Artifacts::new(&cfg.out_dir())?;
    let (setup, r) = art.timed(&scheme, || run_scalar_named(&scheme, cfg))?;
    let mut csv = Csv::new(&["x", "w", "exact"]);
    for (j, (w, e)) in r.state.iter().zip(&r.exact).enumerate() {
        csv.row(vec![setup.run.spec.cell_center(j).into(), (*w).into(), (*e).into()]);
    }
    art.csv("solution.csv", &csv)?;
    let summary = summarize_scalar(&scheme, &r)?;
    art.json("summary.json", &summary)?;
    art.text("stats.json", &format!("{}\n", r.stats.to_json()?))?;
    println!(
        "{scheme}: N={} steps={} L1={:.6e} L1o={:.6e} bound_violation={:.3e}",
        summary.n, summary.steps, summary.l1, summary.l1o, summary.max_bound_violation
    );
    art.finish()
}

// ----------------------------------------------------------------- euler

pub fn euler_case(cfg: &ExperimentConfig) -> Result<EulerCase> {
    Ok(cfg.problem.as_deref().unwrap_or("vortex").parse()?)
}

pub fn euler_config(case: EulerCase, cfg: &ExperimentConfig) -> EulerRunConfig {
    let mach = cfg.mach.unwrap_or(1.0);
    let mut rc = EulerRunConfig::for_case(case, mach);
    if let Some(n) = cfg.n {
        rc.n = n;
    }
    if let Some(m) = cfg.cfl_mode {
        rc.cfl_mode = m;
    }
    if let Some(nu) = cfg.nu {
        rc.nu = nu;
    }
    if let Some(t) = cfg.t_final {
        rc.t_final = t;
        rc.fixed_steps = None;
    }
    rc
}

pub fn euler_method(name: &str, cfg: &ExperimentConfig) -> Result<EulerMethod> {
    let recon = cfg.parachute_reconstruction.unwrap_or(Reconstruction::FirstOrder);
    let mut m = EulerMethod::named(name, recon)?;
    for l in &mut m.levels {
        l.time = override_time(&l.name, &l.time, cfg)?;
    }
    Ok(m)
}

#[derive(Debug, Clone, Serialize)]
pub struct EulerSummary {
    pub case: String,
    pub scheme: String,
    pub mach: f64,
    pub nx: usize,
    pub ny: usize,
    pub steps: usize,
    pub t_final: f64,
    pub relative_mass_drift: f64,
    pub density_deviation: f64,
    pub density_max: f64,
    /// L² errors against the initial state, for the stationary vortex.
    pub l2_density: Option<f64>,
    pub l2_momentum: Option<f64>,
    pub stats: imex_tvd::mood::MoodStats,
}

pub fn summarize_euler(case: EulerCase, scheme: &str, rc: &EulerRunConfig, r: &EulerRunResult) -> EulerSummary {
    let m0 = r.mass[0];
    let drift = r.mass.iter().map(|m| ((m - m0) / m0).abs()).fold(0.0, f64::max);
    let (l2d, l2m) = if case == EulerCase::Vortex {
        let (a, b) = l2_errors(&r.state, &r.initial);
        (Some(a), Some(b))
    } else {
        (None, None)
    };
    EulerSummary {
        case: case.to_string(),
        scheme: scheme.to_string(),
        mach: rc.mach,
        nx: r.state.grid.nx,
        ny: r.state.grid.ny,
        steps: r.steps,
        t_final: r.t_final,
        relative_mass_drift: drift,
        density_deviation: density_deviation(&r.state),
        density_max: r.state.rho.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        l2_density: l2d,
        l2_momentum: l2m,
        stats: r.stats.clone(),
    }
}

pub fn euler(cfg: &ExperimentConfig) -> Result<()> {
    let case = euler_case(cfg)?;
    let scheme = cfg.scheme.clone().unwrap_or_else(|| "mood3_4".into());
    let rc = euler_config(case, cfg);
    let method = euler_method(&scheme, cfg)?;
    let mut art = Artifacts::new(&cfg.out_dir())?;
    let r = art.timed(&scheme, || run_euler(&method, &rc))?;
    let params = EulerParams::new(rc.mach, rc.gamma, r.initial.mean_density())?;
    write_snapshot_files(art.dir(), "final", &r.state, r.t_final, &params, case)?;
    let summary = summarize_euler(case, &scheme, &rc, &r);
    art.json("summary.json", &summary)?;
    art.text("stats.json", &format!("{}\n", r.stats.to_json()?))?;
    println!(
        "{case} {scheme}: M={} steps={} density_deviation={:.6e} activations={:?}",
        rc.mach, r.steps, summary.density_deviation, r.stats.activations_per_level
    );
    art.finish()
}

// --------------------------------------------------------------- certify

/// Tableau file: the matrices, the weights and θ. Abscissae are the row
/// sums; a single `b` sets both weight vectors.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableauFile {
    #[serde(rename = "A_ex")]
    pub a_ex: Vec<Vec<f64>>,
    #[serde(rename = "A_im")]
    pub a_im: Vec<Vec<f64>>,
    #[serde(default)]
    pub b: Option<Vec<f64>>,
    #[serde(default)]
    pub b_ex: Option<Vec<f64>>,
    #[serde(default)]
    pub b_im: Option<Vec<f64>>,
    pub theta: Vec<f64>,
    /// λ to check; λ_max when absent.
    #[serde(default)]
    pub lambda: Option<f64>,
}

impl TableauFile {
    pub fn from_scheme(s: &ConvexScheme) -> Self {
        let t = &s.tableau;
        let same = t.b_ex == t.b_im;
        TableauFile {
            a_ex: t.a_ex.clone(),
            a_im: t.a_im.clone(),
            b: same.then(|| t.b_ex.clone()),
            b_ex: (!same).then(|| t.b_ex.clone()),
            b_im: (!same).then(|| t.b_im.clone()),
            theta: s.theta.clone(),
            lambda: None,
        }
    }

    pub fn scheme(&self) -> Result<ConvexScheme> {
        let (b_ex, b_im) = match (&self.b, &self.b_ex, &self.b_im) {
            (Some(b), None, None) => (b.clone(), b.clone()),
            (None, Some(e), Some(i)) => (e.clone(), i.clone()),
            _ => bail!("give either `b` or both `b_ex` and `b_im`"),
        };
        let t = ImexTableau::from_parts(self.a_ex.clone(), self.a_im.clone(), b_ex, b_im)?;
        Ok(ConvexScheme::new(t, self.theta.clone())?)
    }
}

pub fn builtin_convex(name: &str) -> Result<ConvexScheme> {
    let key: String = name.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
    Ok(match key.as_str() {
        "imex1" => ConvexScheme::imex1(),
        "imex14" => ConvexScheme::imex1_4(),
        "tvd3" => ConvexScheme::tvd3_default(),
        "tvd34" => ConvexScheme::tvd3_4(),
        _ => bail!("no certified scheme named '{name}'"),
    })
}

#[derive(Debug, Serialize)]
struct CertifyOutput<'a> {
    scheme: &'a ConvexScheme,
    report: &'a CertifyReport,
}

pub fn certify(tableau: Option<&Path>, scheme: Option<&str>, lambda: Option<f64>, write_tableau: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let (s, file_lambda) = match (tableau, scheme) {
        (Some(p), None) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let f: TableauFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
            (f.scheme()?, f.lambda)
        }
        (None, Some(name)) => (builtin_convex(name)?, None),
        _ => bail!("give exactly one of --tableau and --scheme"),
    };
    if let Some(p) = write_tableau {
        let mut body = serde_json::to_string_pretty(&TableauFile::from_scheme(&s))?;
        body.push('\n');
        std::fs::write(p, body).with_context(|| format!("writing {}", p.display()))?;
    }
    let report = certify_report(&s, lambda.or(file_lambda))?;
    println!("feasible={}", report.feasible);
    println!("lambda={}", report.lambda);
    println!("lambda_max={}", report.lambda_max);
    println!("kind={:?}", report.kind);
    println!("binding={}", report.binding_constraints.join(" "));
    if let Some(dir) = out {
        let mut art = Artifacts::new(dir)?;
        art.json("certify.json", &CertifyOutput { scheme: &s, report: &report })?;
        art.finish()?;
    }
    if !report.feasible {
        bail!("certificate infeasible at lambda = {}", report.lambda);
    }
    Ok(())
}

// -------------------------------------------------------------- optimize

#[derive(Debug, Serialize)]
struct OptimizeOutput<'a> {
    problem: &'a OptProblem,
    warm_start: bool,
    result: &'a OptResult,
    report: CertifyReport,
}

pub fn run_optimize(problem: &OptProblem, warm: bool) -> Result<OptResult> {
    if warm {
        let start = if problem.stages == 4 { ConvexScheme::tvd3_4() } else { ConvexScheme::tvd3_default() };
        Ok(optimize_from(problem, &start)?)
    } else {
        Ok(optimize(problem)?)
    }
}

pub fn optimize_cmd(problem: &OptProblem, warm: bool, out: &Path) -> Result<()> {
    let mut art = Artifacts::new(out)?;
    let result = art.timed("optimize", || run_optimize(problem, warm))?;
    let report = certify_report(&result.scheme, Some(result.lambda))?;
    art.json("optimize.json", &OptimizeOutput { problem, warm_start: warm, result: &result, report })?;
    println!("feasible=true");
    println!("lambda={}", result.lambda);
    println!("objective={}", result.objective);
    println!("theta={:?}", result.scheme.theta);
    art.finish()
}

// ----------------------------------------------------------- convergence

/// Grid spacings `0.2·2^-k` of the scalar error lines.
pub fn scalar_spacings(levels: usize) -> Vec<f64> {
    (0..levels).map(|k| 0.2 / 2f64.powi(k as i32)).collect()
}

/// Scalar error samples of one scheme over the refinement sequence.
pub fn scalar_samples(scheme: &str, cfg: &ExperimentConfig, levels: usize) -> Result<Vec<(ErrorSample, ScalarSummary)>> {
    let smooth = cfg.initial.as_deref().is_some_and(|s| s.eq_ignore_ascii_case("smooth"));
    let mut out = Vec::with_capacity(levels);
    for k in 0..levels {
        let mut c = cfg.clone();
        if smooth {
            c.n = Some(cfg.n.unwrap_or(25) << k);
            c.dx = None;
        } else {
            c.dx = Some(scalar_spacings(levels)[k]);
            c.n = None;
        }
        let (_, r) = run_scalar_named(scheme, &c)?;
        let s = summarize_scalar(scheme, &r)?;
        out.push((ErrorSample { n: s.n, l1: s.l1, l2: s.l2, linf: s.linf, l1o: s.l1o }, s));
    }
    Ok(out)
}

/// Vortex errors over `sizes` (cells per direction); `n` in the samples is
/// the total cell count.
pub fn vortex_samples(scheme: &str, cfg: &ExperimentConfig, sizes: &[usize]) -> Result<Vec<(ErrorSample, EulerSummary)>> {
    let method = euler_method(scheme, cfg)?;
    let mut out = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let mut rc = euler_config(EulerCase::Vortex, cfg);
        rc.n = n;
        let r = run_euler(&method, &rc).with_context(|| format!("vortex {scheme} n={n}"))?;
        let s = summarize_euler(EulerCase::Vortex, scheme, &rc, &r);
        let (ed, em) = (s.l2_density.unwrap_or(f64::NAN), s.l2_momentum.unwrap_or(f64::NAN));
        // Density errors go in the L1 slot, momentum-norm errors in L2.
        out.push((ErrorSample { n: n * n, l1: ed, l2: em, linf: f64::NAN, l1o: f64::NAN }, s));
    }
    Ok(out)
}

pub fn vortex_table(schemes: &[String], cfg: &ExperimentConfig, sizes: &[usize], art: &mut Artifacts) -> Result<Csv> {
    let mut csv = Csv::new(&["N", "scheme", "L2_rho", "EOC_rho", "L2_mom", "EOC_mom", "activations"]);
    for scheme in schemes {
        let samples = art.timed(&format!("vortex_{}", slug(scheme)), || vortex_samples(scheme, cfg, sizes))?;
        let plain: Vec<ErrorSample> = samples.iter().map(|(e, _)| *e).collect();
        let table = eoc_table(&plain, 2)?;
        for (row, (_, s)) in table.rows.iter().zip(&samples) {
            csv.row(vec![
                row.n.into(),
                scheme.as_str().into(),
                row.l1.into(),
                row.eoc_l1.into(),
                row.l2.into(),
                row.eoc_l2.into(),
                s.stats.activations().into(),
            ]);
        }
    }
    Ok(csv)
}

pub fn convergence(cfg: &ExperimentConfig, levels: usize, sizes: &[usize]) -> Result<()> {
    let problem = cfg.problem.clone().unwrap_or_else(|| "advect".into());
    let mut art = Artifacts::new(&cfg.out_dir())?;
    match problem.as_str() {
        "advect" | "scalar" => {
            for scheme in cfg.scheme_list(&["imex1", "tvd3_4", "mood3_4"]) {
                let samples = art.timed(&slug(&scheme), || scalar_samples(&scheme, cfg, levels))?;
                let plain: Vec<ErrorSample> = samples.iter().map(|(e, _)| *e).collect();
                let report = eoc_table(&plain, 1)?;
                art.text(&format!("eoc_{}.csv", slug(&scheme)), &report.to_csv())?;
            }
        }
        "vortex" => {
            let schemes = cfg.scheme_list(&["imex1", "tvd3_4", "mood3_4"]);
            let csv = vortex_table(&schemes, cfg, sizes, &mut art)?;
            art.csv("vortex_eoc.csv", &csv)?;
        }
        other => bail!("convergence studies exist for 'advect' and 'vortex', not '{other}'"),
    }
    art.finish()
}
