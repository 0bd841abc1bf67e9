//! Named experiments. Each writes CSV/JSON artifacts to the output directory;
//! wall times go to `timing.json` only.

use anyhow::{bail, Result};
use imex_tvd::euler2d::{run_euler, write_snapshot_files, EulerCase, EulerParams};
use imex_tvd::metrics::eoc_table;
use imex_tvd::stepper::CflMode;
use imex_tvd::tableaux::TVD3_4_LAMBDA;

use crate::commands::{
    euler_config, euler_method, run_scalar_named, scalar_samples, summarize_euler, summarize_scalar, vortex_table,
};
use crate::config::ExperimentConfig;
use crate::output::{slug, Artifacts, Csv};

pub const PRESETS: &[(&str, &str)] = &[
    ("fig-motivation", "scalar bump: first order, unlimited third order, TVD3 and MOOD3 solutions"),
    ("fig-step-solutions", "scalar bump for both CFL modes and the chosen eps, all scalar schemes"),
    ("error-lines", "scalar bump: L1 and L1o errors over five grid doublings"),
    ("flexibility-table", "MOOD3(4) and ARS(2,3,3) errors for decreasing lambda"),
    ("spacetime-table", "space-time range errors of the two parachute choices"),
    ("vortex", "stationary vortex EOC table"),
    ("double-shear", "density deviation of the double shear layer versus Mach number"),
    ("explosion", "cylindrical explosion snapshots and MOOD statistics"),
    ("riemann", "acoustic Riemann problem snapshots"),
];

pub fn run_preset(name: &str, cfg: &ExperimentConfig) -> Result<()> {
    let mut art = Artifacts::new(&cfg.out_dir())?;
    match name {
        "fig-motivation" => solutions(cfg, &mut art, &["imex1", "imex3", "tvd3", "mood3"], &[cfg.cfl_mode.unwrap_or(CflMode::Material)])?,
        "fig-step-solutions" => solutions(
            cfg,
            &mut art,
            &["imex1", "ars233", "imex3", "tvd3", "mood3", "tvd3_4", "mood3_4"],
            &[CflMode::Material, CflMode::Acoustic],
        )?,
        "error-lines" => error_lines(cfg, &mut art)?,
        "flexibility-table" => flexibility(cfg, &mut art)?,
        "spacetime-table" => spacetime(cfg, &mut art)?,
        "vortex" => {
            let schemes = cfg.scheme_list(&["imex1", "tvd3_4", "mood3_4"]);
            let sizes = cfg.n.map_or_else(|| vec![32, 64, 128], |n| vec![n, 2 * n]);
            let csv = vortex_table(&schemes, cfg, &sizes, &mut art)?;
            art.csv("vortex_eoc.csv", &csv)?;
        }
        "double-shear" => double_shear(cfg, &mut art)?,
        "explosion" => explosion(cfg, &mut art)?,
        "riemann" => riemann(cfg, &mut art)?,
        other => {
            let names: Vec<&str> = PRESETS.iter().map(|p| p.0).collect();
            bail!("unknown preset '{other}'; available: {}", names.join(", "));
        }
    }
    art.finish()
}

fn solutions(cfg: &ExperimentConfig, art: &mut Artifacts, defaults: &[&str], modes: &[CflMode]) -> Result<()> {
    let schemes = cfg.scheme_list(defaults);
    let mut summary = Csv::new(&["cfl_mode", "scheme", "N", "steps", "L1", "L1o", "bound_violation", "activations"]);
    for &mode in modes {
        let mut c = cfg.clone();
        c.cfl_mode = Some(mode);
        let mode_name = format!("{mode:?}").to_ascii_lowercase();
        let mut columns: Vec<Vec<f64>> = Vec::new();
        let mut header = vec!["x".to_string(), "exact".to_string()];
        for scheme in &schemes {
            let (setup, r) = art.timed(&format!("{mode_name}_{}", slug(scheme)), || run_scalar_named(scheme, &c))?;
            if columns.is_empty() {
                columns.push((0..r.state.len()).map(|j| setup.run.spec.cell_center(j)).collect());
                columns.push(r.exact.clone());
            }
            header.push(slug(scheme));
            columns.push(r.state.clone());
            let s = summarize_scalar(scheme, &r)?;
            summary.row(vec![
                mode_name.as_str().into(),
                scheme.as_str().into(),
                s.n.into(),
                s.steps.into(),
                s.l1.into(),
                s.l1o.into(),
                s.max_bound_violation.into(),
                s.stats.activations().into(),
            ]);
        }
        let refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut csv = Csv::new(&refs);
        for j in 0..columns[0].len() {
            csv.row(columns.iter().map(|col| col[j].into()).collect());
        }
        art.csv(&format!("solutions_{mode_name}.csv"), &csv)?;
    }
    art.csv("summary.csv", &summary)
}

fn error_lines(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let schemes = cfg.scheme_list(&["imex1", "ars233", "tvd3", "mood3", "mood3_4"]);
    let mut csv = Csv::new(&["N", "scheme", "L1", "L1o"]);
    for scheme in &schemes {
        let samples = art.timed(&slug(scheme), || scalar_samples(scheme, cfg, 5))?;
        for (e, _) in &samples {
            csv.row(vec![e.n.into(), scheme.as_str().into(), e.l1.into(), e.l1o.into()]);
        }
        let plain: Vec<_> = samples.iter().map(|(e, _)| *e).collect();
        art.text(&format!("eoc_{}.csv", slug(scheme)), &eoc_table(&plain, 1)?.to_csv())?;
    }
    art.csv("error_lines.csv", &csv)
}

fn flexibility(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let schemes = cfg.scheme_list(&["mood3_4", "ars233"]);
    let eps = cfg.eps.unwrap_or(1e-3);
    let n = cfg.n.unwrap_or(4000);
    let mut csv = Csv::new(&["scheme", "lambda", "N", "steps", "L1", "Linf", "bound_violation"]);
    for scheme in &schemes {
        for lambda in [TVD3_4_LAMBDA, 0.05, 0.0009] {
            let c = ExperimentConfig {
                eps: Some(eps),
                n: Some(n),
                dx: None,
                cfl_mode: Some(CflMode::Material),
                nu: Some(lambda),
                ..cfg.clone()
            };
            let (_, r) = art.timed(&format!("{}_{lambda}", slug(scheme)), || run_scalar_named(scheme, &c))?;
            let s = summarize_scalar(scheme, &r)?;
            csv.row(vec![
                scheme.as_str().into(),
                lambda.into(),
                s.n.into(),
                s.steps.into(),
                s.l1.into(),
                s.linf.into(),
                s.max_bound_violation.into(),
            ]);
        }
    }
    art.csv("flexibility.csv", &csv)
}

fn spacetime(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let eps_list = cfg.eps.map_or_else(|| vec![1.0, 1e-3], |e| vec![e]);
    let schemes = cfg.scheme_list(&["mood3_4/imex1_4", "mood3_4"]);
    let mut csv = Csv::new(&["eps", "scheme", "e_st_mean", "e_st_max", "parachute_steps", "steps"]);
    for eps in eps_list {
        let c = ExperimentConfig {
            eps: Some(eps),
            upwind_only: Some(cfg.upwind_only.unwrap_or(true)),
            cfl_mode: Some(CflMode::Material),
            nu: Some(cfg.nu.unwrap_or(0.5)),
            ..cfg.clone()
        };
        for scheme in &schemes {
            let (_, r) = art.timed(&format!("{eps}_{}", slug(scheme)), || run_scalar_named(scheme, &c))?;
            let s = summarize_scalar(scheme, &r)?;
            csv.row(vec![
                eps.into(),
                scheme.as_str().into(),
                s.e_st_mean.into(),
                s.e_st_max.into(),
                s.stats.parachute_activations().into(),
                s.steps.into(),
            ]);
        }
    }
    art.csv("spacetime.csv", &csv)
}

fn double_shear(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let scheme = cfg.scheme.clone().unwrap_or_else(|| "mood3_4".into());
    let machs = cfg.mach.map_or_else(|| vec![1e-1, 1e-2, 1e-3], |m| vec![m]);
    let method = euler_method(&scheme, cfg)?;
    let mut csv = Csv::new(&["M", "L2_density_deviation", "steps", "activations"]);
    for m in machs {
        let c = ExperimentConfig { mach: Some(m), ..cfg.clone() };
        let rc = euler_config(EulerCase::DoubleShear, &c);
        let r = art.timed(&format!("M{m}"), || run_euler(&method, &rc))?;
        let s = summarize_euler(EulerCase::DoubleShear, &scheme, &rc, &r);
        csv.row(vec![m.into(), s.density_deviation.into(), s.steps.into(), s.stats.activations().into()]);
        let params = EulerParams::new(m, rc.gamma, r.initial.mean_density())?;
        write_snapshot_files(art.dir(), &format!("double_shear_M{m}"), &r.state, r.t_final, &params, EulerCase::DoubleShear)?;
    }
    art.csv("double_shear.csv", &csv)
}

fn explosion(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let schemes = cfg.scheme_list(&["mood3_4", "imex3_4"]);
    let mut csv = Csv::new(&["scheme", "density_max", "steps", "activations", "levels"]);
    for scheme in &schemes {
        let method = euler_method(scheme, cfg)?;
        let rc = euler_config(EulerCase::Explosion, cfg);
        let r = art.timed(&slug(scheme), || run_euler(&method, &rc))?;
        let s = summarize_euler(EulerCase::Explosion, scheme, &rc, &r);
        let levels: Vec<String> = s.stats.activations_per_level.iter().map(|v| v.to_string()).collect();
        csv.row(vec![
            scheme.as_str().into(),
            s.density_max.into(),
            s.steps.into(),
            s.stats.activations().into(),
            levels.join(" ").into(),
        ]);
        let params = EulerParams::new(rc.mach, rc.gamma, r.initial.mean_density())?;
        write_snapshot_files(art.dir(), &format!("explosion_{}", slug(scheme)), &r.state, r.t_final, &params, EulerCase::Explosion)?;
    }
    art.csv("explosion.csv", &csv)
}

fn riemann(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let schemes = cfg.scheme_list(&["imex1", "tvd3_4", "mood3_4"]);
    let machs = cfg.mach.map_or_else(|| vec![1.0, 1e-2], |m| vec![m]);
    let mut csv = Csv::new(&["M", "scheme", "steps", "activations", "density_max"]);
    for m in machs {
        for scheme in &schemes {
            let c = ExperimentConfig { mach: Some(m), ..cfg.clone() };
            let method = euler_method(scheme, &c)?;
            let rc = euler_config(EulerCase::AcousticRp, &c);
            let r = art.timed(&format!("M{m}_{}", slug(scheme)), || run_euler(&method, &rc))?;
            let s = summarize_euler(EulerCase::AcousticRp, scheme, &rc, &r);
            csv.row(vec![m.into(), scheme.as_str().into(), s.steps.into(), s.stats.activations().into(), s.density_max.into()]);
            let params = EulerParams::new(m, rc.gamma, r.initial.mean_density())?;
            write_snapshot_files(art.dir(), &format!("riemann_M{m}_{}", slug(scheme)), &r.state, r.t_final, &params, EulerCase::AcousticRp)?;
        }
    }
    art.csv("riemann.csv", &csv)
}
