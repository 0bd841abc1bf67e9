//! Experiment configuration: a TOML (or JSON) file whose fields are
//! overridden by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use imex_tvd::reconstruct::Reconstruction;
use imex_tvd::stepper::CflMode;
use serde::{Deserialize, Serialize};

/// Everything a run may need. Unset fields fall back to per-problem defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: Option<String>,
    pub scheme: Option<String>,
    pub schemes: Option<Vec<String>>,
    /// Cells per direction.
    pub n: Option<usize>,
    pub dx: Option<f64>,
    pub eps: Option<f64>,
    pub mach: Option<f64>,
    pub cfl_mode: Option<CflMode>,
    pub nu: Option<f64>,
    pub t_final: Option<f64>,
    /// Scalar initial data: `discontinuous` or `smooth`.
    pub initial: Option<String>,
    pub upwind_only: Option<bool>,
    pub parachute_reconstruction: Option<Reconstruction>,
    /// Three-stage family parameter for the IMEX3/TVD3 levels.
    pub gamma: Option<f64>,
    /// θ₄/λ trade-off of the TVD3 level (γ = 2/3 only).
    pub alpha: Option<f64>,
    /// Full θ vector for the certified levels.
    pub theta: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Reads TOML, falling back to JSON when the file does not parse as TOML
    /// or has a `.json` extension.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if !is_json {
            match toml::from_str(&text) {
                Ok(cfg) => return Ok(cfg),
                Err(toml_err) => {
                    return serde_json::from_str(&text)
                        .with_context(|| format!("{} is neither TOML ({toml_err}) nor JSON", path.display()))
                }
            }
        }
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Fields set in `over` replace those in `self`.
    pub fn merged(mut self, over: ExperimentConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if over.$f.is_some() { self.$f = over.$f; } )* };
        }
        take!(
            problem,
            scheme,
            schemes,
            n,
            dx,
            eps,
            mach,
            cfl_mode,
            nu,
            t_final,
            initial,
            upwind_only,
            parachute_reconstruction,
            gamma,
            alpha,
            theta,
            seed,
            out
        );
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n.is_some() && self.dx.is_some() {
            bail!("give either n or dx, not both");
        }
        for (name, v) in [("dx", self.dx), ("eps", self.eps), ("mach", self.mach), ("nu", self.nu), ("t_final", self.t_final)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    bail!("{name} must be positive, got {v}");
                }
            }
        }
        if self.n == Some(0) {
            bail!("n must be positive");
        }
        Ok(())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// `schemes` if given, else `scheme`, else the defaults.
    pub fn scheme_list(&self, defaults: &[&str]) -> Vec<String> {
        if let Some(list) = &self.schemes {
            return list.clone();
        }
        if let Some(s) = &self.scheme {
            return s.split(',').map(|p| p.trim().to_string()).filter(|p| !p.is_empty()).collect();
        }
        defaults.iter().map(|s| s.to_string()).collect()
    }
}

pub fn parse_reconstruction(s: &str) -> Result<Reconstruction> {
    Ok(match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
        "first_order" | "first" | "fo" => Reconstruction::FirstOrder,
        "unlimited3" | "unlimited" | "parabolic" => Reconstruction::Unlimited3,
        "limited3" | "limited" | "koren" => Reconstruction::Limited3,
        other => bail!("unknown reconstruction '{other}'"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_and_json_agree() {
        let dir = std::env::temp_dir().join(format!("imex-tvd-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let t = dir.join("a.toml");
        std::fs::write(&t, "scheme = \"mood3_4\"\neps = 0.001\ncfl_mode = \"material\"\nnu = 0.5\n").unwrap();
        let j = dir.join("a.json");
        std::fs::write(&j, r#"{"scheme":"mood3_4","eps":0.001,"cfl_mode":"material","nu":0.5}"#).unwrap();
        let a = ExperimentConfig::load(&t).unwrap();
        assert_eq!(a, ExperimentConfig::load(&j).unwrap());
        assert_eq!(a.cfl_mode, Some(CflMode::Material));
        std::fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn flags_override_file() {
        let file = ExperimentConfig { eps: Some(1.0), nu: Some(0.5), ..Default::default() };
        let flags = ExperimentConfig { eps: Some(1e-3), ..Default::default() };
        let m = file.merged(flags);
        assert_eq!((m.eps, m.nu), (Some(1e-3), Some(0.5)));
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ExperimentConfig { nu: Some(-1.0), ..Default::default() }.validate().is_err());
        assert!(ExperimentConfig { n: Some(10), dx: Some(0.1), ..Default::default() }.validate().is_err());
        assert!(parse_reconstruction("weno").is_err());
    }
}
