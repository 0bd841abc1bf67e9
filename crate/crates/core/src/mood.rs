//! A posteriori MOOD driver: compute a candidate with the highest level,
//! test it with a detection functional and fall back level by level on the
//! whole domain until the candidate passes or the terminal level is reached.

use serde::{Deserialize, Serialize};

use crate::metrics::range;
use crate::stepper::{SemiDiscreteProblem, TimeScheme};
use crate::{Error, Result};

/// Relative slack of the maximum-principle test.
pub const DMP_RTOL: f64 = 1e-12;
/// Absolute slack of the maximum-principle test.
pub const DMP_ATOL: f64 = 1e-14;
/// Excess tolerated at the terminal level before a warning is logged.
pub const PARACHUTE_WARN_TOL: f64 = 1e-10;

/// Detection functional `Φ`; the test compares `‖Φ(w)‖∞` with a threshold.
pub trait Detector {
    fn phi(&self, w: &[f64]) -> Result<Vec<f64>>;

    fn norm(&self, w: &[f64]) -> Result<f64> {
        Ok(self.phi(w)?.iter().fold(0.0, |m, v| m.max(v.abs())))
    }
}

/// `Φ(w) = w`.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityDetector;

impl Detector for IdentityDetector {
    fn phi(&self, w: &[f64]) -> Result<Vec<f64>> {
        Ok(w.to_vec())
    }
}

/// `Φ(w) = w - m` with `m` the midpoint of the initial range, so that
/// `‖Φ(w)‖∞ ≤ ‖Φ(w⁰)‖∞` is the two-sided bound `min w⁰ ≤ w ≤ max w⁰`.
#[derive(Debug, Clone, Copy)]
pub struct ScalarBoundsDetector {
    pub center: f64,
}

impl ScalarBoundsDetector {
    pub fn from_initial(w0: &[f64]) -> Self {
        let r = range(w0);
        Self { center: 0.5 * (r.min + r.max) }
    }
}

impl Detector for ScalarBoundsDetector {
    fn phi(&self, w: &[f64]) -> Result<Vec<f64>> {
        Ok(w.iter().map(|v| v - self.center).collect())
    }
}

/// One level of the cascade.
pub struct MoodLevel<'a> {
    pub name: String,
    pub scheme: &'a TimeScheme,
    pub problem: &'a dyn SemiDiscreteProblem,
}

/// Per-run statistics.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MoodStats {
    pub steps: usize,
    /// Number of steps finished at each level.
    pub activations_per_level: Vec<usize>,
    /// Fraction of steps accepted at the highest level.
    pub acceptance_rate: f64,
    #[serde(skip)]
    pub level_sequence: Vec<usize>,
    #[serde(skip)]
    pub parachute_warnings: usize,
}

impl MoodStats {
    /// Steps in which the highest level was rejected.
    pub fn activations(&self) -> usize {
        self.steps - self.activations_per_level.first().copied().unwrap_or(0)
    }

    /// Steps finished at the terminal level, when there is more than one.
    pub fn parachute_activations(&self) -> usize {
        if self.activations_per_level.len() < 2 {
            0
        } else {
            *self.activations_per_level.last().expect("nonempty")
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Outcome of one step.
#[derive(Debug, Clone)]
pub struct MoodStepOutcome {
    pub state: Vec<f64>,
    pub level: usize,
    pub threshold: f64,
}

pub struct MoodHierarchy<'a> {
    levels: Vec<MoodLevel<'a>>,
    detector: Box<dyn Detector + 'a>,
    xi: f64,
    time_dependent: bool,
    e0: f64,
    threshold: f64,
    stats: MoodStats,
}

impl<'a> MoodHierarchy<'a> {
    /// `time_dependent` selects the relaxed update
    /// `ℰ^{n+1} = ξ‖Φ(w^{n+1})‖∞ + (1-ξ)ℰⁿ`; otherwise `ℰ` stays at `ℰ⁰`.
    /// A single level degenerates to a plain integrator.
    pub fn new(
        levels: Vec<MoodLevel<'a>>,
        detector: Box<dyn Detector + 'a>,
        xi: f64,
        time_dependent: bool,
        w0: &[f64],
    ) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Domain("MOOD hierarchy needs at least one level".into()));
        }
        if !(0.0..=1.0).contains(&xi) {
            return Err(Error::Domain(format!("xi must lie in [0, 1], got {xi}")));
        }
        let e0 = detector.norm(w0)?;
        let n = levels.len();
        Ok(Self {
            levels,
            detector,
            xi,
            time_dependent,
            e0,
            threshold: e0,
            stats: MoodStats { activations_per_level: vec![0; n], ..Default::default() },
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn initial_threshold(&self) -> f64 {
        self.e0
    }

    pub fn level_names(&self) -> Vec<&str> {
        self.levels.iter().map(|l| l.name.as_str()).collect()
    }

    fn passes(&self, norm: f64) -> bool {
        norm <= self.threshold * (1.0 + DMP_RTOL) + DMP_ATOL
    }

    /// Advances one step of size `dt`.
    pub fn step(&mut self, t: f64, dt: f64, w: &[f64]) -> Result<MoodStepOutcome> {
        let last = self.levels.len() - 1;
        let mut accepted = None;
        for (k, lvl) in self.levels.iter().enumerate() {
            let candidate = match lvl.scheme.step(lvl.problem, t, dt, w) {
                Ok(c) => c,
                Err(e) if k < last => {
                    log::debug!("level {} failed: {e}", lvl.name);
                    continue;
                }
                Err(e) => return Err(e),
            };
            let norm = match self.detector.norm(&candidate) {
                Ok(v) => v,
                Err(e) if k < last => {
                    log::debug!("detector rejected level {}: {e}", lvl.name);
                    continue;
                }
                Err(e) => return Err(e),
            };
            if k == last || self.passes(norm) {
                if k == last && k > 0 && norm > self.threshold + PARACHUTE_WARN_TOL {
                    log::warn!(
                        "terminal level {} exceeds the threshold by {:e} at t = {t}",
                        lvl.name,
                        norm - self.threshold
                    );
                    self.stats.parachute_warnings += 1;
                }
                accepted = Some((k, candidate, norm));
                break;
            }
        }
        let (level, state, norm) = accepted.expect("terminal level always accepted");
        self.threshold = if self.time_dependent { self.xi * norm + (1.0 - self.xi) * self.threshold } else { self.e0 };
        self.stats.steps += 1;
        self.stats.activations_per_level[level] += 1;
        self.stats.level_sequence.push(level);
        self.stats.acceptance_rate = self.stats.activations_per_level[0] as f64 / self.stats.steps as f64;
        Ok(MoodStepOutcome { state, level, threshold: self.threshold })
    }

    /// Runs `steps` equal steps of size `dt` from `t0`, returning the final
    /// state. `observe` sees every accepted step.
    pub fn run(
        &mut self,
        w0: &[f64],
        t0: f64,
        dt: f64,
        steps: usize,
        mut observe: impl FnMut(usize, f64, &MoodStepOutcome),
    ) -> Result<Vec<f64>> {
        let mut w = w0.to_vec();
        for n in 0..steps {
            let t = t0 + n as f64 * dt;
            let out = self.step(t, dt, &w)?;
            observe(n + 1, t + dt, &out);
            w = out.state;
        }
        Ok(w)
    }

    pub fn stats(&self) -> &MoodStats {
        &self.stats
    }

    pub fn into_stats(self) -> MoodStats {
        self.stats
    }
}
