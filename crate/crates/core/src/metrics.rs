//! Error norms, the overshoot-aware L1 quasinorm, space-time errors and EOC
//! tables.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Closed interval `[min, max]` of a field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub fn width(&self) -> f64 {
        self.max - self.min
    }
}

pub fn range(w: &[f64]) -> Range {
    let (min, max) = w.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    Range { min, max }
}

/// Periodic total variation `Σ |w_{j+1} - w_j|`.
pub fn total_variation(w: &[f64]) -> f64 {
    let n = w.len();
    (0..n).map(|j| (w[(j + 1) % n] - w[j]).abs()).sum()
}

/// How the L1 sum is weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum L1Weight {
    /// `Δx Σ |w_j|`, the discrete integral.
    #[default]
    Volume,
    /// `(1/Δx) Σ |w_j|`.
    InverseDx,
}

impl L1Weight {
    fn factor(self, dx: f64) -> f64 {
        match self {
            L1Weight::Volume => dx,
            L1Weight::InverseDx => 1.0 / dx,
        }
    }
}

pub fn l1(w: &[f64], dx: f64, weight: L1Weight) -> f64 {
    weight.factor(dx) * w.iter().map(|v| v.abs()).sum::<f64>()
}

/// `sqrt(cell_volume Σ w_j²)`.
pub fn l2(w: &[f64], cell_volume: f64) -> f64 {
    (cell_volume * w.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

pub fn linf(w: &[f64]) -> f64 {
    w.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Running growth `max_m [range(w^m) - range(w^0)]`, floored at zero.
/// `ranges[0]` is the initial range.
pub fn range_growth(ranges: &[Range]) -> f64 {
    let Some(first) = ranges.first() else { return 0.0 };
    let w0 = first.width();
    ranges.iter().map(|r| r.width() - w0).fold(0.0, f64::max)
}

/// L1 quasinorm with the range growth added in every cell:
/// `factor Σ_j (|w_j| + growth)`.
pub fn l1o(w: &[f64], dx: f64, growth: f64, weight: L1Weight) -> f64 {
    weight.factor(dx) * w.iter().map(|v| v.abs() + growth).sum::<f64>()
}

/// L1o of an error field, with the growth taken from the numerical
/// trajectory.
pub fn l1o_error(err: &[f64], dx: f64, num_ranges: &[Range], weight: L1Weight) -> f64 {
    l1o(err, dx, range_growth(num_ranges), weight)
}

/// L1o of the raw field, for maximum-principle reporting.
pub fn l1o_field(w: &[f64], dx: f64, num_ranges: &[Range], weight: L1Weight) -> f64 {
    l1o(w, dx, range_growth(num_ranges), weight)
}

/// Mean and max over steps of `range(exact) - range(num)`.
pub fn spacetime_errors(exact: &[Range], num: &[Range]) -> Result<(f64, f64)> {
    if exact.len() != num.len() {
        return Err(Error::Shape(format!("trajectories have {} and {} steps", exact.len(), num.len())));
    }
    if exact.is_empty() {
        return Err(Error::Shape("empty trajectory".into()));
    }
    let diffs: Vec<f64> = exact.iter().zip(num).map(|(e, n)| e.width() - n.width()).collect();
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let max = diffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((mean, max))
}

/// `log(e_coarse/e_fine)/log(ratio)`; `None` when either error is not
/// positive.
pub fn eoc(e_coarse: f64, e_fine: f64, ratio: f64) -> Option<f64> {
    if e_coarse > 0.0 && e_fine > 0.0 && ratio > 1.0 {
        Some((e_coarse / e_fine).ln() / ratio.ln())
    } else {
        None
    }
}

/// Errors at one resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSample {
    pub n: usize,
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    pub l1o: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub n: usize,
    pub l1: f64,
    pub eoc_l1: Option<f64>,
    pub l2: f64,
    pub eoc_l2: Option<f64>,
    pub linf: f64,
    pub l1o: f64,
    pub eoc_l1o: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorReport {
    pub rows: Vec<ErrorRow>,
    pub spacetime: Option<(f64, f64)>,
}

/// Builds EOC rows from samples ordered from coarse to fine. The refinement
/// ratio between rows is `(N_fine/N_coarse)^(1/dim)`.
pub fn eoc_table(samples: &[ErrorSample], dim: u32) -> Result<ErrorReport> {
    if samples.len() < 2 {
        return Err(Error::Shape("EOC table needs at least two resolutions".into()));
    }
    let mut rows = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let (e1, e2, eo) = if i == 0 {
            (None, None, None)
        } else {
            let c = &samples[i - 1];
            let ratio = (s.n as f64 / c.n as f64).powf(1.0 / dim as f64);
            (eoc(c.l1, s.l1, ratio), eoc(c.l2, s.l2, ratio), eoc(c.l1o, s.l1o, ratio))
        };
        rows.push(ErrorRow { n: s.n, l1: s.l1, eoc_l1: e1, l2: s.l2, eoc_l2: e2, linf: s.linf, l1o: s.l1o, eoc_l1o: eo });
    }
    Ok(ErrorReport { rows, spacetime: None })
}

/// Formats a float with 12 significant digits.
pub fn fmt12(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.11e}")
    } else {
        v.to_string()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt12).unwrap_or_default()
}

impl ErrorReport {
    /// CSV with columns `N,L1,EOC_L1,L2,EOC_L2,Linf,L1o`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,L1,EOC_L1,L2,EOC_L2,Linf,L1o\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.n,
                fmt12(r.l1),
                fmt_opt(r.eoc_l1),
                fmt12(r.l2),
                fmt_opt(r.eoc_l2),
                fmt12(r.linf),
                fmt12(r.l1o)
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eoc_examples() {
        assert!((eoc(0.04, 0.01, 2.0).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(eoc(0.3, 0.3, 2.0), Some(0.0));
        assert_eq!(eoc(0.0, 0.1, 2.0), None);
        // Two-dimensional cell counts 1024 -> 4096 mean a ratio of 2.
        let s = |n, e| ErrorSample { n, l1: e, l2: e, linf: e, l1o: e };
        let t = eoc_table(&[s(1024, 0.00861349), s(4096, 0.00125513)], 2).unwrap();
        assert!((t.rows[1].eoc_l2.unwrap() - 2.7788).abs() < 5e-5);
        assert!(t.rows[0].eoc_l2.is_none());
        assert!(eoc_table(&[s(8, 1.0)], 1).is_err());
    }

    #[test]
    fn l1o_reduces_to_l1_without_growth() {
        let ranges = [Range { min: 1.0, max: 2.0 }, Range { min: 1.0, max: 1.9 }];
        let e = [0.1, -0.2, 0.05];
        assert_eq!(l1o_error(&e, 0.5, &ranges, L1Weight::Volume), l1(&e, 0.5, L1Weight::Volume));
    }

    #[test]
    fn l1o_with_single_growth() {
        let ranges = [Range { min: 1.0, max: 2.0 }, Range { min: 0.99, max: 2.02 }, Range { min: 1.0, max: 2.0 }];
        let e = [0.1, -0.2, 0.05, 0.0];
        let dx = 0.25;
        let delta = 0.03;
        for wgt in [L1Weight::Volume, L1Weight::InverseDx] {
            let diff = l1o_error(&e, dx, &ranges, wgt) - l1(&e, dx, wgt);
            assert!((diff - wgt.factor(dx) * e.len() as f64 * delta).abs() < 1e-14);
        }
    }

    #[test]
    fn spacetime_basics() {
        let r = [Range { min: 0.0, max: 1.0 }, Range { min: 0.1, max: 0.9 }];
        assert_eq!(spacetime_errors(&r, &r).unwrap(), (0.0, 0.0));
        let num = [Range { min: 0.0, max: 0.5 }, Range { min: 0.2, max: 0.8 }];
        let (mean, max) = spacetime_errors(&r, &num).unwrap();
        assert!((mean - 0.35).abs() < 1e-15 && (max - 0.5).abs() < 1e-15);
        assert!(spacetime_errors(&r, &num[..1]).is_err());
    }

    #[test]
    fn csv_schema() {
        let s = |n, e| ErrorSample { n, l1: e, l2: e, linf: e, l1o: e };
        let csv = eoc_table(&[s(10, 0.4), s(20, 0.1)], 1).unwrap().to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("N,L1,EOC_L1,L2,EOC_L2,Linf,L1o"));
        assert_eq!(lines.next(), Some("10,4.00000000000e-1,,4.00000000000e-1,,4.00000000000e-1,4.00000000000e-1"));
        assert!(lines.next().unwrap().contains(",2.00000000000e0,"));
    }

    #[test]
    fn total_variation_periodic() {
        assert_eq!(total_variation(&[0.0, 1.0, 0.0, 1.0]), 4.0);
        assert_eq!(total_variation(&[2.0; 5]), 0.0);
    }
}
