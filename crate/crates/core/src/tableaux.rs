//! IMEX double Butcher tableaux: storage, the named schemes, and the coupled
//! order conditions up to order three.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const CONSISTENCY_TOL: f64 = 1e-13;
const ORDER_TOL: f64 = 1e-12;

/// Explicit/implicit tableau pair `(Ã, A, b̃, b, c̃, c)`.
///
/// `a_ex` is strictly lower triangular, `a_im` lower triangular. Matrices are
/// stored as rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImexTableau {
    pub s: usize,
    #[serde(rename = "A_ex")]
    pub a_ex: Vec<Vec<f64>>,
    #[serde(rename = "A_im")]
    pub a_im: Vec<Vec<f64>>,
    pub b_ex: Vec<f64>,
    pub b_im: Vec<f64>,
    pub c_ex: Vec<f64>,
    pub c_im: Vec<f64>,
    /// Set when the tableau is a member of the three-stage γ family, which
    /// admits closed-form stability bounds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family_gamma: Option<f64>,
}

impl ImexTableau {
    /// Builds a tableau from its matrices and weights; abscissae are the row
    /// sums. Rows may be given ragged (only the lower triangle) and are padded.
    pub fn from_parts(a_ex: Vec<Vec<f64>>, a_im: Vec<Vec<f64>>, b_ex: Vec<f64>, b_im: Vec<f64>) -> Result<Self> {
        let s = b_ex.len();
        if s == 0 || b_im.len() != s || a_ex.len() != s || a_im.len() != s {
            return Err(Error::Shape("tableau parts must share one stage count".into()));
        }
        let pad = |m: Vec<Vec<f64>>| -> Result<Vec<Vec<f64>>> {
            m.into_iter()
                .map(|mut row| {
                    if row.len() > s {
                        return Err(Error::Shape(format!("row of length {} exceeds s = {s}", row.len())));
                    }
                    row.resize(s, 0.0);
                    Ok(row)
                })
                .collect()
        };
        let a_ex = pad(a_ex)?;
        let a_im = pad(a_im)?;
        let c_ex = a_ex.iter().map(|r| r.iter().sum()).collect();
        let c_im = a_im.iter().map(|r| r.iter().sum()).collect();
        let t = Self { s, a_ex, a_im, b_ex, b_im, c_ex, c_im, family_gamma: None };
        t.validate()?;
        Ok(t)
    }

    /// Checks shapes, triangular structure and abscissa consistency.
    pub fn validate(&self) -> Result<()> {
        let s = self.s;
        let square = |m: &Vec<Vec<f64>>| m.len() == s && m.iter().all(|r| r.len() == s);
        if s == 0
            || !square(&self.a_ex)
            || !square(&self.a_im)
            || [&self.b_ex, &self.b_im, &self.c_ex, &self.c_im].iter().any(|v| v.len() != s)
        {
            return Err(Error::Shape(format!("tableau arrays do not match s = {s}")));
        }
        for i in 0..s {
            for j in 0..s {
                let (e, m) = (self.a_ex[i][j], self.a_im[i][j]);
                if !e.is_finite() || !m.is_finite() {
                    return Err(Error::NonFinite("tableau coefficient"));
                }
                if j >= i && e != 0.0 {
                    return Err(Error::Structure(format!("explicit entry ({i},{j}) must vanish")));
                }
                if j > i && m != 0.0 {
                    return Err(Error::Structure(format!("implicit entry ({i},{j}) must vanish")));
                }
            }
            let ce: f64 = self.a_ex[i].iter().sum();
            let ci: f64 = self.a_im[i].iter().sum();
            if (ce - self.c_ex[i]).abs() > CONSISTENCY_TOL || (ci - self.c_im[i]).abs() > CONSISTENCY_TOL {
                return Err(Error::Structure(format!("abscissae inconsistent with row sums at stage {i}")));
            }
        }
        Ok(())
    }

    /// First stage explicit and first implicit column zero.
    pub fn is_ck(&self) -> bool {
        self.a_im.iter().all(|r| r[0] == 0.0)
    }

    /// Weights equal the last rows of both matrices.
    pub fn is_stiffly_accurate(&self) -> bool {
        let last = self.s - 1;
        self.a_ex[last] == self.b_ex && self.a_im[last] == self.b_im
    }

    /// Number of θ parameters the convex scheme needs.
    pub fn convex_len(&self) -> usize {
        if self.is_stiffly_accurate() {
            self.s
        } else {
            self.s + 1
        }
    }

    /// Appends the update as an extra explicit stage when the weights differ
    /// from the last rows; returns a clone otherwise.
    pub fn with_update_stage(&self) -> ImexTableau {
        if self.is_stiffly_accurate() {
            return self.clone();
        }
        let s = self.s + 1;
        let grow = |m: &Vec<Vec<f64>>, b: &Vec<f64>| -> Vec<Vec<f64>> {
            let mut out: Vec<Vec<f64>> = m
                .iter()
                .map(|r| {
                    let mut r = r.clone();
                    r.push(0.0);
                    r
                })
                .collect();
            let mut last = b.clone();
            last.push(0.0);
            out.push(last);
            out
        };
        let a_ex = grow(&self.a_ex, &self.b_ex);
        let a_im = grow(&self.a_im, &self.b_im);
        let b_ex = a_ex[s - 1].clone();
        let b_im = a_im[s - 1].clone();
        let mut c_ex = self.c_ex.clone();
        c_ex.push(self.b_ex.iter().sum());
        let mut c_im = self.c_im.clone();
        c_im.push(self.b_im.iter().sum());
        ImexTableau { s, a_ex, a_im, b_ex, b_im, c_ex, c_im, family_gamma: self.family_gamma }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: ImexTableau = serde_json::from_str(text)?;
        t.validate()?;
        Ok(t)
    }
}

/// The three-stage third-order family parameterised by γ.
pub fn build_tvd3_family(gamma: f64) -> Result<ImexTableau> {
    if !gamma.is_finite() || gamma == 0.0 || (3.0 * gamma - 1.0).abs() < 1e-14 {
        return Err(Error::Domain(format!("gamma = {gamma} makes the family singular")));
    }
    let g = gamma;
    let g2 = g * g;
    let c2 = (3.0 * g - 1.0) / (6.0 * g);
    let c3 = (g + 1.0) / 2.0;
    let b = vec![0.0, 3.0 * g2 / (3.0 * g2 + 1.0), 1.0 / (3.0 * g2 + 1.0)];
    let a31 = -(6.0 * g2 * g - 3.0 * g2 + 1.0) / (2.0 * (3.0 * g - 1.0));
    let a32 = g * (3.0 * g2 + 1.0) / (3.0 * g - 1.0);
    let a_ex = vec![vec![0.0, 0.0, 0.0], vec![c2, 0.0, 0.0], vec![a31, a32, 0.0]];
    let a_im = vec![vec![0.0, 0.0, 0.0], vec![0.0, c2, 0.0], vec![0.0, g, (1.0 - g) / 2.0]];
    // The printed abscissae are exact; the row sums agree to rounding.
    let c = vec![0.0, c2, c3];
    let t = ImexTableau {
        s: 3,
        a_ex,
        a_im,
        b_ex: b.clone(),
        b_im: b,
        c_ex: c.clone(),
        c_im: c,
        family_gamma: Some(gamma),
    };
    t.validate()?;
    Ok(t)
}

fn imex1() -> ImexTableau {
    ImexTableau {
        s: 2,
        a_ex: vec![vec![0.0, 0.0], vec![1.0, 0.0]],
        a_im: vec![vec![0.0, 0.0], vec![0.0, 1.0]],
        b_ex: vec![1.0, 0.0],
        b_im: vec![0.0, 1.0],
        c_ex: vec![0.0, 1.0],
        c_im: vec![0.0, 1.0],
        family_gamma: None,
    }
}

fn imex1_4() -> ImexTableau {
    let s = 5;
    let mut a_ex = vec![vec![0.0; s]; s];
    let mut a_im = vec![vec![0.0; s]; s];
    for k in 1..s {
        for l in 0..k {
            a_ex[k][l] = 0.25;
        }
        for l in 1..=k {
            a_im[k][l] = 0.25;
        }
    }
    let c: Vec<f64> = (0..s).map(|k| 0.25 * k as f64).collect();
    ImexTableau {
        s,
        b_ex: a_ex[s - 1].clone(),
        b_im: a_im[s - 1].clone(),
        a_ex,
        a_im,
        c_ex: c.clone(),
        c_im: c,
        family_gamma: None,
    }
}

/// Printed θ and λ of the four-stage scheme.
pub const TVD3_4_THETA: [f64; 5] = [1.0, 1.0, 1.0, 0.5110907014643069, 0.4997722865197203];
pub const TVD3_4_LAMBDA: f64 = 0.5471076190680170;

fn tvd3_4() -> ImexTableau {
    let a_ex = vec![
        vec![0.0, 0.0, 0.0, 0.0],
        vec![0.2049503677289891, 0.0, 0.0, 0.0],
        vec![0.2123925641886599, 0.2049201701400305, 0.0, 0.0],
        vec![-0.4501877125339555, 0.3955748607480934, 0.9594331543518283, 0.0],
    ];
    let a_im = vec![
        vec![0.0, 0.0, 0.0, 0.0],
        vec![0.0, 0.2049503677289891, 0.0, 0.0],
        vec![0.0, 0.2040104873103189, 0.2133022470183705, 0.0],
        vec![0.0, 0.3991926529002874, 0.4115004113464103, 0.0941272383192684],
    ];
    let b = vec![0.0, 0.3354718384287510, 0.3487815573407456, 0.3157466042305059];
    let c = vec![0.0, 0.2049503677289891, 0.4173127343286904, 0.9048203025659662];
    ImexTableau { s: 4, a_ex, a_im, b_ex: b.clone(), b_im: b, c_ex: c.clone(), c_im: c, family_gamma: None }
}

fn ars233() -> ImexTableau {
    let d = (3.0 + 3f64.sqrt()) / 6.0;
    let a_ex = vec![vec![0.0, 0.0, 0.0], vec![d, 0.0, 0.0], vec![d - 1.0, 2.0 - 2.0 * d, 0.0]];
    let a_im = vec![vec![0.0, 0.0, 0.0], vec![0.0, d, 0.0], vec![0.0, 1.0 - 2.0 * d, d]];
    let b = vec![0.0, 0.5, 0.5];
    let c = vec![0.0, d, 1.0 - d];
    ImexTableau { s: 3, a_ex, a_im, b_ex: b.clone(), b_im: b, c_ex: c.clone(), c_im: c, family_gamma: None }
}

/// Names of the built-in tableaux.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SchemeId {
    Imex1,
    Imex1x4,
    Tvd3Family(f64),
    Tvd3x4,
    Ars233,
}

/// The γ giving the largest third-stage weight.
pub const GAMMA_OPT: f64 = 2.0 / 3.0;

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['(', ')', '-'], "_");
        let key = key.trim_end_matches('_');
        if let Some(rest) = key.strip_prefix("tvd3_family").or_else(|| key.strip_prefix("tvd3:")) {
            let rest = rest.trim_start_matches([':', '_', '=']);
            if rest.is_empty() {
                return Ok(SchemeId::Tvd3Family(GAMMA_OPT));
            }
            let g: f64 = rest.parse().map_err(|_| Error::UnknownScheme(s.to_string()))?;
            return Ok(SchemeId::Tvd3Family(g));
        }
        match key {
            "imex1" => Ok(SchemeId::Imex1),
            "imex1_4" | "imex14" => Ok(SchemeId::Imex1x4),
            "tvd3" => Ok(SchemeId::Tvd3Family(GAMMA_OPT)),
            "tvd3_4" | "tvd34" => Ok(SchemeId::Tvd3x4),
            "ars233" | "ars223" | "ars_2,3,3" | "ars_2,2,3" => Ok(SchemeId::Ars233),
            _ => Err(Error::UnknownScheme(s.to_string())),
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeId::Imex1 => write!(f, "imex1"),
            SchemeId::Imex1x4 => write!(f, "imex1_4"),
            SchemeId::Tvd3Family(g) => write!(f, "tvd3_family:{g}"),
            SchemeId::Tvd3x4 => write!(f, "tvd3_4"),
            SchemeId::Ars233 => write!(f, "ars233"),
        }
    }
}

/// Returns the tableau for a named scheme.
pub fn builtin(id: SchemeId) -> Result<ImexTableau> {
    match id {
        SchemeId::Imex1 => Ok(imex1()),
        SchemeId::Imex1x4 => Ok(imex1_4()),
        SchemeId::Tvd3Family(g) => build_tvd3_family(g),
        SchemeId::Tvd3x4 => Ok(tvd3_4()),
        SchemeId::Ars233 => Ok(ars233()),
    }
}

/// Order-condition residuals of a tableau.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderReport {
    pub order_achieved: usize,
    pub residuals: Vec<(String, f64)>,
}

impl OrderReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().map(|(_, r)| r.abs()).fold(0.0, f64::max)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn matvec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|r| dot(r, v)).collect()
}

fn hadamard(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

/// Evaluates the coupled IMEX conditions of orders `1..=p` (`p` clamped to
/// `1..=3`). Each residual is the signed defect `lhs - rhs`.
pub fn order_check(t: &ImexTableau, p: usize) -> OrderReport {
    let p = p.clamp(1, 3);
    let weights = [("be", &t.b_ex), ("bi", &t.b_im)];
    let abscissae = [("ce", &t.c_ex), ("ci", &t.c_im)];
    let mats = [("Ae", &t.a_ex), ("Ai", &t.a_im)];

    let mut by_order: Vec<Vec<(String, f64)>> = vec![Vec::new(); 3];
    for (bn, b) in weights {
        by_order[0].push((format!("sum {bn}"), b.iter().sum::<f64>() - 1.0));
        for (cn, c) in abscissae {
            by_order[1].push((format!("{bn}.{cn}"), dot(b, c) - 0.5));
        }
        // Products c c' over unordered pairs.
        let pairs = [(0usize, 0usize), (0, 1), (1, 1)];
        for (i, j) in pairs {
            let (n1, c1) = abscissae[i];
            let (n2, c2) = abscissae[j];
            by_order[2].push((format!("{bn}.({n1}*{n2})"), dot(b, &hadamard(c1, c2)) - 1.0 / 3.0));
        }
        for (an, a) in mats {
            for (cn, c) in abscissae {
                by_order[2].push((format!("{bn}.{an}.{cn}"), dot(b, &matvec(a, c)) - 1.0 / 6.0));
            }
        }
    }

    let mut residuals = Vec::new();
    let mut order_achieved = 0;
    let mut still_ok = true;
    for (q, conds) in by_order.into_iter().enumerate().take(p) {
        let ok = conds.iter().all(|(_, r)| r.abs() <= ORDER_TOL);
        if still_ok && ok {
            order_achieved = q + 1;
        } else {
            still_ok = false;
        }
        residuals.extend(conds);
    }
    OrderReport { order_achieved, residuals }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-15
    }

    #[test]
    fn tvd3_at_optimal_gamma_matches_fractions() {
        let t = build_tvd3_family(2.0 / 3.0).unwrap();
        assert!(close(t.a_ex[1][0], 0.25));
        assert!(close(t.a_ex[2][0], -13.0 / 18.0));
        assert!(close(t.a_ex[2][1], 14.0 / 9.0));
        assert!(close(t.a_im[1][1], 0.25));
        assert!(close(t.a_im[2][1], 2.0 / 3.0));
        assert!(close(t.a_im[2][2], 1.0 / 6.0));
        assert!(close(t.b_im[1], 4.0 / 7.0) && close(t.b_im[2], 3.0 / 7.0));
        assert!(close(t.c_im[2], 5.0 / 6.0));
        assert!(t.is_ck());
        assert_eq!(order_check(&t, 3).order_achieved, 3);
    }

    #[test]
    fn tvd3_family_is_not_stiffly_accurate() {
        for g in [0.4, 0.5774, 2.0 / 3.0, 1.0, 5.0] {
            let t = build_tvd3_family(g).unwrap();
            assert!(!t.is_stiffly_accurate(), "gamma={g}");
            assert_eq!(t.convex_len(), 4);
            assert!((t.b_im.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn singular_gamma_rejected() {
        assert!(matches!(build_tvd3_family(0.0), Err(Error::Domain(_))));
        assert!(matches!(build_tvd3_family(1.0 / 3.0), Err(Error::Domain(_))));
    }

    #[test]
    fn builtins_are_consistent() {
        for id in [SchemeId::Imex1, SchemeId::Imex1x4, SchemeId::Tvd3x4, SchemeId::Ars233, SchemeId::Tvd3Family(0.9)] {
            let t = builtin(id).unwrap();
            t.validate().unwrap();
            assert!(t.is_ck(), "{id}");
        }
    }

    #[test]
    fn printed_four_stage_values() {
        let t = builtin(SchemeId::Tvd3x4).unwrap();
        assert_eq!(t.a_im[3][3], 0.0941272383192684);
        assert!(!t.is_stiffly_accurate());
        assert_eq!(order_check(&t, 3).order_achieved, 3);
    }

    #[test]
    fn ars_abscissae() {
        let t = builtin(SchemeId::Ars233).unwrap();
        let d = (3.0 + 3f64.sqrt()) / 6.0;
        assert_eq!(t.c_im, vec![0.0, d, 1.0 - d]);
        assert_eq!(t.b_im, vec![0.0, 0.5, 0.5]);
        assert_eq!(order_check(&t, 3).order_achieved, 3);
    }

    #[test]
    fn first_order_schemes() {
        for id in [SchemeId::Imex1, SchemeId::Imex1x4] {
            let t = builtin(id).unwrap();
            assert!(t.is_stiffly_accurate());
            assert_eq!(order_check(&t, 3).order_achieved, 1, "{id}");
        }
    }

    #[test]
    fn condition_count() {
        let t = builtin(SchemeId::Ars233).unwrap();
        assert_eq!(order_check(&t, 1).residuals.len(), 2);
        assert_eq!(order_check(&t, 2).residuals.len(), 6);
        assert_eq!(order_check(&t, 3).residuals.len(), 20);
    }

    #[test]
    fn update_stage_extension() {
        let t = build_tvd3_family(2.0 / 3.0).unwrap();
        let e = t.with_update_stage();
        assert_eq!(e.s, 4);
        assert!(e.is_stiffly_accurate());
        assert_eq!(e.a_im[3][3], 0.0);
        assert!(close(e.c_im[3], 1.0) && close(e.c_ex[3], 1.0));
        e.validate().unwrap();
    }

    #[test]
    fn scheme_names_parse() {
        assert_eq!("IMEX1".parse::<SchemeId>().unwrap(), SchemeId::Imex1);
        assert_eq!("imex1(4)".parse::<SchemeId>().unwrap(), SchemeId::Imex1x4);
        assert_eq!("TVD3(4)".parse::<SchemeId>().unwrap(), SchemeId::Tvd3x4);
        assert_eq!("ars223".parse::<SchemeId>().unwrap(), SchemeId::Ars233);
        assert_eq!("tvd3:0.9".parse::<SchemeId>().unwrap(), SchemeId::Tvd3Family(0.9));
        assert!("rk4".parse::<SchemeId>().is_err());
    }

    #[test]
    fn json_round_trip() {
        let t = builtin(SchemeId::Tvd3x4).unwrap();
        let text = t.to_json().unwrap();
        assert!(text.contains("\"A_ex\"") && text.contains("\"c_im\""));
        assert!(!text.contains("family_gamma"));
        assert_eq!(ImexTableau::from_json(&text).unwrap(), t);
    }

    #[test]
    fn from_parts_rejects_upper_entries() {
        let r = ImexTableau::from_parts(
            vec![vec![0.0, 1.0], vec![1.0]],
            vec![vec![0.0], vec![0.0, 1.0]],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
        );
        assert!(r.is_err());
    }
}
