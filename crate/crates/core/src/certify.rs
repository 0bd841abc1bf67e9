//! Stability certificates for convex IMEX schemes.
//!
//! A convex scheme blends every stage of a high-order tableau with one
//! backward/forward Euler step, weighted by θ. The certificates below give
//! sufficient conditions on θ and on the material CFL number λ for the result
//! to be L∞ stable and TVD. Every condition is affine in λ, which lets the
//! largest admissible λ be computed exactly.

use serde::Serialize;

use crate::tableaux::{self, ImexTableau, SchemeId};
use crate::{Error, Result};

/// Slack allowed on the `>= 0` conditions.
pub const FEASIBILITY_TOL: f64 = 1e-12;
/// Upper end of the λ search window.
pub const LAMBDA_CAP: f64 = 100.0;
const BISECT_TOL: f64 = 1e-10;

fn check_gamma_above_third(gamma: f64) -> Result<()> {
    if !(gamma > 1.0 / 3.0) || !gamma.is_finite() {
        return Err(Error::Domain(format!("gamma must exceed 1/3, got {gamma}")));
    }
    Ok(())
}

/// Largest admissible third-stage weight `(3γ-1)/(6γ²)`.
pub fn lemma1_theta3_opt(gamma: f64) -> Result<f64> {
    check_gamma_above_third(gamma)?;
    Ok((3.0 * gamma - 1.0) / (6.0 * gamma * gamma))
}

/// Exclusive upper bound on θ₄ for the γ family.
pub fn lemma1_theta4_max(gamma: f64) -> Result<f64> {
    check_gamma_above_third(gamma)?;
    let g2 = gamma * gamma;
    Ok((3.0 * gamma - 1.0) * (3.0 * g2 + 1.0) / (18.0 * g2 * gamma))
}

/// Closed-form `(θ₄_max, λ_max)` for the γ family with θ₃ at its optimum.
pub fn lemma1_bounds(gamma: f64, theta4: f64) -> Result<(f64, f64)> {
    if !(gamma >= 3f64.sqrt() / 3.0) {
        return Err(Error::Infeasible(format!("gamma = {gamma} is below sqrt(3)/3")));
    }
    let theta4_max = lemma1_theta4_max(gamma)?;
    if !(theta4 > 0.0 && theta4 < theta4_max) {
        return Err(Error::Infeasible(format!("theta4 = {theta4} outside (0, {theta4_max})")));
    }
    let g = gamma;
    let g2 = g * g;
    let num = 18.0 * g2 * g * theta4 - (3.0 * g - 1.0) * (3.0 * g2 + 1.0);
    let den = (3.0 * g - 1.0) * ((6.0 * g2 + 1.0) * theta4 - (3.0 * g2 + 1.0));
    Ok((theta4_max, num / den))
}

/// One-parameter trade-off between θ₄ and λ at γ = 2/3.
pub fn alpha_parameterization(alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0,1), got {alpha}")));
    }
    Ok((7.0 / 16.0 * alpha, (1.0 - alpha) / (1.0 - 11.0 / 16.0 * alpha)))
}

/// A condition `v0 + v1·λ ≥ 0` (or `> 0` when strict).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constraint {
    pub name: String,
    pub v0: f64,
    pub v1: f64,
    pub strict: bool,
}

impl Constraint {
    fn at(&self, lambda: f64) -> f64 {
        self.v0 + self.v1 * lambda
    }

    fn holds(&self, lambda: f64, tol: f64) -> bool {
        let v = self.at(lambda);
        if self.strict {
            v > 0.0
        } else {
            v >= -tol
        }
    }
}

/// Which certificate produced a set of constraints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CertificateKind {
    /// Explicit first stage, zero first implicit column.
    Ck,
    /// Possibly implicit first stage and nonzero first implicit column.
    NonCk,
}

/// Quantities of the recursive certificate. Per-pair entries are indexed by
/// `[k][l]` with `l < k` (zero-based stages of the extended tableau); affine
/// entries are stored as `[constant, slope in λ]`.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateCoeffs {
    pub a_cal: Vec<f64>,
    pub atil_cal: Vec<f64>,
    pub b_cal: Vec<Vec<f64>>,
    pub btil_cal: Vec<Vec<f64>>,
    /// CK: `𝒞_k`. Non-CK: `𝒞̃_k`.
    pub c_cal: Vec<f64>,
    /// CK: `𝒞_kl`. Non-CK: `𝒟̃_kl`.
    pub c_pair: Vec<Vec<f64>>,
    /// CK: `𝒟_k`. Non-CK: `𝒞_k` (constant).
    pub d_cal: Vec<[f64; 2]>,
    /// CK: `𝒟_kl`. Non-CK: `𝒟_kl` (constant).
    pub d_pair: Vec<Vec<[f64; 2]>>,
}

/// Certificate evaluated for a fixed θ; λ enters only through the
/// constraints.
#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub coeffs: CertificateCoeffs,
    pub constraints: Vec<Constraint>,
}

impl Certificate {
    pub fn feasible(&self, lambda: f64) -> bool {
        self.feasible_with_tol(lambda, FEASIBILITY_TOL)
    }

    pub fn feasible_with_tol(&self, lambda: f64, tol: f64) -> bool {
        lambda >= 0.0 && self.constraints.iter().all(|c| c.holds(lambda, tol))
    }

    /// Smallest constraint value at λ (strict conditions included).
    pub fn margin(&self, lambda: f64) -> f64 {
        self.constraints.iter().map(|c| c.at(lambda)).fold(f64::INFINITY, f64::min)
    }

    /// Constraints violated at λ.
    pub fn violations(&self, lambda: f64) -> Vec<&Constraint> {
        self.constraints.iter().filter(|c| !c.holds(lambda, FEASIBILITY_TOL)).collect()
    }

    /// Largest feasible λ in `[0, cap]`, computed from the affine constraints.
    /// Zero when infeasible for every positive λ.
    pub fn lambda_max_exact(&self, cap: f64) -> f64 {
        self.lambda_max_exact_tol(cap, FEASIBILITY_TOL)
    }

    pub fn lambda_max_exact_tol(&self, cap: f64, tol: f64) -> f64 {
        let mut hi = cap;
        for c in &self.constraints {
            if c.strict {
                if c.v1 == 0.0 {
                    if c.v0 <= 0.0 {
                        return 0.0;
                    }
                } else if c.v1 < 0.0 {
                    hi = hi.min(c.v0 / -c.v1);
                } else if c.v0 <= 0.0 {
                    return 0.0;
                }
                continue;
            }
            if c.v1 < 0.0 {
                hi = hi.min((c.v0 + tol) / -c.v1);
            } else if c.v0 + tol < 0.0 {
                // Violated just above zero; a window further out would not
                // contain small λ, so it does not count.
                return 0.0;
            }
        }
        hi.max(0.0)
    }

    /// Constraints that are active (within `tol_rel`) at λ.
    pub fn binding(&self, lambda: f64) -> Vec<String> {
        let scale = self.constraints.iter().map(|c| c.at(lambda).abs()).fold(1e-300, f64::max);
        let m = self.margin(lambda);
        self.constraints
            .iter()
            .filter(|c| c.v1 != 0.0 || c.strict || c.at(lambda) <= 0.0)
            .filter(|c| c.at(lambda) - m <= 1e-9 * scale.max(1.0))
            .map(|c| c.name.clone())
            .collect()
    }
}

/// High-order tableau, θ weights and the certified CFL bound.
#[derive(Debug, Clone, Serialize)]
pub struct ConvexScheme {
    pub tableau: ImexTableau,
    pub theta: Vec<f64>,
    pub lambda_max: f64,
}

impl ConvexScheme {
    /// Validates θ against the tableau and certifies λ_max. θ has one entry
    /// per stage, plus one for the update when the weights differ from the
    /// last rows.
    pub fn new(tableau: ImexTableau, theta: Vec<f64>) -> Result<Self> {
        let theta = normalise_theta(&tableau, theta)?;
        let mut scheme = ConvexScheme { tableau, theta, lambda_max: 0.0 };
        scheme.lambda_max = certificate(&scheme)?.lambda_max_exact(LAMBDA_CAP);
        Ok(scheme)
    }

    /// Like [`ConvexScheme::new`] but keeps a caller-provided bound.
    pub fn with_lambda(tableau: ImexTableau, theta: Vec<f64>, lambda_max: f64) -> Result<Self> {
        let theta = normalise_theta(&tableau, theta)?;
        if !(lambda_max >= 0.0) {
            return Err(Error::Domain(format!("lambda_max must be >= 0, got {lambda_max}")));
        }
        Ok(ConvexScheme { tableau, theta, lambda_max })
    }

    /// The tableau with the update appended as a stage, matching θ.
    pub fn extended(&self) -> ImexTableau {
        self.tableau.with_update_stage()
    }

    /// γ family with θ₃ at its optimum and the given θ₄.
    pub fn tvd3(gamma: f64, theta4: f64) -> Result<Self> {
        let t = tableaux::build_tvd3_family(gamma)?;
        let theta3 = lemma1_theta3_opt(gamma)?;
        ConvexScheme::new(t, vec![1.0, 1.0, theta3, theta4])
    }

    /// γ = 2/3, α = 1/3: θ = (1, 1, 3/8, 7/48).
    pub fn tvd3_default() -> Self {
        let (theta4, _) = alpha_parameterization(1.0 / 3.0).expect("alpha in range");
        ConvexScheme::tvd3(tableaux::GAMMA_OPT, theta4).expect("default scheme is valid")
    }

    /// The four-stage scheme with its printed θ.
    pub fn tvd3_4() -> Self {
        let t = tableaux::builtin(SchemeId::Tvd3x4).expect("builtin");
        ConvexScheme::new(t, tableaux::TVD3_4_THETA.to_vec()).expect("printed weights are valid")
    }

    /// Backward/forward Euler (all θ = 1).
    pub fn imex1() -> Self {
        let t = tableaux::builtin(SchemeId::Imex1).expect("builtin");
        ConvexScheme::new(t, vec![1.0; 2]).expect("valid")
    }

    /// Four Euler substeps (all θ = 1).
    pub fn imex1_4() -> Self {
        let t = tableaux::builtin(SchemeId::Imex1x4).expect("builtin");
        ConvexScheme::new(t, vec![1.0; 5]).expect("valid")
    }
}

fn normalise_theta(tableau: &ImexTableau, mut theta: Vec<f64>) -> Result<Vec<f64>> {
    tableau.validate()?;
    let need = tableau.convex_len();
    if tableau.is_stiffly_accurate() && theta.len() == need + 1 {
        // The update coincides with the last stage, so its weight is redundant.
        let last = theta.pop().expect("nonempty");
        if (last - theta[need - 1]).abs() > 1e-15 {
            return Err(Error::Shape("update weight must equal the last stage weight".into()));
        }
    }
    if theta.len() != need {
        return Err(Error::Shape(format!("theta has {} entries, tableau needs {need}", theta.len())));
    }
    if theta.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::Domain("theta entries must lie in [0, 1]".into()));
    }
    if theta[0] != 1.0 {
        return Err(Error::Domain("theta[0] must be 1".into()));
    }
    Ok(theta)
}

/// Certificate matching the tableau class.
pub fn certificate(scheme: &ConvexScheme) -> Result<Certificate> {
    let t = scheme.extended();
    if t.a_im[0][0] == 0.0 && t.is_ck() {
        ck_certificate(&t, &scheme.theta)
    } else {
        non_ck_certificate(&t, &scheme.theta)
    }
}

/// Outcome of checking a certificate at one λ.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateResult {
    pub feasible: bool,
    pub lambda: f64,
    pub certificate: Certificate,
}

/// CK certificate at a given λ.
pub fn theorem1_certificate(scheme: &ConvexScheme, lambda: f64) -> Result<CertificateResult> {
    let t = scheme.extended();
    if !(t.is_ck() && t.a_im[0][0] == 0.0) {
        return Err(Error::Structure("CK certificate needs an explicit first stage and zero first implicit column".into()));
    }
    let certificate = ck_certificate(&t, &scheme.theta)?;
    Ok(CertificateResult { feasible: certificate.feasible(lambda), lambda, certificate })
}

/// Non-CK certificate at a given λ. CK input is accepted: its trivial first
/// stage is identified with the old time level.
pub fn theorem2_certificate(scheme: &ConvexScheme, lambda: f64) -> Result<CertificateResult> {
    let t = scheme.extended();
    let certificate = non_ck_certificate(&t, &scheme.theta)?;
    Ok(CertificateResult { feasible: certificate.feasible(lambda), lambda, certificate })
}

fn square(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|k| vec![0.0; k]).collect()
}

fn ck_certificate(t: &ImexTableau, theta: &[f64]) -> Result<Certificate> {
    let s = t.s;
    if theta.len() != s {
        return Err(Error::Shape("theta does not match the extended tableau".into()));
    }
    let (ae, ai) = (&t.a_ex, &t.a_im);
    let a_cal: Vec<f64> = (0..s).map(|k| theta[k] * ai[k][k] + (1.0 - theta[k]) * t.c_im[k]).collect();
    // The explicit first-column weight joins the old-level coefficient.
    let atil_cal: Vec<f64> = (0..s).map(|k| theta[k] * ae[k][0] + (1.0 - theta[k]) * t.c_ex[k]).collect();
    let inv = |l: usize| if a_cal[l] > 0.0 { 1.0 / a_cal[l] } else { 0.0 };

    let mut b_cal = square(s);
    let mut btil_cal = square(s);
    for k in 0..s {
        for l in 0..k {
            b_cal[k][l] = theta[k] * ai[k][l] * inv(l);
            btil_cal[k][l] = theta[k] * ae[k][l];
        }
    }

    let mut c_cal = vec![0.0; s];
    let mut d_cal = vec![[0.0; 2]; s];
    let mut c_pair = square(s);
    let mut d_pair: Vec<Vec<[f64; 2]>> = (0..s).map(|k| vec![[0.0; 2]; k]).collect();
    let mut constraints = Vec::new();
    for k in 1..s {
        let mut c = atil_cal[k];
        let mut d = [1.0, -atil_cal[k]];
        for l in 1..k {
            c -= b_cal[k][l] * c_cal[l];
            d[0] -= b_cal[k][l] * d_cal[l][0];
            d[1] -= b_cal[k][l] * d_cal[l][1];
        }
        c_cal[k] = c;
        d_cal[k] = d;
        for l in 1..k {
            let mut cp = btil_cal[k][l];
            let mut dp = [b_cal[k][l], -btil_cal[k][l]];
            for r in l + 1..k {
                cp -= b_cal[k][r] * c_pair[r][l];
                dp[0] -= b_cal[k][r] * d_pair[r][l][0];
                dp[1] -= b_cal[k][r] * d_pair[r][l][1];
            }
            c_pair[k][l] = cp;
            d_pair[k][l] = dp;
        }
        let kk = k + 1;
        constraints.push(Constraint { name: format!("A_{kk}"), v0: a_cal[k], v1: 0.0, strict: true });
        constraints.push(Constraint { name: format!("C_{kk}"), v0: c, v1: 0.0, strict: false });
        constraints.push(Constraint { name: format!("D_{kk}"), v0: d[0], v1: d[1], strict: false });
        for l in 1..k {
            let ll = l + 1;
            constraints.push(Constraint { name: format!("C_{kk},{ll}"), v0: c_pair[k][l], v1: 0.0, strict: false });
            constraints.push(Constraint {
                name: format!("D_{kk},{ll}"),
                v0: d_pair[k][l][0],
                v1: d_pair[k][l][1],
                strict: false,
            });
        }
    }
    let coeffs = CertificateCoeffs { a_cal, atil_cal, b_cal, btil_cal, c_cal, c_pair, d_cal, d_pair };
    Ok(Certificate { kind: CertificateKind::Ck, coeffs, constraints })
}

fn non_ck_certificate(t: &ImexTableau, theta: &[f64]) -> Result<Certificate> {
    let s = t.s;
    if theta.len() != s {
        return Err(Error::Shape("theta does not match the extended tableau".into()));
    }
    let (ae, ai) = (&t.a_ex, &t.a_im);
    let trivial_first = ai[0][0] == 0.0;
    if trivial_first && !t.is_ck() {
        return Err(Error::Structure(
            "explicit first stage with a nonzero first implicit column is not covered".into(),
        ));
    }
    let a_cal: Vec<f64> = (0..s).map(|k| theta[k] * ai[k][k] + (1.0 - theta[k]) * t.c_im[k]).collect();
    let atil_cal: Vec<f64> = (0..s).map(|k| (1.0 - theta[k]) * t.c_ex[k]).collect();
    let inv = |l: usize| if a_cal[l] > 0.0 { 1.0 / a_cal[l] } else { 0.0 };

    let mut b_cal = square(s);
    let mut btil_cal = square(s);
    for k in 0..s {
        for l in 0..k {
            b_cal[k][l] = theta[k] * ai[k][l] * inv(l);
            btil_cal[k][l] = theta[k] * ae[k][l];
        }
    }

    let mut ctil = vec![0.0; s];
    let mut c = vec![0.0; s];
    let mut dtil = square(s);
    let mut d = square(s);
    for k in 0..s {
        let mut ct = atil_cal[k];
        let mut cc = 1.0;
        for l in 1..k {
            ct -= b_cal[k][l] * ctil[l];
        }
        for l in 0..k {
            cc -= b_cal[k][l] * c[l];
        }
        ctil[k] = ct;
        c[k] = cc;
        for l in 0..k {
            let mut dt = btil_cal[k][l];
            let mut dd = b_cal[k][l];
            for r in l + 1..k {
                dt -= b_cal[k][r] * dtil[r][l];
                dd -= b_cal[k][r] * d[r][l];
            }
            dtil[k][l] = dt;
            d[k][l] = dd;
        }
    }
    if trivial_first {
        // The first stage is the old level: fold its pair terms into the
        // per-stage ones.
        for k in 1..s {
            ctil[k] += dtil[k][0];
            c[k] += d[k][0];
        }
    }

    let first = usize::from(trivial_first);
    let mut constraints = Vec::new();
    for k in first..s {
        let kk = k + 1;
        constraints.push(Constraint { name: format!("A_{kk}"), v0: a_cal[k], v1: 0.0, strict: true });
        constraints.push(Constraint { name: format!("lC~_{kk}"), v0: 0.0, v1: ctil[k], strict: false });
        constraints.push(Constraint { name: format!("C_{kk}-lC~_{kk}"), v0: c[k], v1: -ctil[k], strict: false });
        for l in first..k {
            let ll = l + 1;
            constraints.push(Constraint { name: format!("lD~_{kk},{ll}"), v0: 0.0, v1: dtil[k][l], strict: false });
            constraints.push(Constraint {
                name: format!("D_{kk},{ll}-lD~_{kk},{ll}"),
                v0: d[k][l],
                v1: -dtil[k][l],
                strict: false,
            });
        }
    }
    let coeffs = CertificateCoeffs {
        a_cal,
        atil_cal,
        b_cal,
        btil_cal,
        c_cal: ctil,
        c_pair: dtil,
        d_cal: c.iter().map(|&v| [v, 0.0]).collect(),
        d_pair: d.iter().map(|row| row.iter().map(|&v| [v, 0.0]).collect()).collect(),
    };
    Ok(Certificate { kind: CertificateKind::NonCk, coeffs, constraints })
}

/// Bisection on certificate feasibility over `[0, 100]` to 1e-10. Returns 0
/// if infeasible just above zero and the cap if feasible at the cap.
pub fn lambda_max_bisect(scheme: &ConvexScheme) -> Result<f64> {
    let cert = certificate(scheme)?;
    Ok(bisect(|l| cert.feasible(l)))
}

fn bisect(feasible: impl Fn(f64) -> bool) -> f64 {
    if feasible(LAMBDA_CAP) {
        return LAMBDA_CAP;
    }
    if !feasible(BISECT_TOL) {
        return 0.0;
    }
    let (mut lo, mut hi) = (BISECT_TOL, LAMBDA_CAP);
    while hi - lo > BISECT_TOL {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Largest certified λ: closed form for the γ family at θ₃ optimal, bisection
/// otherwise.
pub fn lambda_max_search(scheme: &ConvexScheme) -> Result<f64> {
    if let Some(gamma) = scheme.tableau.family_gamma {
        let th = &scheme.theta;
        if th.len() == 4 && th[1] == 1.0 {
            if let Ok(t3) = lemma1_theta3_opt(gamma) {
                if (th[2] - t3).abs() <= 1e-15 {
                    if let Ok((_, lam)) = lemma1_bounds(gamma, th[3]) {
                        return Ok(lam.min(LAMBDA_CAP));
                    }
                }
            }
        }
    }
    lambda_max_bisect(scheme)
}

/// Serializable summary used by the command-line `certify` subcommand.
#[derive(Debug, Clone, Serialize)]
pub struct CertifyReport {
    pub feasible: bool,
    pub lambda_max: f64,
    pub lambda: f64,
    pub binding_constraints: Vec<String>,
    pub kind: CertificateKind,
}

/// Certifies a scheme; with `lambda = None` the check is done at λ_max.
pub fn certify_report(scheme: &ConvexScheme, lambda: Option<f64>) -> Result<CertifyReport> {
    let cert = certificate(scheme)?;
    let lambda_max = cert.lambda_max_exact(LAMBDA_CAP);
    let lambda = lambda.unwrap_or(lambda_max);
    let feasible = cert.feasible(lambda) && (lambda_max > 0.0 || lambda == 0.0);
    Ok(CertifyReport { feasible, lambda_max, lambda, binding_constraints: cert.binding(lambda), kind: cert.kind })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms_at_optimal_gamma() {
        assert_eq!(lemma1_theta3_opt(2.0 / 3.0).unwrap(), 0.375);
        assert!((lemma1_theta3_opt(1.0).unwrap() - 1.0 / 3.0).abs() < 1e-16);
        assert!((lemma1_theta3_opt(0.9).unwrap() - 1.7 / 4.86).abs() < 1e-15);
        let (t4max, lam) = lemma1_bounds(2.0 / 3.0, 7.0 / 48.0).unwrap();
        assert!((t4max - 7.0 / 16.0).abs() < 1e-16);
        assert!((lam - 32.0 / 37.0).abs() < 1e-13);
    }

    #[test]
    fn closed_form_domain_errors() {
        assert!(matches!(lemma1_bounds(0.5, 0.1), Err(Error::Infeasible(_))));
        assert!(matches!(lemma1_theta3_opt(0.3), Err(Error::Domain(_))));
        let t4max = lemma1_theta4_max(2.0 / 3.0).unwrap();
        assert!(matches!(lemma1_bounds(2.0 / 3.0, t4max), Err(Error::Infeasible(_))));
    }

    #[test]
    fn alpha_examples() {
        let (t4, lam) = alpha_parameterization(1.0 / 3.0).unwrap();
        assert!((t4 - 7.0 / 48.0).abs() < 1e-16 && (lam - 32.0 / 37.0).abs() < 1e-15);
        let (t4, lam) = alpha_parameterization(0.5).unwrap();
        assert!((t4 - 7.0 / 32.0).abs() < 1e-16 && (lam - 16.0 / 21.0).abs() < 1e-15);
        let (t4, lam) = alpha_parameterization(1e-12).unwrap();
        assert!(t4 < 1e-11 && (lam - 1.0).abs() < 1e-11);
        assert!(alpha_parameterization(1.0).is_err());
        for a in [0.1, 1.0 / 3.0, 0.9] {
            let (t4, lam) = alpha_parameterization(a).unwrap();
            let (_, lam_l) = lemma1_bounds(2.0 / 3.0, t4).unwrap();
            assert!((lam - lam_l).abs() < 1e-13);
        }
    }

    #[test]
    fn ck_certificate_agrees_with_closed_form() {
        let scheme = ConvexScheme::tvd3_default();
        let target = 32.0 / 37.0;
        assert!(theorem1_certificate(&scheme, target - 1e-9).unwrap().feasible);
        assert!(!theorem1_certificate(&scheme, 0.95).unwrap().feasible);
        assert!((scheme.lambda_max - target).abs() < 1e-10);
        assert!((lambda_max_bisect(&scheme).unwrap() - target).abs() < 1e-9);
        assert!((lambda_max_search(&scheme).unwrap() - target).abs() < 1e-15);
    }

    #[test]
    fn both_certificates_accept_tvd3_at_half() {
        let scheme = ConvexScheme::tvd3_default();
        assert!(theorem1_certificate(&scheme, 0.5).unwrap().feasible);
        assert!(theorem2_certificate(&scheme, 0.5).unwrap().feasible);
    }

    #[test]
    fn non_ck_at_zero_lambda() {
        // Implicit first stage: a11 > 0 and a nonzero first column.
        let t = ImexTableau::from_parts(
            vec![vec![0.0], vec![0.5, 0.0]],
            vec![vec![0.3], vec![0.2, 0.3]],
            vec![0.5, 0.0],
            vec![0.2, 0.3],
        )
        .unwrap();
        let scheme = ConvexScheme::new(t, vec![1.0, 1.0]).unwrap();
        let r = theorem2_certificate(&scheme, 0.0).unwrap();
        assert!(r.feasible);
        assert!(theorem1_certificate(&scheme, 0.0).is_err());
    }

    #[test]
    fn theta4_zero_is_limited_by_euler_step() {
        let t = tableaux::build_tvd3_family(2.0 / 3.0).unwrap();
        let scheme = ConvexScheme::new(t, vec![1.0, 1.0, 0.375, 0.0]).unwrap();
        // The update is a plain Euler step, which needs λ ≤ 1.
        assert!((scheme.lambda_max - 1.0).abs() < 1e-11);
        assert!(!theorem1_certificate(&scheme, LAMBDA_CAP).unwrap().feasible);
    }

    #[test]
    fn euler_schemes() {
        assert!((ConvexScheme::imex1().lambda_max - 1.0).abs() < 1e-11);
        assert!((ConvexScheme::imex1_4().lambda_max - 4.0).abs() < 1e-11);
    }

    #[test]
    fn printed_four_stage_point_is_feasible_to_optimizer_precision() {
        let scheme = ConvexScheme::tvd3_4();
        let cert = certificate(&scheme).unwrap();
        let printed = tableaux::TVD3_4_LAMBDA;
        // The printed λ sits a few 1e-9 beyond the exact bound of the printed
        // (rounded) data.
        assert!(cert.feasible_with_tol(printed, 1e-8));
        assert!((scheme.lambda_max - printed).abs() < 1e-4);
        assert!(cert.margin(printed) > -1e-8);
    }

    #[test]
    fn theta_validation() {
        let t = tableaux::build_tvd3_family(2.0 / 3.0).unwrap();
        assert!(ConvexScheme::new(t.clone(), vec![1.0, 1.0, 0.375]).is_err());
        assert!(ConvexScheme::new(t.clone(), vec![0.5, 1.0, 0.375, 0.1]).is_err());
        assert!(ConvexScheme::new(t, vec![1.0, 1.0, 1.2, 0.1]).is_err());
        let sa = tableaux::builtin(SchemeId::Imex1).unwrap();
        assert!(ConvexScheme::new(sa, vec![1.0, 1.0, 1.0]).is_ok());
    }

    #[test]
    fn report_lists_binding_constraint() {
        let r = certify_report(&ConvexScheme::tvd3_default(), None).unwrap();
        assert!(r.feasible);
        assert!(r.binding_constraints.iter().any(|n| n == "D_4"), "{:?}", r.binding_constraints);
    }
}
