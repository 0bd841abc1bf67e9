//! IMEX Runge–Kutta time stepping over an abstract semi-discrete problem.

use serde::{Deserialize, Serialize};

use crate::certify::ConvexScheme;
use crate::tableaux::ImexTableau;
use crate::{Error, Result};

/// A method-of-lines system `w' = E(w) + I(w)` with `E` treated explicitly
/// and `I` implicitly.
pub trait SemiDiscreteProblem {
    /// Length of the state vector.
    fn dim(&self) -> usize;

    /// Explicit tendency `E(w)`.
    fn explicit_op(&self, t: f64, w: &[f64], out: &mut [f64]);

    /// Implicit tendency `I(w)`.
    fn implicit_op(&self, t: f64, w: &[f64], out: &mut [f64]);

    /// Solves `x - nu · I(x) = rhs`. `nu = 0` must return `rhs`.
    fn implicit_solve(&self, t: f64, nu: f64, rhs: &[f64], out: &mut [f64]) -> Result<()>;
}

/// A time integrator: the raw tableau, or its convex blend with Euler steps.
#[derive(Debug, Clone, Serialize)]
pub enum TimeScheme {
    Plain(ImexTableau),
    Convex(ConvexScheme),
}

impl TimeScheme {
    pub fn step<P: SemiDiscreteProblem + ?Sized>(&self, p: &P, t: f64, dt: f64, w: &[f64]) -> Result<Vec<f64>> {
        match self {
            TimeScheme::Plain(tab) => step_plain(p, tab, t, dt, w),
            TimeScheme::Convex(cs) => step_convex(p, cs, t, dt, w),
        }
    }
}

fn check_inputs<P: SemiDiscreteProblem + ?Sized>(p: &P, dt: f64, w: &[f64]) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Domain(format!("time step must be positive, got {dt}")));
    }
    if w.len() != p.dim() {
        return Err(Error::Shape(format!("state has {} entries, problem expects {}", w.len(), p.dim())));
    }
    Ok(())
}

fn ensure_finite(v: &[f64], what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    if a != 0.0 {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += a * xi;
        }
    }
}

/// One step of the convex scheme.
///
/// Stage `k` solves
/// `w_k - dt·𝒜_k I(w_k) = wⁿ + dt[(1-θ_k) c̃_k E(wⁿ) + θ_k Σ_{l<k} (ã_kl E_l + a_kl I_l)]`
/// with `𝒜_k = (1-θ_k) c_k + θ_k a_kk`. When the weights differ from the
/// last rows the update is the extra final stage.
pub fn step_convex<P: SemiDiscreteProblem + ?Sized>(
    p: &P,
    scheme: &ConvexScheme,
    t: f64,
    dt: f64,
    w: &[f64],
) -> Result<Vec<f64>> {
    check_inputs(p, dt, w)?;
    let tab = scheme.extended();
    let theta = &scheme.theta;
    let s = tab.s;
    let n = w.len();

    let needs_e0 = (0..s).any(|k| (1.0 - theta[k]) * tab.c_ex[k] != 0.0);
    let mut e0 = vec![0.0; n];
    if needs_e0 {
        p.explicit_op(t, w, &mut e0);
    }

    let mut e_stages: Vec<Vec<f64>> = Vec::with_capacity(s);
    let mut i_stages: Vec<Vec<f64>> = Vec::with_capacity(s);
    let mut stage = Vec::new();
    for k in 0..s {
        let th = theta[k];
        let mut rhs = w.to_vec();
        axpy(&mut rhs, dt * (1.0 - th) * tab.c_ex[k], &e0);
        for l in 0..k {
            axpy(&mut rhs, dt * th * tab.a_ex[k][l], &e_stages[l]);
            axpy(&mut rhs, dt * th * tab.a_im[k][l], &i_stages[l]);
        }
        let coef = (1.0 - th) * tab.c_im[k] + th * tab.a_im[k][k];
        let tk = t + tab.c_im[k] * dt;
        stage = if coef != 0.0 {
            let mut x = vec![0.0; n];
            p.implicit_solve(tk, dt * coef, &rhs, &mut x)?;
            x
        } else {
            rhs
        };
        ensure_finite(&stage, "convex stage")?;
        if k + 1 < s {
            let mut e = vec![0.0; n];
            p.explicit_op(t + tab.c_ex[k] * dt, &stage, &mut e);
            let mut i = vec![0.0; n];
            p.implicit_op(tk, &stage, &mut i);
            e_stages.push(e);
            i_stages.push(i);
        }
    }
    Ok(stage)
}

/// One step of the standard IMEX-RK method with the raw tableau.
pub fn step_plain<P: SemiDiscreteProblem + ?Sized>(
    p: &P,
    tab: &ImexTableau,
    t: f64,
    dt: f64,
    w: &[f64],
) -> Result<Vec<f64>> {
    check_inputs(p, dt, w)?;
    let s = tab.s;
    let n = w.len();
    let mut e_stages: Vec<Vec<f64>> = Vec::with_capacity(s);
    let mut i_stages: Vec<Vec<f64>> = Vec::with_capacity(s);
    for k in 0..s {
        let mut rhs = w.to_vec();
        for l in 0..k {
            axpy(&mut rhs, dt * tab.a_ex[k][l], &e_stages[l]);
            axpy(&mut rhs, dt * tab.a_im[k][l], &i_stages[l]);
        }
        let akk = tab.a_im[k][k];
        let tk = t + tab.c_im[k] * dt;
        let stage = if akk != 0.0 {
            let mut x = vec![0.0; n];
            p.implicit_solve(tk, dt * akk, &rhs, &mut x)?;
            x
        } else {
            rhs
        };
        ensure_finite(&stage, "stage")?;
        let mut e = vec![0.0; n];
        p.explicit_op(t + tab.c_ex[k] * dt, &stage, &mut e);
        let mut i = vec![0.0; n];
        p.implicit_op(tk, &stage, &mut i);
        e_stages.push(e);
        i_stages.push(i);
    }
    let mut out = w.to_vec();
    for k in 0..s {
        axpy(&mut out, dt * tab.b_ex[k], &e_stages[k]);
        axpy(&mut out, dt * tab.b_im[k], &i_stages[k]);
    }
    ensure_finite(&out, "update")?;
    Ok(out)
}

/// Which wave speed limits the time step of the scalar problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CflMode {
    /// Resolve the fast wave `c_m + c_a/ε`.
    Acoustic,
    /// Resolve only the slow speed `c_m`.
    Material,
}

impl std::str::FromStr for CflMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "acoustic" | "ac" => Ok(CflMode::Acoustic),
            "material" | "mat" => Ok(CflMode::Material),
            _ => Err(Error::Domain(format!("unknown CFL mode '{s}'"))),
        }
    }
}

/// Smallest speed used in CFL denominators.
pub const SPEED_FLOOR: f64 = 1e-12;

/// Time step of the scalar two-scale problem.
pub fn cfl_dt_scalar(mode: CflMode, nu: f64, dx: f64, eps: f64, c_m: f64, c_a: f64) -> Result<f64> {
    if !(nu > 0.0 && dx > 0.0 && eps > 0.0 && c_m > 0.0 && c_a > 0.0) {
        return Err(Error::Domain("CFL inputs must be positive".into()));
    }
    Ok(match mode {
        CflMode::Acoustic => eps * nu * dx / (eps * c_m + c_a),
        CflMode::Material => nu * dx / c_m,
    })
}

/// Euler time step `ν Δx / (2 max|u·n|)`, with the speed floored.
pub fn cfl_dt_euler(nu: f64, dx: f64, max_normal_speed: f64) -> f64 {
    nu * dx / (2.0 * max_normal_speed.max(SPEED_FLOOR))
}

/// Acoustic time step for a system with fastest speed `max_speed`.
pub fn cfl_dt_acoustic(nu: f64, dx: f64, max_speed: f64) -> f64 {
    nu * dx / max_speed.max(SPEED_FLOOR)
}

/// Shortens `dt` so the step does not pass `t_final`.
pub fn cap_to_final(dt: f64, t: f64, t_final: f64) -> f64 {
    dt.min(t_final - t).max(0.0)
}

/// Number of equal steps of size at most `dt` that reach `t_final`.
pub fn step_count(dt: f64, t_final: f64) -> usize {
    let n = t_final / dt;
    (n - 1e-9).ceil().max(1.0) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::solve_cyclic_upwind;
    use crate::tableaux::{builtin, SchemeId};

    /// Periodic upwind advection at two speeds.
    struct TwoSpeed {
        n: usize,
        a: f64,
        b: f64,
    }

    fn diff(w: &[f64], out: &mut [f64], speed: f64) {
        let n = w.len();
        for j in 0..n {
            out[j] = -speed * (w[j] - w[(j + n - 1) % n]);
        }
    }

    impl SemiDiscreteProblem for TwoSpeed {
        fn dim(&self) -> usize {
            self.n
        }
        fn explicit_op(&self, _t: f64, w: &[f64], out: &mut [f64]) {
            diff(w, out, self.a)
        }
        fn implicit_op(&self, _t: f64, w: &[f64], out: &mut [f64]) {
            diff(w, out, self.b)
        }
        fn implicit_solve(&self, _t: f64, nu: f64, rhs: &[f64], out: &mut [f64]) -> Result<()> {
            solve_cyclic_upwind(nu * self.b, rhs, out)
        }
    }

    #[test]
    fn euler_on_two_cells() {
        // λ = 0.5 and μ = 1 with unit dt.
        let p = TwoSpeed { n: 2, a: 0.5, b: 1.0 };
        let out = step_convex(&p, &ConvexScheme::imex1(), 0.0, 1.0, &[1.0, 0.0]).unwrap();
        assert!((out[0] - 0.5).abs() < 1e-15 && (out[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn constant_state_is_fixed() {
        let p = TwoSpeed { n: 7, a: 0.3, b: 5.0 };
        let w = vec![1.25; 7];
        for scheme in [
            TimeScheme::Convex(ConvexScheme::tvd3_4()),
            TimeScheme::Convex(ConvexScheme::tvd3_default()),
            TimeScheme::Plain(builtin(SchemeId::Ars233).unwrap()),
        ] {
            let out = scheme.step(&p, 0.0, 0.7, &w).unwrap();
            assert!(out.iter().all(|v| (v - 1.25).abs() < 1e-14));
        }
    }

    #[test]
    fn unit_theta_matches_plain() {
        let p = TwoSpeed { n: 9, a: 0.4, b: 3.0 };
        let w: Vec<f64> = (0..9).map(|j| ((j * j) % 5) as f64 - 1.0).collect();
        for id in [SchemeId::Tvd3x4, SchemeId::Ars233, SchemeId::Tvd3Family(0.9), SchemeId::Imex1] {
            let tab = builtin(id).unwrap();
            let theta = vec![1.0; tab.convex_len()];
            let cs = ConvexScheme::with_lambda(tab.clone(), theta, 0.0).unwrap();
            let a = step_convex(&p, &cs, 0.0, 0.9, &w).unwrap();
            let b = step_plain(&p, &tab, 0.0, 0.9, &w).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-13, "{id}");
            }
        }
    }

    #[test]
    fn mean_is_conserved() {
        let p = TwoSpeed { n: 11, a: 0.5, b: 40.0 };
        let w: Vec<f64> = (0..11).map(|j| (j as f64).cos()).collect();
        let m0: f64 = w.iter().sum();
        let out = step_convex(&p, &ConvexScheme::tvd3_4(), 0.0, 1.0, &w).unwrap();
        assert!((out.iter().sum::<f64>() - m0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_dt() {
        let p = TwoSpeed { n: 3, a: 1.0, b: 1.0 };
        assert!(step_convex(&p, &ConvexScheme::imex1(), 0.0, 0.0, &[0.0; 3]).is_err());
        assert!(step_plain(&p, &builtin(SchemeId::Imex1).unwrap(), 0.0, 1.0, &[0.0; 2]).is_err());
    }

    #[test]
    fn cfl_formulas() {
        let dt = cfl_dt_scalar(CflMode::Material, 0.5, 0.1, 1e-3, 1.0, 1.0).unwrap();
        assert!((dt - 0.05).abs() < 1e-16);
        let dt = cfl_dt_scalar(CflMode::Acoustic, 0.5, 0.1, 1.0, 1.0, 1.0).unwrap();
        assert!((dt - 0.025).abs() < 1e-16);
        assert!((cfl_dt_euler(0.5, 0.1, 1.0) - 0.025).abs() < 1e-16);
        assert!(cfl_dt_euler(0.5, 0.1, 0.0).is_finite());
        assert_eq!(cap_to_final(0.3, 0.9, 1.0), 0.09999999999999998);
        assert_eq!(step_count(0.05, 1.0), 20);
    }
}
