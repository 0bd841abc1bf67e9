//! Small direct solvers used by the implicit stages: the periodic upwind
//! (cyclic bidiagonal) system, cyclic tridiagonal systems and a banded LU with
//! partial pivoting.

use crate::{Error, Result};

/// Solves `x_j + nu (x_j - x_{j-1}) = rhs_j` on a periodic grid.
///
/// The system is the implicit first-order upwind operator. It is solved
/// exactly: the periodic wrap is closed in terms of `x_0` as a geometric sum,
/// then a single forward sweep recovers the remaining unknowns.
pub fn solve_cyclic_upwind(nu: f64, rhs: &[f64], out: &mut [f64]) -> Result<()> {
    let n = rhs.len();
    if out.len() != n {
        return Err(Error::Shape(format!("rhs has {n} entries, out has {}", out.len())));
    }
    if !(nu >= 0.0) {
        return Err(Error::Domain(format!("upwind solve needs nu >= 0, got {nu}")));
    }
    if n == 0 {
        return Ok(());
    }
    if nu == 0.0 {
        out.copy_from_slice(rhs);
        return Ok(());
    }
    let scale = 1.0 / (1.0 + nu);
    let q = nu * scale;
    // 1 - q^N, evaluated without cancellation for q close to one.
    let closing = -((n as f64) * (-scale).ln_1p()).exp_m1();

    let mut acc = 0.0;
    for &r in &rhs[1..] {
        acc = acc * q + r * scale;
    }
    out[0] = (rhs[0] * scale + q * acc) / closing;
    for j in 1..n {
        out[j] = rhs[j] * scale + q * out[j - 1];
    }
    Ok(())
}

/// Thomas algorithm for `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`.
/// `sub[0]` and `sup[n-1]` are ignored.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64], out: &mut [f64]) -> Result<()> {
    let n = diag.len();
    if sub.len() != n || sup.len() != n || rhs.len() != n || out.len() != n {
        return Err(Error::Shape("tridiagonal bands must share one length".into()));
    }
    if n == 0 {
        return Ok(());
    }
    let mut gam = vec![0.0; n];
    let mut bet = diag[0];
    if bet == 0.0 {
        return Err(Error::Solver("zero pivot in tridiagonal sweep".into()));
    }
    out[0] = rhs[0] / bet;
    for i in 1..n {
        gam[i] = sup[i - 1] / bet;
        bet = diag[i] - sub[i] * gam[i];
        if bet == 0.0 {
            return Err(Error::Solver("zero pivot in tridiagonal sweep".into()));
        }
        out[i] = (rhs[i] - sub[i] * out[i - 1]) / bet;
    }
    for i in (0..n - 1).rev() {
        let next = out[i + 1];
        out[i] -= gam[i + 1] * next;
    }
    Ok(())
}

/// Periodic tridiagonal solve via the Sherman–Morrison correction.
///
/// Row `0` couples to `x[n-1]` through `sub[0]` and row `n-1` couples to
/// `x[0]` through `sup[n-1]`. Needs `n >= 3`.
pub fn solve_cyclic_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64], out: &mut [f64]) -> Result<()> {
    let n = diag.len();
    if n < 3 {
        return Err(Error::Shape(format!("cyclic tridiagonal solve needs n >= 3, got {n}")));
    }
    if sub.len() != n || sup.len() != n || rhs.len() != n || out.len() != n {
        return Err(Error::Shape("tridiagonal bands must share one length".into()));
    }
    let alpha = sup[n - 1];
    let beta = sub[0];
    // Shift chosen so both modified corner pivots stay away from zero, also
    // for skew (central-difference) systems where `-diag[0]` would not.
    if diag[0] == 0.0 {
        return Err(Error::Solver("zero leading diagonal in cyclic solve".into()));
    }
    let gamma = -(diag[0].abs() + (alpha * beta).abs() / diag[0].abs()) * diag[0].signum();
    let mut bb = diag.to_vec();
    bb[0] = diag[0] - gamma;
    bb[n - 1] = diag[n - 1] - alpha * beta / gamma;

    solve_tridiagonal(sub, &bb, sup, rhs, out)?;
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let mut z = vec![0.0; n];
    solve_tridiagonal(sub, &bb, sup, &u, &mut z)?;

    let fact = (out[0] + beta * out[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    for (x, zi) in out.iter_mut().zip(&z) {
        *x -= fact * zi;
    }
    Ok(())
}

/// Square banded matrix with `kl` sub- and `ku` super-diagonals, stored with
/// room for the fill-in produced by partial pivoting.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let off = j as isize - i as isize + self.kl as isize;
        if off < 0 || off as usize >= self.width {
            None
        } else {
            Some(i * self.width + off as usize)
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Sets an entry inside the declared band; entries outside are an error.
    pub fn set(&mut self, i: usize, j: usize, v: f64) -> Result<()> {
        if j + self.kl < i || j > i + self.ku {
            if v == 0.0 {
                return Ok(());
            }
            return Err(Error::Shape(format!("entry ({i},{j}) outside band ({},{})", self.kl, self.ku)));
        }
        let s = self.slot(i, j).expect("inside band");
        self.data[s] = v;
        Ok(())
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) -> Result<()> {
        let cur = self.get(i, j);
        self.set(i, j, cur + v)
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            y[i] = (lo..=hi).map(|j| self.get(i, j) * x[j]).sum();
        }
    }

    /// LU factorisation with partial pivoting (row interchanges).
    pub fn factor(mut self) -> Result<BandedLu> {
        let n = self.n;
        let kl = self.kl;
        let reach = self.kl + self.ku;
        let mut pivots = vec![0usize; n];
        let mut lower = vec![0.0; n * kl.max(1)];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=last {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Solver(format!("singular banded matrix at column {k}")));
            }
            pivots[k] = p;
            let col_hi = (k + reach).min(n - 1);
            if p != k {
                for j in k..=col_hi {
                    let a = self.get(k, j);
                    let b = self.get(p, j);
                    let sa = self.slot(k, j).expect("pivot row window");
                    self.data[sa] = b;
                    if let Some(sb) = self.slot(p, j) {
                        self.data[sb] = a;
                    }
                }
            }
            let piv = self.get(k, k);
            for i in k + 1..=last {
                let m = self.get(i, k) / piv;
                lower[k * kl.max(1) + (i - k - 1)] = m;
                if m != 0.0 {
                    for j in k..=col_hi {
                        let ukj = self.get(k, j);
                        if ukj != 0.0 {
                            let s = self.slot(i, j).expect("fill-in window");
                            self.data[s] -= m * ukj;
                        }
                    }
                }
            }
        }
        Ok(BandedLu { u: self, lower, pivots })
    }
}

/// Factorised banded matrix ready for repeated solves.
#[derive(Debug, Clone)]
pub struct BandedLu {
    u: BandedMatrix,
    lower: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<()> {
        let n = self.u.n;
        if b.len() != n {
            return Err(Error::Shape(format!("banded solve expects {n} entries, got {}", b.len())));
        }
        let kl = self.u.kl;
        let reach = self.u.kl + self.u.ku;
        for k in 0..n {
            b.swap(k, self.pivots[k]);
            let last = (k + kl).min(n - 1);
            for i in k + 1..=last {
                b[i] -= self.lower[k * kl.max(1) + (i - k - 1)] * b[k];
            }
        }
        for k in (0..n).rev() {
            let hi = (k + reach).min(n - 1);
            let mut acc = b[k];
            for j in k + 1..=hi {
                acc -= self.u.get(k, j) * b[j];
            }
            b[k] = acc / self.u.get(k, k);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn upwind_residual(nu: f64, x: &[f64], rhs: &[f64]) -> f64 {
        let n = x.len();
        (0..n)
            .map(|j| {
                let prev = x[(j + n - 1) % n];
                (x[j] + nu * (x[j] - prev) - rhs[j]).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn upwind_zero_nu_returns_rhs() {
        let rhs = [0.3, -1.0, 2.5, 4.0];
        let mut x = [0.0; 4];
        solve_cyclic_upwind(0.0, &rhs, &mut x).unwrap();
        assert_eq!(x, rhs);
    }

    #[test]
    fn upwind_two_cell_hand_solution() {
        let mut x = [0.0; 2];
        solve_cyclic_upwind(1.0, &[0.5, 0.5], &mut x).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-15 && (x[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn upwind_residual_and_mean_over_wide_nu_range() {
        let rhs: Vec<f64> = (0..37).map(|j| ((j * 7919) % 101) as f64 / 13.0 - 2.0).collect();
        let mean_rhs = rhs.iter().sum::<f64>() / rhs.len() as f64;
        let norm = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for &nu in &[1e-6, 0.3, 1.0, 17.0, 1e3, 1e6] {
            let mut x = vec![0.0; rhs.len()];
            solve_cyclic_upwind(nu, &rhs, &mut x).unwrap();
            assert!(upwind_residual(nu, &x, &rhs) <= 1e-12 * norm * (1.0 + nu), "nu={nu}");
            let mean_x = x.iter().sum::<f64>() / x.len() as f64;
            assert!((mean_x - mean_rhs).abs() < 1e-13 * (1.0 + nu.sqrt()), "nu={nu}");
        }
    }

    #[test]
    fn negative_nu_rejected() {
        let mut x = [0.0; 3];
        assert!(solve_cyclic_upwind(-0.1, &[1.0, 2.0, 3.0], &mut x).is_err());
    }

    #[test]
    fn cyclic_tridiagonal_matches_dense_residual() {
        let n = 9;
        let sub: Vec<f64> = (0..n).map(|i| -0.7 - 0.01 * i as f64).collect();
        let diag: Vec<f64> = (0..n).map(|i| 1.0 + 0.05 * i as f64).collect();
        let sup: Vec<f64> = (0..n).map(|i| 0.7 + 0.02 * i as f64).collect();
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = vec![0.0; n];
        solve_cyclic_tridiagonal(&sub, &diag, &sup, &rhs, &mut x).unwrap();
        for i in 0..n {
            let r = sub[i] * x[(i + n - 1) % n] + diag[i] * x[i] + sup[i] * x[(i + 1) % n];
            assert!((r - rhs[i]).abs() < 1e-12, "row {i}");
        }
    }

    #[test]
    fn cyclic_skew_system_with_large_coupling() {
        for &k in &[0.3, 5.0, 250.0] {
            let n = 12;
            let sub = vec![-k; n];
            let diag = vec![1.0; n];
            let sup = vec![k; n];
            let rhs: Vec<f64> = (0..n).map(|i| if i < 5 { 2.0 } else { 1.0 }).collect();
            let mut x = vec![0.0; n];
            solve_cyclic_tridiagonal(&sub, &diag, &sup, &rhs, &mut x).unwrap();
            for i in 0..n {
                let r = -k * x[(i + n - 1) % n] + x[i] + k * x[(i + 1) % n];
                assert!((r - rhs[i]).abs() < 1e-11 * (1.0 + k), "k={k} row {i}");
            }
        }
    }

    #[test]
    fn banded_lu_with_pivoting() {
        // Zero leading diagonal forces a row interchange.
        let n = 7;
        let mut m = BandedMatrix::zeros(n, 2, 1);
        for i in 0..n {
            if i > 0 {
                m.set(i, i, 0.5 + i as f64 * 0.1).unwrap();
            }
            if i >= 1 {
                m.set(i, i - 1, 2.0 - 0.1 * i as f64).unwrap();
            }
            if i >= 2 {
                m.set(i, i - 2, 0.3).unwrap();
            }
            if i + 1 < n {
                m.set(i, i + 1, -1.0).unwrap();
            }
        }
        let x_true: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let mut b = vec![0.0; n];
        m.matvec(&x_true, &mut b);
        let lu = m.factor().unwrap();
        lu.solve_in_place(&mut b).unwrap();
        for (a, e) in b.iter().zip(&x_true) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn banded_rejects_out_of_band_entry() {
        let mut m = BandedMatrix::zeros(5, 1, 1);
        assert!(m.set(0, 3, 1.0).is_err());
        assert!(m.set(0, 3, 0.0).is_ok());
    }
}
