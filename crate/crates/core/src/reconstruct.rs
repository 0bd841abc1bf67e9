//! Interface reconstruction on uniform periodic 1D stencils.
//!
//! The third-order reconstruction uses the parabola through three cell
//! averages. The limited variant is Koren's limiter: it returns the parabolic
//! value whenever the ratio of consecutive differences lies in `[1/4, 5/2]`,
//! and otherwise falls back to a bounded slope that keeps the interface value
//! between the neighbouring averages.

use serde::{Deserialize, Serialize};

/// Reconstruction of the interface values of each cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reconstruction {
    /// Piecewise constant.
    FirstOrder,
    /// Parabolic, no limiting.
    Unlimited3,
    /// Parabolic with the TVD limiter.
    Limited3,
}

/// Offset of the right interface value from the cell average, given the
/// left and right differences `dl = w_j - w_{j-1}`, `dr = w_{j+1} - w_j`.
#[inline]
pub fn plus_offset(mode: Reconstruction, dl: f64, dr: f64) -> f64 {
    match mode {
        Reconstruction::FirstOrder => 0.0,
        Reconstruction::Unlimited3 => (dl + 2.0 * dr) / 6.0,
        Reconstruction::Limited3 => 0.5 * koren(dl, dr),
    }
}

/// Offset of the left interface value; the mirror image of [`plus_offset`].
#[inline]
pub fn minus_offset(mode: Reconstruction, dl: f64, dr: f64) -> f64 {
    -plus_offset(mode, dr, dl)
}

/// Koren's limited increment `sign · min(2|a|, |a+2b|/3, 2|b|)`, zero at
/// extrema.
#[inline]
pub fn koren(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        return 0.0;
    }
    let m = (2.0 * a.abs()).min((a + 2.0 * b).abs() / 3.0).min(2.0 * b.abs());
    m.copysign(a)
}

/// Interface values `(w_{j,-}, w_{j,+})` of the middle cell of a three-cell
/// stencil. The limited branch is clamped to the stencil range.
#[inline]
pub fn face_pair(mode: Reconstruction, wm: f64, w0: f64, wp: f64) -> (f64, f64) {
    let dl = w0 - wm;
    let dr = wp - w0;
    let mut lo = w0 + minus_offset(mode, dl, dr);
    let mut hi = w0 + plus_offset(mode, dl, dr);
    if mode == Reconstruction::Limited3 {
        let min = wm.min(w0).min(wp);
        let max = wm.max(w0).max(wp);
        lo = lo.clamp(min, max);
        hi = hi.clamp(min, max);
    }
    (lo, hi)
}

/// Interface values of every cell on a periodic grid.
pub fn reconstruct_periodic(mode: Reconstruction, w: &[f64], minus: &mut [f64], plus: &mut [f64]) {
    let n = w.len();
    assert!(minus.len() == n && plus.len() == n, "output length mismatch");
    if n == 0 {
        return;
    }
    for j in 0..n {
        let wm = w[(j + n - 1) % n];
        let wp = w[(j + 1) % n];
        let (lo, hi) = face_pair(mode, wm, w[j], wp);
        minus[j] = lo;
        plus[j] = hi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Reconstruction::*;

    #[test]
    fn linear_data_is_exact() {
        for mode in [Unlimited3, Limited3] {
            let w: Vec<f64> = (0..6).map(|j| 2.0 + 0.5 * j as f64).collect();
            for j in 1..5 {
                let (lo, hi) = face_pair(mode, w[j - 1], w[j], w[j + 1]);
                assert!((hi - (w[j] + 0.25)).abs() < 1e-15);
                assert!((lo - (w[j] - 0.25)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn hat_stays_in_bounds() {
        let (lo, hi) = face_pair(Limited3, 0.0, 1.0, 0.0);
        assert!((0.0..=1.0).contains(&lo.abs()) && (0.0..=1.0).contains(&hi.abs()));
        assert_eq!((lo, hi), (1.0, 1.0));
        // The parabola overshoots next to a step.
        let (_, hi) = face_pair(Unlimited3, 1.0, 1.0, 0.0);
        assert!((hi - 2.0 / 3.0).abs() < 1e-15);
        let (lo, _) = face_pair(Unlimited3, 1.0, 1.0, 0.0);
        assert!(lo > 1.0);
    }

    #[test]
    fn limiter_window() {
        // Parabolic value kept for ratios in [1/4, 5/2].
        for r in [0.25, 0.5, 1.0, 2.0, 2.5] {
            let a = 1.0;
            let b = r * a;
            assert!((koren(a, b) - (a + 2.0 * b) / 3.0).abs() < 1e-15, "r={r}");
        }
        assert!(koren(1.0, 0.2) < (1.0 + 0.4) / 3.0);
        assert!(koren(1.0, 3.0) < (1.0 + 6.0) / 3.0);
        assert_eq!(koren(1.0, -1.0), 0.0);
    }

    #[test]
    fn first_order_returns_average() {
        assert_eq!(face_pair(FirstOrder, 3.0, 1.0, -2.0), (1.0, 1.0));
    }

    #[test]
    fn periodic_wrap() {
        let w = [1.0, 2.0, 4.0, 8.0];
        let mut lo = [0.0; 4];
        let mut hi = [0.0; 4];
        reconstruct_periodic(Unlimited3, &w, &mut lo, &mut hi);
        let (l0, h0) = face_pair(Unlimited3, 8.0, 1.0, 2.0);
        assert_eq!((lo[0], hi[0]), (l0, h0));
    }
}
