//! Triangular-factor helpers for the square-root filter.

use nalgebra::{DMatrix, DVector};

/// Lower-triangular `S` with positive diagonal such that `S S^T = A^T A`,
/// where `a` is `A` (rows are the stacked, weighted deviations).
pub fn tria(a: DMatrix<f64>) -> DMatrix<f64> {
    let n = a.ncols();
    let r = a.qr().r();
    let mut s = r.transpose();
    for j in 0..n {
        if s[(j, j)] < 0.0 {
            for i in j..n {
                s[(i, j)] = -s[(i, j)];
            }
        }
    }
    s
}

/// In-place rank-one update `S S^T + sign x x^T` of a lower-triangular
/// factor. Returns `false` (leaving `s` partly modified) when a downdate
/// would make the matrix indefinite.
pub fn cholupdate(s: &mut DMatrix<f64>, x: &DVector<f64>, sign: f64) -> bool {
    let n = s.nrows();
    let mut x = x.clone();
    for k in 0..n {
        let d = s[(k, k)];
        let r2 = d * d + sign * x[k] * x[k];
        if !(r2 > 0.0) || !(d > 0.0) {
            return false;
        }
        let r = r2.sqrt();
        let c = r / d;
        let sn = x[k] / d;
        s[(k, k)] = r;
        for i in k + 1..n {
            s[(i, k)] = (s[(i, k)] + sign * sn * x[i]) / c;
            x[i] = c * x[i] - sn * s[(i, k)];
        }
    }
    true
}

/// Cholesky factor of a symmetric matrix, adding `1e-12 * 10^k` to the
/// diagonal until it factors. Returns the factor and whether inflation was
/// needed, or `None` if even a large jitter fails.
pub fn refactor(p: &DMatrix<f64>) -> Option<(DMatrix<f64>, bool)> {
    let sym = (p + p.transpose()) * 0.5;
    if let Some(c) = sym.clone().cholesky() {
        return Some((c.l(), false));
    }
    let n = p.nrows();
    let mut jitter = 1e-12;
    for _ in 0..10 {
        let inflated = &sym + DMatrix::identity(n, n) * jitter;
        if let Some(c) = inflated.cholesky() {
            return Some((c.l(), true));
        }
        jitter *= 10.0;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &DMatrix<f64>, b: &DMatrix<f64>) -> bool {
        (a - b).norm() <= 1e-12 * b.norm().max(1.0)
    }

    #[test]
    fn tria_reproduces_gram_matrix() {
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, -0.5, 0.3, 0.2, 1.0, 3.0, -1.0]);
        let s = tria(a.clone());
        assert!(close(&(&s * s.transpose()), &(a.transpose() * &a)));
        assert!(s[(0, 1)] == 0.0 && s[(0, 0)] > 0.0 && s[(1, 1)] > 0.0);
    }

    #[test]
    fn update_then_downdate() {
        let p = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let s0 = p.clone().cholesky().unwrap().l();
        let x = DVector::from_vec(vec![0.3, -0.7, 1.1]);
        let mut s = s0.clone();
        assert!(cholupdate(&mut s, &x, 1.0));
        assert!(close(&(&s * s.transpose()), &(&p + &x * x.transpose())));
        assert!(cholupdate(&mut s, &x, -1.0));
        assert!(close(&s, &s0));
    }

    #[test]
    fn indefinite_downdate_fails() {
        let mut s = DMatrix::identity(2, 2);
        assert!(!cholupdate(&mut s, &DVector::from_vec(vec![2.0, 0.0]), -1.0));
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let (l, inflated) = refactor(&p).unwrap();
        assert!(inflated && l[(1, 1)] > 0.0);
    }
}
