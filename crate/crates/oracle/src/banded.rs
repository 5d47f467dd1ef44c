use num_complex::Complex64;

use crate::error::{OracleError, Result};
use crate::lattice::SparseHermitian;

/// `A - sigma I = L D L^H` for a banded Hermitian matrix, no pivoting.
///
/// Row `i` of the unit lower factor is stored in `rows[i * (bw + 1)..]`, with column `j`
/// at offset `j + bw - i`; the diagonal slot holds the pivot.
#[derive(Clone, Debug)]
pub struct BandLdl {
    n: usize,
    bw: usize,
    rows: Vec<Complex64>,
    d: Vec<f64>,
}

impl BandLdl {
    pub fn factor(a: &SparseHermitian, sigma: f64) -> Result<Self> {
        let n = a.n;
        let bw = a.bandwidth();
        let w = bw + 1;
        let mut rows = vec![Complex64::new(0.0, 0.0); n * w];
        for i in 0..n {
            for p in a.row_ptr[i]..a.row_ptr[i + 1] {
                let j = a.cols[p];
                if j <= i {
                    rows[i * w + j + bw - i] = a.vals[p];
                }
            }
            rows[i * w + bw] -= Complex64::new(sigma, 0.0);
        }
        let scale = a.gershgorin().max(sigma.abs()).max(1e-300);
        let mut d = vec![0.0; n];
        // t[k] = l_ik d_k for the row being factored
        let mut t = vec![Complex64::new(0.0, 0.0); w];
        for i in 0..n {
            let start = i.saturating_sub(bw);
            for j in start..i {
                // l_ij = (a_ij - sum_{k<j} l_ik conj(l_jk) d_k) / d_j
                let lo = start.max(j.saturating_sub(bw));
                let mut s = rows[i * w + j + bw - i];
                let rj = j * w + bw - j;
                for k in lo..j {
                    s -= t[k + bw - i] * rows[rj + k].conj();
                }
                let l = s / d[j];
                rows[i * w + j + bw - i] = l;
                t[j + bw - i] = l * d[j];
            }
            let mut di = rows[i * w + bw].re;
            for k in start..i {
                di -= (rows[i * w + k + bw - i] * t[k + bw - i].conj()).re;
            }
            if !di.is_finite() || di.abs() <= 1e-14 * scale {
                return Err(OracleError::Breakdown { row: i, pivot: di });
            }
            d[i] = di;
            rows[i * w + bw] = Complex64::new(1.0, 0.0);
        }
        Ok(BandLdl { n, bw, rows, d })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of negative pivots, i.e. eigenvalues of `A` below the shift.
    pub fn negative_count(&self) -> usize {
        self.d.iter().filter(|&&x| x < 0.0).count()
    }

    pub fn is_positive(&self) -> bool {
        self.d.iter().all(|&x| x > 0.0)
    }

    /// Solve `(A - sigma) x = b` in place.
    pub fn solve(&self, x: &mut [Complex64]) {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        for i in 0..n {
            let start = i.saturating_sub(bw);
            let mut s = x[i];
            let base = i * w + bw - i;
            for k in start..i {
                s -= self.rows[base + k] * x[k];
            }
            x[i] = s;
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let start = i.saturating_sub(bw);
            let xi = x[i];
            let base = i * w + bw - i;
            for k in start..i {
                x[k] -= self.rows[base + k].conj() * xi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> SparseHermitian {
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![(i, Complex64::new(2.0, 0.0))];
                if i > 0 {
                    r.push((i - 1, Complex64::new(-1.0, -0.5)));
                }
                if i + 1 < n {
                    r.push((i + 1, Complex64::new(-1.0, 0.5)));
                }
                r
            })
            .collect();
        SparseHermitian::from_rows(rows)
    }

    #[test]
    fn solve_matches_matvec() {
        let a = tridiag(30);
        let f = BandLdl::factor(&a, 0.1).unwrap();
        let b: Vec<Complex64> = (0..30).map(|i| Complex64::new(i as f64, 1.0 - i as f64 * 0.1)).collect();
        let mut x = b.clone();
        f.solve(&mut x);
        let mut y = vec![Complex64::new(0.0, 0.0); 30];
        a.matvec(&x, &mut y);
        for i in 0..30 {
            let r = y[i] - Complex64::new(0.1, 0.0) * x[i] - b[i];
            assert!(r.norm() < 1e-10, "{i}: {r}");
        }
    }

    #[test]
    fn inertia_counts_eigenvalues() {
        // eigenvalues of the tridiagonal matrix: 2 - 2 |c| cos(k pi/(n+1)), |c| = sqrt(1.25)
        let n = 30;
        let a = tridiag(n);
        let c = 1.25f64.sqrt();
        let ev: Vec<f64> = (1..=n).map(|k| 2.0 - 2.0 * c * (k as f64 * std::f64::consts::PI / (n + 1) as f64).cos()).collect();
        let t = 1.3;
        let expect = ev.iter().filter(|&&e| e < t).count();
        assert_eq!(BandLdl::factor(&a, t).unwrap().negative_count(), expect);
    }
}
