//! Banded Cholesky factorization for the grid preconditioners.

use crate::error::{Error, Result};

/// `L L^T` factor of a symmetric positive definite band matrix, stored by
/// rows as `band[i * (bw + 1) + k] = L[i][i - k]`.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    band: Vec<f64>,
}

impl BandedCholesky {
    /// Factors the matrix given as symmetric triplets `(row, col, value)`;
    /// duplicates are summed and only one triangle needs to be supplied for
    /// off-diagonal entries.
    pub fn factor(n: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let bw = entries.iter().map(|&(a, b, _)| a.abs_diff(b)).max().unwrap_or(0);
        let w = bw + 1;
        let mut band = vec![0.0; n * w];
        for &(a, b, v) in entries {
            let (i, j) = if a >= b { (a, b) } else { (b, a) };
            band[i * w + (i - j)] += v;
        }
        for i in 0..n {
            let jmin = i.saturating_sub(bw);
            for j in jmin..=i {
                let mut s = band[i * w + (i - j)];
                let kmin = jmin.max(j.saturating_sub(bw));
                for k in kmin..j {
                    s -= band[i * w + (i - k)] * band[j * w + (j - k)];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::Unsupported(format!(
                            "preconditioner not positive definite at row {i}"
                        )));
                    }
                    band[i * w] = s.sqrt();
                } else {
                    band[i * w + (i - j)] = s / band[j * w];
                }
            }
        }
        Ok(Self { n, bw, band })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    #[allow(clippy::needless_range_loop)]
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let w = self.bw + 1;
        for i in 0..self.n {
            let mut s = x[i];
            for k in i.saturating_sub(self.bw)..i {
                s -= self.band[i * w + (i - k)] * x[k];
            }
            x[i] = s / self.band[i * w];
        }
        for i in (0..self.n).rev() {
            let mut s = x[i];
            for k in i + 1..(i + self.bw + 1).min(self.n) {
                s -= self.band[k * w + (k - i)] * x[k];
            }
            x[i] = s / self.band[i * w];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_tridiagonal_system() {
        let n = 6;
        let mut entries = Vec::new();
        for i in 0..n {
            entries.push((i, i, 2.5));
            if i + 1 < n {
                entries.push((i + 1, i, -1.0));
            }
        }
        let f = BandedCholesky::factor(n, &entries).unwrap();
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let mut b = vec![0.0; n];
        for &(i, j, v) in &entries {
            b[i] += v * x_true[j];
            if i != j {
                b[j] += v * x_true[i];
            }
        }
        f.solve_in_place(&mut b);
        for (a, t) in b.iter().zip(&x_true) {
            assert!((a - t).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let entries = [(0, 0, 1.0), (1, 1, 1.0), (1, 0, 2.0)];
        assert!(BandedCholesky::factor(2, &entries).is_err());
    }
}
