//! Banded symmetric positive definite matrices.

/// Symmetric matrix stored as its lower band: `band[i * (bw + 1) + k]` is
/// the entry at row `i`, column `i - k`.
#[derive(Debug, Clone)]
pub(crate) struct BandedSpd {
    n: usize,
    bw: usize,
    band: Vec<f64>,
}

impl BandedSpd {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandedSpd {
            n,
            bw,
            band: vec![0.0; n * (bw + 1)],
        }
    }

    /// Adds `v` to entry `(i, j)` (and its mirror).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(r - c <= self.bw);
        self.band[r * (self.bw + 1) + (r - c)] += v;
    }

    /// In-place Cholesky factorization. Returns `None` if a pivot is not positive.
    pub fn factor(mut self) -> Option<BandedCholesky> {
        let w = self.bw + 1;
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..=i {
                let mut s = self.band[i * w + (i - j)];
                let klo = lo.max(j.saturating_sub(self.bw));
                for k in klo..j {
                    s -= self.band[i * w + (i - k)] * self.band[j * w + (j - k)];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return None;
                    }
                    self.band[i * w] = s.sqrt();
                } else {
                    self.band[i * w + (i - j)] = s / self.band[j * w];
                }
            }
        }
        Some(BandedCholesky { l: self })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BandedCholesky {
    l: BandedSpd,
}

impl BandedCholesky {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.l.n;
        let bw = self.l.bw;
        let w = bw + 1;
        let band = &self.l.band;
        let mut y = rhs.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut s = y[i];
            for k in lo..i {
                s -= band[i * w + (i - k)] * y[k];
            }
            y[i] = s / band[i * w];
        }
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let mut s = y[i];
            for k in i + 1..=hi {
                s -= band[k * w + (k - i)] * y[k];
            }
            y[i] = s / band[i * w];
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_tridiagonal_system() {
        let n = 6;
        let mut m = BandedSpd::zeros(n, 1);
        for i in 0..n {
            m.add(i, i, 2.0);
            if i + 1 < n {
                m.add(i + 1, i, -1.0);
            }
        }
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 1.0).collect();
        let rhs: Vec<f64> = (0..n)
            .map(|i| {
                let mut s = 2.0 * x_true[i];
                if i > 0 {
                    s -= x_true[i - 1];
                }
                if i + 1 < n {
                    s -= x_true[i + 1];
                }
                s
            })
            .collect();
        let x = m.factor().unwrap().solve(&rhs);
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn detects_indefinite_matrix() {
        let mut m = BandedSpd::zeros(2, 1);
        m.add(0, 0, 1.0);
        m.add(1, 1, 1.0);
        m.add(0, 1, 2.0);
        assert!(m.factor().is_none());
    }

    #[test]
    fn wide_band_matches_dense_product() {
        // 5-point Laplacian on a 4x3 grid, bandwidth 4.
        let (nx, ny) = (4, 3);
        let n = nx * ny;
        let mut m = BandedSpd::zeros(n, nx);
        let mut dense = vec![vec![0.0; n]; n];
        for c in 0..n {
            m.add(c, c, 4.0);
            dense[c][c] += 4.0;
            let (i, j) = (c % nx, c / nx);
            if i + 1 < nx {
                m.add(c, c + 1, -1.0);
                dense[c][c + 1] -= 1.0;
                dense[c + 1][c] -= 1.0;
            }
            if j + 1 < ny {
                m.add(c, c + nx, -1.0);
                dense[c][c + nx] -= 1.0;
                dense[c + nx][c] -= 1.0;
            }
        }
        let rhs: Vec<f64> = (0..n).map(|i| (i * i) as f64 * 0.1 - 1.0).collect();
        let x = m.factor().unwrap().solve(&rhs);
        for r in 0..n {
            let ax: f64 = (0..n).map(|k| dense[r][k] * x[k]).sum();
            assert!((ax - rhs[r]).abs() < 1e-12);
        }
    }
}
