//! Compressed sparse row matrices and a banded Cholesky factorization.
//!
//! All assembled operators are symmetric; the matrices produced by one
//! [`crate::fem::FemSpace`] share a single sparsity pattern.

use crate::error::{Error, Result};
use std::sync::Arc;

/// Sparsity pattern of a symmetric sparse matrix (full storage, sorted rows).
#[derive(Debug, Clone)]
pub struct CsrPattern {
    pub n: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
}

impl CsrPattern {
    /// Builds a pattern from undirected adjacency pairs; the diagonal is
    /// always included.
    pub fn from_pairs(n: usize, pairs: impl Iterator<Item = (usize, usize)>) -> Self {
        let mut adj: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for (i, j) in pairs {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        indptr.push(0);
        for row in &mut adj {
            row.sort_unstable();
            row.dedup();
            indices.extend_from_slice(row);
            indptr.push(indices.len());
        }
        CsrPattern { n, indptr, indices }
    }

    /// Index into the value array for entry `(i, j)`, if present.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let lo = self.indptr[i];
        let hi = self.indptr[i + 1];
        self.indices[lo..hi].binary_search(&j).ok().map(|p| lo + p)
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }
}

/// Symmetric sparse matrix in CSR format.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub pattern: Arc<CsrPattern>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(pattern: Arc<CsrPattern>) -> Self {
        let nnz = pattern.nnz();
        CsrMatrix {
            pattern,
            values: vec![0.0; nnz],
        }
    }

    pub fn n(&self) -> usize {
        self.pattern.n
    }

    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        let p = self
            .pattern
            .position(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside sparsity pattern"));
        self.values[p] += v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n()];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        let p = &self.pattern;
        for i in 0..p.n {
            let mut acc = 0.0;
            for idx in p.indptr[i]..p.indptr[i + 1] {
                acc += self.values[idx] * x[p.indices[idx]];
            }
            y[i] = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n())
            .map(|i| {
                self.pattern
                    .position(i, i)
                    .map(|p| self.values[p])
                    .unwrap_or(0.0)
            })
            .collect()
    }

    /// `self + diag(d)` for a full diagonal vector.
    pub fn with_added_diagonal(&self, d: &[f64]) -> CsrMatrix {
        let mut out = self.clone();
        for i in 0..self.n() {
            let p = self
                .pattern
                .position(i, i)
                .expect("pattern must contain the diagonal");
            out.values[p] += d[i];
        }
        out
    }

    /// `a * self + b * other`; both matrices must share a pattern.
    pub fn linear_combination(&self, a: f64, other: &CsrMatrix, b: f64) -> CsrMatrix {
        assert!(Arc::ptr_eq(&self.pattern, &other.pattern));
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&x, &y)| a * x + b * y)
            .collect();
        CsrMatrix {
            pattern: self.pattern.clone(),
            values,
        }
    }

    /// Largest absolute asymmetry `|a_ij - a_ji|` over stored entries.
    pub fn max_asymmetry(&self) -> f64 {
        let p = &self.pattern;
        let mut worst: f64 = 0.0;
        for i in 0..p.n {
            for idx in p.indptr[i]..p.indptr[i + 1] {
                let j = p.indices[idx];
                if j > i {
                    let ji = p
                        .position(j, i)
                        .map(|q| self.values[q])
                        .unwrap_or(0.0);
                    worst = worst.max((self.values[idx] - ji).abs());
                }
            }
        }
        worst
    }

    /// Half-bandwidth `max |i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        let p = &self.pattern;
        let mut bw = 0;
        for i in 0..p.n {
            for idx in p.indptr[i]..p.indptr[i + 1] {
                bw = bw.max(i.abs_diff(p.indices[idx]));
            }
        }
        bw
    }
}

/// Cholesky factorization of a symmetric positive definite banded matrix.
///
/// Stores the lower factor in a dense band of width `bw + 1`; factorization
/// costs `O(n bw^2)` and each solve `O(n bw)`.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    /// `band[i * (bw + 1) + d]` holds `L[i][i - d]` for `d <= min(i, bw)`.
    band: Vec<f64>,
}

impl BandedCholesky {
    /// Factors `matrix`. With `ground_first_row`, row and column 0 are
    /// replaced by the identity, which pins one degree of freedom of a
    /// singular Neumann operator (solve with `b[0] = 0`).
    pub fn factor(matrix: &CsrMatrix, ground_first_row: bool) -> Result<Self> {
        let n = matrix.n();
        let bw = matrix.bandwidth();
        let width = bw + 1;
        if n.checked_mul(width).is_none_or(|total| total > 300_000_000) {
            return Err(Error::Domain(format!(
                "banded factorization too large: n = {n}, bandwidth = {bw}"
            )));
        }
        let mut band = vec![0.0; n * width];
        let p = &matrix.pattern;
        for i in 0..n {
            for idx in p.indptr[i]..p.indptr[i + 1] {
                let j = p.indices[idx];
                if j <= i {
                    let mut v = matrix.values[idx];
                    if ground_first_row && (i == 0 || j == 0) {
                        v = if i == 0 && j == 0 { 1.0 } else { 0.0 };
                    }
                    band[i * width + (i - j)] = v;
                }
            }
        }

        // In-place banded Cholesky: L[i][j] over j in [i - bw, i].
        for i in 0..n {
            let j_lo = i.saturating_sub(bw);
            for j in j_lo..=i {
                let mut sum = band[i * width + (i - j)];
                let k_lo = j_lo.max(j.saturating_sub(bw));
                for k in k_lo..j {
                    sum -= band[i * width + (i - k)] * band[j * width + (j - k)];
                }
                if i == j {
                    if sum <= 0.0 {
                        return Err(Error::Domain(format!(
                            "banded Cholesky pivot {sum:.3e} at row {i}: matrix not positive definite"
                        )));
                    }
                    band[i * width] = sum.sqrt();
                } else {
                    band[i * width + (i - j)] = sum / band[j * width];
                }
            }
        }
        Ok(BandedCholesky { n, bw, band })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let width = self.bw + 1;
        let mut x = b.to_vec();
        // Forward: L y = b.
        for i in 0..self.n {
            let j_lo = i.saturating_sub(self.bw);
            let mut sum = x[i];
            for j in j_lo..i {
                sum -= self.band[i * width + (i - j)] * x[j];
            }
            x[i] = sum / self.band[i * width];
        }
        // Backward: L^T x = y.
        for i in (0..self.n).rev() {
            let mut sum = x[i];
            let j_hi = (i + self.bw).min(self.n - 1);
            for j in (i + 1)..=j_hi {
                sum -= self.band[j * width + (j - i)] * x[j];
            }
            x[i] = sum / self.band[i * width];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tridiag(n: usize, diag: f64, off: f64) -> CsrMatrix {
        let pattern = Arc::new(CsrPattern::from_pairs(n, (0..n - 1).map(|i| (i, i + 1))));
        let mut m = CsrMatrix::zeros(pattern);
        for i in 0..n {
            m.add_at(i, i, diag);
            if i + 1 < n {
                m.add_at(i, i + 1, off);
                m.add_at(i + 1, i, off);
            }
        }
        m
    }

    #[test]
    fn matvec_tridiagonal() {
        let m = tridiag(4, 2.0, -1.0);
        let y = m.matvec(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(y, vec![0.0, 0.0, 0.0, 5.0]);
        assert_eq!(m.bandwidth(), 1);
        assert_eq!(m.max_asymmetry(), 0.0);
    }

    #[test]
    fn banded_cholesky_solves() {
        let m = tridiag(50, 2.5, -1.0);
        let chol = BandedCholesky::factor(&m, false).unwrap();
        let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let x = chol.solve(&b);
        let r = m.matvec(&x);
        for (ri, bi) in r.iter().zip(&b) {
            assert_relative_eq!(ri, bi, epsilon = 1e-12);
        }
    }

    #[test]
    fn grounded_factor_pins_first_row() {
        // Singular graph Laplacian of a path; grounding makes it solvable.
        let m = tridiag(5, 2.0, -1.0);
        let mut lap = m.clone();
        // Turn into Neumann-like operator with zero row sums.
        let p0 = lap.pattern.position(0, 0).unwrap();
        lap.values[p0] = 1.0;
        let pn = lap.pattern.position(4, 4).unwrap();
        lap.values[pn] = 1.0;
        let chol = BandedCholesky::factor(&lap, true).unwrap();
        // Consistent rhs (sums to zero), x[0] pinned to 0.
        let b = vec![0.0, 1.0, 0.0, -1.0, 0.0];
        let x = chol.solve(&b);
        assert_eq!(x[0], 0.0);
        let r = lap.matvec(&x);
        for (i, (&ri, &bi)) in r.iter().zip(&b).enumerate() {
            if i > 0 {
                assert_relative_eq!(ri, bi, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn non_spd_rejected() {
        let m = tridiag(3, 0.5, -1.0);
        assert!(BandedCholesky::factor(&m, false).is_err());
    }
}
