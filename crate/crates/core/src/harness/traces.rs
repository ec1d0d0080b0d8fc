//! Exact trace powers of the rescaled matrix from neighbour lists.
//!
//! For a polynomial test function `f(x) = sum_k c_k x^k` the spectral
//! statistic is `sum_k c_k tr(M^k)`, so no eigenvalues are needed. With
//! `M = (A - p J) / sigma` and `B = A - p J`,
//!
//! ```text
//! B^2 = A^2 - p (d 1^T + 1 d^T) + p^2 N J        (d = degree vector)
//! tr B^3 = sum_ij (B^2)_ij B_ij,   tr B^4 = |B^2|_F^2
//! ```
//!
//! and a row of `A^2` costs the sum of the neighbours' degrees, which is
//! far below a dense product for sparse graphs.

use crate::model::{for_each_lower_bit, SbmParams};

/// Neighbour lists of a sampled 0/1 adjacency matrix (self-loops included).
#[derive(Clone, Debug, PartialEq)]
pub struct SparseAdjacency {
    rows: Vec<Vec<u32>>,
}

impl SparseAdjacency {
    /// Same random draws, in the same order, as
    /// [`sample_adjacency`](crate::model::sample_adjacency).
    pub fn sample(params: &SbmParams, seed: u64) -> Self {
        let mut rows = vec![Vec::new(); params.n];
        for_each_lower_bit(params, seed, |i, j, bit| {
            if bit {
                rows[i].push(j as u32);
                if i != j {
                    rows[j].push(i as u32);
                }
            }
        });
        Self { rows }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// Sorted neighbours of row `i`.
    pub fn row(&self, i: usize) -> &[u32] {
        &self.rows[i]
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// `tr(B^k)` for `k = 0..=max_power` with `B = A - p J`; `max_power <= 4`.
    pub fn centered_traces(&self, p: f64, max_power: usize) -> Vec<f64> {
        assert!(max_power <= 4, "trace powers above 4 are not implemented");
        let n = self.dim();
        let nf = n as f64;
        let nnz = self.nnz() as f64;
        let diag = (0..n).filter(|&i| self.rows[i].binary_search(&(i as u32)).is_ok()).count() as f64;
        let mut out = vec![nf, diag - p * nf, nnz * (1.0 - 2.0 * p) + nf * nf * p * p];
        if max_power < 3 {
            out.truncate(max_power + 1);
            return out;
        }

        let deg: Vec<f64> = self.rows.iter().map(|r| r.len() as f64).collect();
        let mut counts = vec![0u32; n];
        let (mut tr3, mut tr4) = (0.0, 0.0);
        for (i, ri) in self.rows.iter().enumerate() {
            for &k in ri {
                for &j in &self.rows[k as usize] {
                    counts[j as usize] += 1;
                }
            }
            let base = p * p * nf - p * deg[i];
            let mut row_sum = 0.0;
            let mut row_sq = 0.0;
            for j in 0..n {
                let b = counts[j] as f64 - p * deg[j] + base;
                row_sum += b;
                row_sq += b * b;
            }
            let mut on_edges = 0.0;
            for &j in ri {
                on_edges += counts[j as usize] as f64 - p * deg[j as usize] + base;
            }
            tr3 += on_edges - p * row_sum;
            tr4 += row_sq;
            counts.iter_mut().for_each(|c| *c = 0);
        }
        out.push(tr3);
        out.push(tr4);
        out.truncate(max_power + 1);
        out
    }
}

/// `sum_k c_k tr(M^k)` from the centered traces, `M = B / sigma`.
pub fn polynomial_lss(coeffs: &[f64], traces: &[f64], sigma: f64) -> f64 {
    coeffs
        .iter()
        .zip(traces)
        .enumerate()
        .map(|(k, (c, t))| c * t / sigma.powi(k as i32))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_adjacency, sample_rescaled};
    use crate::SymMatrix;

    fn dense_power_traces(m: &SymMatrix<f64>) -> Vec<f64> {
        let n = m.dim();
        let mul = |a: &[f64], b: &[f64]| {
            let mut c = vec![0.0; n * n];
            for i in 0..n {
                for k in 0..n {
                    let aik = a[i * n + k];
                    for j in 0..n {
                        c[i * n + j] += aik * b[k * n + j];
                    }
                }
            }
            c
        };
        let tr = |a: &[f64]| (0..n).map(|i| a[i * n + i]).sum::<f64>();
        let m1 = m.as_slice().to_vec();
        let m2 = mul(&m1, &m1);
        let m3 = mul(&m2, &m1);
        let m4 = mul(&m2, &m2);
        vec![n as f64, tr(&m1), tr(&m2), tr(&m3), tr(&m4)]
    }

    #[test]
    fn neighbour_lists_match_dense_sampler() {
        let params = SbmParams::from_mean_gamma(60, 3, 0.2, 0.7).unwrap();
        let sparse = SparseAdjacency::sample(&params, 4);
        let dense = sample_adjacency::<f64>(&params, 4);
        for i in 0..60 {
            let expected: Vec<u32> = (0..60).filter(|&j| dense.get(i, j) == 1.0).map(|j| j as u32).collect();
            assert_eq!(sparse.row(i), expected.as_slice());
        }
    }

    #[test]
    fn traces_match_dense_products() {
        for (k, seed) in [(1, 1), (2, 2), (3, 9)] {
            let params = SbmParams::from_mean_gamma(48, k, 0.15, if k == 1 { 0.0 } else { 0.6 }).unwrap();
            let m = sample_rescaled::<f64>(&params, seed);
            let oracle = dense_power_traces(&m);
            let traces = SparseAdjacency::sample(&params, seed).centered_traces(params.p_a, 4);
            for pw in 0..=4 {
                let got = traces[pw] / params.sigma.powi(pw as i32);
                assert!((got - oracle[pw]).abs() < 1e-9 * oracle[pw].abs().max(1.0), "power {pw}: {got} vs {}", oracle[pw]);
            }
            let x4 = polynomial_lss(&[0.0, 0.0, 0.0, 0.0, 1.0], &traces, params.sigma);
            assert!((x4 - oracle[4]).abs() < 1e-9 * oracle[4]);
        }
    }

    #[test]
    fn truncated_power_request() {
        let params = SbmParams::from_mean_gamma(20, 1, 0.3, 0.0).unwrap();
        assert_eq!(SparseAdjacency::sample(&params, 1).centered_traces(0.3, 2).len(), 3);
    }
}
