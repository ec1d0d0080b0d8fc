use serde::{Deserialize, Serialize};

use crate::{Error, Real, Result, SymMatrix};

/// Orthonormal, block-constant vectors spanning the non-null eigenspace of
/// the expectation matrix of a `K`-community model.
#[derive(Clone, Debug, PartialEq)]
pub struct SpikeBasis<T> {
    n: usize,
    communities: usize,
    columns: Vec<Vec<T>>,
}

impl<T: Real> SpikeBasis<T> {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.columns.len()
    }

    pub fn communities(&self) -> usize {
        self.communities
    }

    pub fn column(&self, i: usize) -> &[T] {
        &self.columns[i]
    }

    pub fn columns(&self) -> &[Vec<T>] {
        &self.columns
    }

    /// Keeps only the first `rank` columns.
    pub fn truncated(&self, rank: usize) -> Self {
        Self { n: self.n, communities: self.communities, columns: self.columns[..rank.min(self.rank())].to_vec() }
    }
}

/// Deformation strengths `d_1 >= ... >= d_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeformationSpec {
    d: Vec<f64>,
}

impl DeformationSpec {
    /// Sorts the strengths in descending order; rejects non-finite values.
    pub fn new(mut d: Vec<f64>) -> Result<Self> {
        if let Some(bad) = d.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig(format!("deformation strength {bad} is not finite")));
        }
        d.sort_by(|a, b| b.total_cmp(a));
        Ok(Self { d })
    }

    /// `k` copies of the same strength.
    pub fn uniform(value: f64, k: usize) -> Result<Self> {
        Self::new(vec![value; k])
    }

    pub fn values(&self) -> &[f64] {
        &self.d
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }
}

/// Builds the `K - 1` spike vectors by Gram-Schmidt on the difference
/// vectors `w_i = 1_{block i} - 1_{block i+1}`.
///
/// The orthogonalization runs on the `K` block values with the inner
/// product weighted by the block size, which is the same computation as on
/// the full vectors and keeps every column exactly constant on each block.
pub fn build_spike<T: Real>(n: usize, k: usize) -> Result<SpikeBasis<T>> {
    if k < 2 {
        return Err(Error::InvalidK { reason: format!("spike needs K >= 2, got {k}") });
    }
    if n % k != 0 {
        return Err(Error::NotBalanced { n, k });
    }
    let block = (n / k) as f64;
    let dot = |a: &[f64], b: &[f64]| block * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k - 1);
    for i in 0..k - 1 {
        let mut w = vec![0.0; k];
        w[i] = 1.0;
        w[i + 1] = -1.0;
        // Modified Gram-Schmidt.
        for u in &basis {
            let c = dot(&w, u);
            for (wc, uc) in w.iter_mut().zip(u) {
                *wc -= c * uc;
            }
        }
        let norm = dot(&w, &w).sqrt();
        w.iter_mut().for_each(|x| *x /= norm);
        basis.push(w);
    }

    let b = n / k;
    let columns = basis
        .iter()
        .map(|vals| (0..n).map(|r| T::lit(vals[r / b])).collect())
        .collect();
    Ok(SpikeBasis { n, communities: k, columns })
}

/// `H + sum_i d_i v_i v_i^T`.
pub fn deform<T: Real>(h: &SymMatrix<T>, v: &SpikeBasis<T>, d: &DeformationSpec) -> Result<SymMatrix<T>> {
    h.check_dim(v.dim())?;
    if d.len() != v.rank() {
        return Err(Error::DimensionMismatch { expected: v.rank(), found: d.len() });
    }
    let mut out = h.clone();
    for (col, &di) in v.columns().iter().zip(d.values()) {
        if di != 0.0 {
            out.add_rank_one(T::lit(di), col)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{expectation_matrix, rescale, sample_adjacency, sample_cgsbm, SbmParams};

    #[test]
    fn two_blocks_single_vector() {
        let v = build_spike::<f64>(4, 2).unwrap();
        assert_eq!(v.rank(), 1);
        assert_eq!(v.column(0), &[0.5, 0.5, -0.5, -0.5]);
    }

    #[test]
    fn gram_matrix_is_identity() {
        // Oracle: plain (classical) Gram-Schmidt on the full-length vectors.
        let (n, k) = (6, 3);
        let mut oracle: Vec<Vec<f64>> = Vec::new();
        for i in 0..k - 1 {
            let mut w: Vec<f64> = (0..n)
                .map(|r| match r / (n / k) {
                    c if c == i => 1.0,
                    c if c == i + 1 => -1.0,
                    _ => 0.0,
                })
                .collect();
            let snapshot = w.clone();
            for u in &oracle {
                let c: f64 = snapshot.iter().zip(u).map(|(a, b)| a * b).sum();
                w.iter_mut().zip(u).for_each(|(a, b)| *a -= c * b);
            }
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            oracle.push(w.into_iter().map(|x| x / norm).collect());
        }
        let v = build_spike::<f64>(n, k).unwrap();
        for a in 0..k - 1 {
            for b in 0..k - 1 {
                let g: f64 = v.column(a).iter().zip(v.column(b)).map(|(x, y)| x * y).sum();
                assert!((g - if a == b { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
            for (x, y) in v.column(a).iter().zip(&oracle[a]) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn invalid_k() {
        assert_eq!(build_spike::<f64>(4, 1).unwrap_err().name(), "InvalidK");
    }

    #[test]
    fn spike_is_eigenspace_of_expectation() {
        let params = SbmParams::from_mean_gamma(60, 4, 0.2, 1.3).unwrap();
        let em = expectation_matrix::<f64>(&params);
        let v = build_spike::<f64>(60, 4).unwrap();
        let lambda = params.n as f64 * (params.p_s - params.p_d) / (params.sigma * params.k as f64);
        for col in v.columns() {
            let ev = em.matvec(col).unwrap();
            for (a, b) in ev.iter().zip(col) {
                assert!((a - lambda * b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_deformation_is_identity_map() {
        let params = SbmParams::from_mean_gamma(30, 3, 0.2, 0.5).unwrap();
        let h = sample_cgsbm::<f64>(&params, 1);
        let v = build_spike::<f64>(30, 3).unwrap();
        let out = deform(&h, &v, &DeformationSpec::uniform(0.0, 2).unwrap()).unwrap();
        assert_eq!(out, h);
    }

    #[test]
    fn decomposition_identity() {
        let params = SbmParams::from_mean_gamma(48, 4, 0.3, 1.1).unwrap();
        let v = build_spike::<f64>(48, 4).unwrap();
        let d = DeformationSpec::uniform(params.gamma, 3).unwrap();
        for seed in 0..5 {
            let m = rescale(&sample_adjacency::<f64>(&params, seed), &params).unwrap();
            let rebuilt = deform(&sample_cgsbm::<f64>(&params, seed), &v, &d).unwrap();
            for (a, b) in m.as_slice().iter().zip(rebuilt.as_slice()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn deformation_spec_sorts_descending() {
        let d = DeformationSpec::new(vec![0.5, 2.0, 1.0]).unwrap();
        assert_eq!(d.values(), &[2.0, 1.0, 0.5]);
        assert!(DeformationSpec::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn dimension_checks() {
        let v = build_spike::<f64>(4, 2).unwrap();
        let h = SymMatrix::<f64>::zeros(6);
        assert_eq!(deform(&h, &v, &DeformationSpec::uniform(1.0, 1).unwrap()).unwrap_err().name(), "DimensionMismatch");
        let h = SymMatrix::<f64>::zeros(4);
        assert_eq!(deform(&h, &v, &DeformationSpec::uniform(1.0, 2).unwrap()).unwrap_err().name(), "DimensionMismatch");
    }
}
