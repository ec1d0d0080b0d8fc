use faer::Mat;

use crate::{Error, Real, Result};

/// Dense real symmetric matrix.
///
/// Stored as a full row-major `n x n` buffer. Every mutating entry point
/// writes both `(i, j)` and `(j, i)`, so `get(i, j) == get(j, i)` holds
/// bit-exactly for every instance.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> SymMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![T::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    /// Builds a matrix from a generator evaluated on the lower triangle
    /// (`j <= i`), visited row by row.
    pub fn from_lower_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let v = f(i, j);
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        m
    }

    /// Builds a matrix from its packed lower triangle (row-major,
    /// `n(n+1)/2` values).
    pub fn from_packed_lower(n: usize, packed: &[T]) -> Result<Self> {
        let expected = n * (n + 1) / 2;
        if packed.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: packed.len() });
        }
        let mut it = packed.iter().copied();
        Ok(Self::from_lower_fn(n, |_, _| it.next().expect("length checked")))
    }

    /// Wraps a full row-major buffer, rejecting it unless it is exactly
    /// symmetric.
    pub fn from_row_major(n: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: data.len() });
        }
        for i in 0..n {
            for j in 0..i {
                if data[i * n + j] != data[j * n + i] {
                    return Err(Error::Format(format!("matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { n, data })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// Packed lower triangle, row-major.
    pub fn packed_lower(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.n * (self.n + 1) / 2);
        for i in 0..self.n {
            out.extend_from_slice(&self.row(i)[..=i]);
        }
        out
    }

    pub fn trace(&self) -> T {
        (0..self.n).fold(T::zero(), |acc, i| acc + self.get(i, i))
    }

    /// Squared Frobenius norm, i.e. `tr(A^2)` for symmetric `A`.
    pub fn frobenius_sq(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &x| acc + x * x)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()))
    }

    /// Applies `f` entrywise. Symmetry is preserved because `f` sees equal
    /// inputs at mirrored positions.
    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { n: self.n, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_dim(other.n)?;
        Ok(Self {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other.n)?;
        Ok(Self {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect(),
        })
    }

    /// `self + alpha * v v^T`.
    pub fn add_rank_one(&mut self, alpha: T, v: &[T]) -> Result<()> {
        self.check_dim(v.len())?;
        let n = self.n;
        for i in 0..n {
            for j in 0..=i {
                let val = self.data[i * n + j] + alpha * v[i] * v[j];
                self.data[i * n + j] = val;
                self.data[j * n + i] = val;
            }
        }
        Ok(())
    }

    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_dim(x.len())?;
        Ok((0..self.n)
            .map(|i| self.row(i).iter().zip(x).fold(T::zero(), |acc, (&a, &b)| acc + a * b))
            .collect())
    }

    pub(crate) fn check_dim(&self, other: usize) -> Result<()> {
        if other != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: other });
        }
        Ok(())
    }

    pub(crate) fn to_faer(&self) -> Mat<T> {
        Mat::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Converts the scalar type, e.g. `f64 -> f32`.
    pub fn cast<U: Real>(&self) -> SymMatrix<U> {
        SymMatrix { n: self.n, data: self.data.iter().map(|&x| U::lit(x.to_f64_lossy())).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_writes_both_triangles() {
        let mut m = SymMatrix::<f64>::zeros(3);
        m.set(2, 0, 4.5);
        assert_eq!(m.get(0, 2), 4.5);
        assert_eq!(m.get(2, 0), 4.5);
    }

    #[test]
    fn packed_round_trip() {
        let m = SymMatrix::<f64>::from_lower_fn(4, |i, j| (i * 10 + j) as f64);
        let back = SymMatrix::from_packed_lower(4, &m.packed_lower()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn rejects_asymmetric_buffer() {
        let err = SymMatrix::<f64>::from_row_major(2, vec![0.0, 1.0, 2.0, 0.0]).unwrap_err();
        assert_eq!(err.name(), "Format");
    }

    #[test]
    fn trace_and_frobenius() {
        let m = SymMatrix::<f64>::from_lower_fn(2, |i, j| if i == j { 2.0 } else { 1.0 });
        assert_eq!(m.trace(), 4.0);
        assert_eq!(m.frobenius_sq(), 10.0);
    }
}
