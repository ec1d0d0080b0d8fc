//! Spectra, linear spectral statistics, semicircle reference quantities and
//! resolvent diagnostics.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::model::SbmParams;
use crate::{Error, Real, Result, SymMatrix};

/// Eigenvalues sorted in descending order, `values[0]` being the largest.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum<T> {
    values: Vec<T>,
}

impl<T: Real> Spectrum<T> {
    /// Sorts `values` descending. NaN entries are rejected.
    pub fn from_values(mut values: Vec<T>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|x| x.is_nan()) {
            return Err(Error::DomainError { at: bad.to_f64_lossy() });
        }
        values.sort_by(|a, b| b.partial_cmp(a).expect("no NaN"));
        Ok(Self { values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn largest(&self) -> Option<T> {
        self.values.first().copied()
    }

    /// The `k` largest eigenvalues.
    pub fn top(&self, k: usize) -> &[T] {
        &self.values[..k.min(self.values.len())]
    }

    pub fn sum(&self) -> T {
        self.values.iter().fold(T::zero(), |a, &x| a + x)
    }

    pub fn sum_sq(&self) -> T {
        self.values.iter().fold(T::zero(), |a, &x| a + x * x)
    }
}

/// Full spectrum of a symmetric matrix, descending.
///
/// Uses faer's dense self-adjoint eigensolver (tridiagonalization followed
/// by a QR-type iteration), sequentially, so identical inputs give identical
/// outputs.
pub fn eigenvalues<T: Real>(a: &SymMatrix<T>) -> Result<Spectrum<T>> {
    if a.dim() == 0 {
        return Ok(Spectrum { values: Vec::new() });
    }
    let mat = a.to_faer();
    let mut values: Vec<T> = mat.self_adjoint_eigenvalues(Side::Lower).map_err(|_| Error::ConvergenceFailure)?;
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::ConvergenceFailure);
    }
    values.reverse();
    // faer already sorts; re-sort guards against ties reported out of order.
    values.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    Ok(Spectrum { values })
}

/// Linear spectral statistic `sum_i f(lambda_i)`, accumulated from the
/// largest eigenvalue down.
pub fn lss<T: Real>(spec: &Spectrum<T>, f: impl Fn(T) -> T) -> Result<T> {
    let mut acc = T::zero();
    for &x in spec.values() {
        let fx = f(x);
        if !fx.is_finite() {
            return Err(Error::DomainError { at: x.to_f64_lossy() });
        }
        acc = acc + fx;
    }
    Ok(acc)
}

/// Stieltjes transform of the semicircle law,
/// `m_sc(z) = (-z + sqrt(z^2 - 4)) / 2` on the branch with
/// `m_sc(C+) in C+` and `m_sc(z) -> 0` at infinity.
///
/// The two roots of `m^2 + z m + 1 = 0` multiply to one and the correct
/// branch is the one inside the unit disk, so it is computed as the
/// reciprocal of the larger root (no cancellation).
pub fn m_sc<T: Real>(z: Complex<T>) -> Result<Complex<T>> {
    let two = T::lit(2.0);
    if z.im == T::zero() && z.re.abs() <= two {
        return Err(Error::BranchCut { re: z.re.to_f64_lossy() });
    }
    let disc = (z * z - Complex::new(T::lit(4.0), T::zero())).sqrt();
    let r1 = (-z + disc) / two;
    let r2 = (-z - disc) / two;
    let big = if r1.norm_sqr() >= r2.norm_sqr() { r1 } else { r2 };
    Ok(big.inv())
}

/// Number of `theta` intervals used by [`semicircle_integral`].
pub const SEMICIRCLE_GRID: usize = 2048;

/// `int_{-2}^{2} f(x) sqrt(4 - x^2) / (2 pi) dx`.
///
/// Substituting `x = 2 cos(theta)` gives
/// `(2/pi) int_0^pi f(2 cos theta) sin^2 theta d theta`, evaluated by the
/// trapezoid rule on [`SEMICIRCLE_GRID`] uniform intervals. The integrand is
/// smooth and periodic, so the rule converges spectrally for analytic `f`.
pub fn semicircle_integral<T: Real>(f: impl Fn(T) -> T) -> T {
    let n = SEMICIRCLE_GRID;
    let two = T::lit(2.0);
    let mut acc = T::zero();
    // Endpoint weights vanish with sin(theta).
    for j in 1..n {
        let theta = T::PI() * T::from_usize_lossy(j) / T::from_usize_lossy(n);
        let s = theta.sin();
        acc = acc + f(two * theta.cos()) * s * s;
    }
    two * acc / T::from_usize_lossy(n)
}

/// Resolvent diagnostics at a single spectral parameter `z`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolventProbe<T> {
    pub z: Complex<T>,
    /// `(1/N) tr G(z)`.
    pub m_emp: Complex<T>,
    /// `(1/N) sum_ij G_ij(z)`.
    pub s_emp: Complex<T>,
    /// `(1/sqrt N) (G 1)_k` for the requested rows.
    pub t_k: Option<Vec<Complex<T>>>,
}

/// JSON export shape of a [`ResolventProbe`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub z_re: f64,
    pub z_im: f64,
    pub m_re: f64,
    pub m_im: f64,
    pub s_re: f64,
    pub s_im: f64,
}

impl<T: Real> ResolventProbe<T> {
    pub fn record(&self) -> ProbeRecord {
        ProbeRecord {
            z_re: self.z.re.to_f64_lossy(),
            z_im: self.z.im.to_f64_lossy(),
            m_re: self.m_emp.re.to_f64_lossy(),
            m_im: self.m_emp.im.to_f64_lossy(),
            s_re: self.s_emp.re.to_f64_lossy(),
            s_im: self.s_emp.im.to_f64_lossy(),
        }
    }
}

/// Computes `m(z)`, `s(z)` and optionally `T_k(z)` for `G(z) = (H - z)^{-1}`.
pub fn resolvent_probe<T: Real>(h: &SymMatrix<T>, z: Complex<T>, k_list: Option<&[usize]>) -> Result<ResolventProbe<T>> {
    let spec = eigenvalues(h)?;
    resolvent_probe_with_spectrum(h, &spec, z, k_list)
}

/// As [`resolvent_probe`], reusing an already computed spectrum of `h`.
///
/// `m(z)` comes from the spectrum; `s(z)` and `T_k` from one LU solve of
/// `(H - z) x = 1` (real arithmetic when `z` is real).
pub fn resolvent_probe_with_spectrum<T: Real>(
    h: &SymMatrix<T>,
    spec: &Spectrum<T>,
    z: Complex<T>,
    k_list: Option<&[usize]>,
) -> Result<ResolventProbe<T>> {
    let n = h.dim();
    h.check_dim(spec.len())?;
    if let Some(ks) = k_list {
        if let Some(&bad) = ks.iter().find(|&&k| k >= n) {
            return Err(Error::DimensionMismatch { expected: n, found: bad });
        }
    }
    let distance = spec
        .values()
        .iter()
        .map(|&l| (Complex::new(l, T::zero()) - z).norm())
        .fold(T::infinity(), |a, b| a.min(b));
    let singular = || Error::SingularShift {
        re: z.re.to_f64_lossy(),
        im: z.im.to_f64_lossy(),
        distance: distance.to_f64_lossy(),
    };
    if distance <= T::lit(1e-12) {
        return Err(singular());
    }

    let nf = T::from_usize_lossy(n);
    let m_emp = spec
        .values()
        .iter()
        .fold(Complex::new(T::zero(), T::zero()), |acc, &l| acc + (Complex::new(l, T::zero()) - z).inv())
        / nf;

    let x = solve_shifted(h, z);
    // Residual of (H - z) x = 1.
    let mut res_sq = T::zero();
    for i in 0..n {
        let row = h.row(i);
        let mut acc = Complex::new(T::zero(), T::zero());
        for (j, &hij) in row.iter().enumerate() {
            acc = acc + x[j] * hij;
        }
        let r = acc - z * x[i] - Complex::new(T::one(), T::zero());
        res_sq = res_sq + r.norm_sqr();
    }
    let tol = T::lit(1e-10).max(T::epsilon() * T::lit(1e3));
    if !(res_sq.sqrt() <= tol * nf.sqrt()) {
        return Err(singular());
    }

    let s_emp = x.iter().fold(Complex::new(T::zero(), T::zero()), |a, &v| a + v) / nf;
    let t_k = k_list.map(|ks| ks.iter().map(|&k| x[k] / nf.sqrt()).collect());
    Ok(ResolventProbe { z, m_emp, s_emp, t_k })
}

fn solve_shifted<T: Real>(h: &SymMatrix<T>, z: Complex<T>) -> Vec<Complex<T>> {
    let n = h.dim();
    if z.im == T::zero() {
        let a = Mat::<T>::from_fn(n, n, |i, j| if i == j { h.get(i, j) - z.re } else { h.get(i, j) });
        let lu = a.partial_piv_lu();
        let mut rhs = Mat::<T>::from_fn(n, 1, |_, _| T::one());
        lu.solve_in_place(&mut rhs);
        (0..n).map(|i| Complex::new(rhs[(i, 0)], T::zero())).collect()
    } else {
        let a = Mat::<Complex<T>>::from_fn(n, n, |i, j| {
            let v = Complex::new(h.get(i, j), T::zero());
            if i == j {
                v - z
            } else {
                v
            }
        });
        let lu = a.partial_piv_lu();
        let mut rhs = Mat::<Complex<T>>::from_fn(n, 1, |_, _| Complex::new(T::one(), T::zero()));
        lu.solve_in_place(&mut rhs);
        (0..n).map(|i| rhs[(i, 0)]).collect()
    }
}

/// Bernoulli fourth cumulant of a rescaled entry with edge probability `p`:
/// `p (1 - p) (1 - 6 p (1 - p)) / sigma^4`.
fn fourth_cumulant(p: f64, sigma: f64) -> f64 {
    p * (1.0 - p) * (1.0 - 6.0 * p * (1.0 - p)) / sigma.powi(4)
}

/// Normalized fourth cumulant `xi4 = (s_s + (K - 1) s_d) / K` with
/// `s = N q^2 kappa_4`.
pub fn xi4(params: &SbmParams) -> f64 {
    let nf = params.n as f64;
    let q2 = params.q * params.q;
    let kf = params.k as f64;
    let s_s = nf * q2 * fourth_cumulant(params.p_s, params.sigma);
    let s_d = nf * q2 * fourth_cumulant(params.p_d, params.sigma);
    (s_s + (kf - 1.0) * s_d) / kf
}

/// Predicted location of the upper spectral edge, `2 + xi4 / q^2`.
pub fn edge_estimate(params: &SbmParams) -> f64 {
    2.0 + xi4(params) / (params.q * params.q)
}
