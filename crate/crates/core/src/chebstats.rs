//! Chebyshev coefficients of test functions and the Gaussian limit
//! predictions built from them.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::detect;
use crate::model::SbmParams;
use crate::spectral::xi4;
use crate::{Error, Real, Result};

/// Default number of quadrature intervals on `[0, pi]`.
pub const DEFAULT_GRID: usize = 4096;
/// Default cap on the number of series terms.
pub const DEFAULT_L_MAX: usize = 200;
/// Series stop once this many consecutive increments are below [`SERIES_TOL`].
const STABLE_RUN: usize = 5;
const SERIES_TOL: f64 = 1e-12;
/// Above this `p_a` the sparse prediction is flagged as outside its regime.
pub const SPARSE_WARN_P: f64 = 0.05;

/// `T_ell(x)` by the three-term recurrence.
pub fn cheb_t<T: Real>(ell: usize, x: T) -> T {
    let two = T::lit(2.0);
    let (mut prev, mut cur) = (T::one(), x);
    if ell == 0 {
        return prev;
    }
    for _ in 1..ell {
        let next = two * x * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `f(2 cos(pi j / n))` for `j = 0..=n`.
fn sample_on_grid<T: Real>(f: &impl Fn(T) -> T, grid_n: usize) -> Vec<T> {
    let n = T::from_usize_lossy(grid_n);
    (0..=grid_n)
        .map(|j| f(T::lit(2.0) * (T::PI() * T::from_usize_lossy(j) / n).cos()))
        .collect()
}

/// Trapezoid rule for `(1/pi) int_0^pi g(theta) cos(ell theta) d theta`
/// given `g` on the uniform grid. `ell * j` is reduced modulo `2n` before
/// forming the angle so large orders keep full accuracy.
fn tau_from_grid<T: Real>(values: &[T], ell: usize) -> T {
    let n = values.len() - 1;
    let period = 2 * n;
    let nf = T::from_usize_lossy(n);
    let mut acc = T::zero();
    for (j, &v) in values.iter().enumerate() {
        let idx = (ell % period) * j % period;
        let c = (T::PI() * T::from_usize_lossy(idx) / nf).cos();
        let w = if j == 0 || j == n { T::lit(0.5) } else { T::one() };
        acc = acc + w * v * c;
    }
    acc / nf
}

fn check_grid(grid_n: usize, ell: usize) -> Result<()> {
    if grid_n == 0 || grid_n < 8 * ell {
        return Err(Error::GridTooCoarse { grid_n, ell });
    }
    Ok(())
}

/// Chebyshev coefficient
/// `tau_ell(f) = (1/pi) int_{-2}^{2} T_ell(x/2) f(x) / sqrt(4 - x^2) dx
///             = (1/pi) int_0^pi f(2 cos theta) cos(ell theta) d theta`,
/// by the trapezoid rule on `grid_n` uniform intervals in `theta`.
pub fn tau<T: Real>(f: impl Fn(T) -> T, ell: usize, grid_n: usize) -> Result<T> {
    check_grid(grid_n, ell)?;
    Ok(tau_from_grid(&sample_on_grid(&f, grid_n), ell))
}

/// Coefficients `tau_0..=tau_L` of one function.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChebCoeffs<T> {
    pub taus: Vec<T>,
    /// Geometric extrapolation of the neglected coefficients.
    pub tail_bound: T,
}

impl<T: Real> ChebCoeffs<T> {
    /// Truncation order `L`.
    pub fn order(&self) -> usize {
        self.taus.len().saturating_sub(1)
    }

    /// CSV with header `ell,tau`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("ell,tau\n");
        for (ell, t) in self.taus.iter().enumerate() {
            out.push_str(&format!("{ell},{}\n", crate::io::fmt_f64(t.to_f64_lossy())));
        }
        out
    }
}

/// `tau_0..=tau_order`, sharing one evaluation of `f` on the grid.
pub fn cheb_coeffs<T: Real>(f: impl Fn(T) -> T, order: usize, grid_n: usize) -> Result<ChebCoeffs<T>> {
    check_grid(grid_n, order)?;
    let values = sample_on_grid(&f, grid_n);
    let taus: Vec<T> = (0..=order).map(|ell| tau_from_grid(&values, ell)).collect();
    let last = taus[order].abs();
    let tail_bound = if order == 0 {
        last
    } else {
        let prev = taus[order - 1].abs();
        let ratio = if prev > T::zero() { last / prev } else { T::zero() };
        if ratio < T::one() {
            last * ratio / (T::one() - ratio)
        } else {
            T::infinity()
        }
    };
    Ok(ChebCoeffs { taus, tail_bound })
}

fn check_p<T: Real>(p: T) -> Result<()> {
    if !(p > T::zero() && p < T::one()) {
        return Err(Error::POutOfRange { p: p.to_f64_lossy() });
    }
    Ok(())
}

/// `k4 = (1 - 7p + 12p^2 - 6p^3) / (p (1 - p)^2)`.
pub fn k4<T: Real>(p: T) -> Result<T> {
    check_p(p)?;
    let one = T::one();
    let num = one - T::lit(7.0) * p + T::lit(12.0) * p * p - T::lit(6.0) * p * p * p;
    Ok(num / (p * (one - p) * (one - p)))
}

/// `k4 + 2 = (1 - 2p)^2 / (p (1 - p))`, in factored form.
pub fn k4_plus_2<T: Real>(p: T) -> Result<T> {
    check_p(p)?;
    let d = T::one() - T::lit(2.0) * p;
    Ok(d * d / (p * (T::one() - p)))
}

/// Limiting Gaussian mean and variance of a linear spectral statistic.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CltPrediction<T> {
    pub mean: T,
    pub variance: T,
    pub k4: T,
    pub gamma: T,
    pub k: usize,
    /// Bound on the neglected part of the mean series (zero for closed forms).
    pub tail_bound: T,
    /// Number of series terms used (zero for closed forms).
    pub terms: usize,
}

/// Dense-regime prediction for `L(f) - N int f d rho_sc` on a rank-`k`
/// deformation of strength `gamma`:
///
/// ```text
/// mean     = (f(2) + f(-2))/4 - tau_0/2 - tau_2 + k4 tau_4 + k sum_l gamma^l tau_l
/// variance = -tau_1^2 + 2 k4 tau_2^2 + 2 sum_l l tau_l^2
/// ```
///
/// Both series stop once five consecutive increments are below `1e-12`.
pub fn clt_mean_variance<T: Real>(
    f: impl Fn(T) -> T,
    k: usize,
    gamma: T,
    p: T,
    l_max: usize,
) -> Result<CltPrediction<T>> {
    if !(gamma >= T::zero() && gamma < T::one()) {
        return Err(Error::GammaOutOfRange { gamma: gamma.to_f64_lossy(), reason: "must lie in [0, 1)" });
    }
    let k4v = k4(p)?;
    let grid_n = DEFAULT_GRID.max(8 * l_max.max(4));
    let values = sample_on_grid(&f, grid_n);
    let t = |ell: usize| tau_from_grid(&values, ell);
    let (t0, t1, t2, t4) = (t(0), t(1), t(2), t(4));
    let two = T::lit(2.0);
    let tol = T::lit(SERIES_TOL);
    let kf = T::from_usize_lossy(k);

    let mut mean_series = T::zero();
    let mut var_series = T::zero();
    let mut gamma_pow = T::one();
    let (mut mean_run, mut var_run) = (0usize, 0usize);
    let mut max_tau = T::zero();
    let mut terms = 0;
    for ell in 1..=l_max {
        let tl = if ell == 1 {
            t1
        } else if ell == 2 {
            t2
        } else if ell == 4 {
            t4
        } else {
            t(ell)
        };
        gamma_pow = gamma_pow * gamma;
        let dm = kf * gamma_pow * tl;
        let dv = two * T::from_usize_lossy(ell) * tl * tl;
        mean_series = mean_series + dm;
        var_series = var_series + dv;
        max_tau = max_tau.max(tl.abs());
        mean_run = if dm.abs() < tol { mean_run + 1 } else { 0 };
        var_run = if dv.abs() < tol { var_run + 1 } else { 0 };
        terms = ell;
        if mean_run >= STABLE_RUN && var_run >= STABLE_RUN {
            break;
        }
    }
    if var_run < STABLE_RUN {
        return Err(Error::SeriesNotConverged { l_max });
    }
    let tail_bound = if gamma == T::zero() {
        T::zero()
    } else {
        kf * gamma_pow * gamma * max_tau / (T::one() - gamma)
    };

    let quarter = T::lit(0.25);
    let mean = quarter * (f(two) + f(-two)) - t0 / two - t2 + k4v * t4 + mean_series;
    let variance = -t1 * t1 + two * k4v * t2 * t2 + var_series;
    Ok(CltPrediction { mean, variance, k4: k4v, gamma, k, tail_bound, terms })
}

/// Sparse-regime prediction for `L(f)` with `q = sqrt(N p_a)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SparsePrediction {
    pub q: f64,
    /// Predicted mean of `(q / sqrt N) (L(f) - N int f d rho_sc)`:
    /// `(sqrt N / q) xi4 tau_4(f)`.
    pub mean_shift: f64,
    /// Competing reading of the same mean, `(q / sqrt N) (q^2 / N) tau_4(f)`.
    pub alt_mean_shift: f64,
    /// Standard deviation of `L(f)`: `sqrt(2N) / q * |tau_2(f)|`.
    pub scale: f64,
    pub xi4: f64,
    pub tau2: f64,
    pub tau4: f64,
    /// Set when `p_a` is too large for the sparse asymptotics to be meaningful.
    pub dense_regime_warning: bool,
}

/// Sparse-regime mean shift and fluctuation scale of `L(f)`.
///
/// `force_xi4_one` replaces the exact Bernoulli cumulant by its limit 1.
pub fn sparse_prediction(f: impl Fn(f64) -> f64, params: &SbmParams, force_xi4_one: bool) -> Result<SparsePrediction> {
    let values = sample_on_grid(&f, DEFAULT_GRID);
    let tau2 = tau_from_grid(&values, 2);
    let tau4 = tau_from_grid(&values, 4);
    if tau2.abs() < 1e-10 {
        return Err(Error::Tau2Zero { tau2 });
    }
    let n = params.n as f64;
    let q = params.q;
    let xi = if force_xi4_one { 1.0 } else { xi4(params) };
    Ok(SparsePrediction {
        q,
        mean_shift: n.sqrt() / q * xi * tau4,
        alt_mean_shift: q / n.sqrt() * (q * q / n) * tau4,
        scale: (2.0 * n).sqrt() / q * tau2.abs(),
        xi4: xi,
        tau2,
        tau4,
        dense_regime_warning: params.p_a >= SPARSE_WARN_P,
    })
}

/// Named test functions accepted on the command line and in configs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TestFunction {
    /// `x`
    X,
    /// `x^2`
    X2,
    /// `x^4`
    X4,
    /// `log(1 / (1 - gamma x + gamma^2))`
    LogDet { gamma: f64 },
    /// The optimal detection function `phi_gamma` with kurtosis parameter `p`.
    Phi { gamma: f64, p: f64 },
    /// `T_ell(x / 2)`
    Cheb { ell: usize },
}

impl TestFunction {
    pub fn eval<T: Real>(&self, x: T) -> T {
        match *self {
            TestFunction::X => x,
            TestFunction::X2 => x * x,
            TestFunction::X4 => x * x * x * x,
            TestFunction::LogDet { gamma } => {
                let g = T::lit(gamma);
                -(T::one() - g * x + g * g).ln()
            }
            TestFunction::Phi { gamma, p } => match detect::phi_gamma(x, T::lit(gamma), T::lit(p)) {
                Ok(v) => v,
                Err(_) => T::nan(),
            },
            TestFunction::Cheb { ell } => cheb_t(ell, x / T::lit(2.0)),
        }
    }

    /// Monomial coefficients `c_0..=c_d` when `f` is a polynomial.
    pub fn polynomial(&self) -> Option<Vec<f64>> {
        match *self {
            TestFunction::X => Some(vec![0.0, 1.0]),
            TestFunction::X2 => Some(vec![0.0, 0.0, 1.0]),
            TestFunction::X4 => Some(vec![0.0, 0.0, 0.0, 0.0, 1.0]),
            TestFunction::Cheb { ell } => Some(cheb_half_monomials(ell)),
            TestFunction::LogDet { .. } | TestFunction::Phi { .. } => None,
        }
    }
}

/// Monomial coefficients of `T_ell(x / 2)`, via
/// `P_{l+1}(x) = x P_l(x) - P_{l-1}(x)` (doubling absorbed by the half
/// argument) with `P_0 = 1`, `P_1 = x / 2`.
fn cheb_half_monomials(ell: usize) -> Vec<f64> {
    // R_l(x) = 2 T_l(x/2) satisfies R_{l+1} = x R_l - R_{l-1}, R_0 = 2, R_1 = x.
    let mut prev = vec![2.0];
    let mut cur = vec![0.0, 1.0];
    if ell == 0 {
        return vec![1.0];
    }
    for _ in 1..ell {
        let mut next = vec![0.0; cur.len() + 1];
        for (i, c) in cur.iter().enumerate() {
            next[i + 1] += c;
        }
        for (i, c) in prev.iter().enumerate() {
            next[i] -= c;
        }
        prev = cur;
        cur = next;
    }
    cur.into_iter().map(|c| c / 2.0).collect()
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunction::X => write!(f, "x"),
            TestFunction::X2 => write!(f, "x2"),
            TestFunction::X4 => write!(f, "x4"),
            TestFunction::LogDet { gamma } => write!(f, "logdet:{gamma}"),
            TestFunction::Phi { gamma, p } => write!(f, "phi:{gamma}:{p}"),
            TestFunction::Cheb { ell } => write!(f, "cheb:{ell}"),
        }
    }
}

impl FromStr for TestFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("unknown test function {s:?} (expected x, x2, x4, logdet:<gamma>, phi:<gamma>:<p> or cheb:<ell>)"));
        let num = |t: &str| t.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(bad);
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["x"] => Ok(TestFunction::X),
            ["x2"] => Ok(TestFunction::X2),
            ["x4"] => Ok(TestFunction::X4),
            ["logdet", g] => Ok(TestFunction::LogDet { gamma: num(g)? }),
            ["phi", g, p] => Ok(TestFunction::Phi { gamma: num(g)?, p: num(p)? }),
            ["cheb", l] => Ok(TestFunction::Cheb { ell: l.parse().map_err(|_| bad())? }),
            _ => Err(bad()),
        }
    }
}
