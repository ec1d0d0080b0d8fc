//! The linear-spectral-statistic test for the number of communities.
//!
//! Given the rescaled matrix `M`, the statistic
//!
//! ```text
//! L_gamma = -log det((1 + gamma^2) I - gamma M) + gamma^2 N / 2 + gamma tr M
//!           + gamma^2 (1/(k4 + 2) - 1/2) (tr M^2 - N)
//! ```
//!
//! is asymptotically `Normal(m_K, V_0)` under `K` communities, with `m_K`
//! affine in `K`. The test accepts `K = K1` against `K = K2` when
//! `L_gamma <= (m_K1 + m_K2) / 2`.

use faer::Side;
use serde::{Deserialize, Serialize};

use crate::chebstats::{k4, k4_plus_2, CltPrediction};
use crate::spectral::{eigenvalues, Spectrum};
use crate::special::erfc;
use crate::{Error, Real, Result, SymMatrix};

/// Smallest admissible `|1 - 2p|`; `k4 + 2` vanishes at `p = 1/2`.
pub const KURTOSIS_GUARD: f64 = 1e-6;

/// Hypotheses `K = k1` versus `K = k2` at known signal `gamma` and edge
/// density `p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub k1: usize,
    pub k2: usize,
    pub gamma: f64,
    pub p: f64,
}

impl TestConfig {
    pub fn new(k1: usize, k2: usize, gamma: f64, p: f64) -> Result<Self> {
        let cfg = Self { k1, k2, gamma, p };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k1 >= self.k2 {
            return Err(Error::InvalidHypotheses { k1: self.k1, k2: self.k2 });
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::GammaOutOfRange { gamma: self.gamma, reason: "must lie in (0, 1)" });
        }
        kurtosis_guard(self.p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    AcceptH1,
    RejectH1,
}

/// Result of one run of the test.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestOutcome<T> {
    pub statistic: T,
    pub m_c: T,
    pub decision: Decision,
    /// `(L_gamma - m_0) / Delta`, the continuous community-count estimate.
    pub kappa_prime: T,
    /// Nearest non-negative integer to `kappa_prime`.
    pub k_hat: usize,
}

fn kurtosis_guard(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::POutOfRange { p });
    }
    let gap = (1.0 - 2.0 * p).abs();
    if gap <= KURTOSIS_GUARD {
        return Err(Error::KurtosisSingularity { p, gap });
    }
    Ok(())
}

fn check_gamma<T: Real>(gamma: T) -> Result<()> {
    if !(gamma >= T::zero() && gamma < T::one()) {
        return Err(Error::GammaOutOfRange { gamma: gamma.to_f64_lossy(), reason: "must lie in [0, 1)" });
    }
    Ok(())
}

/// `gamma^2 (1/(k4 + 2) - 1/2)`, the `x^2` coefficient of `phi_gamma`.
fn quadratic_coefficient<T: Real>(gamma: T, p: T) -> Result<T> {
    kurtosis_guard(p.to_f64_lossy())?;
    Ok(gamma * gamma * (k4_plus_2(p)?.recip() - T::lit(0.5)))
}

/// `phi_gamma(x) = log(1 / (1 - gamma x + gamma^2)) + gamma x
///               + gamma^2 (1/(k4 + 2) - 1/2) x^2`.
pub fn phi_gamma<T: Real>(x: T, gamma: T, p: T) -> Result<T> {
    let c = quadratic_coefficient(gamma, p)?;
    let arg = T::one() - gamma * x + gamma * gamma;
    if !(arg > T::zero()) {
        return Err(Error::LogDomain { x: x.to_f64_lossy(), limit: (gamma + gamma.recip()).to_f64_lossy() });
    }
    Ok(-arg.ln() + gamma * x + c * x * x)
}

fn degenerate<T: Real>(eigenvalue: T, gamma: T) -> Error {
    Error::DegenerateSpectrum {
        eigenvalue: eigenvalue.to_f64_lossy(),
        limit: (gamma + gamma.recip()).to_f64_lossy(),
    }
}

/// Polynomial part of `L_gamma`, shared by both log-det routes.
fn polynomial_part<T: Real>(n: usize, m_trace: T, m_frob2: T, gamma: T, p: T) -> Result<T> {
    let c = quadratic_coefficient(gamma, p)?;
    let nf = T::from_usize_lossy(n);
    Ok(gamma * gamma * nf / T::lit(2.0) + gamma * m_trace + c * (m_frob2 - nf))
}

/// `L_gamma` from the spectrum of `M` plus `tr M` and `tr M^2 = |M|_F^2`.
///
/// The log-determinant is summed over the eigenvalues from the largest
/// down.
pub fn test_statistic<T: Real>(spec: &Spectrum<T>, m_trace: T, m_frob2: T, gamma: T, p: T) -> Result<T> {
    let shift = T::one() + gamma * gamma;
    let mut logdet = T::zero();
    for &lambda in spec.values() {
        let arg = shift - gamma * lambda;
        if !(arg > T::zero()) {
            return Err(degenerate(lambda, gamma));
        }
        logdet = logdet + arg.ln();
    }
    Ok(polynomial_part(spec.len(), m_trace, m_frob2, gamma, p)? - logdet)
}

/// `L_gamma` with the log-determinant taken from a Cholesky factorization
/// of `(1 + gamma^2) I - gamma M`.
///
/// Mathematically identical to [`test_statistic`] and several times
/// cheaper, since no eigenvalues are needed. If the factorization fails the
/// matrix is not positive definite; the spectrum is then computed to report
/// the offending eigenvalue.
pub fn test_statistic_cholesky<T: Real>(m: &SymMatrix<T>, gamma: T, p: T) -> Result<T> {
    let poly = polynomial_part(m.dim(), m.trace(), m.frobenius_sq(), gamma, p)?;
    let n = m.dim();
    let shift = T::one() + gamma * gamma;
    let a = faer::Mat::<T>::from_fn(n, n, |i, j| {
        let v = -gamma * m.get(i, j);
        if i == j {
            v + shift
        } else {
            v
        }
    });
    match a.llt(Side::Lower) {
        Ok(llt) => {
            let l = llt.L();
            let mut logdet = T::zero();
            for i in 0..n {
                logdet = logdet + l[(i, i)].ln();
            }
            Ok(poly - T::lit(2.0) * logdet)
        }
        Err(_) => {
            let spec = eigenvalues(m)?;
            let top = spec.largest().unwrap_or_else(T::zero);
            Err(degenerate(top, gamma))
        }
    }
}

/// Closed-form limiting mean `m_K` and variance `V_0` of `L_gamma`:
///
/// ```text
/// m_0   = -log(1 - g^2)/2 - g^2/2 + k4 g^4/4
/// Delta = -log(1 - g^2) + g^2 + (1/(k4 + 2) - 1/2) g^4
/// m_K   = m_0 + K Delta
/// V_0   = -2 log(1 - g^2) + 2 g^2 + (2/(k4 + 2) - 1) g^4
/// ```
pub fn closed_form_moments<T: Real>(k: usize, gamma: T, p: T) -> Result<CltPrediction<T>> {
    check_gamma(gamma)?;
    let (m0, delta) = mean_parts(gamma, p)?;
    let k4v = k4(p)?;
    let inv = k4_plus_2(p)?.recip();
    let g2 = gamma * gamma;
    let g4 = g2 * g2;
    let two = T::lit(2.0);
    let log_term = (T::one() - g2).ln();
    let variance = -two * log_term + two * g2 + (two * inv - T::one()) * g4;
    Ok(CltPrediction {
        mean: m0 + T::from_usize_lossy(k) * delta,
        variance,
        k4: k4v,
        gamma,
        k,
        tail_bound: T::zero(),
        terms: 0,
    })
}

/// `(m_0, Delta)`.
fn mean_parts<T: Real>(gamma: T, p: T) -> Result<(T, T)> {
    check_gamma(gamma)?;
    kurtosis_guard(p.to_f64_lossy())?;
    let k4v = k4(p)?;
    let inv = k4_plus_2(p)?.recip();
    let g2 = gamma * gamma;
    let g4 = g2 * g2;
    let half = T::lit(0.5);
    let log_term = (T::one() - g2).ln();
    let m0 = -half * log_term - half * g2 + k4v * g4 / T::lit(4.0);
    let delta = -log_term + g2 + (inv - half) * g4;
    Ok((m0, delta))
}

/// `m_c = (m_K1 + m_K2) / 2`.
pub fn critical_value<T: Real>(cfg: &TestConfig) -> Result<T> {
    cfg.validate()?;
    let (m0, delta) = mean_parts(T::lit(cfg.gamma), T::lit(cfg.p))?;
    let m1 = m0 + T::from_usize_lossy(cfg.k1) * delta;
    let m2 = m0 + T::from_usize_lossy(cfg.k2) * delta;
    Ok((m1 + m2) / T::lit(2.0))
}

/// `kappa' = (L_gamma - m_0) / Delta`.
pub fn kappa_prime<T: Real>(statistic: T, gamma: T, p: T) -> Result<T> {
    let (m0, delta) = mean_parts(gamma, p)?;
    Ok((statistic - m0) / delta)
}

/// Nearest non-negative integer, negative estimates clamped to zero.
pub fn k_hat<T: Real>(kappa_prime: T) -> usize {
    let clamped = kappa_prime.max(T::zero()).round();
    clamped.to_usize().unwrap_or(usize::MAX)
}

/// Applies the decision rule to an already computed statistic.
/// Ties resolve to [`Decision::AcceptH1`].
pub fn outcome_from_statistic<T: Real>(statistic: T, cfg: &TestConfig) -> Result<TestOutcome<T>> {
    let m_c = critical_value::<T>(cfg)?;
    let kappa = kappa_prime(statistic, T::lit(cfg.gamma), T::lit(cfg.p))?;
    Ok(TestOutcome {
        statistic,
        m_c,
        decision: if statistic <= m_c { Decision::AcceptH1 } else { Decision::RejectH1 },
        kappa_prime: kappa,
        k_hat: k_hat(kappa),
    })
}

/// Runs the test on a rescaled matrix, taking the log-determinant from its
/// spectrum.
pub fn run_test<T: Real>(m: &SymMatrix<T>, cfg: &TestConfig) -> Result<TestOutcome<T>> {
    cfg.validate()?;
    let spec = eigenvalues(m)?;
    let stat = test_statistic(&spec, m.trace(), m.frobenius_sq(), T::lit(cfg.gamma), T::lit(cfg.p))?;
    outcome_from_statistic(stat, cfg)
}

/// As [`run_test`], via [`test_statistic_cholesky`].
pub fn run_test_cholesky<T: Real>(m: &SymMatrix<T>, cfg: &TestConfig) -> Result<TestOutcome<T>> {
    cfg.validate()?;
    let stat = test_statistic_cholesky(m, T::lit(cfg.gamma), T::lit(cfg.p))?;
    outcome_from_statistic(stat, cfg)
}

/// Community-count estimate without a hypothesis pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KEstimate<T> {
    pub statistic: T,
    pub kappa_prime: T,
    pub k_hat: usize,
}

pub fn estimate_k<T: Real>(m: &SymMatrix<T>, gamma: T, p: T) -> Result<KEstimate<T>> {
    if !(gamma > T::zero()) {
        return Err(Error::GammaOutOfRange { gamma: gamma.to_f64_lossy(), reason: "must lie in (0, 1)" });
    }
    let spec = eigenvalues(m)?;
    let statistic = test_statistic(&spec, m.trace(), m.frobenius_sq(), gamma, p)?;
    let kappa = kappa_prime(statistic, gamma, p)?;
    Ok(KEstimate { statistic, kappa_prime: kappa, k_hat: k_hat(kappa) })
}

/// Limiting sum of type-I and type-II errors,
/// `erfc((K2 - K1) / 4 * sqrt(Delta))`.
pub fn theoretical_error(cfg: &TestConfig) -> Result<f64> {
    cfg.validate()?;
    let (_, delta) = mean_parts(cfg.gamma, cfg.p)?;
    Ok(erfc((cfg.k2 - cfg.k1) as f64 / 4.0 * delta.sqrt()))
}

/// Plug-in density estimate: the mean entry of a 0/1 adjacency matrix.
pub fn plug_in_p_a<T: Real>(adj: &SymMatrix<T>) -> f64 {
    let n = adj.dim() as f64;
    adj.as_slice().iter().map(|x| x.to_f64_lossy()).sum::<f64>() / (n * n)
}
