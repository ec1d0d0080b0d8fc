use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Validated parameters of a balanced stochastic block model.
///
/// The derived fields are always recomputed from `(n, k, p_s, p_d)`:
/// `p_a` is the average edge probability, `sigma` the rescaling constant,
/// `gamma` the signal strength `N (p_s - p_d) / (sigma K)` (zero when
/// `K = 1`) and `q = sqrt(N p_a)` the sparsity parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SbmParams {
    pub n: usize,
    pub k: usize,
    pub p_s: f64,
    pub p_d: f64,
    pub p_a: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub q: f64,
}

/// Parameter file contents: either explicit probabilities or the
/// `(p_a, gamma)` parametrization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum ParamsSpec {
    Probabilities { n: usize, k: usize, p_s: f64, p_d: f64 },
    MeanGamma { n: usize, k: usize, p_a: f64, gamma: f64 },
}

fn in_open_unit(p: f64) -> bool {
    p > 0.0 && p < 1.0
}

impl SbmParams {
    /// Validates raw parameters and fills in the derived quantities.
    pub fn new(n: usize, k: usize, p_s: f64, p_d: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidK { reason: "K must be at least 1".into() });
        }
        if n == 0 || n % k != 0 {
            return Err(Error::NotBalanced { n, k });
        }
        let degenerate = |p: f64| p == 0.0 || p == 1.0;
        if degenerate(p_s) && degenerate(p_d) {
            return Err(Error::DegenerateVariance { sigma: 0.0 });
        }
        if !in_open_unit(p_s) {
            return Err(Error::ProbabilityOutOfRange { name: "p_s", value: p_s });
        }
        if !in_open_unit(p_d) {
            return Err(Error::ProbabilityOutOfRange { name: "p_d", value: p_d });
        }
        let params = Self::new_unchecked(n, k, p_s, p_d);
        if !in_open_unit(params.p_a) {
            return Err(Error::ProbabilityOutOfRange { name: "p_a", value: params.p_a });
        }
        if !(params.sigma > 0.0) {
            return Err(Error::DegenerateVariance { sigma: params.sigma });
        }
        Ok(params)
    }

    /// Builds parameters without range checks. Degenerate probabilities
    /// (0 or 1) are allowed; intended for deterministic test fixtures only.
    #[doc(hidden)]
    pub fn new_unchecked(n: usize, k: usize, p_s: f64, p_d: f64) -> Self {
        let kf = k as f64;
        let nf = n as f64;
        let p_a = (p_s + (kf - 1.0) * p_d) / kf;
        let sigma = (nf * (p_s * (1.0 - p_s) + (kf - 1.0) * p_d * (1.0 - p_d)) / kf).sqrt();
        let gamma = if k == 1 { 0.0 } else { nf * (p_s - p_d) / (sigma * kf) };
        Self { n, k, p_s, p_d, p_a, sigma, gamma, q: (nf * p_a).sqrt() }
    }

    /// Parameters with average probability `p_a` and signal strength `gamma`.
    pub fn from_mean_gamma(n: usize, k: usize, p_a: f64, gamma: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidK { reason: "K must be at least 1".into() });
        }
        if n == 0 || n % k != 0 {
            return Err(Error::NotBalanced { n, k });
        }
        let (p_s, p_d) = solve_probs(n, k, p_a, gamma)?;
        Self::new(n, k, p_s, p_d)
    }

    pub fn block_size(&self) -> usize {
        self.n / self.k
    }

    #[inline]
    pub fn community(&self, i: usize) -> usize {
        i / self.block_size()
    }

    /// Edge probability between nodes `i` and `j`.
    #[inline]
    pub fn prob(&self, i: usize, j: usize) -> f64 {
        if self.community(i) == self.community(j) {
            self.p_s
        } else {
            self.p_d
        }
    }

    /// `x = (p_s - p_d) / (sigma K)`; `E[M]` equals `(K-1) x` inside a
    /// community and `-x` across communities.
    pub fn expectation_offset(&self) -> f64 {
        if self.k == 1 {
            0.0
        } else {
            (self.p_s - self.p_d) / (self.sigma * self.k as f64)
        }
    }

    /// Signal-to-noise ratio `N (p_s - p_d)^2 / (K (p_s + (K-1) p_d))`.
    pub fn snr(&self) -> f64 {
        let kf = self.k as f64;
        self.n as f64 * (self.p_s - self.p_d).powi(2) / (kf * (self.p_s + (kf - 1.0) * self.p_d))
    }

    pub fn spec(&self) -> ParamsSpec {
        ParamsSpec::Probabilities { n: self.n, k: self.k, p_s: self.p_s, p_d: self.p_d }
    }
}

impl ParamsSpec {
    pub fn resolve(&self) -> Result<SbmParams> {
        validate_params(self)
    }
}

/// Validates a candidate parameter set, populating all derived fields.
pub fn validate_params(raw: &ParamsSpec) -> Result<SbmParams> {
    match *raw {
        ParamsSpec::Probabilities { n, k, p_s, p_d } => SbmParams::new(n, k, p_s, p_d),
        ParamsSpec::MeanGamma { n, k, p_a, gamma } => SbmParams::from_mean_gamma(n, k, p_a, gamma),
    }
}

const SOLVE_MAX_ITER: usize = 200;

/// Finds `(p_s, p_d)` with average `p_a` and signal strength `gamma`.
///
/// Writing `delta = p_s - p_d`, the relation `gamma = N delta / (sigma K)`
/// is iterated as `delta <- gamma sigma(delta) K / N`, starting from
/// `sigma = sqrt(N p_a (1 - p_a))`.
pub fn solve_probs(n: usize, k: usize, p_a: f64, gamma: f64) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(Error::InvalidK { reason: "K must be at least 1".into() });
    }
    if !in_open_unit(p_a) {
        return Err(Error::ProbabilityOutOfRange { name: "p_a", value: p_a });
    }
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::NoFeasibleSolution { reason: format!("gamma = {gamma} must be finite and >= 0") });
    }
    if gamma == 0.0 {
        return Ok((p_a, p_a));
    }
    if k == 1 {
        return Err(Error::NoFeasibleSolution { reason: "a single community carries no signal".into() });
    }
    let (nf, kf) = (n as f64, k as f64);
    let split = |delta: f64| {
        let p_d = p_a - delta / kf;
        let p_s = kf * p_a - (kf - 1.0) * p_d;
        (p_s, p_d)
    };
    let sigma_of = |p_s: f64, p_d: f64| {
        (nf * (p_s * (1.0 - p_s) + (kf - 1.0) * p_d * (1.0 - p_d)) / kf).sqrt()
    };

    let mut delta = gamma * (nf * p_a * (1.0 - p_a)).sqrt() * kf / nf;
    for _ in 0..SOLVE_MAX_ITER {
        let (p_s, p_d) = split(delta);
        if !in_open_unit(p_s) || !in_open_unit(p_d) {
            return Err(Error::NoFeasibleSolution {
                reason: format!("iterate left (0,1): p_s = {p_s}, p_d = {p_d}"),
            });
        }
        let next = gamma * sigma_of(p_s, p_d) * kf / nf;
        if !next.is_finite() {
            return Err(Error::NoFeasibleSolution { reason: "sigma vanished".into() });
        }
        let done = (next - delta).abs() <= 4.0 * f64::EPSILON * delta.abs();
        delta = next;
        if done {
            let (p_s, p_d) = split(delta);
            if !in_open_unit(p_s) || !in_open_unit(p_d) {
                break;
            }
            let achieved = nf * (p_s - p_d) / (sigma_of(p_s, p_d) * kf);
            if (achieved - gamma).abs() > 1e-10 {
                break;
            }
            return Ok((p_s, p_d));
        }
    }
    Err(Error::NoFeasibleSolution { reason: format!("no convergence in {SOLVE_MAX_ITER} iterations") })
}
