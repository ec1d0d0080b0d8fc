use serde::{Deserialize, Serialize};

use crate::chebstats::TestFunction;
use crate::model::SbmParams;
use crate::{Error, Result};

/// Environment variable overriding the worker count.
pub const THREADS_ENV: &str = "SBM_SPECTRA_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentKind {
    BbpDense,
    BbpSparse,
    CltHistogram,
    ErrorCurve,
    SparseClt,
    SparseMean,
    LocalLawProbe,
}

/// Model family shared by all trials. Exactly one of `p_a` and `phi` is
/// given; `phi` sets `p_a = N^(2 phi - 1)`, i.e. `q = N^phi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub n: usize,
    /// Number of communities for kinds that do not sweep it.
    #[serde(default = "one")]
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    /// Signal strength `N (p_s - p_d) / (sigma K)`.
    #[serde(default)]
    pub gamma: f64,
}

fn one() -> usize {
    1
}

impl ModelSpec {
    pub fn p_a(&self) -> Result<f64> {
        match (self.p_a, self.phi) {
            (Some(p), None) => Ok(p),
            (None, Some(phi)) => Ok((self.n as f64).powf(2.0 * phi - 1.0)),
            _ => Err(Error::InvalidConfig("model needs exactly one of p_a and phi".into())),
        }
    }

    /// Parameters with `communities` blocks at the spec's `gamma`
    /// (no signal when `communities == 1`).
    pub fn params(&self, communities: usize, gamma: f64) -> Result<SbmParams> {
        let g = if communities == 1 { 0.0 } else { gamma };
        SbmParams::from_mean_gamma(self.n, communities, self.p_a()?, g)
    }
}

/// One Monte Carlo experiment.
///
/// The meaning of `grid` depends on `kind`:
///
/// | kind | grid values | default |
/// |---|---|---|
/// | `BbpDense`, `BbpSparse` | signal strengths `gamma` (deformation `d`) | `[model.gamma]` |
/// | `CltHistogram`, `SparseClt`, `SparseMean` | deformation ranks `K` | `[0]` |
/// | `ErrorCurve` | signal strengths `gamma` | `[model.gamma]` |
/// | `LocalLawProbe` | unused (see `z_points`) | |
///
/// A rank-`K` deformation is realized as a block model with `K + 1`
/// communities, whose expectation has exactly `K` non-zero eigenvalues, or
/// with `deformed` as `K + 1`-block homogeneous noise plus a rank-`K` spike.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub base_seed: u64,
    pub trials: usize,
    pub model: ModelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    /// Registry name of the test function (see [`TestFunction`]).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_name: Option<String>,
    /// `ErrorCurve`: null-hypothesis rank.
    #[serde(default)]
    pub k1: usize,
    /// `ErrorCurve`: alternative ranks `K2`; defaults to `[k1 + 1]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_values: Option<Vec<usize>>,
    /// `LocalLawProbe`: spectral parameters as `[re, im]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_points: Option<Vec<[f64; 2]>>,
    /// Realize signals as homogeneous centered noise (`p_s = p_d = p_a`)
    /// plus an explicit block-structured spike `V D V^T`, instead of
    /// sampling the block model at that signal strength. The two agree in
    /// the limit; at finite `N` the block model's noise carries a
    /// block-dependent variance profile.
    #[serde(default)]
    pub deformed: bool,
    /// BBP: eigenvalues above this count as outliers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outlier_threshold: Option<f64>,
    /// Sparse kinds: use `xi4 = 1` instead of the exact Bernoulli cumulant.
    #[serde(default)]
    pub force_xi4_one: bool,
    /// Worker count; overridden by `SBM_SPECTRA_THREADS`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    /// Minimal config of `kind`; optional fields take their defaults.
    pub fn new(kind: ExperimentKind, base_seed: u64, trials: usize, model: ModelSpec) -> Self {
        Self {
            kind,
            base_seed,
            trials,
            model,
            grid: None,
            f_name: None,
            k1: 0,
            k_values: None,
            z_points: None,
            deformed: false,
            outlier_threshold: None,
            force_xi4_one: false,
            threads: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn grid_or(&self, default: f64) -> Vec<f64> {
        self.grid.clone().unwrap_or_else(|| vec![default])
    }

    /// Grid values interpreted as ranks.
    pub fn ranks(&self) -> Result<Vec<usize>> {
        self.grid_or(0.0)
            .into_iter()
            .map(|g| {
                if g >= 0.0 && g.fract() == 0.0 {
                    Ok(g as usize)
                } else {
                    Err(Error::InvalidConfig(format!("grid value {g} is not a non-negative integer rank")))
                }
            })
            .collect()
    }

    pub fn alternatives(&self) -> Vec<usize> {
        self.k_values.clone().unwrap_or_else(|| vec![self.k1 + 1])
    }

    pub fn test_function(&self, default: TestFunction) -> Result<TestFunction> {
        match &self.f_name {
            Some(name) => name.parse(),
            None => Ok(default),
        }
    }

    pub fn z_list(&self) -> Vec<[f64; 2]> {
        self.z_points.clone().unwrap_or_else(|| vec![[2.5, 0.0], [3.0, 0.0], [2.0, 0.5]])
    }

    /// Worker count: environment override, then config, then all cores.
    pub fn worker_threads(&self) -> Option<usize> {
        std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .filter(|&t: &usize| t > 0)
            .or(self.threads)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        let p_a = self.model.p_a()?;
        if !(p_a > 0.0 && p_a < 1.0) {
            return bad(format!("p_a = {p_a} outside (0, 1)"));
        }
        if let Some(phi) = self.model.phi {
            if !(phi > 0.0 && phi < 0.5) {
                return bad(format!("phi = {phi} outside (0, 1/2)"));
            }
        }
        if let Some(grid) = &self.grid {
            if grid.is_empty() || grid.iter().any(|g| !g.is_finite()) {
                return bad("grid must be a non-empty list of finite values".into());
            }
        }
        let rank_groups = |ranks: &[usize]| -> Result<()> {
            for &r in ranks {
                if self.model.n % (r + 1) != 0 {
                    return Err(Error::NotBalanced { n: self.model.n, k: r + 1 });
                }
            }
            Ok(())
        };
        match self.kind {
            ExperimentKind::BbpDense | ExperimentKind::BbpSparse => {
                if self.model.k < 2 {
                    return bad("BBP experiments need k >= 2 communities".into());
                }
                if self.grid_or(self.model.gamma).iter().any(|&g| g < 0.0) {
                    return bad("signal strengths must be non-negative".into());
                }
            }
            ExperimentKind::CltHistogram => {
                rank_groups(&self.ranks()?)?;
                if !(self.model.gamma >= 0.0 && self.model.gamma < 1.0) {
                    return bad(format!("gamma = {} outside [0, 1)", self.model.gamma));
                }
            }
            ExperimentKind::ErrorCurve => {
                let alts = self.alternatives();
                if alts.iter().any(|&k2| k2 <= self.k1) {
                    return Err(Error::InvalidHypotheses { k1: self.k1, k2: alts.iter().copied().min().unwrap_or(0) });
                }
                let mut all = alts.clone();
                all.push(self.k1);
                rank_groups(&all)?;
                if self.grid_or(self.model.gamma).iter().any(|&g| !(g > 0.0 && g < 1.0)) {
                    return bad("ErrorCurve signal strengths must lie in (0, 1)".into());
                }
                if self.trials < 2 {
                    return bad("ErrorCurve needs at least 2 trials".into());
                }
            }
            ExperimentKind::SparseClt | ExperimentKind::SparseMean => {
                rank_groups(&self.ranks()?)?;
                self.test_function(TestFunction::X2)?;
            }
            ExperimentKind::LocalLawProbe => {
                if self.z_list().is_empty() {
                    return bad("z_points must not be empty".into());
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_and_defaults() {
        let text = r#"{"kind":"CltHistogram","base_seed":1,"trials":10,
            "model":{"n":1200,"p_a":0.1,"gamma":0.5},"grid":[0,1,2]}"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.model.k, 1);
        assert_eq!(cfg.ranks().unwrap(), vec![0, 1, 2]);
        let back = ExperimentConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_unknown_fields_and_bad_grids() {
        let unknown = r#"{"kind":"BbpDense","base_seed":1,"trials":1,"model":{"n":8,"p_a":0.1},"bogus":1}"#;
        assert!(ExperimentConfig::from_json(unknown).is_err());
        let mut cfg = ExperimentConfig::new(
            ExperimentKind::CltHistogram,
            0,
            5,
            ModelSpec { n: 10, k: 1, p_a: Some(0.1), phi: None, gamma: 0.5 },
        );
        cfg.grid = Some(vec![2.0]);
        assert_eq!(cfg.validate().unwrap_err().name(), "NotBalanced");
        cfg.grid = Some(vec![0.5]);
        assert_eq!(cfg.validate().unwrap_err().name(), "InvalidConfig");
    }

    #[test]
    fn phi_sets_density() {
        let m = ModelSpec { n: 4000, k: 1, p_a: None, phi: Some(0.35), gamma: 0.0 };
        assert!((m.p_a().unwrap() - 4000f64.powf(-0.3)).abs() < 1e-15);
    }
}
