//! Monte Carlo experiment drivers.
//!
//! Trial `t` of a group uses seed `base_seed + t`, the same seeds being
//! reused across grid values (common random numbers). Trials run on a rayon
//! pool whose width comes from `SBM_SPECTRA_THREADS`, the config, or the
//! machine, in that order; results are collected in job order and
//! aggregated only afterwards, so reports are byte-identical for any width.

mod config;
mod report;
pub mod stats;
pub mod traces;

pub use config::{ExperimentConfig, ExperimentKind, ModelSpec, THREADS_ENV};
pub use report::{
    columns_for, gamma_label, gamma_rank_label, rank_label, summarize, z_label, Aggregate, Check, Comparison,
    ExperimentReport, GroupSummary, TrialRecord, DEFAULT_OUTLIER_THRESHOLD, HISTOGRAM_BINS, LOCAL_LAW_CONSTANT,
    SCHEMA_VERSION,
};

use rayon::prelude::*;

use crate::chebstats::TestFunction;
use crate::detect::{k_hat, kappa_prime, test_statistic_cholesky};
use crate::model::{build_spike, deform, sample_cgsbm, sample_rescaled, DeformationSpec};
use crate::spectral::{eigenvalues, lss, resolvent_probe_with_spectrum, semicircle_integral};
use crate::{Complex, Error, Result, SymMatrix};
use traces::{polynomial_lss, SparseAdjacency};

/// Runs any experiment kind.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    match config.kind {
        ExperimentKind::BbpDense | ExperimentKind::BbpSparse => run_bbp(config),
        ExperimentKind::CltHistogram => run_clt_histogram(config),
        ExperimentKind::ErrorCurve => run_error_curve(config),
        ExperimentKind::SparseClt | ExperimentKind::SparseMean => run_sparse_clt(config),
        ExperimentKind::LocalLawProbe => run_local_law_probe(config),
    }
}

fn expect_kind(config: &ExperimentConfig, kinds: &[ExperimentKind]) -> Result<()> {
    if !kinds.contains(&config.kind) {
        return Err(Error::InvalidConfig(format!("{:?} cannot be run by this driver", config.kind)));
    }
    config.validate()
}

fn seed(config: &ExperimentConfig, offset: usize) -> u64 {
    config.base_seed.wrapping_add(offset as u64)
}

/// Evaluates `jobs` on the worker pool, preserving job order.
fn execute<J, F>(config: &ExperimentConfig, jobs: &[J], f: F) -> Result<Vec<TrialRecord>>
where
    J: Sync,
    F: Fn(&J) -> Result<TrialRecord> + Sync + Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = config.worker_threads() {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| jobs.par_iter().map(&f).collect())
}

/// Turns recoverable numerical failures into excluded records.
fn record_or_exclude(group: String, seed: u64, result: Result<Vec<f64>>) -> Result<TrialRecord> {
    match result {
        Ok(values) => Ok(TrialRecord { group, seed, values, excluded: None }),
        Err(e @ (Error::DegenerateSpectrum { .. } | Error::SingularShift { .. } | Error::DomainError { .. })) => {
            Ok(TrialRecord { group, seed, values: Vec::new(), excluded: Some(e.to_string()) })
        }
        Err(e) => Err(e),
    }
}

/// Top `K + 3` eigenvalues of block-model samples, one group per signal
/// strength.
pub fn run_bbp(config: &ExperimentConfig) -> Result<ExperimentReport> {
    expect_kind(config, &[ExperimentKind::BbpDense, ExperimentKind::BbpSparse])?;
    let k = config.model.k;
    let grid = config.grid_or(config.model.gamma);
    let jobs: Vec<(f64, usize)> = grid.iter().flat_map(|&g| (0..config.trials).map(move |t| (g, t))).collect();
    let spike = if config.deformed { Some(build_spike::<f64>(config.model.n, k)?) } else { None };
    let records = execute(config, &jobs, |&(g, t)| {
        let s = seed(config, t);
        let m = match &spike {
            Some(v) => {
                let noise = sample_cgsbm::<f64>(&config.model.params(k, 0.0)?, s);
                deform(&noise, v, &DeformationSpec::uniform(g, k - 1)?)?
            }
            None => sample_rescaled::<f64>(&config.model.params(k, g)?, s),
        };
        let spec = eigenvalues(&m)?;
        Ok(TrialRecord { group: gamma_label(g), seed: s, values: spec.top(k + 3).to_vec(), excluded: None })
    })?;
    ExperimentReport::assemble(config.clone(), columns_for(config), records)
}

/// Rescaled sample with a rank-`rank` signal of strength `gamma`: the
/// `rank + 1`-community block model, or with `config.deformed` homogeneous
/// centered noise plus `gamma` times the block spike.
fn rank_sample(config: &ExperimentConfig, rank: usize, gamma: f64, s: u64) -> Result<SymMatrix<f64>> {
    if config.deformed {
        let noise = sample_cgsbm::<f64>(&config.model.params(rank + 1, 0.0)?, s);
        if rank == 0 {
            return Ok(noise);
        }
        let spike = build_spike::<f64>(config.model.n, rank + 1)?;
        deform(&noise, &spike, &DeformationSpec::uniform(gamma, rank)?)
    } else {
        Ok(sample_rescaled::<f64>(&config.model.params(rank + 1, gamma)?, s))
    }
}

/// Centered linear statistic of one sample: the detection statistic by
/// default, otherwise `L(f) - N int f d rho_sc` from the spectrum.
fn clt_trial(config: &ExperimentConfig, rank: usize, s: u64, f: Option<(TestFunction, f64)>) -> Result<Vec<f64>> {
    let m = rank_sample(config, rank, config.model.gamma, s)?;
    let p = config.model.p_a()?;
    let gamma = config.model.gamma;
    match f {
        None => {
            let stat = test_statistic_cholesky(&m, gamma, p)?;
            if gamma > 0.0 {
                let kappa = kappa_prime(stat, gamma, p)?;
                Ok(vec![stat, kappa, k_hat(kappa) as f64])
            } else {
                Ok(vec![stat, 0.0, 0.0])
            }
        }
        Some((f, center)) => {
            let spec = eigenvalues(&m)?;
            Ok(vec![lss(&spec, |x| f.eval(x))? - m.dim() as f64 * center])
        }
    }
}

fn user_function(config: &ExperimentConfig) -> Result<Option<(TestFunction, f64)>> {
    match config.f_name {
        None => Ok(None),
        Some(_) => {
            let f = config.test_function(TestFunction::X2)?;
            Ok(Some((f, semicircle_integral(|x| f.eval(x)))))
        }
    }
}

/// Histograms of the detection statistic (or of a named linear statistic)
/// for each deformation rank in the grid.
pub fn run_clt_histogram(config: &ExperimentConfig) -> Result<ExperimentReport> {
    expect_kind(config, &[ExperimentKind::CltHistogram])?;
    let f = user_function(config)?;
    let jobs: Vec<(usize, usize)> =
        config.ranks()?.into_iter().flat_map(|r| (0..config.trials).map(move |t| (r, t))).collect();
    let records = execute(config, &jobs, |&(rank, t)| {
        let s = seed(config, t);
        record_or_exclude(rank_label(rank), s, clt_trial(config, rank, s, f))
    })?;
    ExperimentReport::assemble(config.clone(), columns_for(config), records)
}

/// Empirical type-I plus type-II error of the test for each signal
/// strength and alternative rank. Null trials use seeds
/// `base_seed + 0..trials/2` and are shared by every alternative;
/// alternative trials use the next `trials - trials/2` seeds.
pub fn run_error_curve(config: &ExperimentConfig) -> Result<ExperimentReport> {
    expect_kind(config, &[ExperimentKind::ErrorCurve])?;
    let half = config.trials / 2;
    let mut ranks = vec![config.k1];
    ranks.extend(config.alternatives());
    let mut jobs: Vec<(f64, usize, usize)> = Vec::new();
    for g in config.grid_or(config.model.gamma) {
        for &r in &ranks {
            let (start, count) = if r == config.k1 { (0, half) } else { (half, config.trials - half) };
            jobs.extend((start..start + count).map(|t| (g, r, t)));
        }
    }
    let p = config.model.p_a()?;
    let records = execute(config, &jobs, |&(g, rank, t)| {
        let s = seed(config, t);
        let stat = rank_sample(config, rank, g, s).and_then(|m| test_statistic_cholesky(&m, g, p));
        record_or_exclude(gamma_rank_label(g, rank), s, stat.map(|x| vec![x]))
    })?;
    ExperimentReport::assemble(config.clone(), columns_for(config), records)
}

/// Sparse-regime linear statistics `L(f)`. Polynomials up to degree four
/// are evaluated exactly through trace powers of the neighbour-list
/// adjacency; other functions go through the spectrum.
pub fn run_sparse_clt(config: &ExperimentConfig) -> Result<ExperimentReport> {
    expect_kind(config, &[ExperimentKind::SparseClt, ExperimentKind::SparseMean])?;
    let default = if config.kind == ExperimentKind::SparseMean { TestFunction::X4 } else { TestFunction::X2 };
    let f = config.test_function(default)?;
    let poly = f.polynomial().filter(|c| c.len() <= 5);
    let jobs: Vec<(usize, usize)> =
        config.ranks()?.into_iter().flat_map(|r| (0..config.trials).map(move |t| (r, t))).collect();
    let records = execute(config, &jobs, |&(rank, t)| {
        let s = seed(config, t);
        let params = config.model.params(rank + 1, config.model.gamma)?;
        let value = match &poly {
            Some(c) if !config.deformed => {
                let traces = SparseAdjacency::sample(&params, s).centered_traces(params.p_a, c.len() - 1);
                Ok(polynomial_lss(c, &traces, params.sigma))
            }
            _ => rank_sample(config, rank, config.model.gamma, s)
                .and_then(|m| eigenvalues(&m))
                .and_then(|spec| lss(&spec, |x| f.eval(x))),
        };
        record_or_exclude(rank_label(rank), s, value.map(|v| vec![v]))
    })?;
    ExperimentReport::assemble(config.clone(), columns_for(config), records)
}

/// Deviations `|m(z) - m_sc(z)|` and `|s(z) - m_sc(z)|` of centered
/// block-model resolvents at each probe point.
pub fn run_local_law_probe(config: &ExperimentConfig) -> Result<ExperimentReport> {
    expect_kind(config, &[ExperimentKind::LocalLawProbe])?;
    let params = config.model.params(config.model.k, config.model.gamma)?;
    let zs = config.z_list();
    let msc: Vec<Complex<f64>> =
        zs.iter().map(|z| crate::spectral::m_sc(Complex::new(z[0], z[1]))).collect::<Result<_>>()?;
    let jobs: Vec<usize> = (0..config.trials).collect();
    let per_seed = execute(config, &jobs, |&t| {
        let s = seed(config, t);
        let h = sample_cgsbm::<f64>(&params, s);
        let spec = eigenvalues(&h)?;
        // Pack every probe of this seed into one record, split below.
        let mut values = Vec::with_capacity(6 * zs.len());
        let mut failures = Vec::new();
        for (z, m0) in zs.iter().zip(&msc) {
            match resolvent_probe_with_spectrum(&h, &spec, Complex::new(z[0], z[1]), None) {
                Ok(p) => values.extend([
                    (p.m_emp - m0).norm(),
                    (p.s_emp - m0).norm(),
                    p.m_emp.re,
                    p.m_emp.im,
                    p.s_emp.re,
                    p.s_emp.im,
                ]),
                Err(e @ Error::SingularShift { .. }) => {
                    values.extend([f64::NAN; 6]);
                    failures.push(e.to_string());
                }
                Err(e) => return Err(e),
            }
        }
        Ok(TrialRecord { group: String::new(), seed: s, values, excluded: Some(failures.join("; ")) })
    })?;
    let mut records = Vec::with_capacity(zs.len() * config.trials);
    for (i, z) in zs.iter().enumerate() {
        for r in &per_seed {
            let vals = r.values[6 * i..6 * i + 6].to_vec();
            let excluded = vals[0].is_nan().then(|| r.excluded.clone().unwrap_or_default());
            records.push(TrialRecord {
                group: z_label(*z),
                seed: r.seed,
                values: if excluded.is_some() { Vec::new() } else { vals },
                excluded,
            });
        }
    }
    ExperimentReport::assemble(config.clone(), columns_for(config), records)
}
