//! Experiment reports and the aggregation pass that fills them.
//!
//! Every summary, prediction and verdict is a pure function of the config
//! and the per-trial records, see [`summarize`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExperimentKind};
use super::stats::{self, ColumnStats, Histogram};
use crate::chebstats::{clt_mean_variance, sparse_prediction, TestFunction, DEFAULT_L_MAX};
use crate::detect::{closed_form_moments, theoretical_error, TestConfig};
use crate::io::{fmt_f64, to_json_string};
use crate::spectral::{edge_estimate, m_sc, semicircle_integral};
use crate::{Complex, Error, Result};

/// Report schema version.
pub const SCHEMA_VERSION: u32 = 1;
/// Histogram bins spanning the predicted mean +- 5 standard deviations.
pub const HISTOGRAM_BINS: usize = 64;
/// Default eigenvalue level above which an eigenvalue counts as an outlier.
pub const DEFAULT_OUTLIER_THRESHOLD: f64 = 2.05;
/// Constant multiplying the local-law error bounds.
pub const LOCAL_LAW_CONSTANT: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub group: String,
    pub seed: u64,
    pub values: Vec<f64>,
    /// Error name and value when the trial could not be evaluated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excluded: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: String,
    pub trials_reported: usize,
    pub trials_excluded: usize,
    pub columns: Vec<ColumnStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram: Option<Histogram>,
    pub extra: BTreeMap<String, f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "==")]
    Equal,
}

impl std::fmt::Display for Comparison {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Comparison::AtMost => "<=",
            Comparison::AtLeast => ">=",
            Comparison::Equal => "==",
        })
    }
}

/// One tolerance check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub op: Comparison,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, op: Comparison, threshold: f64) -> Self {
        let passed = match op {
            Comparison::AtMost => value <= threshold,
            Comparison::AtLeast => value >= threshold,
            Comparison::Equal => value == threshold,
        };
        Self { name: name.into(), value, op, threshold, passed }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub v: u32,
    pub config: ExperimentConfig,
    /// Names of the entries of each `TrialRecord::values`.
    pub columns: Vec<String>,
    /// One record per (group, trial), grouped, each group ordered by seed.
    pub per_trial: Vec<TrialRecord>,
    pub summary: Vec<GroupSummary>,
    pub prediction: BTreeMap<String, f64>,
    pub verdict: Vec<Check>,
}

impl ExperimentReport {
    /// Builds the report, running the aggregation pass.
    pub fn assemble(config: ExperimentConfig, columns: Vec<String>, per_trial: Vec<TrialRecord>) -> Result<Self> {
        let agg = summarize(&config, &per_trial)?;
        Ok(Self {
            v: SCHEMA_VERSION,
            config,
            columns,
            per_trial,
            summary: agg.summary,
            prediction: agg.prediction,
            verdict: agg.verdict,
        })
    }

    pub fn passed(&self) -> bool {
        self.verdict.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.verdict.iter().find(|c| c.name == name)
    }

    pub fn group(&self, name: &str) -> Option<&GroupSummary> {
        self.summary.iter().find(|g| g.group == name)
    }

    pub fn trials_excluded(&self) -> usize {
        self.per_trial.iter().filter(|r| r.excluded.is_some()).count()
    }

    pub fn to_json(&self) -> Result<String> {
        to_json_string(self)
    }

    /// Flat table `group,seed,excluded,<columns...>`.
    pub fn per_trial_csv(&self) -> String {
        let mut out = format!("group,seed,excluded,{}\n", self.columns.join(","));
        for r in &self.per_trial {
            let vals: Vec<String> = r.values.iter().map(|&v| fmt_f64(v)).collect();
            out.push_str(&format!("{},{},{},{}\n", r.group, r.seed, r.excluded.as_deref().unwrap_or(""), vals.join(",")));
        }
        out
    }

    /// gnuplot-ready `group,bin_lo,bin_hi,count` rows.
    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("group,bin_lo,bin_hi,count\n");
        for g in &self.summary {
            if let Some(h) = &g.histogram {
                for (b, c) in h.counts.iter().enumerate() {
                    let (lo, hi) = h.bin_edges(b);
                    out.push_str(&format!("{},{},{},{}\n", g.group, fmt_f64(lo), fmt_f64(hi), c));
                }
            }
        }
        out
    }
}

/// Output of the aggregation pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub summary: Vec<GroupSummary>,
    pub prediction: BTreeMap<String, f64>,
    pub verdict: Vec<Check>,
}

/// Group label for a signal strength.
pub fn gamma_label(g: f64) -> String {
    format!("gamma={g}")
}

/// Group label for a deformation rank.
pub fn rank_label(k: usize) -> String {
    format!("K={k}")
}

pub fn gamma_rank_label(g: f64, k: usize) -> String {
    format!("gamma={g},K={k}")
}

pub fn z_label(z: [f64; 2]) -> String {
    format!("z={}{:+}i", z[0], z[1])
}

struct Group<'a> {
    name: String,
    records: Vec<&'a TrialRecord>,
}

impl Group<'_> {
    fn reported(&self) -> impl Iterator<Item = &TrialRecord> + '_ {
        self.records.iter().copied().filter(|r| r.excluded.is_none())
    }

    fn column(&self, i: usize) -> Vec<f64> {
        self.reported().map(|r| r.values[i]).collect()
    }

    fn excluded(&self) -> usize {
        self.records.len() - self.reported().count()
    }

    fn base(&self, columns: &[&str]) -> GroupSummary {
        GroupSummary {
            group: self.name.clone(),
            trials_reported: self.records.len() - self.excluded(),
            trials_excluded: self.excluded(),
            columns: columns.iter().enumerate().map(|(i, c)| ColumnStats::new(c, &self.column(i))).collect(),
            ks: None,
            histogram: None,
            extra: BTreeMap::new(),
        }
    }
}

/// Groups in order of first appearance, each sorted by seed.
fn groups(per_trial: &[TrialRecord]) -> Vec<Group<'_>> {
    let mut out: Vec<Group> = Vec::new();
    for r in per_trial {
        match out.iter_mut().find(|g| g.name == r.group) {
            Some(g) => g.records.push(r),
            None => out.push(Group { name: r.group.clone(), records: vec![r] }),
        }
    }
    for g in &mut out {
        g.records.sort_by_key(|r| r.seed);
    }
    out
}

fn find<'a, 'b>(gs: &'a [Group<'b>], name: &str) -> Result<&'a Group<'b>> {
    gs.iter()
        .find(|g| g.name == name)
        .ok_or_else(|| Error::InvalidConfig(format!("no trials recorded for group {name}")))
}

/// Column names of the per-trial values for a config.
pub fn columns_for(config: &ExperimentConfig) -> Vec<String> {
    match config.kind {
        ExperimentKind::BbpDense | ExperimentKind::BbpSparse => {
            (1..=config.model.k + 3).map(|i| format!("lambda_{i}")).collect()
        }
        ExperimentKind::CltHistogram => {
            if config.f_name.is_none() {
                vec!["statistic".into(), "kappa_prime".into(), "k_hat".into()]
            } else {
                vec!["statistic".into()]
            }
        }
        ExperimentKind::ErrorCurve => vec!["statistic".into()],
        ExperimentKind::SparseClt | ExperimentKind::SparseMean => vec!["lss".into()],
        ExperimentKind::LocalLawProbe => ["dev_m", "dev_s", "m_re", "m_im", "s_re", "s_im"].map(String::from).to_vec(),
    }
}

/// Recomputes summary, prediction and verdict from the per-trial records.
pub fn summarize(config: &ExperimentConfig, per_trial: &[TrialRecord]) -> Result<Aggregate> {
    let gs = groups(per_trial);
    let mut agg = Aggregate { summary: Vec::new(), prediction: BTreeMap::new(), verdict: Vec::new() };
    match config.kind {
        ExperimentKind::BbpDense | ExperimentKind::BbpSparse => summarize_bbp(config, &gs, &mut agg)?,
        ExperimentKind::CltHistogram => summarize_clt(config, &gs, &mut agg)?,
        ExperimentKind::ErrorCurve => summarize_error(config, &gs, &mut agg)?,
        ExperimentKind::SparseClt => summarize_sparse(config, &gs, &mut agg, false)?,
        ExperimentKind::SparseMean => summarize_sparse(config, &gs, &mut agg, true)?,
        ExperimentKind::LocalLawProbe => summarize_local_law(config, &gs, &mut agg)?,
    }
    Ok(agg)
}

fn names(config: &ExperimentConfig) -> Vec<String> {
    columns_for(config)
}

fn as_refs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

fn summarize_bbp(config: &ExperimentConfig, gs: &[Group], agg: &mut Aggregate) -> Result<()> {
    let cols = names(config);
    let k = config.model.k;
    let sparse = config.kind == ExperimentKind::BbpSparse;
    let threshold = config.outlier_threshold.unwrap_or(DEFAULT_OUTLIER_THRESHOLD);
    for g in config.grid_or(config.model.gamma) {
        let group = find(gs, &gamma_label(g))?;
        let mut s = group.base(&as_refs(&cols));
        let supercritical = g > 1.0;
        let target = if supercritical { g + 1.0 / g } else { 2.0 };
        let expected_outliers = if supercritical { k - 1 } else { 0 };
        let exact = group
            .reported()
            .filter(|r| r.values.iter().filter(|&&v| v > threshold).count() == expected_outliers)
            .count();
        let frac = exact as f64 / group.reported().count().max(1) as f64;
        let median = s.columns[0].median;
        let edge = config.model.params(k, if config.deformed { 0.0 } else { g }).map(|p| edge_estimate(&p))?;
        s.extra.insert("median_lambda_1".into(), median);
        s.extra.insert("target_lambda_1".into(), target);
        s.extra.insert("gap_lambda_1".into(), median - target);
        s.extra.insert("edge_estimate".into(), edge);
        s.extra.insert("expected_outliers".into(), expected_outliers as f64);
        s.extra.insert("fraction_exact_outlier_count".into(), frac);
        agg.prediction.insert(format!("{}/lambda_1", group.name), target);
        agg.prediction.insert(format!("{}/outliers", group.name), expected_outliers as f64);
        let tol = match (sparse, supercritical) {
            (true, _) => 0.1,
            (false, true) => 0.05,
            (false, false) => 0.08,
        };
        agg.verdict.push(Check::new(format!("{}/median_lambda_1_gap", group.name), (median - target).abs(), Comparison::AtMost, tol));
        if sparse || supercritical {
            agg.verdict.push(Check::new(
                format!("{}/outlier_count_fraction", group.name),
                frac,
                Comparison::AtLeast,
                0.9,
            ));
        }
        agg.summary.push(s);
    }
    Ok(())
}

/// Mean and variance predicted for one rank, plus `Delta` when the
/// statistic is the detection statistic.
fn clt_prediction(config: &ExperimentConfig, rank: usize) -> Result<(f64, f64)> {
    let p = config.model.p_a()?;
    let gamma = config.model.gamma;
    match config.f_name {
        None => {
            let c = closed_form_moments(rank, gamma, p)?;
            Ok((c.mean, c.variance))
        }
        Some(_) => {
            let f = config.test_function(TestFunction::X2)?;
            let c = clt_mean_variance(|x| f.eval(x), rank, gamma, p, DEFAULT_L_MAX)?;
            Ok((c.mean, c.variance))
        }
    }
}

fn summarize_clt(config: &ExperimentConfig, gs: &[Group], agg: &mut Aggregate) -> Result<()> {
    let cols = names(config);
    let ranks = config.ranks()?;
    let detection = config.f_name.is_none();
    let mut means = Vec::new();
    for &rank in &ranks {
        let group = find(gs, &rank_label(rank))?;
        let mut s = group.base(&as_refs(&cols));
        let (mu, var) = clt_prediction(config, rank)?;
        let xs = group.column(0);
        let n = xs.len() as f64;
        let emp_mean = s.columns[0].mean;
        let emp_var = s.columns[0].variance;
        agg.prediction.insert(format!("{}/mean", group.name), mu);
        agg.prediction.insert(format!("{}/variance", group.name), var);
        means.push(emp_mean);
        if var > 0.0 {
            let sd = var.sqrt();
            let ks = stats::ks_normal(&xs, mu, sd);
            s.ks = Some(ks);
            s.histogram = Some(Histogram::new(&xs, mu - 5.0 * sd, mu + 5.0 * sd, HISTOGRAM_BINS));
            let stderr = (var / n).sqrt();
            s.extra.insert("mean_error_in_stderr".into(), (emp_mean - mu) / stderr);
            s.extra.insert("variance_ratio".into(), emp_var / var);
            agg.verdict.push(Check::new(format!("{}/mean_within_3_stderr", group.name), (emp_mean - mu).abs(), Comparison::AtMost, 3.0 * stderr));
            agg.verdict.push(Check::new(format!("{}/variance_rel_error", group.name), (emp_var / var - 1.0).abs(), Comparison::AtMost, 0.15));
            agg.verdict.push(Check::new(format!("{}/ks", group.name), ks, Comparison::AtMost, 0.05));
        } else {
            // Degenerate limit law: the statistic is deterministic.
            let spread = xs.iter().fold(0.0f64, |a, &x| a.max((x - mu).abs()));
            agg.verdict.push(Check::new(format!("{}/deterministic", group.name), spread, Comparison::AtMost, 1e-9));
        }
        if detection && config.model.gamma > 0.0 {
            let k_hats: Vec<usize> = group.column(2).into_iter().map(|v| v as usize).collect();
            let modal = stats::mode(&k_hats).map_or(f64::NAN, |m| m as f64);
            s.extra.insert("modal_k_hat".into(), modal);
            agg.verdict.push(Check::new(format!("{}/modal_k_hat", group.name), modal, Comparison::Equal, rank as f64));
        }
        agg.summary.push(s);
    }
    if detection && config.model.gamma > 0.0 && ranks.len() > 1 {
        let delta = closed_form_moments(1, config.model.gamma, config.model.p_a()?)?.mean
            - closed_form_moments(0, config.model.gamma, config.model.p_a()?)?.mean;
        agg.prediction.insert("delta".into(), delta);
        let mut worst: f64 = 0.0;
        let mut increasing = true;
        for w in ranks.windows(2).zip(means.windows(2)) {
            let (r, m) = w;
            let step = (m[1] - m[0]) / (r[1] as f64 - r[0] as f64);
            increasing &= m[1] > m[0] || r[1] == r[0];
            worst = worst.max((step / delta - 1.0).abs());
        }
        agg.verdict.push(Check::new("means_increasing", if increasing { 1.0 } else { 0.0 }, Comparison::Equal, 1.0));
        agg.verdict.push(Check::new("shift_rel_error", worst, Comparison::AtMost, 0.15));
    }
    Ok(())
}

fn summarize_error(config: &ExperimentConfig, gs: &[Group], agg: &mut Aggregate) -> Result<()> {
    let p = config.model.p_a()?;
    let cols = names(config);
    let mut grid = config.grid_or(config.model.gamma);
    for k2 in config.alternatives() {
        let mut curve = Vec::new();
        for &g in &grid {
            let cfg = TestConfig::new(config.k1, k2, g, p)?;
            let m_c = crate::detect::critical_value::<f64>(&cfg)?;
            let h1 = find(gs, &gamma_rank_label(g, config.k1))?;
            let h2 = find(gs, &gamma_rank_label(g, k2))?;
            let rate = |grp: &Group, reject: bool| {
                let xs = grp.column(0);
                xs.iter().filter(|&&x| (x > m_c) == reject).count() as f64 / xs.len().max(1) as f64
            };
            let reject_h1 = rate(h1, true);
            let accept_h2 = rate(h2, false);
            let empirical = reject_h1 + accept_h2;
            let theory = theoretical_error(&cfg)?;
            let label = gamma_rank_label(g, k2);
            let mut s = h2.base(&as_refs(&cols));
            s.extra.insert("critical_value".into(), m_c);
            s.extra.insert("reject_h1".into(), reject_h1);
            s.extra.insert("accept_h2".into(), accept_h2);
            s.extra.insert("empirical_error".into(), empirical);
            s.extra.insert("theoretical_error".into(), theory);
            agg.prediction.insert(format!("{label}/error"), theory);
            agg.verdict.push(Check::new(format!("{label}/error_gap"), (empirical - theory).abs(), Comparison::AtMost, 0.05));
            agg.summary.push(s);
            curve.push((g, empirical));
        }
        curve.sort_by(|a, b| a.0.total_cmp(&b.0));
        let violations = curve.windows(2).filter(|w| w[1].1 >= w[0].1).count();
        if curve.len() > 1 {
            agg.verdict.push(Check::new(format!("K={k2}/monotone_violations"), violations as f64, Comparison::Equal, 0.0));
        }
    }
    grid.sort_by(f64::total_cmp);
    for g in grid {
        let h1 = find(gs, &gamma_rank_label(g, config.k1))?;
        agg.summary.push(h1.base(&as_refs(&cols)));
    }
    Ok(())
}

fn summarize_sparse(config: &ExperimentConfig, gs: &[Group], agg: &mut Aggregate, mean_test: bool) -> Result<()> {
    let default = if mean_test { TestFunction::X4 } else { TestFunction::X2 };
    let f = config.test_function(default)?;
    let cols = names(config);
    for rank in config.ranks()? {
        let params = config.model.params(rank + 1, config.model.gamma)?;
        let pred = sparse_prediction(|x| f.eval(x), &params, config.force_xi4_one)?;
        let group = find(gs, &rank_label(rank))?;
        let mut s = group.base(&as_refs(&cols));
        let ls = group.column(0);
        let n = params.n as f64;
        let q = params.q;
        let label = &group.name;
        agg.prediction.insert(format!("{label}/scale"), pred.scale);
        agg.prediction.insert(format!("{label}/mean_shift"), pred.mean_shift);
        agg.prediction.insert(format!("{label}/alt_mean_shift"), pred.alt_mean_shift);
        agg.prediction.insert(format!("{label}/xi4"), pred.xi4);
        s.extra.insert("q".into(), q);
        s.extra.insert("dense_regime_warning".into(), if pred.dense_regime_warning { 1.0 } else { 0.0 });
        if mean_test {
            let center = n * semicircle_integral(|x: f64| f.eval(x));
            let ys: Vec<f64> = ls.iter().map(|l| q / n.sqrt() * (l - center)).collect();
            let emp = stats::mean(&ys);
            let stderr = (stats::variance(&ys) / ys.len() as f64).sqrt();
            let rel = (emp - pred.mean_shift).abs() / pred.mean_shift.abs();
            let ratio_alt = (emp / pred.alt_mean_shift).abs().max((pred.alt_mean_shift / emp).abs());
            s.extra.insert("scaled_mean".into(), emp);
            s.extra.insert("scaled_mean_stderr".into(), stderr);
            s.extra.insert("rel_error_vs_mean_shift".into(), rel);
            s.extra.insert("ratio_vs_alt_mean_shift".into(), ratio_alt);
            let closer = (emp - pred.mean_shift).abs() < (emp - pred.alt_mean_shift).abs();
            s.extra.insert("closer_to_mean_shift".into(), if closer { 1.0 } else { 0.0 });
            agg.verdict.push(Check::new(format!("{label}/rel_error_vs_mean_shift"), rel, Comparison::AtMost, 0.2));
            agg.verdict.push(Check::new(format!("{label}/ratio_vs_alt_mean_shift"), ratio_alt, Comparison::AtLeast, 5.0));
        } else {
            let m = stats::mean(&ls);
            let zs: Vec<f64> = ls.iter().map(|l| (l - m) / pred.scale).collect();
            let ks = stats::ks_normal(&zs, 0.0, 1.0);
            s.ks = Some(ks);
            s.histogram = Some(Histogram::new(&zs, -5.0, 5.0, HISTOGRAM_BINS));
            s.extra.insert("scaled_variance".into(), stats::variance(&zs));
            agg.verdict.push(Check::new(format!("{label}/ks"), ks, Comparison::AtMost, 0.05));
        }
        agg.summary.push(s);
    }
    Ok(())
}

fn summarize_local_law(config: &ExperimentConfig, gs: &[Group], agg: &mut Aggregate) -> Result<()> {
    let params = config.model.params(config.model.k, config.model.gamma)?;
    let cols = names(config);
    let n = params.n as f64;
    let q = params.q;
    let bound_m = LOCAL_LAW_CONSTANT / (q * q);
    let bound_s = LOCAL_LAW_CONSTANT * (n.sqrt() / q.powi(4) + 1.0 / q);
    agg.prediction.insert("bound_m".into(), bound_m);
    agg.prediction.insert("bound_s".into(), bound_s);
    for z in config.z_list() {
        let group = find(gs, &z_label(z))?;
        let mut s = group.base(&as_refs(&cols));
        let msc = m_sc(Complex::new(z[0], z[1]))?;
        agg.prediction.insert(format!("{}/m_sc_re", group.name), msc.re);
        agg.prediction.insert(format!("{}/m_sc_im", group.name), msc.im);
        let p95_m = stats::quantile(&group.column(0), 0.95);
        let p95_s = stats::quantile(&group.column(1), 0.95);
        s.extra.insert("p95_dev_m".into(), p95_m);
        s.extra.insert("p95_dev_s".into(), p95_s);
        agg.verdict.push(Check::new(format!("{}/p95_dev_m", group.name), p95_m, Comparison::AtMost, bound_m));
        agg.verdict.push(Check::new(format!("{}/p95_dev_s", group.name), p95_s, Comparison::AtMost, bound_s));
        agg.summary.push(s);
    }
    Ok(())
}
