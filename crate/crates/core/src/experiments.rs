//! Monte Carlo checks of the probability- and moment-matching properties.
//!
//! Every replication draws its own sample from a seed derived from
//! `(master_seed, n, prior index, replication index)`, so reports do not
//! depend on the worker count or on the order in which workers finish.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{fit_mle, posterior_grid, posterior_means, GridConfig, MleResult, Pivot};
use crate::models::{ModelSpec, OtefDefinition, OtefModel, ParamPoint, Sample};
use crate::priors::PriorSpec;
use crate::TOOL_VERSION;

pub const SCHEMA_VERSION: u32 = 1;
pub const MIN_REPLICATIONS: usize = 100;

/// Header row of coverage CSV files.
pub const COVERAGE_CSV_HEADER: &str =
    "prior,n,level,estimate,se,covered,effective,degenerate,valid";
/// Header row of moment CSV files.
pub const MOMENT_CSV_HEADER: &str = "prior,n,statistic,estimate,se,effective,degenerate";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Built-in model name, or the name of `custom_model`.
    pub model: String,
    #[serde(default)]
    pub custom_model: Option<OtefDefinition>,
    pub true_point: ParamPoint,
    /// Prior specifications in the syntax of [`PriorSpec::parse`].
    pub priors: Vec<String>,
    pub n_values: Vec<usize>,
    pub replications: usize,
    #[serde(default = "default_levels")]
    pub levels: Vec<f64>,
    #[serde(default = "default_pivot")]
    pub pivot: Pivot,
    pub master_seed: u64,
    /// Worker threads; `None` uses every available core.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub grid: GridConfig,
}

fn default_levels() -> Vec<f64> {
    vec![0.9]
}

fn default_pivot() -> Pivot {
    Pivot::T
}

impl ExperimentConfig {
    /// Minimal configuration with one level at 0.9 and pivot `T`.
    pub fn new(
        model: &str,
        true_point: ParamPoint,
        priors: &[&str],
        n_values: &[usize],
        replications: usize,
        seed: u64,
    ) -> Self {
        Self {
            model: model.to_string(),
            custom_model: None,
            true_point,
            priors: priors.iter().map(|p| p.to_string()).collect(),
            n_values: n_values.to_vec(),
            replications,
            levels: default_levels(),
            pivot: default_pivot(),
            master_seed: seed,
            workers: None,
            grid: GridConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < MIN_REPLICATIONS {
            return Err(Error::Config(format!(
                "replications must be >= {MIN_REPLICATIONS}, got {}",
                self.replications
            )));
        }
        if let Some(bad) = self.levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
            return Err(Error::Config(format!("level {bad} is not in (0, 1)")));
        }
        if self.levels.is_empty() || self.priors.is_empty() || self.n_values.is_empty() {
            return Err(Error::Config(
                "levels, priors and n_values must be non-empty".into(),
            ));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        self.grid.validate()
    }

    /// The configuration as echoed in reports. The worker count is left out
    /// because it cannot affect any result.
    pub fn echo(&self) -> Self {
        Self {
            workers: None,
            ..self.clone()
        }
    }

    pub fn resolve_model(&self) -> Result<ModelSpec> {
        match &self.custom_model {
            Some(def) if def.name == self.model => {
                Ok(ModelSpec::new(Arc::new(OtefModel::from_definition(def)?)))
            }
            _ => ModelSpec::builtin(&self.model),
        }
    }

    fn resolve(&self) -> Result<(ModelSpec, Vec<PriorSpec>)> {
        self.validate()?;
        let model = self.resolve_model()?;
        model.check_point(&self.true_point)?;
        if let Pivot::U(i) = self.pivot {
            if i >= model.dim() {
                return Err(Error::Config(format!(
                    "pivot U:{} exceeds d = {}",
                    i + 1,
                    model.dim()
                )));
            }
        }
        let priors = self
            .priors
            .iter()
            .map(|s| PriorSpec::parse(s, &model))
            .collect::<Result<Vec<_>>>()?;
        Ok((model, priors))
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A γ-statistic and the matching θ-statistic for one replication.
type ScalarAndTheta = (f64, Vec<f64>);

/// Seed of one replication.
pub fn replication_seed(master: u64, n: usize, prior_index: usize, replication: usize) -> u64 {
    [n as u64, prior_index as u64, replication as u64]
        .iter()
        .fold(splitmix(master), |acc, &v| splitmix(acc ^ splitmix(v)))
}

fn with_pool<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(job))
}

/// Whether an error marks the replication degenerate rather than the run failed.
fn is_degenerate(err: &Error) -> bool {
    matches!(
        err,
        Error::Degenerate(_) | Error::Posterior(_) | Error::Inversion(_)
    )
}

fn fit_regular(model: &ModelSpec, sample: &Sample) -> Result<Option<MleResult>> {
    match fit_mle(model, sample) {
        Ok(fit) if fit.converged => Ok(Some(fit)),
        Ok(_) => Ok(None),
        Err(e) if is_degenerate(&e) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Value of a pivot at the true parameter for one fit.
pub fn true_pivot(fit: &MleResult, truth: &ParamPoint, pivot: Pivot) -> Result<f64> {
    let n = fit.n as f64;
    match pivot {
        Pivot::T => Ok(n * fit.c_hat * (truth.gamma - fit.gamma_hat)),
        Pivot::U(i) => {
            let g_inv = fit.g_inverse()?;
            Ok(n.sqrt() * (truth.theta[i] - fit.theta_hat[i]) / g_inv[(i, i)].sqrt())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageCell {
    pub prior: String,
    pub n: usize,
    pub level: f64,
    /// Empirical coverage; `None` when every replication was degenerate.
    pub estimate: Option<f64>,
    pub se: Option<f64>,
    pub covered: usize,
    pub effective: usize,
    pub degenerate: usize,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub config: ExperimentConfig,
    pub cells: Vec<CoverageCell>,
}

impl CoverageReport {
    pub fn cell(&self, prior: &str, n: usize, level: f64) -> Option<&CoverageCell> {
        self.cells
            .iter()
            .find(|c| c.prior == prior && c.n == n && c.level == level)
    }
}

/// Binomial standard error `√(p(1−p)/R)`.
pub fn binomial_se(p: f64, r: usize) -> f64 {
    (p * (1.0 - p) / r as f64).sqrt()
}

/// One-sided coverage of the posterior quantile of the pivot.
///
/// A replication covers level `a` when the true pivot value lies below the
/// posterior `a`-quantile, i.e. when its posterior CDF value is at most `a`.
pub fn run_coverage(cfg: &ExperimentConfig) -> Result<CoverageReport> {
    let (model, priors) = cfg.resolve()?;
    let jobs: Vec<(usize, usize, usize)> = cfg
        .n_values
        .iter()
        .flat_map(|&n| {
            (0..priors.len()).flat_map(move |pi| (0..cfg.replications).map(move |r| (n, pi, r)))
        })
        .collect();
    // Each job yields the posterior CDF at the true pivot, or None if degenerate.
    let outcomes: Vec<Result<Option<f64>>> = with_pool(cfg.workers, || {
        jobs.par_iter()
            .map(|&(n, pi, r)| {
                let seed = replication_seed(cfg.master_seed, n, pi, r);
                let sample = model.draw_sample(&cfg.true_point, n, seed)?;
                let Some(fit) = fit_regular(&model, &sample)? else {
                    return Ok(None);
                };
                let post = match posterior_grid(&model, &sample, &priors[pi], &fit, &cfg.grid) {
                    Ok(p) => p,
                    Err(e) if is_degenerate(&e) => return Ok(None),
                    Err(e) => return Err(e),
                };
                let z = true_pivot(&fit, &cfg.true_point, cfg.pivot)?;
                Ok(Some(post.pivot_cdf(cfg.pivot, z)?.probability))
            })
            .collect()
    })?;
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let mut cells = Vec::new();
    let mut chunks = outcomes.chunks(cfg.replications);
    for &n in &cfg.n_values {
        for (pi, prior_src) in cfg.priors.iter().enumerate() {
            let chunk = chunks.next().expect("one chunk per (n, prior)");
            debug_assert!(pi < priors.len());
            let probs: Vec<f64> = chunk.iter().flatten().copied().collect();
            let effective = probs.len();
            let degenerate = cfg.replications - effective;
            for &level in &cfg.levels {
                let covered = probs.iter().filter(|&&p| p <= level).count();
                let (estimate, se) = if effective > 0 {
                    let p = covered as f64 / effective as f64;
                    (Some(p), Some(binomial_se(p, effective)))
                } else {
                    (None, None)
                };
                cells.push(CoverageCell {
                    prior: prior_src.clone(),
                    n,
                    level,
                    estimate,
                    se,
                    covered,
                    effective,
                    degenerate,
                    valid: effective > 0,
                });
            }
        }
    }
    Ok(CoverageReport {
        schema_version: SCHEMA_VERSION,
        tool_version: TOOL_VERSION.into(),
        config: cfg.echo(),
        cells,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCell {
    pub prior: String,
    pub n: usize,
    /// `gamma_diff` (γ̂_B − γ̂*), `abs_gamma_diff`, `n2_gamma_diff`, or
    /// `n_theta_diff:<i>` for `n (θ̂_Bⁱ − θ̂ⁱ)`.
    pub statistic: String,
    pub estimate: Option<f64>,
    pub se: Option<f64>,
    pub effective: usize,
    pub degenerate: usize,
}

/// Least-squares slope of `log |estimate|` against `log n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub prior: String,
    pub statistic: String,
    pub slope: Option<f64>,
    /// 95% interval; absent with fewer than three sample sizes.
    pub ci: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub config: ExperimentConfig,
    pub cells: Vec<MomentCell>,
    pub slopes: Vec<SlopeFit>,
}

impl MomentReport {
    pub fn cell(&self, prior: &str, n: usize, statistic: &str) -> Option<&MomentCell> {
        self.cells
            .iter()
            .find(|c| c.prior == prior && c.n == n && c.statistic == statistic)
    }
}

fn mean_se(values: &[f64]) -> (Option<f64>, Option<f64>) {
    let k = values.len();
    if k == 0 {
        return (None, None);
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    if k == 1 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    (Some(mean), Some((var / k as f64).sqrt()))
}

/// Two-sided 97.5% Student-t quantile for small degrees of freedom.
fn t_quantile_975(df: usize) -> f64 {
    const TABLE: [f64; 10] = [
        12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
    ];
    TABLE.get(df.wrapping_sub(1)).copied().unwrap_or(1.96)
}

pub fn fit_log_slope(ns: &[usize], values: &[f64]) -> (Option<f64>, Option<[f64; 2]>) {
    let pts: Vec<(f64, f64)> = ns
        .iter()
        .zip(values)
        .filter(|(_, v)| v.abs() > 0.0 && v.is_finite())
        .map(|(&n, v)| ((n as f64).ln(), v.abs().ln()))
        .collect();
    if pts.len() < 2 {
        return (None, None);
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    if pts.len() < 3 {
        return (Some(slope), None);
    }
    let rss: f64 = pts
        .iter()
        .map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2))
        .sum();
    let se = (rss / (k - 2.0) / sxx).sqrt();
    let half = t_quantile_975(pts.len() - 2) * se;
    (Some(slope), Some([slope - half, slope + half]))
}

/// Posterior-mean discrepancies `γ̂_B − γ̂*` and `θ̂_B − θ̂`.
pub fn run_moment(cfg: &ExperimentConfig) -> Result<MomentReport> {
    let (model, priors) = cfg.resolve()?;
    let d = model.dim();
    let jobs: Vec<(usize, usize, usize)> = cfg
        .n_values
        .iter()
        .flat_map(|&n| {
            (0..priors.len()).flat_map(move |pi| (0..cfg.replications).map(move |r| (n, pi, r)))
        })
        .collect();
    // (γ̂_B − γ̂*, θ̂_B − θ̂) per replication.
    let outcomes: Vec<Result<Option<ScalarAndTheta>>> = with_pool(cfg.workers, || {
        jobs.par_iter()
            .map(|&(n, pi, r)| {
                let seed = replication_seed(cfg.master_seed, n, pi, r);
                let sample = model.draw_sample(&cfg.true_point, n, seed)?;
                let Some(fit) = fit_regular(&model, &sample)? else {
                    return Ok(None);
                };
                let post = match posterior_grid(&model, &sample, &priors[pi], &fit, &cfg.grid) {
                    Ok(p) => p,
                    Err(e) if is_degenerate(&e) => return Ok(None),
                    Err(e) => return Err(e),
                };
                let (theta_bar, gamma_bar) = posterior_means(&post);
                let dtheta = theta_bar
                    .iter()
                    .zip(&fit.theta_hat)
                    .map(|(a, b)| a - b)
                    .collect();
                Ok(Some((gamma_bar - fit.gamma_star, dtheta)))
            })
            .collect()
    })?;
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let mut cells = Vec::new();
    let mut chunks = outcomes.chunks(cfg.replications);
    let mut abs_means: Vec<Vec<f64>> = vec![Vec::new(); priors.len()];
    for &n in &cfg.n_values {
        let nf = n as f64;
        for (pi, prior_src) in cfg.priors.iter().enumerate() {
            let chunk = chunks.next().expect("one chunk per (n, prior)");
            let mut gd = Vec::with_capacity(chunk.len());
            let mut td: Vec<Vec<f64>> = vec![Vec::with_capacity(chunk.len()); d];
            for (g, t) in chunk.iter().flatten() {
                {
                    gd.push(*g);
                    for (slot, v) in td.iter_mut().zip(t) {
                        slot.push(nf * v);
                    }
                }
            }
            let effective = gd.len();
            let degenerate = cfg.replications - effective;
            let abs: Vec<f64> = gd.iter().map(|v| v.abs()).collect();
            let n2: Vec<f64> = gd.iter().map(|v| nf * nf * v).collect();
            let mut push = |statistic: String, values: &[f64]| {
                let (estimate, se) = mean_se(values);
                cells.push(MomentCell {
                    prior: prior_src.clone(),
                    n,
                    statistic,
                    estimate,
                    se,
                    effective,
                    degenerate,
                });
            };
            push("gamma_diff".into(), &gd);
            push("abs_gamma_diff".into(), &abs);
            push("n2_gamma_diff".into(), &n2);
            for (i, values) in td.iter().enumerate() {
                push(format!("n_theta_diff:{}", i + 1), values);
            }
            abs_means[pi].push(mean_se(&abs).0.unwrap_or(f64::NAN));
        }
    }
    let slopes = cfg
        .priors
        .iter()
        .zip(&abs_means)
        .map(|(prior, values)| {
            let (slope, ci) = fit_log_slope(&cfg.n_values, values);
            SlopeFit {
                prior: prior.clone(),
                statistic: "abs_gamma_diff".into(),
                slope,
                ci,
            }
        })
        .collect();
    Ok(MomentReport {
        schema_version: SCHEMA_VERSION,
        tool_version: TOOL_VERSION.into(),
        config: cfg.echo(),
        cells,
        slopes,
    })
}

/// Frequentist draws of the pivots at the true parameter: `T` and every
/// standardized `Uⁱ/σ̂ᵢ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PivotDraws {
    pub t: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub degenerate: usize,
}

pub fn pivot_draws(cfg: &ExperimentConfig, n: usize) -> Result<PivotDraws> {
    cfg.validate()?;
    let model = cfg.resolve_model()?;
    model.check_point(&cfg.true_point)?;
    let d = model.dim();
    let outcomes: Vec<Result<Option<ScalarAndTheta>>> = with_pool(cfg.workers, || {
        (0..cfg.replications)
            .into_par_iter()
            .map(|r| {
                let sample = model.draw_sample(
                    &cfg.true_point,
                    n,
                    replication_seed(cfg.master_seed, n, 0, r),
                )?;
                let Some(fit) = fit_regular(&model, &sample)? else {
                    return Ok(None);
                };
                let t = true_pivot(&fit, &cfg.true_point, Pivot::T)?;
                let u = (0..d)
                    .map(|i| true_pivot(&fit, &cfg.true_point, Pivot::U(i)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Some((t, u)))
            })
            .collect()
    })?;
    let mut draws = PivotDraws {
        t: Vec::new(),
        u: vec![Vec::new(); d],
        degenerate: 0,
    };
    for o in outcomes {
        match o? {
            Some((t, u)) => {
                draws.t.push(t);
                for (slot, v) in draws.u.iter_mut().zip(u) {
                    slot.push(v);
                }
            }
            None => draws.degenerate += 1,
        }
    }
    Ok(draws)
}

/// Two-sample-free Kolmogorov–Smirnov distance against a continuous CDF.
pub fn ks_distance(values: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / k).abs().max(((i + 1) as f64 / k - f).abs())
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(Error::Config(format!(
                "unknown report format `{other}` (json, csv)"
            ))),
        }
    }

    /// Guesses the format from a file extension, defaulting to JSON.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Self::Csv,
            _ => Self::Json,
        }
    }
}

/// Either experiment report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Report {
    Coverage(CoverageReport),
    Moment(MomentReport),
}

impl From<CoverageReport> for Report {
    fn from(r: CoverageReport) -> Self {
        Report::Coverage(r)
    }
}

impl From<MomentReport> for Report {
    fn from(r: MomentReport) -> Self {
        Report::Moment(r)
    }
}

pub(crate) fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl Report {
    fn metadata(&self, config: &ExperimentConfig, version: &str, schema: u32) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# tool_version: {version}");
        let _ = writeln!(out, "# schema_version: {schema}");
        let _ = writeln!(
            out,
            "# config: {}",
            serde_json::to_string(config).unwrap_or_default()
        );
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("serializing report: {e}")))
    }

    pub fn to_csv(&self) -> String {
        match self {
            Report::Coverage(r) => {
                let mut out = self.metadata(&r.config, &r.tool_version, r.schema_version);
                out.push_str(COVERAGE_CSV_HEADER);
                out.push('\n');
                for c in &r.cells {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{},{},{}",
                        csv_field(&c.prior),
                        c.n,
                        fmt_num(c.level),
                        fmt_opt(c.estimate),
                        fmt_opt(c.se),
                        c.covered,
                        c.effective,
                        c.degenerate,
                        c.valid
                    );
                }
                out
            }
            Report::Moment(r) => {
                let mut out = self.metadata(&r.config, &r.tool_version, r.schema_version);
                for s in &r.slopes {
                    let ci =
                        s.ci.map(|[a, b]| format!("[{},{}]", fmt_num(a), fmt_num(b)))
                            .unwrap_or_default();
                    let _ = writeln!(
                        out,
                        "# slope {} {}: {} {}",
                        s.prior,
                        s.statistic,
                        fmt_opt(s.slope),
                        ci
                    );
                }
                out.push_str(MOMENT_CSV_HEADER);
                out.push('\n');
                for c in &r.cells {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{}",
                        csv_field(&c.prior),
                        c.n,
                        c.statistic,
                        fmt_opt(c.estimate),
                        fmt_opt(c.se),
                        c.effective,
                        c.degenerate
                    );
                }
                out
            }
        }
    }
}

/// Writes a report as JSON or CSV.
pub fn write_report(report: &Report, path: &Path, format: ReportFormat) -> Result<()> {
    let text = match format {
        ReportFormat::Json => report.to_json()?,
        ReportFormat::Csv => report.to_csv(),
    };
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a JSON report back.
pub fn read_report(path: &Path) -> Result<Report> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(priors: &[&str], ns: &[usize]) -> ExperimentConfig {
        ExperimentConfig::new(
            "trunc_exp",
            ParamPoint::new(vec![2.0], 0.0),
            priors,
            ns,
            100,
            42,
        )
    }

    #[test]
    fn too_few_replications() {
        let mut cfg = small(&["1/theta"], &[20]);
        cfg.replications = 50;
        assert!(matches!(run_coverage(&cfg), Err(Error::Config(_))));
        cfg.replications = 100;
        cfg.levels = vec![1.0];
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn coverage_is_deterministic_across_workers() {
        let mut cfg = small(&["1/theta", "1"], &[15]);
        cfg.levels = vec![0.5, 0.9];
        cfg.workers = Some(1);
        let a = run_coverage(&cfg).unwrap();
        cfg.workers = Some(3);
        let b = run_coverage(&cfg).unwrap();
        assert_eq!(
            Report::from(a.clone()).to_json().unwrap(),
            Report::from(b).to_json().unwrap()
        );
        for c in &a.cells {
            let p = c.estimate.unwrap();
            assert!((0.0..=1.0).contains(&p));
            assert!((c.se.unwrap() - binomial_se(p, c.effective)).abs() < 1e-15);
        }
    }

    #[test]
    fn theta_moment_limit() {
        // Flat prior: n(θ̂_B − θ̂) → θ(1 + E[t|X]) = 0; prior 1/θ shifts it to −θ.
        let cfg = small(&["1", "1/theta"], &[60]);
        let r = run_moment(&cfg).unwrap();
        let flat = r.cell("1", 60, "n_theta_diff:1").unwrap().estimate.unwrap();
        let inv = r
            .cell("1/theta", 60, "n_theta_diff:1")
            .unwrap()
            .estimate
            .unwrap();
        assert!(flat.abs() < 0.2, "{flat}");
        assert!((inv + 2.0).abs() < 0.3, "{inv}");
    }

    #[test]
    fn report_round_trip_and_csv_header() {
        let cfg = small(&["1/theta"], &[12]);
        let report = Report::from(run_coverage(&cfg).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        write_report(&report, &path, ReportFormat::Json).unwrap();
        assert_eq!(read_report(&path).unwrap(), report);
        let csv = report.to_csv();
        let header = csv.lines().find(|l| !l.starts_with('#')).unwrap();
        assert_eq!(header, COVERAGE_CSV_HEADER);
    }

    #[test]
    fn all_degenerate_report_serializes() {
        let cfg = small(&["1"], &[5]);
        let report = CoverageReport {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION.into(),
            config: cfg,
            cells: vec![CoverageCell {
                prior: "1".into(),
                n: 5,
                level: 0.9,
                estimate: None,
                se: None,
                covered: 0,
                effective: 0,
                degenerate: 100,
                valid: false,
            }],
        };
        let r = Report::from(report);
        assert!(r.to_json().unwrap().contains("\"degenerate\": 100"));
        assert!(r
            .to_csv()
            .lines()
            .last()
            .unwrap()
            .ends_with(",0,0,100,false"));
    }

    #[test]
    fn slope_of_power_law() {
        let ns = [20, 40, 80];
        let v: Vec<f64> = ns.iter().map(|&n| 3.0 * (n as f64).powf(-2.0)).collect();
        let (s, ci) = fit_log_slope(&ns, &v);
        assert!((s.unwrap() + 2.0).abs() < 1e-12);
        let [lo, hi] = ci.unwrap();
        assert!(lo <= -2.0 + 1e-9 && hi >= -2.0 - 1e-9);
    }

    #[test]
    fn seeds_differ_per_coordinate() {
        let base = replication_seed(1, 10, 0, 0);
        assert_ne!(base, replication_seed(1, 10, 0, 1));
        assert_ne!(base, replication_seed(1, 10, 1, 0));
        assert_ne!(base, replication_seed(1, 11, 0, 0));
        assert_ne!(base, replication_seed(2, 10, 0, 0));
    }
}
