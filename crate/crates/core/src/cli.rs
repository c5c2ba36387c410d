//! Command-line front end. Every subcommand is a thin adapter over the
//! library API, so the same inputs give the same numbers either way.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::experiments::{self, fmt_num, ExperimentConfig, Report, ReportFormat};
use crate::geometry::{self, LieKind, DEFAULT_ALPHAS, DEFAULT_STREAMLINE_STEP};
use crate::inference::{fit_mle, posterior_grid, posterior_means, GridConfig, Pivot};
use crate::models::{ModelSpec, OtefDefinition, OtefModel, ParamPoint, Sample};
use crate::priors::{self, MatchingCondition, PriorSpec};
use crate::TOOL_VERSION;

/// Environment variable that overrides the experiment worker count.
pub const THREADS_ENV: &str = "TRUNCGEO_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "truncgeo",
    version,
    about = "Geometry and matching priors for one-sided truncated families"
)]
struct Cli {
    /// TOML file with custom model definitions and an experiment table.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dump metric, connections and moment tensors at a point as JSON.
    Geometry(GeometryArgs),
    /// Evaluate matching-condition residuals over a parameter grid as CSV.
    Residual(ResidualArgs),
    /// Trace a streamline of the vector field χ as CSV.
    Streamline(StreamlineArgs),
    /// Fit the maximum likelihood estimate.
    Mle(MleArgs),
    /// Exact grid posterior: pivot probabilities, quantiles and means.
    Posterior(PosteriorArgs),
    /// Monte Carlo coverage of posterior pivot quantiles.
    Coverage(ExperimentArgs),
    /// Monte Carlo posterior-mean discrepancies.
    Moment(ExperimentArgs),
}

#[derive(Debug, Args)]
struct Output {
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GeometryArgs {
    #[arg(long)]
    model: String,
    /// `theta=..,gamma=..` (or `theta_1=..,theta_2=..,gamma=..`).
    #[arg(long)]
    point: String,
    /// Comma-separated α values for the α-connections.
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct ResidualArgs {
    #[arg(long)]
    model: String,
    #[arg(long)]
    prior: String,
    /// `pm_gamma`, `pm_theta[:i]`, `mm_gamma`, `mm_theta[:i]`, `lie_pm` or `lie_mm`; repeatable.
    #[arg(long = "cond", required = true)]
    conds: Vec<String>,
    /// `theta=lo:hi:n,...,gamma=lo:hi:n`.
    #[arg(long)]
    grid: String,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct StreamlineArgs {
    #[arg(long)]
    model: String,
    #[arg(long)]
    start: String,
    #[arg(long)]
    smax: f64,
    #[arg(long, default_value_t = DEFAULT_STREAMLINE_STEP)]
    step: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct SampleArgs {
    /// File of observations separated by whitespace or commas.
    #[arg(long, conflicts_with = "draw")]
    data: Option<PathBuf>,
    /// Draw this many observations from `--truth` instead.
    #[arg(long, requires = "truth")]
    draw: Option<usize>,
    #[arg(long)]
    truth: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct MleArgs {
    #[arg(long)]
    model: String,
    #[command(flatten)]
    sample: SampleArgs,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct PosteriorArgs {
    #[arg(long)]
    model: String,
    #[arg(long)]
    prior: String,
    #[command(flatten)]
    sample: SampleArgs,
    /// `T`, `U` or `U:<i>`.
    #[arg(long, default_value = "T")]
    pivot: String,
    /// Pivot values at which to report the posterior CDF; repeatable.
    #[arg(long = "z", allow_hyphen_values = true)]
    z: Vec<f64>,
    /// Posterior quantile levels of the pivot; repeatable.
    #[arg(long = "level")]
    levels: Vec<f64>,
    /// Also write the full grid (nodes and log densities) as JSON.
    #[arg(long)]
    grid_json: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    truth: Option<String>,
    /// Prior specification; repeatable.
    #[arg(long = "prior")]
    priors: Vec<String>,
    /// Sample sizes, comma-separated or repeated.
    #[arg(long = "n", value_delimiter = ',')]
    n_values: Vec<usize>,
    #[arg(long)]
    replications: Option<usize>,
    /// Nominal levels, comma-separated or repeated.
    #[arg(long = "level", value_delimiter = ',')]
    levels: Vec<f64>,
    #[arg(long)]
    pivot: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// `json` or `csv`; defaults to the extension of `--out`.
    #[arg(long)]
    format: Option<String>,
    #[command(flatten)]
    output: Output,
}

/// Contents of the `--config` file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    #[serde(default)]
    pub model: Vec<OtefDefinition>,
    #[serde(default)]
    pub experiment: Option<ExperimentConfig>,
}

impl CliConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// A custom model of that name, else a built-in.
    pub fn resolve_model(&self, name: &str) -> Result<ModelSpec> {
        match self.model.iter().find(|m| m.name == name) {
            Some(def) => Ok(ModelSpec::new(Arc::new(OtefModel::from_definition(def)?))),
            None => ModelSpec::builtin(name),
        }
    }
}

fn parse_pairs(spec: &str) -> Result<Vec<(String, String)>> {
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::Config(format!("expected key=value, got `{kv}`")))
        })
        .collect()
}

/// Slot of a coordinate key: `theta`/`theta_i` → `i − 1`, `gamma` → `d`.
fn coord_slot(key: &str, d: usize) -> Result<usize> {
    let slot = match key {
        "gamma" => return Ok(d),
        "theta" => 0,
        other => other
            .strip_prefix("theta_")
            .and_then(|i| i.parse::<usize>().ok())
            .filter(|&i| i >= 1)
            .map(|i| i - 1)
            .ok_or_else(|| Error::Config(format!("unknown coordinate `{other}`")))?,
    };
    if slot >= d {
        return Err(Error::Config(format!("`{key}` exceeds d = {d}")));
    }
    Ok(slot)
}

fn number(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::Config(format!("bad number `{s}`")))
}

/// Parses `theta=1,gamma=0` into a point of dimension `d`.
pub fn parse_point(spec: &str, d: usize) -> Result<ParamPoint> {
    let mut coords = vec![None; d + 1];
    for (k, v) in parse_pairs(spec)? {
        let slot = coord_slot(&k, d)?;
        if coords[slot].replace(number(&v)?).is_some() {
            return Err(Error::Config(format!("`{k}` given twice")));
        }
    }
    let coords: Vec<f64> = coords.into_iter().collect::<Option<_>>().ok_or_else(|| {
        Error::Config(format!(
            "`{spec}` must set every theta component and gamma (d = {d})"
        ))
    })?;
    Ok(ParamPoint::from_coords(&coords))
}

/// Parses `theta=lo:hi:n,gamma=lo:hi:n` into per-coordinate node lists.
pub fn parse_grid(spec: &str, d: usize) -> Result<Vec<Vec<f64>>> {
    let mut axes = vec![None; d + 1];
    for (k, v) in parse_pairs(spec)? {
        let slot = coord_slot(&k, d)?;
        let parts: Vec<&str> = v.split(':').collect();
        let axis = match parts.as_slice() {
            [single] => vec![number(single)?],
            [lo, hi, n] => {
                let (lo, hi) = (number(lo)?, number(hi)?);
                let n: usize = n
                    .parse()
                    .map_err(|_| Error::Config(format!("bad count `{n}`")))?;
                match n {
                    0 => return Err(Error::Config(format!("`{k}` needs at least one node"))),
                    1 => vec![lo],
                    _ => (0..n)
                        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                        .collect(),
                }
            }
            _ => {
                return Err(Error::Config(format!(
                    "expected lo:hi:n for `{k}`, got `{v}`"
                )))
            }
        };
        axes[slot] = Some(axis);
    }
    axes.into_iter().collect::<Option<Vec<_>>>().ok_or_else(|| {
        Error::Config(format!(
            "`{spec}` must cover every theta component and gamma (d = {d})"
        ))
    })
}

/// A matching condition or one of the Lie forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResidualKind {
    Direct(MatchingCondition),
    Lie(LieKind),
}

impl ResidualKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "lie_pm" => Ok(Self::Lie(LieKind::PmGammaLie)),
            "lie_mm" => Ok(Self::Lie(LieKind::MmGammaLie)),
            other => MatchingCondition::parse(other).map(Self::Direct),
        }
    }

    pub fn evaluate(self, model: &ModelSpec, p: &ParamPoint, prior: &PriorSpec) -> Result<f64> {
        match self {
            Self::Direct(c) => priors::matching_residual(model, p, prior, c),
            Self::Lie(k) => geometry::lie_residual(model, p, prior, k),
        }
    }
}

fn read_sample(path: &Path) -> Result<Sample> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let values = text
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(number)
        .collect::<Result<Vec<_>>>()?;
    Sample::new(values)
}

fn load_sample(args: &SampleArgs, model: &ModelSpec) -> Result<(Sample, Value)> {
    match (&args.data, args.draw) {
        (Some(path), _) => Ok((
            read_sample(path)?,
            json!({ "data": path.display().to_string() }),
        )),
        (None, Some(n)) => {
            let truth = parse_point(args.truth.as_deref().unwrap_or_default(), model.dim())?;
            let sample = model.draw_sample(&truth, n, args.seed)?;
            Ok((
                sample,
                json!({ "draw": n, "truth": truth, "seed": args.seed }),
            ))
        }
        (None, None) => Err(Error::Config(
            "give --data FILE or --draw N --truth POINT".into(),
        )),
    }
}

fn emit(output: &Output, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match &output.out {
        Some(path) => std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        }),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|source| Error::Io {
                path: PathBuf::from("<stdout>"),
                source,
            }),
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

fn run_geometry(cfg: &CliConfig, a: &GeometryArgs, stdout: &mut dyn Write) -> Result<()> {
    let model = cfg.resolve_model(&a.model)?;
    let p = parse_point(&a.point, model.dim())?;
    let alphas = a.alphas.clone().unwrap_or_else(|| DEFAULT_ALPHAS.to_vec());
    let geo = geometry::geometry_at(&model, &p, &alphas)?;
    let doc = json!({
        "tool_version": TOOL_VERSION,
        "config": { "model": a.model, "point": p, "alphas": alphas },
        "geometry": geo.to_json(),
    });
    emit(&a.output, &pretty(&doc), stdout)
}

fn run_residual(cfg: &CliConfig, a: &ResidualArgs, stdout: &mut dyn Write) -> Result<()> {
    let model = cfg.resolve_model(&a.model)?;
    let d = model.dim();
    let prior = PriorSpec::parse(&a.prior, &model)?;
    let kinds = a
        .conds
        .iter()
        .map(|c| ResidualKind::parse(c))
        .collect::<Result<Vec<_>>>()?;
    let axes = parse_grid(&a.grid, d)?;
    let mut out = String::new();
    out.push_str(&format!("# tool_version: {TOOL_VERSION}\n"));
    out.push_str(&format!(
        "# config: {}\n",
        json!({ "model": a.model, "prior": a.prior, "cond": a.conds, "grid": a.grid })
    ));
    let mut header: Vec<String> = (1..=d).map(|i| format!("theta_{i}")).collect();
    header.push("gamma".into());
    header.extend(a.conds.iter().cloned());
    out.push_str(&header.join(","));
    out.push('\n');
    let total: usize = axes.iter().map(Vec::len).product();
    for k in 0..total {
        let mut rem = k;
        let mut coords = vec![0.0; d + 1];
        for slot in (0..=d).rev() {
            let len = axes[slot].len();
            coords[slot] = axes[slot][rem % len];
            rem /= len;
        }
        let p = ParamPoint::from_coords(&coords);
        if !model.is_valid(&p) {
            out.push_str(&format!(
                "# skipped invalid point {}\n",
                coords
                    .iter()
                    .map(|v| fmt_num(*v))
                    .collect::<Vec<_>>()
                    .join(",")
            ));
            continue;
        }
        let mut row: Vec<String> = coords.iter().map(|v| fmt_num(*v)).collect();
        for kind in &kinds {
            row.push(fmt_num(kind.evaluate(&model, &p, &prior)?));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    emit(&a.output, &out, stdout)
}

fn run_streamline(cfg: &CliConfig, a: &StreamlineArgs, stdout: &mut dyn Write) -> Result<()> {
    let model = cfg.resolve_model(&a.model)?;
    let start = parse_point(&a.start, model.dim())?;
    let line = geometry::trace_streamline(&model, &start, a.smax, a.step)?;
    let meta = vec![
        format!("tool_version: {TOOL_VERSION}"),
        format!(
            "config: {}",
            json!({ "model": a.model, "start": start, "smax": a.smax, "step": a.step })
        ),
    ];
    emit(&a.output, &line.to_csv(&meta), stdout)
}

fn run_mle(cfg: &CliConfig, a: &MleArgs, stdout: &mut dyn Write) -> Result<()> {
    let model = cfg.resolve_model(&a.model)?;
    let (sample, source) = load_sample(&a.sample, &model)?;
    let fit = fit_mle(&model, &sample)?;
    let doc = json!({
        "tool_version": TOOL_VERSION,
        "config": { "model": a.model, "sample": source, "n": sample.n() },
        "mle": fit,
    });
    emit(&a.output, &pretty(&doc), stdout)
}

fn run_posterior(cfg: &CliConfig, a: &PosteriorArgs, stdout: &mut dyn Write) -> Result<()> {
    let model = cfg.resolve_model(&a.model)?;
    let prior = PriorSpec::parse(&a.prior, &model)?;
    let pivot = Pivot::parse(&a.pivot)?;
    let (sample, source) = load_sample(&a.sample, &model)?;
    let fit = fit_mle(&model, &sample)?;
    let grid_cfg = GridConfig::default();
    let post = posterior_grid(&model, &sample, &prior, &fit, &grid_cfg)?;
    let (theta_bar, gamma_bar) = posterior_means(&post);
    let cdf =
        a.z.iter()
            .map(|&z| {
                post.pivot_cdf(pivot, z)
                    .map(|c| json!({ "z": z, "probability": c.probability, "clamped": c.clamped }))
            })
            .collect::<Result<Vec<_>>>()?;
    let quantiles = a
        .levels
        .iter()
        .map(|&l| {
            post.pivot_quantile(pivot, l)
                .map(|z| json!({ "level": l, "z": z }))
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(path) = &a.grid_json {
        std::fs::write(path, pretty(&post.to_json())).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
    }
    let doc = json!({
        "tool_version": TOOL_VERSION,
        "config": { "model": a.model, "prior": a.prior, "pivot": pivot.to_string(), "sample": source, "grid": grid_cfg },
        "mle": fit,
        "log_z": post.log_z,
        "posterior_mean": { "theta": theta_bar, "gamma": gamma_bar },
        "cdf": cdf,
        "quantiles": quantiles,
    });
    emit(&a.output, &pretty(&doc), stdout)
}

/// Worker count from `TRUNCGEO_THREADS`, if set.
fn env_workers() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&w| w >= 1)
            .map(Some)
            .ok_or_else(|| {
                Error::Config(format!(
                    "{THREADS_ENV} must be a positive integer, got `{v}`"
                ))
            }),
        Err(_) => Ok(None),
    }
}

fn experiment_config(cfg: &CliConfig, a: &ExperimentArgs) -> Result<ExperimentConfig> {
    let mut exp = match (&cfg.experiment, &a.model) {
        (Some(e), _) => e.clone(),
        (None, Some(model)) => {
            let m = cfg.resolve_model(model)?;
            let truth = a.truth.as_deref().ok_or_else(|| {
                Error::Config("--truth is required without a config experiment".into())
            })?;
            ExperimentConfig::new(model, parse_point(truth, m.dim())?, &[], &[], 0, 0)
        }
        (None, None) => {
            return Err(Error::Config(
                "give --config with an [experiment] table or --model".into(),
            ))
        }
    };
    if let Some(m) = &a.model {
        exp.model = m.clone();
    }
    if exp.custom_model.is_none() {
        exp.custom_model = cfg.model.iter().find(|m| m.name == exp.model).cloned();
    }
    if let Some(t) = &a.truth {
        exp.true_point = parse_point(t, exp.resolve_model()?.dim())?;
    }
    if !a.priors.is_empty() {
        exp.priors = a.priors.clone();
    }
    if !a.n_values.is_empty() {
        exp.n_values = a.n_values.clone();
    }
    if let Some(r) = a.replications {
        exp.replications = r;
    }
    if !a.levels.is_empty() {
        exp.levels = a.levels.clone();
    }
    if let Some(p) = &a.pivot {
        exp.pivot = Pivot::parse(p)?;
    }
    if let Some(s) = a.seed {
        exp.master_seed = s;
    }
    if let Some(w) = a.workers {
        exp.workers = Some(w);
    }
    if let Some(w) = env_workers()? {
        exp.workers = Some(w);
    }
    exp.validate()?;
    Ok(exp)
}

fn run_experiment(
    cfg: &CliConfig,
    a: &ExperimentArgs,
    moment: bool,
    stdout: &mut dyn Write,
) -> Result<()> {
    let exp = experiment_config(cfg, a)?;
    let report: Report = if moment {
        experiments::run_moment(&exp)?.into()
    } else {
        experiments::run_coverage(&exp)?.into()
    };
    let format = match (&a.format, &a.output.out) {
        (Some(f), _) => ReportFormat::parse(f)?,
        (None, Some(path)) => ReportFormat::from_path(path),
        (None, None) => ReportFormat::Json,
    };
    match &a.output.out {
        Some(path) => experiments::write_report(&report, path, format),
        None => {
            let text = match format {
                ReportFormat::Json => report.to_json()? + "\n",
                ReportFormat::Csv => report.to_csv(),
            };
            emit(&a.output, &text, stdout)
        }
    }
}

/// Exit code for an error: 2 for configuration problems, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Expr(_) | Error::Argument(_) => 2,
        _ => 1,
    }
}

/// Runs the CLI with explicit output streams and returns the exit code.
pub fn run_cli_with<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = (|| -> Result<()> {
        let cfg = match &cli.config {
            Some(path) => CliConfig::load(path)?,
            None => CliConfig::default(),
        };
        match &cli.command {
            Command::Geometry(a) => run_geometry(&cfg, a, stdout),
            Command::Residual(a) => run_residual(&cfg, a, stdout),
            Command::Streamline(a) => run_streamline(&cfg, a, stdout),
            Command::Mle(a) => run_mle(&cfg, a, stdout),
            Command::Posterior(a) => run_posterior(&cfg, a, stdout),
            Command::Coverage(a) => run_experiment(&cfg, a, false, stdout),
            Command::Moment(a) => run_experiment(&cfg, a, true, stdout),
        }
    })();
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs the CLI on the process streams.
pub fn run_cli<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let mut stdout = std::io::stdout().lock();
    let mut stderr = std::io::stderr().lock();
    run_cli_with(args, &mut stdout, &mut stderr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_cli_with(
            std::iter::once("truncgeo").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn point_and_grid_parsing() {
        let p = parse_point("theta=1,gamma=0", 1).unwrap();
        assert_eq!(p, ParamPoint::new(vec![1.0], 0.0));
        let p = parse_point("gamma=0.5,theta_2=-0.5,theta_1=0.1", 2).unwrap();
        assert_eq!(p, ParamPoint::new(vec![0.1, -0.5], 0.5));
        assert!(parse_point("theta=1", 1).is_err());
        assert!(parse_point("theta_2=1,gamma=0", 1).is_err());
        let g = parse_grid("theta=0.5:5:10,gamma=-1:1:5", 1).unwrap();
        assert_eq!(g[0].len(), 10);
        assert_eq!(g[1], vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn no_arguments_is_usage_error() {
        let (code, _, err) = run(&[]);
        assert_eq!(code, 2);
        assert!(err.contains("Usage"));
    }

    #[test]
    fn unknown_model_is_config_error() {
        let (code, _, err) = run(&["geometry", "--model", "nope", "--point", "theta=1,gamma=0"]);
        assert_eq!(code, 2, "{err}");
    }

    #[test]
    fn out_of_domain_point_is_runtime_error() {
        let (code, _, _) = run(&[
            "geometry",
            "--model",
            "trunc_exp",
            "--point",
            "theta=-1,gamma=0",
        ]);
        assert_eq!(code, 1);
    }

    #[test]
    fn streamline_reaches_analytic_endpoint() {
        let (code, out, err) = run(&[
            "streamline",
            "--model",
            "trunc_exp",
            "--start",
            "theta=1,gamma=0",
            "--smax",
            "0.5",
        ]);
        assert_eq!(code, 0, "{err}");
        let last: Vec<f64> = out
            .lines()
            .last()
            .unwrap()
            .split(',')
            .take(3)
            .map(|v| v.parse().unwrap())
            .collect();
        assert!(
            (last[1] - 2.0).abs() < 1e-8 && (last[2] - 0.5).abs() < 1e-12,
            "{last:?}"
        );
    }
}
