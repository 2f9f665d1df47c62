//! The `coalflow` command line.
//!
//! One subcommand per experiment. Results go to `--out` (or stdout) as JSON
//! or CSV; with `--out` a run manifest is written to `<out>.manifest.json`.
//! `--config FILE` supplies flags from a JSON object (or from a manifest's
//! `params`); flags given on the command line win. The subcommand must be
//! the first argument unless it comes from the config.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 bad usage.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::direct::{
    cluster_size_estimate, direct_terminal, meeting_samples, sandwich_simulate_with, write_cluster_csv, write_meeting_csv, BoundStep,
    ClusterEstimate, ClusterMethod, SandwichConfig,
};
use crate::error::{Error, Result};
use crate::estimators::{bm_diagnostics, ks_against_cdf, ks_two_sample, product_defect_estimate, prop1_sum_estimate, StreamStats};
use crate::model::{DriftModel, Partition, Purpose, RngSpec, RunManifest, StreamLabel};
use crate::oracles::{self, TimeChange};
use crate::parallel::try_map_replicas;
use crate::splitting::{jump_bound_check, martingale_diagnostics_input, trotter_simulate};
use crate::web::MeetingSample;

#[derive(Debug, Parser)]
#[command(name = "coalflow", version, about = "Simulation laboratory for coalescing flows with drift")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Master seed for every random stream.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Replica count.
    #[arg(long, global = true)]
    pub reps: Option<u64>,
    /// Time step; accepts fractions such as 1/1024.
    #[arg(long, global = true, value_parser = parse_real)]
    pub dt: Option<f64>,
    /// Simulated time span (default 1).
    #[arg(long, global = true, value_parser = parse_real)]
    pub horizon: Option<f64>,
    /// Output file (stdout if absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// JSON file of flag values or a previous run's manifest.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct DriftArgs {
    /// zero, linear, cosine or tanh.
    #[arg(long)]
    pub drift: Option<String>,
    /// Drift coefficient (linear slope, tanh scale).
    #[arg(long = "C", value_parser = parse_real, allow_hyphen_values = true)]
    pub c: Option<f64>,
}

impl DriftArgs {
    fn model(&self, default: &str) -> Result<DriftModel> {
        DriftModel::from_name(self.drift.as_deref().unwrap_or(default), self.c)
    }

    /// Like [`DriftArgs::model`] but with a coefficient fallback.
    fn model_or(&self, default: &str, c: f64) -> Result<DriftModel> {
        DriftModel::from_name(self.drift.as_deref().unwrap_or(default), self.c.or(Some(c)))
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print a closed-form or quadrature value.
    Oracle(OracleArgs),
    /// Pair meeting-time experiment.
    Meet(MeetArgs),
    /// Expected cluster size of the particle started at 0.
    Cluster(ClusterArgs),
    /// Splitting scheme: jumps, martingale part, comparison with the direct simulator.
    Trotter(TrotterArgs),
    /// Correlation-decay sum over a web.
    Prop1(Prop1Args),
    /// Pathwise comparison bounds for the gap of two drifted particles.
    Sandwich(SandwichArgs),
    /// Web-engine product moment against the coalescence defect l(t, u).
    Webtest(WebtestArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleWhat {
    Phi,
    Survival,
    SurvivalOu,
    Never,
    NeverOu,
    ZeroDriftCdf,
    L,
    LHitting,
    LBound,
    Cluster,
    ClusterOu,
    ClusterQuadrature,
    NormalCdf,
    Prop1,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct OracleArgs {
    #[arg(long, value_enum)]
    pub what: OracleWhat,
    #[arg(long = "C", value_parser = parse_real)]
    pub c: Option<f64>,
    #[arg(long, value_parser = parse_real)]
    pub u1: Option<f64>,
    #[arg(long, value_parser = parse_real)]
    pub u2: Option<f64>,
    #[arg(long, value_parser = parse_real)]
    pub t: Option<f64>,
    /// Distance for l(t, u) and its bound; argument of the normal CDF.
    #[arg(long, value_parser = parse_real)]
    pub u: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_parser = parse_real)]
    pub s: Option<f64>,
    #[arg(long, value_parser = parse_real)]
    pub r: Option<f64>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct MeetArgs {
    #[command(flatten)]
    pub drift: DriftArgs,
    #[arg(long, value_parser = parse_real, default_value = "0")]
    pub u1: f64,
    #[arg(long, value_parser = parse_real, default_value = "0.5")]
    pub u2: f64,
    /// Times at which to compare survival probabilities (default: horizon).
    #[arg(long, value_parser = parse_real, value_delimiter = ',')]
    pub t: Vec<f64>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub drift: DriftArgs,
    #[arg(long, value_parser = parse_real, value_delimiter = ',', required = true)]
    pub t: Vec<f64>,
    #[arg(long = "grid-m", default_value_t = 200)]
    pub grid_m: usize,
    #[arg(long, default_value = "pair-quadrature")]
    pub method: String,
    /// Steps per unit of t when --dt is absent (dt = t / steps).
    #[arg(long, default_value_t = 400)]
    pub steps: u64,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct TrotterArgs {
    #[command(flatten)]
    pub drift: DriftArgs,
    #[arg(long, value_parser = parse_real, value_delimiter = ',', default_value = "0,0.3")]
    pub starts: Vec<f64>,
    #[arg(long = "partition-N", value_delimiter = ',', default_value = "16")]
    pub partition_n: Vec<usize>,
    /// Also run the direct simulator and compare terminal laws.
    #[arg(long = "compare-direct")]
    pub compare_direct: bool,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct Prop1Args {
    #[arg(long, value_delimiter = ',', default_value = "4,16,64")]
    pub n: Vec<usize>,
    #[arg(long, value_parser = parse_real, default_value = "0.25")]
    pub s: f64,
    #[arg(long, value_parser = parse_real, default_value = "0.75")]
    pub t: f64,
    #[arg(long, value_parser = parse_real, default_value = "0.5")]
    pub r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundStepArg {
    Euler,
    Exponential,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct SandwichArgs {
    #[command(flatten)]
    pub drift: DriftArgs,
    #[arg(long, value_parser = parse_real, default_value = "0")]
    pub u1: f64,
    #[arg(long, value_parser = parse_real, default_value = "0.3")]
    pub u2: f64,
    /// Lipschitz constant of the bounds (default: the drift's).
    #[arg(long = "c-alpha", value_parser = parse_real)]
    pub c_alpha: Option<f64>,
    #[arg(long, value_parser = parse_real, default_value = "1")]
    pub gamma: f64,
    #[arg(long = "bound-step", value_enum, default_value_t = BoundStepArg::Euler)]
    pub bound_step: BoundStepArg,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct WebtestArgs {
    #[arg(long, value_parser = parse_real, default_value = "0")]
    pub u1: f64,
    #[arg(long, value_parser = parse_real, default_value = "1")]
    pub u2: f64,
    #[arg(long, value_parser = parse_real, default_value = "1")]
    pub t: f64,
}

/// Parses a real number or a fraction `a/b`.
pub fn parse_real(s: &str) -> std::result::Result<f64, String> {
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
            let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
            a / b
        }
        None => s.trim().parse().map_err(|e| format!("{e}"))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("'{s}' is not a finite number"))
    }
}

enum Output {
    Json(Value),
    Csv(String),
}

impl Output {
    fn into_bytes(self) -> Vec<u8> {
        match self {
            Output::Json(v) => {
                let mut s = serde_json::to_string_pretty(&v).expect("serialisable");
                s.push('\n');
                s.into_bytes()
            }
            Output::Csv(s) => s.into_bytes(),
        }
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run_command<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let (argv, params) = match resolve_config(&argv) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli, params) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn subcommand_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Oracle(_) => "oracle",
        Command::Meet(_) => "meet",
        Command::Cluster(_) => "cluster",
        Command::Trotter(_) => "trotter",
        Command::Prop1(_) => "prop1",
        Command::Sandwich(_) => "sandwich",
        Command::Webtest(_) => "webtest",
    }
}

fn flag_key(tok: &str) -> Option<&str> {
    let body = tok.strip_prefix("--")?;
    Some(body.split_once('=').map_or(body, |(k, _)| k))
}

/// `--key value` pairs (or `--key` switches) in `args`.
fn collect_flags(args: &[String]) -> Vec<(String, Value)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < args.len() {
        if let Some(key) = flag_key(&args[i]) {
            if let Some((_, v)) = args[i][2..].split_once('=') {
                out.push((key.to_string(), Value::String(v.to_string())));
            } else if i + 1 < args.len() && !args[i + 1].starts_with("--") {
                out.push((key.to_string(), Value::String(args[i + 1].clone())));
                i += 1;
            } else {
                out.push((key.to_string(), Value::Bool(true)));
            }
        }
        i += 1;
    }
    out
}

/// Splices flags from `--config` into argv and returns the effective flag
/// map recorded in the manifest.
fn resolve_config(argv: &[String]) -> Result<(Vec<String>, Map<String, Value>)> {
    let prog = argv.first().cloned().unwrap_or_else(|| "coalflow".into());
    let mut rest: Vec<String> = argv.iter().skip(1).cloned().collect();

    let mut config: Option<PathBuf> = None;
    let mut i = 0;
    while i < rest.len() {
        if rest[i] == "--config" && i + 1 < rest.len() {
            config = Some(PathBuf::from(rest.remove(i + 1)));
            rest.remove(i);
        } else if let Some(p) = rest[i].strip_prefix("--config=") {
            config = Some(PathBuf::from(p));
            rest.remove(i);
        } else {
            i += 1;
        }
    }

    let mut command = match rest.first() {
        Some(c) if !c.starts_with('-') => Some(rest.remove(0)),
        _ => None,
    };
    let mut from_config: Vec<(String, Value)> = Vec::new();
    if let Some(path) = config {
        let text = std::fs::read_to_string(&path)?;
        let v: Value = serde_json::from_str(&text)?;
        let obj = v.as_object().ok_or_else(|| Error::invalid("config must be a JSON object"))?;
        if command.is_none() {
            command = obj.get("command").and_then(Value::as_str).map(str::to_string);
        }
        let params = match obj.get("params") {
            Some(Value::Object(p)) => p.clone(),
            _ => obj.clone(),
        };
        for (k, v) in params {
            if k != "command" && k != "config" {
                from_config.push((k, v));
            }
        }
    }

    let user = collect_flags(&rest);
    let mut merged: Vec<String> = vec![prog];
    if let Some(c) = &command {
        merged.push(c.clone());
    }
    let mut params = Map::new();
    for (k, v) in &from_config {
        if user.iter().any(|(uk, _)| uk == k) {
            continue;
        }
        let arg = match v {
            Value::Bool(true) => None,
            Value::Bool(false) | Value::Null => continue,
            Value::String(s) => Some(s.clone()),
            Value::Array(a) => Some(
                a.iter()
                    .map(|x| x.as_str().map(str::to_string).unwrap_or_else(|| x.to_string()))
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            other => Some(other.to_string()),
        };
        merged.push(format!("--{k}"));
        if let Some(a) = arg {
            merged.push(a);
        }
        params.insert(k.clone(), v.clone());
    }
    merged.extend(rest);
    for (k, v) in user {
        params.insert(k, v);
    }
    params.remove("out");
    Ok((merged, params))
}

fn execute(cli: &Cli, params: Map<String, Value>) -> Result<()> {
    let c = &cli.common;
    let spec = RngSpec::new(c.seed);
    let name = subcommand_name(&cli.command);
    let mut manifest = RunManifest::start(name, params, c.seed);
    let output = match &cli.command {
        Command::Oracle(a) => run_oracle(a, c)?,
        Command::Meet(a) => run_meet(a, c, &spec)?,
        Command::Cluster(a) => run_cluster(a, c, &spec)?,
        Command::Trotter(a) => run_trotter(a, c, &spec)?,
        Command::Prop1(a) => run_prop1(a, c, &spec)?,
        Command::Sandwich(a) => run_sandwich(a, c, &spec)?,
        Command::Webtest(a) => run_webtest(a, c, &spec)?,
    };
    let bytes = output.into_bytes();
    match &c.out {
        Some(path) => {
            std::fs::write(path, &bytes)?;
            manifest.finish();
            let mpath = manifest_path(path);
            std::fs::write(&mpath, serde_json::to_string_pretty(&manifest)? + "\n")?;
        }
        None => {
            std::io::stdout().write_all(&bytes)?;
        }
    }
    Ok(())
}

/// `<out>.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn need(v: Option<f64>, flag: &str) -> Result<f64> {
    v.ok_or_else(|| Error::invalid(format!("--{flag} is required here")))
}

fn run_oracle(a: &OracleArgs, c: &CommonArgs) -> Result<Output> {
    let gap = || -> Result<(f64, f64)> { Ok((a.u1.unwrap_or(0.0), need(a.u2, "u2")?)) };
    let value = match a.what {
        OracleWhat::Phi => oracles::phi_c(need(a.c, "C")?, need(a.t, "t")?)?,
        OracleWhat::Survival => {
            let (u1, u2) = gap()?;
            oracles::meeting_survival_linear(a.c.unwrap_or(0.0), u1, u2, need(a.t, "t")?)?
        }
        OracleWhat::SurvivalOu => {
            let (u1, u2) = gap()?;
            oracles::meeting_survival_ou(a.c.unwrap_or(0.0), u1, u2, need(a.t, "t")?)?
        }
        OracleWhat::Never => {
            let (u1, u2) = gap()?;
            oracles::meeting_never_prob_linear(need(a.c, "C")?, u1, u2)?
        }
        OracleWhat::NeverOu => {
            let (u1, u2) = gap()?;
            oracles::meeting_never_prob_with(TimeChange::OrnsteinUhlenbeck, need(a.c, "C")?, u1, u2)?
        }
        OracleWhat::ZeroDriftCdf => {
            let (u1, u2) = gap()?;
            oracles::meeting_cdf_zero_drift(u2 - u1, need(a.t, "t")?)
        }
        OracleWhat::L => oracles::l_defect(need(a.t, "t")?, need(a.u, "u")?)?,
        OracleWhat::LHitting => oracles::l_defect_hitting_route(need(a.t, "t")?, need(a.u, "u")?)?,
        OracleWhat::LBound => oracles::l_upper_bound(need(a.t, "t")?, need(a.u, "u")?)?,
        OracleWhat::Cluster => oracles::expected_cluster_size_linear(need(a.c, "C")?, need(a.t, "t")?)?,
        OracleWhat::ClusterOu => oracles::expected_cluster_size_ou(need(a.c, "C")?, need(a.t, "t")?)?,
        OracleWhat::ClusterQuadrature => {
            oracles::expected_cluster_size_quadrature(TimeChange::RootTwoRate, need(a.c, "C")?, need(a.t, "t")?)?
        }
        OracleWhat::NormalCdf => oracles::normal_cdf(need(a.u, "u")?),
        OracleWhat::Prop1 => oracles::prop1_expectation(
            a.n.ok_or_else(|| Error::invalid("--n is required here"))?,
            need(a.s, "s")?,
            need(a.t, "t")?,
            need(a.r, "r")?,
        )?,
    };
    let what = OracleWhat::value_variants()
        .iter()
        .find(|w| **w == a.what)
        .and_then(|w| w.to_possible_value())
        .map(|p| p.get_name().to_string())
        .unwrap_or_default();
    Ok(match c.format {
        Format::Json => Output::Json(json!({ "what": what, "value": value })),
        Format::Csv => Output::Csv(format!("{}\nwhat,value\n{},{}\n", crate::CSV_SCHEMA_HEADER, what, value)),
    })
}

fn binomial_z(k: usize, n: usize, p: f64) -> f64 {
    let se = (p * (1.0 - p) / n as f64).sqrt();
    let frac = k as f64 / n as f64;
    if se > 0.0 {
        (frac - p) / se
    } else if frac == p {
        0.0
    } else {
        f64::INFINITY
    }
}

fn run_meet(a: &MeetArgs, c: &CommonArgs, spec: &RngSpec) -> Result<Output> {
    let model = a.drift.model("zero")?;
    let horizon = c.horizon.unwrap_or(1.0);
    let dt = c.dt.unwrap_or(1e-4);
    let reps = c.reps.unwrap_or(10_000);
    let samples = meeting_samples(a.u1, a.u2, &model, horizon, dt, spec, reps)?;
    if c.format == Format::Csv {
        let mut buf = Vec::new();
        write_meeting_csv(&samples, &mut buf)?;
        return Ok(Output::Csv(String::from_utf8(buf).expect("utf8")));
    }
    let n = samples.len();
    let n_met = samples.iter().filter(|s| s.met).count();
    let times = if a.t.is_empty() { vec![horizon] } else { a.t.clone() };

    // oracles: the root-two time change and the OU clock for linear drifts,
    // the reflection principle for zero drift
    type Cdf = Box<dyn Fn(f64) -> f64>;
    let clocks: Vec<(&str, Cdf)> = match model {
        DriftModel::Zero => {
            let g = a.u2 - a.u1;
            vec![("reflection", Box::new(move |t| oracles::meeting_cdf_zero_drift(g, t)))]
        }
        DriftModel::Linear { c: k } => {
            let (u1, u2) = (a.u1, a.u2);
            vec![
                (
                    "root-two-clock",
                    Box::new(move |t| 1.0 - oracles::meeting_survival_linear(k, u1, u2, t).unwrap_or(f64::NAN)),
                ),
                (
                    "ou-clock",
                    Box::new(move |t| 1.0 - oracles::meeting_survival_ou(k, u1, u2, t).unwrap_or(f64::NAN)),
                ),
            ]
        }
        _ => Vec::new(),
    };
    let mut comparisons = Vec::new();
    for (label, cdf) in &clocks {
        let ks = ks_against_cdf(&samples, |t| if t <= 0.0 { 0.0 } else { cdf(t) }, horizon);
        let survival: Vec<Value> = times
            .iter()
            .map(|&t| {
                let survived = samples.iter().filter(|s| !(s.met && s.time <= t)).count();
                let oracle = 1.0 - cdf(t);
                json!({
                    "t": t,
                    "empirical": survived as f64 / n as f64,
                    "oracle": oracle,
                    "z": binomial_z(survived, n, oracle),
                })
            })
            .collect();
        comparisons.push(json!({ "oracle": label, "ks": ks, "survival": survival }));
    }
    Ok(Output::Json(json!({
        "drift": model,
        "u1": a.u1,
        "u2": a.u2,
        "horizon": horizon,
        "dt": dt,
        "reps": reps,
        "n_met": n_met,
        "meet_fraction": n_met as f64 / n as f64,
        "comparisons": comparisons,
    })))
}

fn run_cluster(a: &ClusterArgs, c: &CommonArgs, spec: &RngSpec) -> Result<Output> {
    let model = a.drift.model_or("linear", 1.0)?;
    let method: ClusterMethod = a.method.parse()?;
    let reps = c.reps.unwrap_or(20_000);
    let mut rows: Vec<ClusterEstimate> = Vec::new();
    for &t in &a.t {
        let dt = c.dt.unwrap_or(t / a.steps as f64);
        rows.push(cluster_size_estimate(&model, t, a.grid_m, reps, dt, spec, method)?);
    }
    if c.format == Format::Csv {
        let mut buf = Vec::new();
        write_cluster_csv(&rows, &mut buf)?;
        return Ok(Output::Csv(String::from_utf8(buf).expect("utf8")));
    }
    let out: Vec<Value> = rows
        .iter()
        .map(|e| {
            let mut v = json!({ "estimate": e, "ratio_sqrt_t": e.value / e.t.sqrt() });
            if let DriftModel::Linear { c: k } = model {
                if k != 0.0 {
                    let root_two = oracles::expected_cluster_size_linear(k, e.t).unwrap_or(f64::NAN);
                    let ou = oracles::expected_cluster_size_ou(k, e.t).unwrap_or(f64::NAN);
                    v["root-two-clock"] = json!({ "value": root_two, "z": (e.value - root_two) / e.stderr });
                    v["ou_clock"] = json!({ "value": ou, "z": (e.value - ou) / e.stderr });
                }
            }
            v
        })
        .collect();
    Ok(Output::Json(json!({ "drift": model, "grid_m": a.grid_m, "rows": out })))
}

struct TrotterSummary {
    terminal: Vec<f64>,
    jump_ok: bool,
    increments: Vec<(f64, f64)>,
    qv: f64,
}

fn run_trotter(a: &TrotterArgs, c: &CommonArgs, spec: &RngSpec) -> Result<Output> {
    let model = a.drift.model("cosine")?;
    let reps = c.reps.unwrap_or(10_000);
    let dt = c.dt.unwrap_or(1.0 / 1024.0);
    if c.format == Format::Csv && reps == 1 {
        let n = a.partition_n[0];
        let part = Partition::uniform(n)?;
        let rng = spec.stream(StreamLabel::new(Purpose::TROTTER.indexed(n as u64), 0));
        let rec = trotter_simulate(&a.starts, &part, &model, dt, rng)?;
        let mut buf = Vec::new();
        rec.write_csv(&mut buf)?;
        return Ok(Output::Csv(String::from_utf8(buf).expect("utf8")));
    }

    let direct = if a.compare_direct {
        Some(try_map_replicas(reps, |i| {
            direct_terminal(&a.starts, &model, 1.0, dt, spec.stream(StreamLabel::new(Purpose::DIRECT, i)))
        })?)
    } else {
        None
    };

    let mut csv = format!("{}\nN,replica,particle_id,terminal,jump_bound_ok,qv\n", crate::CSV_SCHEMA_HEADER);
    let mut per_n = Vec::new();
    for &n in &a.partition_n {
        let part = Partition::uniform(n)?;
        let summaries = try_map_replicas(reps, |i| -> Result<TrotterSummary> {
            let rng = spec.stream(StreamLabel::new(Purpose::TROTTER.indexed(n as u64), i));
            let rec = trotter_simulate(&a.starts, &part, &model, dt, rng)?;
            Ok(TrotterSummary {
                terminal: (0..rec.particle_count()).map(|p| rec.terminal(p)).collect(),
                jump_ok: jump_bound_check(&rec, &model).iter().all(|&b| b),
                increments: martingale_diagnostics_input(std::slice::from_ref(&rec))?,
                qv: rec.quadratic_variation(0),
            })
        })?;
        if c.format == Format::Csv {
            for (i, s) in summaries.iter().enumerate() {
                for (p, x) in s.terminal.iter().enumerate() {
                    csv.push_str(&format!("{},{},{},{},{},{}\n", n, i, p, x, s.jump_ok as u8, s.qv));
                }
            }
            continue;
        }
        let jump_pass = summaries.iter().filter(|s| s.jump_ok).count();
        let incs: Vec<(f64, f64)> = summaries.iter().flat_map(|s| s.increments.iter().copied()).collect();
        let bm = bm_diagnostics(&incs)?;
        let qv = StreamStats::from_slice(&summaries.iter().map(|s| s.qv).collect::<Vec<_>>());
        let mut entry = json!({
            "N": n,
            "reps": reps,
            "jump_bound_pass": jump_pass,
            "bm": bm,
            "bm_passes": bm.passes(),
            "qv_mean": qv.mean(),
            "qv_stderr": qv.stderr(),
        });
        if let Some(direct) = &direct {
            let np = a.starts.len();
            let mut ks = Vec::new();
            for p in 0..np {
                let s: Vec<f64> = summaries.iter().map(|s| s.terminal[p]).collect();
                let d: Vec<f64> = direct.iter().map(|v| v[p]).collect();
                ks.push(ks_two_sample(&s, &d)?);
            }
            entry["ks_terminal"] = json!(ks);
            entry["ks_max"] = json!(ks.iter().copied().fold(0.0, f64::max));
            if np == 2 {
                let ms = summaries.iter().filter(|s| s.terminal[0] == s.terminal[1]).count() as f64 / reps as f64;
                let md = direct.iter().filter(|v| v[0] == v[1]).count() as f64 / reps as f64;
                let pooled = 0.5 * (ms + md);
                let se = (pooled * (1.0 - pooled) * 2.0 / reps as f64).sqrt();
                entry["meet_by_1"] = json!({ "splitting": ms, "direct": md, "z": (ms - md) / se });
            }
        }
        per_n.push(entry);
    }
    if c.format == Format::Csv {
        return Ok(Output::Csv(csv));
    }
    Ok(Output::Json(
        json!({ "drift": model, "starts": a.starts, "dt": dt, "partitions": per_n }),
    ))
}

fn run_prop1(a: &Prop1Args, c: &CommonArgs, spec: &RngSpec) -> Result<Output> {
    let reps = c.reps.unwrap_or(10_000);
    let dt = c.dt.unwrap_or(1.0 / 1024.0);
    let mut rows = Vec::new();
    let mut csv = format!("{}\nn,value,stderr,reps,exact\n", crate::CSV_SCHEMA_HEADER);
    for &n in &a.n {
        let e = prop1_sum_estimate(n, a.s, a.t, a.r, reps, dt, spec)?;
        let exact = oracles::prop1_expectation(n, a.s, a.t, a.r).ok();
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            n,
            e.value,
            e.stderr,
            e.reps,
            exact.map_or("".into(), |x| x.to_string())
        ));
        rows.push(json!({ "n": n, "estimate": e, "z_zero": e.z(0.0), "exact": exact, "z_exact": exact.map(|x| e.z(x)) }));
    }
    Ok(match c.format {
        Format::Csv => Output::Csv(csv),
        Format::Json => Output::Json(json!({ "s": a.s, "t": a.t, "r": a.r, "dt": dt, "rows": rows })),
    })
}

fn run_sandwich(a: &SandwichArgs, c: &CommonArgs, spec: &RngSpec) -> Result<Output> {
    let model = a.drift.model("cosine")?;
    let reps = c.reps.unwrap_or(10_000);
    let dt = c.dt.unwrap_or(1e-3);
    let horizon = c.horizon.unwrap_or(1.0);
    let cfg = SandwichConfig {
        c_alpha: a.c_alpha,
        gamma: a.gamma,
        step: match a.bound_step {
            BoundStepArg::Euler => BoundStep::Euler,
            BoundStepArg::Exponential => BoundStep::Exponential,
        },
    };
    let rows = try_map_replicas(reps, |i| -> Result<(bool, bool, MeetingSample)> {
        let mut rng = spec.stream(StreamLabel::new(Purpose::SANDWICH, i));
        let r = sandwich_simulate_with(&model, a.u1, a.u2, horizon, dt, &mut rng, &cfg)?;
        let bitwise = (0..r.times.len())
            .all(|j| r.eta[j].to_bits() == r.delta_xi[j].to_bits() && r.eta_tilde[j].to_bits() == r.delta_xi[j].to_bits());
        Ok((r.holds(), bitwise, r.meeting))
    })?;
    if c.format == Format::Csv {
        let mut csv = format!("{}\nreplica,holds,bitwise_equal,met,meet_time\n", crate::CSV_SCHEMA_HEADER);
        for (i, (h, b, m)) in rows.iter().enumerate() {
            csv.push_str(&format!("{},{},{},{},{}\n", i, *h as u8, *b as u8, m.met as u8, m.time));
        }
        return Ok(Output::Csv(csv));
    }
    let pass = rows.iter().filter(|r| r.0).count();
    let bitwise = rows.iter().filter(|r| r.1).count();
    let met = rows.iter().filter(|r| r.2.met).count();
    Ok(Output::Json(json!({
        "drift": model,
        "c_alpha": a.c_alpha.unwrap_or_else(|| model.lipschitz()),
        "reps": reps,
        "pass": pass,
        "bitwise_equal": bitwise,
        "met": met,
    })))
}

fn run_webtest(a: &WebtestArgs, c: &CommonArgs, spec: &RngSpec) -> Result<Output> {
    let reps = c.reps.unwrap_or(10_000);
    let dt = c.dt.unwrap_or(1e-3);
    let e = product_defect_estimate(a.u1, a.u2, a.t, reps, dt, spec)?;
    let l = oracles::l_defect(a.t, (a.u2 - a.u1).abs())?;
    Ok(match c.format {
        Format::Json => Output::Json(json!({ "estimate": e, "l": l, "z": e.z(l) })),
        Format::Csv => Output::Csv(format!(
            "{}\nvalue,stderr,reps,l\n{},{},{},{}\n",
            crate::CSV_SCHEMA_HEADER,
            e.value,
            e.stderr,
            e.reps,
            l
        )),
    })
}
