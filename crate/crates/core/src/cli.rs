//! Command-line driver. Every command writes its artifacts and a
//! `manifest.json` into `--out`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::control::{self, ControlSetup, PolicyConfig, PolicyKind};
use crate::error::{Error, Result};
use crate::eval::{self, compute_metrics, cross_validate, emit_trace, scored_pairs, MetricsReport};
use crate::features::{featurize_dir, read_dataset, read_dataset_dir, schema_hash, Dataset};
use crate::forecast::{
    load_checkpoint, save_checkpoint, train_model, ArimaConfig, ModelKind, TrainConfig,
};
use crate::pipeline::{resolve_interfaces, simulate_samples};
use crate::sim::SimConfig;
use crate::telemetry::TelemetryConfig;
use crate::topology::{load_topology, Topology};
use crate::traffic::TrafficProfile;

/// Settings that can be supplied with `--config`, as a JSON file or inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// replaces the profile named by `--profile`
    pub profile: Option<TrafficProfile>,
    pub telemetry: TelemetryConfig,
    pub train: TrainConfig,
    pub arima: ArimaConfig,
    pub policy: PolicyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            profile: None,
            telemetry: TelemetryConfig::default(),
            train: TrainConfig::desk(),
            arima: ArimaConfig::default(),
            policy: PolicyConfig::default(),
        }
    }
}

impl RunConfig {
    /// `arg` is a path, or a JSON object if it starts with `{`.
    pub fn load(arg: &str) -> Result<Self> {
        let text = if arg.trim_start().starts_with('{') {
            arg.to_string()
        } else {
            fs::read_to_string(arg).map_err(|e| Error::io(arg, e))?
        };
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            context: format!("config (line {}, column {})", e.line(), e.column()),
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    /// shared flags, subcommand arguments and the resolved [`RunConfig`]
    pub config: serde_json::Value,
    pub seed: u64,
    pub schema_hash: String,
    pub artifacts: Vec<PathBuf>,
    pub version: String,
    pub wall_clock_secs: f64,
}

#[derive(Debug, Parser)]
#[command(name = "bwpred", version, about = "Link utilization forecasting workbench")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
struct Common {
    /// single source of randomness
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// JSON file or inline JSON object with run settings
    #[arg(long, global = true, value_name = "JSON")]
    config: Option<String>,
    /// seconds between samples
    #[arg(long = "interval-secs", global = true, default_value_t = 3.0)]
    interval_secs: f64,
    /// forecast horizon in samples
    #[arg(long, global = true, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..=40))]
    offset: u64,
    /// topology JSON file; the bundled mesh by default
    #[arg(long, global = true)]
    topology: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the simulator and write per-interface telemetry
    Simulate(SimulateArgs),
    /// Turn raw telemetry into labeled datasets
    Featurize(FeaturizeArgs),
    /// Fit one model on datasets and write a checkpoint
    Train(TrainArgs),
    /// Leave-one-interface-out evaluation
    Evaluate(EvaluateArgs),
    /// Emit a prediction trace for one dataset
    Predict(PredictArgs),
    /// Closed-loop run with a reaction policy against a baseline
    Control(ControlArgs),
    /// Render a trace CSV as SVG
    PlotTrace(PlotArgs),
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    /// bundled profile name (sparse, congested) or a profile JSON file
    #[arg(long, default_value = "congested")]
    profile: String,
    #[arg(long, default_value_t = 6.0)]
    hours: f64,
    /// interfaces to record, comma separated; all by default
    #[arg(long, value_delimiter = ',')]
    interfaces: Vec<String>,
}

#[derive(Debug, Args, Serialize)]
struct FeaturizeArgs {
    /// directory written by `simulate`
    #[arg(long)]
    telemetry: PathBuf,
    #[arg(long, value_delimiter = ',')]
    interfaces: Vec<String>,
}

#[derive(Debug, Args, Serialize)]
struct TrainArgs {
    #[arg(long)]
    model: ModelKind,
    /// directory written by `featurize`
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_delimiter = ',')]
    interfaces: Vec<String>,
}

#[derive(Debug, Args, Serialize)]
struct EvaluateArgs {
    /// arima, mlp, lstm or all
    #[arg(long, default_value = "all")]
    model: String,
    #[arg(long)]
    data: PathBuf,
    /// interfaces in fold order; every dataset in `--data` by default
    #[arg(long, value_delimiter = ',')]
    interfaces: Vec<String>,
}

#[derive(Debug, Args, Serialize)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// one dataset CSV written by `featurize`
    #[arg(long)]
    data: PathBuf,
    /// also write an SVG rendering
    #[arg(long)]
    svg: bool,
}

#[derive(Debug, Args, Serialize)]
struct ControlArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// none, block or balance; the config's policy kind by default
    #[arg(long)]
    policy: Option<PolicyKind>,
    #[arg(long, default_value = "congested")]
    profile: String,
    #[arg(long, default_value_t = 2.0)]
    hours: f64,
    /// controlled interfaces; those of router r2 by default
    #[arg(long, value_delimiter = ',')]
    interfaces: Vec<String>,
}

#[derive(Debug, Args, Serialize)]
struct PlotArgs {
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    title: Option<String>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Featurize(_) => "featurize",
            Command::Train(_) => "train",
            Command::Evaluate(_) => "evaluate",
            Command::Predict(_) => "predict",
            Command::Control(_) => "control",
            Command::PlotTrace(_) => "plot-trace",
        }
    }

    fn args_json(&self) -> serde_json::Value {
        let v = match self {
            Command::Simulate(a) => serde_json::to_value(a),
            Command::Featurize(a) => serde_json::to_value(a),
            Command::Train(a) => serde_json::to_value(a),
            Command::Evaluate(a) => serde_json::to_value(a),
            Command::Predict(a) => serde_json::to_value(a),
            Command::Control(a) => serde_json::to_value(a),
            Command::PlotTrace(a) => serde_json::to_value(a),
        };
        v.unwrap_or(serde_json::Value::Null)
    }
}

/// Parses `argv` and runs the command. Returns the process exit code: 0 on
/// success, 1 for usage and validation errors, 2 for runtime failures.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .try_init();
    let args = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match dispatch(&cli, args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

struct Context<'a> {
    common: &'a Common,
    config: RunConfig,
    topology: Arc<Topology>,
    artifacts: Vec<PathBuf>,
}

impl Context<'_> {
    fn offset(&self) -> usize {
        self.common.offset as usize
    }

    fn out(&self, name: &str) -> PathBuf {
        self.common.out.join(name)
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.out(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.artifacts.push(path.clone());
        Ok(path)
    }

    fn train_config(&self) -> Result<TrainConfig> {
        let mut cfg = self.config.train.clone();
        cfg.seed = self.common.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    fn profile(&self, name: &str) -> Result<TrafficProfile> {
        if let Some(p) = &self.config.profile {
            p.validate()?;
            return Ok(p.clone());
        }
        if name.ends_with(".json") {
            let text = fs::read_to_string(name).map_err(|e| Error::io(name, e))?;
            return TrafficProfile::from_json(&text);
        }
        TrafficProfile::by_name(name)
    }

    fn sim_config(&self, hours: f64) -> Result<SimConfig> {
        if !(hours > 0.0) {
            return Err(Error::invalid("hours", "must be positive"));
        }
        let cfg = SimConfig::new(self.common.seed, hours * 3600.0, self.common.interval_secs);
        cfg.validate()?;
        Ok(cfg)
    }

    fn datasets(&self, dir: &Path, only: &[String]) -> Result<Vec<Dataset>> {
        let sets: Vec<Dataset> = read_dataset_dir(dir, only)?.into_iter().map(|(d, _)| d).collect();
        if let Some(d) = sets.iter().find(|d| d.offset != self.offset()) {
            return Err(Error::invalid(
                "data",
                format!("{} was built with offset {}, not --offset {}", d.interface, d.offset, self.offset()),
            ));
        }
        Ok(sets)
    }
}

fn dispatch(cli: &Cli, args: Vec<String>) -> Result<()> {
    let started = Instant::now();
    let common = &cli.common;
    if !(common.interval_secs > 0.0) {
        return Err(Error::invalid("interval-secs", "must be positive"));
    }
    let config = match &common.config {
        Some(c) => RunConfig::load(c)?,
        None => RunConfig::default(),
    };
    let topology = match &common.topology {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            load_topology(&text)?
        }
        None => Topology::default_mesh(),
    };
    fs::create_dir_all(&common.out).map_err(|e| Error::io(&common.out, e))?;
    let mut ctx = Context {
        common,
        config,
        topology: Arc::new(topology),
        artifacts: Vec::new(),
    };
    match &cli.command {
        Command::Simulate(a) => simulate(&mut ctx, a)?,
        Command::Featurize(a) => featurize(&mut ctx, a)?,
        Command::Train(a) => train(&mut ctx, a)?,
        Command::Evaluate(a) => evaluate(&mut ctx, a)?,
        Command::Predict(a) => predict(&mut ctx, a)?,
        Command::Control(a) => control_cmd(&mut ctx, a)?,
        Command::PlotTrace(a) => plot(&mut ctx, a)?,
    }
    let manifest = RunManifest {
        command: cli.command.name().to_string(),
        args,
        config: serde_json::json!({
            "common": common,
            "command": cli.command.args_json(),
            "run": ctx.config,
        }),
        seed: common.seed,
        schema_hash: schema_hash().to_string(),
        artifacts: ctx.artifacts.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    let path = ctx.out("manifest.json");
    fs::write(&path, serde_json::to_vec_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    Ok(())
}

#[derive(Serialize)]
struct SimulationSummary {
    ticks: usize,
    flows: usize,
    rejected: usize,
    max_capacity_excess: f64,
    interfaces: Vec<String>,
}

fn simulate(ctx: &mut Context, a: &SimulateArgs) -> Result<()> {
    let profile = ctx.profile(&a.profile)?;
    let cfg = ctx.sim_config(a.hours)?;
    let ifaces = resolve_interfaces(&ctx.topology, &a.interfaces)?;
    let out = ctx.common.out.clone();
    let run = simulate_samples(
        Arc::clone(&ctx.topology),
        profile,
        cfg,
        ctx.config.telemetry.clone(),
        &ifaces,
        Some(&out),
    )?;
    let names: Vec<String> = ifaces.iter().map(|&i| ctx.topology.interfaces[i].id.clone()).collect();
    ctx.artifacts.push(out.join("interfaces.json"));
    ctx.artifacts.extend(names.iter().map(|n| out.join(n)));
    let summary = SimulationSummary {
        ticks: run.log.ticks.len(),
        flows: run.log.flows.len(),
        rejected: run.log.rejected.len(),
        max_capacity_excess: run.log.max_capacity_excess,
        interfaces: names,
    };
    println!(
        "simulated {} ticks, {} flows, {} interfaces -> {}",
        summary.ticks,
        summary.flows,
        summary.interfaces.len(),
        out.display()
    );
    ctx.write("simulation.json", &serde_json::to_vec_pretty(&summary)?)?;
    Ok(())
}

fn featurize(ctx: &mut Context, a: &FeaturizeArgs) -> Result<()> {
    let out = ctx.common.out.clone();
    let reports = featurize_dir(&a.telemetry, &out, ctx.offset(), ctx.common.interval_secs, &a.interfaces)?;
    for r in &reports {
        println!("{:<10} {:>6} rows  {:>4} dropped", r.interface, r.rows, r.join.dropped);
        ctx.artifacts.push(r.csv.clone());
        ctx.artifacts.push(r.csv.with_extension("json"));
    }
    Ok(())
}

fn train(ctx: &mut Context, a: &TrainArgs) -> Result<()> {
    let sets = ctx.datasets(&a.data, &a.interfaces)?;
    let refs: Vec<&Dataset> = sets.iter().collect();
    let cfg = ctx.train_config()?;
    let model = train_model(a.model, &refs, &cfg, &ctx.config.arima)?;
    ctx.write("model.ckpt", &save_checkpoint(&model)?)?;
    let mut curve = String::from("epoch,mse\n");
    for (e, l) in model.loss_curve.iter().enumerate() {
        curve.push_str(&format!("{e},{l}\n"));
    }
    ctx.write("loss_curve.csv", curve.as_bytes())?;
    println!(
        "trained {} on {} interfaces ({} rows)",
        a.model,
        sets.len(),
        sets.iter().map(|d| d.len()).sum::<usize>()
    );
    if let (Some(first), Some(last)) = (model.loss_curve.first(), model.loss_curve.last()) {
        println!("training mse {first:.6} -> {last:.6}");
    }
    Ok(())
}

fn evaluate(ctx: &mut Context, a: &EvaluateArgs) -> Result<()> {
    let kinds: Vec<ModelKind> = if a.model.eq_ignore_ascii_case("all") {
        ModelKind::ALL.to_vec()
    } else {
        vec![a.model.parse()?]
    };
    let sets = ctx.datasets(&a.data, &a.interfaces)?;
    let cfg = ctx.train_config()?;
    let mut reports: Vec<MetricsReport> = Vec::new();
    for k in kinds {
        let r = cross_validate(k, &sets, &cfg, &ctx.config.arima)?;
        println!("{}", eval::format_table(&r));
        reports.push(r);
    }
    let mut buf = Vec::new();
    eval::write_report_csv(&mut buf, &reports)?;
    ctx.write("report.csv", &buf)?;
    Ok(())
}

fn read_model(path: &Path) -> Result<crate::forecast::TrainedModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    load_checkpoint(&bytes)
}

fn predict(ctx: &mut Context, a: &PredictArgs) -> Result<()> {
    let model = read_model(&a.checkpoint)?;
    let (ds, sidecar) = read_dataset(&a.data)?;
    let rows = emit_trace(&model, &ds, &sidecar.schema_hash)?;
    let mut buf = Vec::new();
    eval::write_trace_csv(&mut buf, &rows)?;
    ctx.write("trace.csv", &buf)?;
    if a.svg {
        let title = format!("{} on {}", model.kind(), ds.interface);
        ctx.write("trace.svg", eval::render_svg(&rows, &title).as_bytes())?;
    }
    let pred: Vec<Option<f64>> = rows.iter().map(|r| r.predicted).collect();
    let (p, y) = scored_pairs(&pred, &ds.targets, 0);
    let m = compute_metrics(&p, &y)?;
    println!(
        "{} on {}: {} rows, bias {:.6} mae {:.6} mse {:.6} rmse {:.6}",
        model.kind(),
        ds.interface,
        p.len(),
        m.bias,
        m.mae,
        m.mse,
        m.rmse
    );
    Ok(())
}

fn control_cmd(ctx: &mut Context, a: &ControlArgs) -> Result<()> {
    let model = read_model(&a.checkpoint)?;
    if model.offset != ctx.offset() {
        return Err(Error::invalid(
            "checkpoint",
            format!("model predicts {} samples ahead, not --offset {}", model.offset, ctx.offset()),
        ));
    }
    let mut policy = ctx.config.policy.clone();
    if let Some(k) = a.policy {
        policy.kind = k;
    }
    let interfaces = if a.interfaces.is_empty() {
        control::default_interfaces(&ctx.topology)
    } else {
        resolve_interfaces(&ctx.topology, &a.interfaces)?
    };
    let setup = ControlSetup {
        topology: Arc::clone(&ctx.topology),
        profile: ctx.profile(&a.profile)?,
        sim: ctx.sim_config(a.hours)?,
        telemetry: ctx.config.telemetry.clone(),
        interfaces,
    };
    let report = control::control_loop(&setup, &model, &policy)?;
    let mut buf = Vec::new();
    control::write_actions_csv(&mut buf, &report.controlled.actions)?;
    ctx.write("actions.csv", &buf)?;
    buf = Vec::new();
    control::write_report_csv(&mut buf, &report)?;
    ctx.write("report.csv", &buf)?;
    buf = Vec::new();
    control::write_timeline_csv(&mut buf, &report)?;
    ctx.write("timeline.csv", &buf)?;
    print!("{}", control::format_summary(&report));
    Ok(())
}

fn plot(ctx: &mut Context, a: &PlotArgs) -> Result<()> {
    let file = fs::File::open(&a.trace).map_err(|e| Error::io(&a.trace, e))?;
    let rows = eval::read_trace_csv(file)?;
    let stem = a
        .trace
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "trace".into());
    let title = a.title.clone().unwrap_or_else(|| stem.clone());
    let path = ctx.write(&format!("{stem}.svg"), eval::render_svg(&rows, &title).as_bytes())?;
    println!("wrote {}", path.display());
    Ok(())
}
