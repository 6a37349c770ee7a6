//! Closed-loop control: predict every controlled interface each tick and
//! block or divert traffic on the simulator in response.

mod policy;

use std::fmt::Write as _;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use policy::{Hysteresis, PolicyConfig, PolicyKind, Transition};

use crate::error::{Error, Result};
use crate::features::schema_hash;
use crate::forecast::{OnlinePredictor, TrainedModel};
use crate::pipeline::live_sample;
use crate::sim::{Admission, FlowGate, SimConfig, SimulationLog, Simulator};
use crate::telemetry::{TelemetryConfig, TelemetrySampler};
use crate::topology::{LinkIdx, Path, Topology};
use crate::traffic::{FlowSpec, TrafficProfile};

/// Utilization above which a tick counts as overloaded.
pub const OVERLOAD: f64 = 0.95;

/// The interfaces of router `r2` on the bundled topology.
pub const DEFAULT_ROUTER: &str = "r2";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub timestamp: i64,
    pub tick: usize,
    pub interface: String,
    pub policy: PolicyKind,
    /// `block_on`, `block_off`, `balance_on`, `balance_off`, `divert`,
    /// `no_alternate`
    pub action: String,
    pub prediction: f64,
    /// flow moved by a `divert`
    pub flow: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InterfaceSummary {
    pub interface: String,
    pub ticks: usize,
    pub overload_ticks: usize,
    pub mean_utilization: f64,
    pub max_utilization: f64,
    /// ticks with the policy engaged
    pub engaged_ticks: usize,
    /// new flows rejected because they would cross this interface
    pub rejected_flows: usize,
    /// new flows routed around this interface
    pub steered_flows: usize,
    /// running flows moved off this interface
    pub diverted_flows: usize,
}

/// Utilization and prediction of every controlled interface at one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickObservation {
    pub tick: usize,
    pub timestamp: i64,
    pub utilization: Vec<f64>,
    pub prediction: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlledRun {
    pub policy: PolicyConfig,
    pub timeline: Vec<TickObservation>,
    pub actions: Vec<ActionRecord>,
    pub summary: Vec<InterfaceSummary>,
    pub log: SimulationLog,
}

impl ControlledRun {
    pub fn first_action_tick(&self) -> Option<usize> {
        self.actions.first().map(|a| a.tick)
    }

    pub fn overload_ticks(&self) -> usize {
        self.summary.iter().map(|s| s.overload_ticks).sum()
    }

    /// Fraction of ticks from `start` on whose highest controlled-interface
    /// utilization stays below `limit`.
    pub fn fraction_below(&self, start: usize, limit: f64) -> f64 {
        let rows = &self.timeline[start.min(self.timeline.len())..];
        if rows.is_empty() {
            return 1.0;
        }
        let ok = rows
            .iter()
            .filter(|o| o.utilization.iter().all(|&u| u < limit))
            .count();
        ok as f64 / rows.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlledRunReport {
    pub interfaces: Vec<String>,
    /// ticks without a prediction at the start of the run
    pub warmup_ticks: usize,
    /// forecast horizon in ticks
    pub offset: usize,
    pub controlled: ControlledRun,
    pub baseline: ControlledRun,
    /// every link rate of every tick up to and including the first action is
    /// identical in both runs
    pub prefix_identical: bool,
}

impl ControlledRunReport {
    /// First tick at which an action can have shown up in utilization.
    pub fn settle_tick(&self) -> usize {
        self.warmup_ticks + self.offset
    }

    /// `1 - controlled / baseline` overload ticks; 0 when the baseline has none.
    pub fn overload_reduction(&self) -> f64 {
        let b = self.baseline.overload_ticks();
        if b == 0 {
            return 0.0;
        }
        1.0 - self.controlled.overload_ticks() as f64 / b as f64
    }
}

/// Everything a controlled run needs besides the model and policy.
#[derive(Debug, Clone)]
pub struct ControlSetup {
    pub topology: Arc<Topology>,
    pub profile: TrafficProfile,
    pub sim: SimConfig,
    pub telemetry: TelemetryConfig,
    /// topology interface indices
    pub interfaces: Vec<usize>,
}

/// Interfaces of router `DEFAULT_ROUTER`, or of the first router.
pub fn default_interfaces(topology: &Topology) -> Vec<usize> {
    let router = topology
        .node(DEFAULT_ROUTER)
        .or_else(|| topology.routers().next())
        .unwrap_or(0);
    topology.router_interfaces(router).collect()
}

/// Admission gate and diversion logic over the controlled interfaces.
pub struct Controller {
    policy: PolicyConfig,
    links: Vec<LinkIdx>,
    states: Vec<Hysteresis>,
    engaged_at: Vec<Option<usize>>,
    /// whether any host pair routed over the interface has an alternate
    has_alternate: Vec<bool>,
    summary: Vec<InterfaceSummary>,
}

impl Controller {
    pub fn new(topology: &Topology, interfaces: &[usize], policy: PolicyConfig) -> Self {
        let links: Vec<LinkIdx> = interfaces.iter().map(|&i| topology.interfaces[i].link).collect();
        let has_alternate = links
            .iter()
            .map(|&l| {
                topology.hosts.iter().any(|&s| {
                    topology.hosts.iter().any(|&d| {
                        s != d
                            && topology.path(s, d).is_some_and(|p| p.iter().any(|h| h.link == l))
                            && topology
                                .alternates(s, d)
                                .iter()
                                .any(|p| p.iter().all(|h| h.link != l))
                    })
                })
            })
            .collect();
        Controller {
            summary: interfaces
                .iter()
                .map(|&i| InterfaceSummary {
                    interface: topology.interfaces[i].id.clone(),
                    ..Default::default()
                })
                .collect(),
            states: vec![Hysteresis::default(); links.len()],
            engaged_at: vec![None; links.len()],
            links,
            has_alternate,
            policy,
        }
    }

    fn hot(&self, link: LinkIdx) -> bool {
        self.links
            .iter()
            .zip(&self.states)
            .any(|(&l, s)| l == link && s.engaged)
    }

    fn first_hot(&self, path: &Path) -> Option<usize> {
        self.links
            .iter()
            .zip(&self.states)
            .position(|(&l, s)| s.engaged && path.iter().any(|h| h.link == l))
    }

    fn hot_count(&self, path: &Path) -> usize {
        path.iter().filter(|h| self.hot(h.link)).count()
    }

    /// Alternate of `(src, dst)` crossing fewer engaged links than `current`;
    /// among those the fewest engaged links, then the lowest bottleneck
    /// utilization of the current allocation. Host access links are shared by
    /// every route of a pair, so they never disqualify a candidate. With
    /// `avoid` the candidate must not cross that link at all.
    fn best_alternate(
        &self,
        sim: &Simulator,
        src: usize,
        dst: usize,
        current: &Path,
        avoid: Option<LinkIdx>,
    ) -> Option<Path> {
        let limit = self.hot_count(current);
        let mut best: Option<((usize, f64), &Path)> = None;
        for p in sim.topology().alternates(src, dst) {
            let hot = self.hot_count(p);
            if hot >= limit || avoid.is_some_and(|l| p.iter().any(|h| h.link == l)) {
                continue;
            }
            let u = p
                .iter()
                .map(|h| sim.link(h.link).utilization(h.dir))
                .fold(0.0, f64::max);
            if best.is_none_or(|((bh, bu), _)| (hot, u) < (bh, bu)) {
                best = Some(((hot, u), p));
            }
        }
        best.map(|(_, p)| p.clone())
    }

    /// Moves the largest-rate divertible flow off each balance-engaged link
    /// that was engaged before this tick.
    fn divert(&mut self, sim: &mut Simulator, tick: usize, timestamp: i64, actions: &mut Vec<ActionRecord>) {
        for k in 0..self.links.len() {
            if !self.engaged_at[k].is_some_and(|t| t < tick) {
                continue;
            }
            let link = self.links[k];
            let mut flows: Vec<usize> = sim.link(link).flows.clone();
            flows.sort_by(|&a, &b| sim.flow(b).rate.total_cmp(&sim.flow(a).rate).then(a.cmp(&b)));
            let pick = flows.into_iter().find_map(|id| {
                let f = sim.flow(id);
                self.best_alternate(sim, f.spec.src, f.spec.dst, &f.path, Some(link))
                    .map(|p| (id, p))
            });
            if let Some((id, path)) = pick {
                sim.reroute(id, path);
                self.summary[k].diverted_flows += 1;
                actions.push(ActionRecord {
                    timestamp,
                    tick,
                    interface: self.summary[k].interface.clone(),
                    policy: PolicyKind::Balance,
                    action: "divert".into(),
                    prediction: f64::NAN,
                    flow: Some(id),
                });
            }
        }
    }

    /// Feeds one prediction per interface and records transitions.
    fn update(&mut self, preds: &[Option<f64>], tick: usize, timestamp: i64, actions: &mut Vec<ActionRecord>) {
        let Some(threshold) = self.policy.threshold() else {
            return;
        };
        let kind = self.policy.kind;
        for (k, p) in preds.iter().enumerate() {
            let Some(p) = *p else { continue };
            let t = self.states[k].update(p, threshold, self.policy.release_margin, self.policy.release_ticks);
            let mut record = |action: &str| {
                actions.push(ActionRecord {
                    timestamp,
                    tick,
                    interface: self.summary[k].interface.clone(),
                    policy: kind,
                    action: action.into(),
                    prediction: p,
                    flow: None,
                })
            };
            match (t, kind) {
                (Some(Transition::Engaged), PolicyKind::Block) => record("block_on"),
                (Some(Transition::Released), PolicyKind::Block) => record("block_off"),
                (Some(Transition::Engaged), PolicyKind::Balance) => {
                    record("balance_on");
                    if !self.has_alternate[k] {
                        log::warn!(
                            "{}: no alternate path, balance degrades to logging",
                            self.summary[k].interface
                        );
                        record("no_alternate");
                    }
                }
                (Some(Transition::Released), PolicyKind::Balance) => record("balance_off"),
                _ => {}
            }
            match t {
                Some(Transition::Engaged) => self.engaged_at[k] = Some(tick),
                Some(Transition::Released) => self.engaged_at[k] = None,
                None => {}
            }
            if self.states[k].engaged {
                self.summary[k].engaged_ticks += 1;
            }
        }
    }
}

impl FlowGate for Controller {
    fn admit(&mut self, spec: &FlowSpec, primary: &Path, sim: &Simulator) -> Admission {
        let Some(k) = self.first_hot(primary) else {
            return Admission::Admit(primary.clone());
        };
        match self.policy.kind {
            PolicyKind::None => Admission::Admit(primary.clone()),
            PolicyKind::Block => {
                self.summary[k].rejected_flows += 1;
                Admission::Reject
            }
            PolicyKind::Balance => match self.best_alternate(sim, spec.src, spec.dst, primary, None) {
                Some(p) => {
                    self.summary[k].steered_flows += 1;
                    Admission::Admit(p)
                }
                None => Admission::Admit(primary.clone()),
            },
        }
    }
}

/// Runs one simulation with the model predicting every controlled interface
/// each tick and `policy` acting on the predictions.
pub fn run_controlled(setup: &ControlSetup, model: &TrainedModel, policy: &PolicyConfig) -> Result<ControlledRun> {
    policy.validate()?;
    model.check_schema(schema_hash())?;
    let topo = &setup.topology;
    if setup.interfaces.is_empty() {
        return Err(Error::invalid("control", "no interfaces to control"));
    }
    if (setup.sim.interval - model.interval).abs() > 1e-9 {
        return Err(Error::invalid(
            "control",
            format!("sample interval {} s but the model was trained at {} s", setup.sim.interval, model.interval),
        ));
    }
    let mut sim = Simulator::new(Arc::clone(topo), setup.profile.clone(), setup.sim.clone())?;
    let mut sampler = TelemetrySampler::new(&sim, setup.interfaces.clone(), setup.telemetry.clone());
    let mut predictors: Vec<OnlinePredictor> = setup.interfaces.iter().map(|_| OnlinePredictor::new(model)).collect();
    let caps: Vec<f64> = setup
        .interfaces
        .iter()
        .map(|&i| topo.links[topo.interfaces[i].link].capacity)
        .collect();
    let mut ctl = Controller::new(topo, &setup.interfaces, policy.clone());
    let mut timeline = Vec::new();
    let mut actions = Vec::new();
    while let Some(tick) = sim.next_tick(&mut ctl) {
        let batch = sampler.sample(&sim);
        let timestamp = batch[0].timestamp;
        let mut utilization = Vec::with_capacity(batch.len());
        let mut prediction = Vec::with_capacity(batch.len());
        for (k, rec) in batch.iter().enumerate() {
            let s = live_sample(rec, caps[k]);
            utilization.push(s.max_bitrate);
            prediction.push(predictors[k].push(&s.inputs())?);
        }
        if policy.kind == PolicyKind::Balance {
            ctl.divert(&mut sim, tick.index, timestamp, &mut actions);
        }
        ctl.update(&prediction, tick.index, timestamp, &mut actions);
        timeline.push(TickObservation {
            tick: tick.index,
            timestamp,
            utilization,
            prediction,
        });
    }
    let mut summary = std::mem::take(&mut ctl.summary);
    for (k, s) in summary.iter_mut().enumerate() {
        let u: Vec<f64> = timeline.iter().map(|o| o.utilization[k]).collect();
        s.ticks = u.len();
        s.overload_ticks = u.iter().filter(|&&v| v > OVERLOAD).count();
        s.mean_utilization = u.iter().sum::<f64>() / u.len().max(1) as f64;
        s.max_utilization = u.iter().copied().fold(0.0, f64::max);
    }
    Ok(ControlledRun {
        policy: policy.clone(),
        timeline,
        actions,
        summary,
        log: sim.into_log(&mut ctl),
    })
}

/// Runs `policy` and a policy-`None` baseline on the same seed.
pub fn control_loop(setup: &ControlSetup, model: &TrainedModel, policy: &PolicyConfig) -> Result<ControlledRunReport> {
    let baseline = run_controlled(setup, model, &PolicyConfig { kind: PolicyKind::None, ..policy.clone() })?;
    let controlled = if policy.kind == PolicyKind::None {
        baseline.clone()
    } else {
        run_controlled(setup, model, policy)?
    };
    let upto = controlled.first_action_tick().unwrap_or(usize::MAX);
    let prefix_identical = controlled
        .log
        .ticks
        .iter()
        .zip(&baseline.log.ticks)
        .take(upto.saturating_add(1))
        .all(|(a, b)| a == b);
    Ok(ControlledRunReport {
        interfaces: controlled.summary.iter().map(|s| s.interface.clone()).collect(),
        warmup_ticks: model.window().saturating_sub(1),
        offset: model.offset,
        controlled,
        baseline,
        prefix_identical,
    })
}

pub fn write_actions_csv<W: Write>(out: W, actions: &[ActionRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["timestamp", "interface", "policy", "action", "prediction", "flow"])?;
    for a in actions {
        w.write_record([
            a.timestamp.to_string(),
            a.interface.clone(),
            a.policy.to_string(),
            a.action.clone(),
            if a.prediction.is_nan() { String::new() } else { a.prediction.to_string() },
            a.flow.map(|f| f.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<actions>", e))?;
    Ok(())
}

/// One row per interface and run.
pub fn write_report_csv<W: Write>(out: W, report: &ControlledRunReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "run",
        "policy",
        "interface",
        "ticks",
        "overload_ticks",
        "mean_utilization",
        "max_utilization",
        "engaged_ticks",
        "rejected_flows",
        "steered_flows",
        "diverted_flows",
    ])?;
    for (name, run) in [("controlled", &report.controlled), ("baseline", &report.baseline)] {
        for s in &run.summary {
            w.write_record([
                name.to_string(),
                run.policy.kind.to_string(),
                s.interface.clone(),
                s.ticks.to_string(),
                s.overload_ticks.to_string(),
                s.mean_utilization.to_string(),
                s.max_utilization.to_string(),
                s.engaged_ticks.to_string(),
                s.rejected_flows.to_string(),
                s.steered_flows.to_string(),
                s.diverted_flows.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<control report>", e))?;
    Ok(())
}

/// Per-tick utilization of both runs and the controlled run's predictions.
pub fn write_timeline_csv<W: Write>(out: W, report: &ControlledRunReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["timestamp", "interface", "utilization", "prediction", "baseline_utilization"])?;
    for (c, b) in report.controlled.timeline.iter().zip(&report.baseline.timeline) {
        for (k, iface) in report.interfaces.iter().enumerate() {
            w.write_record([
                c.timestamp.to_string(),
                iface.clone(),
                c.utilization[k].to_string(),
                c.prediction[k].map(|p| p.to_string()).unwrap_or_default(),
                b.utilization[k].to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<timeline>", e))?;
    Ok(())
}

/// Baseline comparison for standard output.
pub fn format_summary(report: &ControlledRunReport) -> String {
    let mut s = String::new();
    let c = &report.controlled;
    let b = &report.baseline;
    let _ = writeln!(
        s,
        "policy {} vs none: {} ticks, warm-up {} ticks, first action at tick {}",
        c.policy.kind,
        c.timeline.len(),
        report.warmup_ticks,
        c.first_action_tick().map(|t| t.to_string()).unwrap_or_else(|| "-".into())
    );
    let _ = writeln!(
        s,
        "  {:<10} {:>9} {:>9} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "interface", "overload", "baseline", "mean", "base", "rejected", "steered", "diverted"
    );
    for (x, y) in c.summary.iter().zip(&b.summary) {
        let _ = writeln!(
            s,
            "  {:<10} {:>9} {:>9} {:>8.3} {:>8.3} {:>8} {:>8} {:>8}",
            x.interface,
            x.overload_ticks,
            y.overload_ticks,
            x.mean_utilization,
            y.mean_utilization,
            x.rejected_flows,
            x.steered_flows,
            x.diverted_flows
        );
    }
    let _ = writeln!(
        s,
        "  overload ticks {} vs {} ({:+.1}%), below {OVERLOAD} after settling: {:.1}% vs {:.1}%, prefix identical: {}",
        c.overload_ticks(),
        b.overload_ticks(),
        -100.0 * report.overload_reduction(),
        100.0 * c.fraction_below(report.settle_tick(), OVERLOAD),
        100.0 * b.fraction_below(report.settle_tick(), OVERLOAD),
        report.prefix_identical
    );
    s
}
