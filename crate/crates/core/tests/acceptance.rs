//! End-to-end acceptance checks, one line per check.
//!
//! Every check runs and prints PASS or FAIL. The process exits nonzero only
//! if the harness itself breaks, or if `ACCEPTANCE_STRICT=1` and a check
//! fails. `ACCEPTANCE_QUICK=1` skips the checks that train models.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use bwpred::alloc::{allocate_rates, FlowDemand};
use bwpred::control::{control_loop, default_interfaces, ControlSetup, PolicyConfig, PolicyKind};
use bwpred::eval::{compute_metrics, cross_validate, MetricsReport};
use bwpred::features::{
    agg_columns, aggregate_flows, input_columns, Dataset, Scaler, AGG_WIDTH, INPUT_WIDTH, SYS_WIDTH,
};
use bwpred::forecast::arima::arima_fit;
use bwpred::forecast::{
    load_checkpoint, save_checkpoint, train_model, AdamConfig, AdamState, ArimaConfig, Lstm, Mlp,
    ModelKind, TrainConfig, TrainedModel,
};
use bwpred::pipeline::{resolve_interfaces, simulate_samples, SampledRun, EVAL_INTERFACES};
use bwpred::sim::{run_simulation, SimConfig};
use bwpred::telemetry::{FlowRecordView, TelemetryConfig, DEFAULT_EPOCH_BASE, SYSTEM_COLUMNS};
use bwpred::topology::{Dir, Hop, Topology};
use bwpred::traffic::{Protocol, TrafficProfile};
use bwpred::Error;

const SEEDS: [u64; 3] = [1, 2, 3];
const EVAL_HOURS: f64 = 4.25;
const CONTROL_SEED: u64 = 11;
const CONTROL_HOURS: f64 = 2.0;
const OFFSET: usize = 5;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

type Check<'a> = Box<dyn FnOnce() -> Outcome + 'a>;

fn run_check(results: &mut Results, id: usize, name: &str, f: Check<'_>) {
    let t = Instant::now();
    eprintln!("[{id:02}] {name} ...");
    let r = catch_unwind(AssertUnwindSafe(f)).map_err(|p| {
        p.downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into())
    });
    eprintln!("[{id:02}] done in {:.1}s", t.elapsed().as_secs_f64());
    results.insert(id, (name.to_string(), r));
}

fn eval_ids() -> Vec<String> {
    EVAL_INTERFACES.iter().map(|s| s.to_string()).collect()
}

fn simulate(seed: u64, hours: f64, raw_out: Option<&Path>) -> (Arc<Topology>, SampledRun) {
    let topo = Arc::new(Topology::default_mesh());
    let ifs = resolve_interfaces(&topo, &eval_ids()).unwrap();
    let run = simulate_samples(
        Arc::clone(&topo),
        TrafficProfile::congested(),
        SimConfig::new(seed, hours * 3600.0, 3.0),
        TelemetryConfig::default(),
        &ifs,
        raw_out,
    )
    .unwrap();
    (topo, run)
}

// ---------------------------------------------------------------- gradients

fn numeric_grad(f: &dyn Fn(&[f64]) -> f64, p: &[f64], h: f64) -> Vec<f64> {
    let mut q = p.to_vec();
    (0..p.len())
        .map(|i| {
            q[i] = p[i] + h;
            let up = f(&q);
            q[i] = p[i] - h;
            let down = f(&q);
            q[i] = p[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn rel_err(a: &[f64], n: &[f64]) -> f64 {
    a.iter()
        .zip(n)
        .map(|(a, n)| (a - n).abs() / (a.abs() + n.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

fn check_gradients() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let err = if k % 2 == 0 {
            let input = rng.random_range(2..=6);
            let depth = rng.random_range(1..=3);
            let mut sizes = vec![input];
            for _ in 0..depth {
                sizes.push(rng.random_range(2..=8));
            }
            sizes.push(1);
            let batch = rng.random_range(2..=8);
            let mut m = Mlp::init(&sizes, rng.random()).unwrap();
            // random biases too, so no ReLU sits exactly on its kink
            m.params.iter_mut().for_each(|p| *p = rng.random_range(-0.5..0.5));
            let x = Array2::from_shape_fn((batch, input), |_| rng.random_range(-1.0..1.0));
            let y: Vec<f64> = (0..batch).map(|_| rng.random_range(0.0..1.0)).collect();
            let (_, g) = m.loss_and_grad(x.view(), &y).unwrap();
            let loss = |p: &[f64]| {
                let mut c = m.clone();
                c.params.copy_from_slice(p);
                c.loss_and_grad(x.view(), &y).unwrap().0
            };
            rel_err(&g, &numeric_grad(&loss, &m.params, 1e-6))
        } else {
            let input = rng.random_range(1..=4);
            let hidden = rng.random_range(1..=5);
            let dense = rng.random_range(1..=5);
            let window = rng.random_range(1..=4);
            let batch = rng.random_range(1..=4);
            let mut m = Lstm::init(input, hidden, dense, window, rng.random()).unwrap();
            m.params.iter_mut().for_each(|p| *p = rng.random_range(-0.5..0.5));
            let x = Array3::from_shape_fn((batch, window, input), |_| rng.random_range(-1.0..1.0));
            let y: Vec<f64> = (0..batch).map(|_| rng.random_range(0.0..1.0)).collect();
            let (_, g) = m.loss_and_grad(x.view(), &y).unwrap();
            let loss = |p: &[f64]| {
                let mut c = m.clone();
                c.params.copy_from_slice(p);
                c.loss_and_grad(x.view(), &y).unwrap().0
            };
            rel_err(&g, &numeric_grad(&loss, &m.params, 1e-6))
        };
        eprintln!("  config {k}: {err:.2e}");
        worst = worst.max(err);
    }
    let secs = t.elapsed().as_secs_f64();
    Outcome::new(
        worst < 1e-4 && secs < 30.0,
        format!("20 configs, max relative error {worst:.2e}, {secs:.1}s"),
    )
}

// --------------------------------------------------------------------- adam

fn check_adam() -> Outcome {
    let cfg = AdamConfig {
        lr: 0.1,
        ..Default::default()
    };
    let mut state = AdamState::new(1, cfg);
    let mut p = [1.0];

    // hand trace of the bias-corrected update for loss p^2
    let (b1, b2, eps, lr) = (0.9f64, 0.999f64, 1e-8f64, 0.1f64);
    let (mut hp, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
    let mut worst: f64 = 0.0;
    let mut trace = Vec::new();
    for t in 1..=3 {
        let g = 2.0 * hp;
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        let mhat = m / (1.0 - b1.powi(t));
        let vhat = v / (1.0 - b2.powi(t));
        hp -= lr * mhat / (vhat.sqrt() + eps);

        let grad = [2.0 * p[0]];
        state.step(&mut p, &grad).unwrap();
        worst = worst.max((p[0] - hp).abs());
        trace.push(format!("{:.10}", p[0]));
    }
    Outcome::new(
        worst <= 1e-10,
        format!("params {} max deviation {worst:.1e}", trace.join(" ")),
    )
}

// -------------------------------------------------------------------- arima

fn gaussian(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn check_arima() -> Outcome {
    let e = gaussian(5000, 81);
    let mut ar = vec![0.0; 5000];
    for t in 1..ar.len() {
        ar[t] = 0.8 * ar[t - 1] + e[t];
    }
    let pinned = ArimaConfig {
        d_range: (0, 0),
        ..Default::default()
    };
    let m_ar = arima_fit(&[&ar], &pinned).unwrap();
    let phi = m_ar.phi.first().copied().unwrap_or(f64::NAN);
    let ar_ok = m_ar.d == 0 && (0.75..=0.85).contains(&phi);

    let mut walk = gaussian(3000, 82);
    for t in 1..walk.len() {
        walk[t] += walk[t - 1];
    }
    let m_walk = arima_fit(&[&walk], &ArimaConfig::default()).unwrap();

    let white: Vec<f64> = gaussian(3000, 83).iter().map(|v| 0.5 + 0.1 * v).collect();
    let m_white = arima_fit(&[&white], &ArimaConfig::default()).unwrap();

    Outcome::new(
        ar_ok && m_walk.d == 1 && m_white.p == 0 && m_white.q == 0 && m_white.d == 0,
        format!(
            "ar1 -> ({},{},{}) phi {phi:.4}; walk -> d={}; white -> ({},{},{})",
            m_ar.p, m_ar.d, m_ar.q, m_walk.d, m_white.p, m_white.d, m_white.q
        ),
    )
}

// ------------------------------------------------------------------ metrics

fn check_metrics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let pred: Vec<f64> = (0..1000).map(|_| rng.random_range(0.0..1.0)).collect();
    let actual: Vec<f64> = (0..1000).map(|_| rng.random_range(0.0..1.0)).collect();
    let m = compute_metrics(&pred, &actual).unwrap();

    let n = pred.len() as f64;
    let errs: Vec<f64> = pred.iter().zip(&actual).map(|(p, a)| p - a).collect();
    let bias = errs.iter().sum::<f64>() / n;
    let mae = errs.iter().map(|e| e.abs()).sum::<f64>() / n;
    let mse = errs.iter().map(|e| e.powi(2)).sum::<f64>() / n;
    let rmse = mse.sqrt();

    let dev = [
        (m.bias - bias).abs(),
        (m.mae - mae).abs(),
        (m.mse - mse).abs(),
        (m.rmse - rmse).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let exact = m.rmse == m.mse.sqrt();
    Outcome::new(
        dev <= 1e-12 && exact && m.mae <= m.rmse && m.mse >= m.bias * m.bias,
        format!(
            "max deviation {dev:.1e}, rmse==sqrt(mse) {exact}, mae {:.4} <= rmse {:.4}",
            m.mae, m.rmse
        ),
    )
}

// ----------------------------------------------------------------- datasets

fn check_datasets() -> Outcome {
    let (topo, run) = simulate(5, 1.0, None);
    let datasets = run.datasets(&topo, OFFSET).unwrap();
    let mut problems = Vec::new();
    let last = INPUT_WIDTH - 1;
    let epoch = DEFAULT_EPOCH_BASE as f64;
    let tick_at: BTreeMap<i64, usize> = run
        .log
        .ticks
        .iter()
        .enumerate()
        .map(|(k, t)| ((epoch + t.time).round() as i64, k))
        .collect();
    let mut worst_counter: f64 = 0.0;

    for (k, ds) in datasets.iter().enumerate() {
        let samples = &run.samples[k];
        if samples.len() - ds.len() != OFFSET {
            problems.push(format!("{}: dropped {}", ds.interface, samples.len() - ds.len()));
        }
        for t in 0..ds.len() {
            if ds.targets[t] != samples[t + OFFSET].max_bitrate {
                problems.push(format!("{} row {t}: label mismatch", ds.interface));
                break;
            }
            if t + OFFSET < ds.len() && ds.targets[t] != ds.inputs[[t + OFFSET, last]] {
                problems.push(format!("{} row {t}: future != max_bitrate[t+5]", ds.interface));
                break;
            }
        }
        let iface = &topo.interfaces[run.interfaces[k]];
        let cap = topo.links[iface.link].capacity;
        for s in samples {
            let tick = &run.log.ticks[tick_at[&s.timestamp]];
            let [ab, ba] = tick.interval_rate[iface.link];
            let expect = (ab.max(ba) / cap).min(1.0);
            worst_counter = worst_counter.max((s.max_bitrate - expect).abs());
        }
    }

    let train: Vec<&Dataset> = datasets[1..].iter().collect();
    let scaler = Scaler::fit(&train).unwrap();
    let mut bad_cols = 0;
    let normed: Vec<Dataset> = train.iter().map(|d| scaler.apply(d).unwrap()).collect();
    for c in 0..INPUT_WIDTH {
        let vals = normed.iter().flat_map(|d| d.inputs.column(c).to_vec());
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let constant = scaler.max[c] == scaler.min[c];
        let ok = if constant {
            lo == 0.0 && hi == 0.0
        } else {
            lo == 0.0 && hi == 1.0
        };
        if !ok {
            bad_cols += 1;
        }
    }
    if bad_cols > 0 {
        problems.push(format!("{bad_cols} normalized columns outside [0, 1]"));
    }
    if worst_counter > 1e-6 {
        problems.push(format!("max_bitrate off the counters by {worst_counter:.2e}"));
    }
    Outcome::new(
        problems.is_empty(),
        if problems.is_empty() {
            format!(
                "{} interfaces x {} rows, 5 dropped each, counters within {worst_counter:.1e}",
                datasets.len(),
                datasets[0].len()
            )
        } else {
            problems.join("; ")
        },
    )
}

// ----------------------------------------------------------------- features

fn random_flow(rng: &mut ChaCha8Rng) -> FlowRecordView {
    let mut v = serde_json::to_value(FlowRecordView::default()).unwrap();
    for (name, slot) in v.as_object_mut().unwrap().iter_mut() {
        *slot = match name.as_str() {
            "src_ip" | "dst_ip" => serde_json::json!("10.0.0.1"),
            "src_port" | "dst_port" => serde_json::json!(rng.random_range(1..65535u16)),
            "protocol" => serde_json::json!(if rng.random_bool(0.5) { 6 } else { 17 }),
            _ => serde_json::json!(rng.random_range(0.0..1e6f64)),
        };
    }
    serde_json::from_value(v).unwrap()
}

fn brute_aggregate(flows: &[FlowRecordView]) -> Vec<f64> {
    let maps: Vec<serde_json::Map<String, serde_json::Value>> = flows
        .iter()
        .map(|f| serde_json::to_value(f).unwrap().as_object().unwrap().clone())
        .collect();
    agg_columns()
        .iter()
        .map(|col| {
            if col == "tcp_flow_count" || col == "udp_flow_count" {
                let want = if col.starts_with("tcp") { 6 } else { 17 };
                return maps.iter().filter(|m| m["protocol"].as_u64() == Some(want)).count() as f64;
            }
            let (func, field) = col.split_once('_').unwrap();
            let vals: Vec<f64> = maps.iter().map(|m| m[field].as_f64().unwrap()).collect();
            if vals.is_empty() {
                return 0.0;
            }
            match func {
                "min" => vals.iter().cloned().fold(f64::INFINITY, f64::min),
                "max" => vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                "sum" => vals.iter().sum(),
                "mean" => vals.iter().sum::<f64>() / vals.len() as f64,
                other => panic!("unknown aggregate {other}"),
            }
        })
        .collect()
}

fn check_features() -> Outcome {
    let widths = (agg_columns().len(), SYSTEM_COLUMNS.len(), input_columns().len());
    let widths_ok = widths == (86, 29, 116) && (AGG_WIDTH, SYS_WIDTH, INPUT_WIDTH) == (86, 29, 116);
    let empty_ok = aggregate_flows(&[]).iter().all(|&v| v == 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(0..=12);
        let flows: Vec<FlowRecordView> = (0..n).map(|_| random_flow(&mut rng)).collect();
        let got = aggregate_flows(&flows);
        for (g, w) in got.iter().zip(brute_aggregate(&flows)) {
            worst = worst.max((g - w).abs() / w.abs().max(1.0));
        }
    }
    Outcome::new(
        widths_ok && empty_ok && worst <= 1e-12,
        format!("widths {widths:?}, empty all zero {empty_ok}, 100 random sets max deviation {worst:.1e}"),
    )
}

// ---------------------------------------------------------------- simulator

/// Max-min fairness by its defining conditions: UDP scaled by the tightest
/// overloaded link, TCP feasible on the remainder, and every TCP flow below
/// its target crosses a saturated link on which no other TCP flow is faster.
fn fairness_violation(capacity: &[f64], flows: &[FlowDemand<'_>], rates: &[f64]) -> f64 {
    let tol = 1e-9;
    let mut udp_load = vec![0.0; capacity.len()];
    for f in flows.iter().filter(|f| f.protocol == Protocol::Udp) {
        for h in f.path {
            udp_load[h.slot()] += f.target;
        }
    }
    let mut worst: f64 = 0.0;
    let mut used = vec![0.0; capacity.len()];
    for (f, &r) in flows.iter().zip(rates) {
        if f.protocol == Protocol::Udp {
            let factor = f
                .path
                .iter()
                .map(|h| (capacity[h.slot()] / udp_load[h.slot()]).min(1.0))
                .fold(1.0, f64::min);
            worst = worst.max((r - f.target * factor).abs());
        }
        for h in f.path {
            used[h.slot()] += r;
        }
        worst = worst.max(r - f.target).max(-r);
    }
    for (u, c) in used.iter().zip(capacity) {
        worst = worst.max(u - c);
    }
    for (i, f) in flows.iter().enumerate() {
        if f.protocol != Protocol::Tcp || rates[i] >= f.target - tol {
            continue;
        }
        let bottlenecked = f.path.iter().any(|h| {
            let s = h.slot();
            let saturated = used[s] >= capacity[s] - tol;
            let fastest = flows.iter().enumerate().all(|(j, g)| {
                g.protocol != Protocol::Tcp || !g.path.iter().any(|x| x.slot() == s) || rates[j] <= rates[i] + tol
            });
            saturated && fastest
        });
        if !bottlenecked {
            worst = worst.max(1.0);
        }
    }
    worst
}

/// Multisets of size `k` drawn from `0..n`, as non-decreasing index lists.
fn multisets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in multisets(n, k - 1) {
        let lo = rest.last().copied().unwrap_or(0);
        for i in lo..n {
            let mut v = rest.clone();
            v.push(i);
            out.push(v);
        }
    }
    out
}

/// Textbook water-filling: UDP takes its scaled share, then all unfrozen TCP
/// flows grow together by the largest step no link or target forbids.
fn water_fill_oracle(capacity: &[f64], flows: &[FlowDemand<'_>]) -> Vec<f64> {
    let mut rates = vec![0.0; flows.len()];
    let mut left = capacity.to_vec();
    let mut udp_load = vec![0.0; capacity.len()];
    for f in flows.iter().filter(|f| f.protocol == Protocol::Udp) {
        for h in f.path {
            udp_load[h.slot()] += f.target;
        }
    }
    for (i, f) in flows.iter().enumerate() {
        if f.protocol == Protocol::Udp {
            let mut factor: f64 = 1.0;
            for h in f.path {
                factor = factor.min((capacity[h.slot()] / udp_load[h.slot()]).min(1.0));
            }
            rates[i] = f.target * factor;
            for h in f.path {
                left[h.slot()] -= rates[i];
            }
        }
    }
    let mut active: Vec<usize> = (0..flows.len()).filter(|&i| flows[i].protocol == Protocol::Tcp).collect();
    while !active.is_empty() {
        let mut step = f64::INFINITY;
        for &i in &active {
            step = step.min(flows[i].target - rates[i]);
        }
        for s in 0..capacity.len() {
            let users = active.iter().filter(|&&i| flows[i].path.iter().any(|h| h.slot() == s)).count();
            if users > 0 {
                step = step.min(left[s].max(0.0) / users as f64);
            }
        }
        for &i in &active {
            rates[i] += step;
            for h in flows[i].path {
                left[h.slot()] -= step;
            }
        }
        active.retain(|&i| {
            rates[i] < flows[i].target - 1e-12 && flows[i].path.iter().all(|h| left[h.slot()] > 1e-12)
        });
    }
    rates
}

fn check_simulator() -> Outcome {
    let mut problems = Vec::new();

    // every multiset of up to six single-direction paths over three links
    let capacity = [5.0, 5.0, 7.0, 7.0, 10.0, 10.0];
    let subsets: Vec<Vec<Hop>> = (1u8..8)
        .map(|m| {
            (0..3)
                .filter(|l| m & (1 << l) != 0)
                .map(|link| Hop { link, dir: Dir::AtoB })
                .collect()
        })
        .collect();
    let targets = [1.0, 3.0, 8.0, 2.5, 6.0, 4.0];
    let mut cases = 0;
    let mut worst: f64 = 0.0;
    for n in 1..=6 {
        for combo in multisets(subsets.len(), n) {
            for udp_last in [false, true] {
                let flows: Vec<FlowDemand<'_>> = combo
                    .iter()
                    .enumerate()
                    .map(|(k, &c)| FlowDemand {
                        protocol: if udp_last && k == n - 1 { Protocol::Udp } else { Protocol::Tcp },
                        target: targets[k],
                        path: &subsets[c],
                    })
                    .collect();
                let rates = allocate_rates(&capacity, &flows);
                let oracle = water_fill_oracle(&capacity, &flows);
                let diff = rates.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                worst = worst.max(diff).max(fairness_violation(&capacity, &flows, &rates));
                cases += 1;
            }
        }
    }
    if worst > 1e-9 {
        problems.push(format!("allocation differs from the oracle by {worst:.2e}"));
    }

    // link loads recomputed from live flow rates
    let topo = Arc::new(Topology::default_mesh());
    let mut live_excess = f64::NEG_INFINITY;
    let log = run_simulation(
        Arc::clone(&topo),
        TrafficProfile::congested(),
        SimConfig::new(21, 2.0 * 3600.0, 3.0),
        |sim, _| {
            let mut load = vec![0.0; 2 * topo.links.len()];
            for &id in sim.active_flows() {
                let f = sim.flow(id);
                for h in &f.path {
                    load[h.slot()] += f.rate;
                }
            }
            for (s, l) in load.iter().enumerate() {
                let cap = topo.links[s / 2].capacity;
                live_excess = live_excess.max((l - cap) / cap);
            }
        },
    )
    .unwrap();
    if log.max_capacity_excess > 1e-9 || live_excess > 1e-9 {
        problems.push(format!(
            "capacity excess {:.2e} (live {:.2e})",
            log.max_capacity_excess, live_excess
        ));
    }

    // identical telemetry trees from identical runs
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    simulate(33, 0.25, Some(a.path()));
    simulate(33, 0.25, Some(b.path()));
    let (files, diffs) = compare_trees(a.path(), b.path());
    if diffs > 0 || files == 0 {
        problems.push(format!("{diffs} of {files} telemetry files differ"));
    }
    Outcome::new(
        problems.is_empty(),
        if problems.is_empty() {
            format!(
                "{cases} allocations match the oracle, capacity excess {:.1e}, {files} telemetry files identical",
                log.max_capacity_excess.max(live_excess)
            )
        } else {
            problems.join("; ")
        },
    )
}

fn compare_trees(a: &Path, b: &Path) -> (usize, usize) {
    let mut files = 0;
    let mut diffs = 0;
    for entry in fs::read_dir(a).unwrap() {
        let entry = entry.unwrap();
        let other = b.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            let (f, d) = compare_trees(&entry.path(), &other);
            files += f;
            diffs += d;
        } else {
            files += 1;
            if fs::read(entry.path()).unwrap() != fs::read(&other).unwrap_or_default() {
                diffs += 1;
            }
        }
    }
    (files, diffs)
}

// ------------------------------------------------------------- checkpoints

fn check_checkpoints(models: &[&TrainedModel]) -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for m in models {
        let first = save_checkpoint(m).unwrap();
        let again = save_checkpoint(&load_checkpoint(&first).unwrap()).unwrap();
        let same = first == again;
        ok &= same;

        let hash = m.schema_hash.as_bytes();
        let at = first
            .windows(hash.len())
            .position(|w| w == hash)
            .expect("hash stored in header");
        let mut tampered = first.clone();
        tampered[at] = if tampered[at] == b'0' { b'1' } else { b'0' };
        let refused = matches!(load_checkpoint(&tampered), Err(Error::SchemaMismatch { .. }));
        ok &= refused;
        parts.push(format!(
            "{} {} bytes identical {same}, tampered refused {refused}",
            m.kind(),
            first.len()
        ));
    }
    Outcome::new(ok, parts.join("; "))
}

// ------------------------------------------------------------- forecasting

struct SeedResult {
    seed: u64,
    reports: Vec<MetricsReport>,
}

fn evaluate_seed(seed: u64) -> (SeedResult, Vec<Dataset>) {
    let t = Instant::now();
    let (topo, run) = simulate(seed, EVAL_HOURS, None);
    let datasets = run.datasets(&topo, OFFSET).unwrap();
    eprintln!("  seed {seed}: simulated {} rows/interface in {:.0}s", datasets[0].len(), t.elapsed().as_secs_f64());
    let cfg = TrainConfig {
        seed,
        ..TrainConfig::desk()
    };
    let reports = ModelKind::ALL
        .iter()
        .map(|&kind| {
            let t = Instant::now();
            let r = cross_validate(kind, &datasets, &cfg, &ArimaConfig::default()).unwrap();
            eprintln!("  seed {seed}: {kind} mae {:.4} in {:.0}s", r.average.mae, t.elapsed().as_secs_f64());
            r
        })
        .collect();
    (SeedResult { seed, reports }, datasets)
}

fn mae(r: &SeedResult, kind: ModelKind) -> f64 {
    r.reports.iter().find(|x| x.model == kind).unwrap().average.mae
}

fn check_ranking(results: &[SeedResult]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for r in results {
        let (a, m, l) = (mae(r, ModelKind::Arima), mae(r, ModelKind::Mlp), mae(r, ModelKind::Lstm));
        let order = l < m && m < a;
        ok &= order && l <= 0.03 && m <= 0.10;
        parts.push(format!("seed {}: lstm {l:.4} mlp {m:.4} arima {a:.4}", r.seed));
    }
    Outcome::new(ok, parts.join("; "))
}

fn check_lstm_folds(results: &[SeedResult]) -> Outcome {
    let mut failing = Vec::new();
    let (mut worst_p95, mut worst_med): (f64, f64) = (0.0, 0.0);
    let mut folds = 0;
    for r in results {
        let lstm = r.reports.iter().find(|x| x.model == ModelKind::Lstm).unwrap();
        for f in &lstm.folds {
            folds += 1;
            worst_p95 = worst_p95.max(f.abs_err_p95);
            worst_med = worst_med.max(f.abs_err_median);
            if f.abs_err_p95 > 0.05 || f.abs_err_median > 0.02 {
                failing.push(format!(
                    "s{} {} p95 {:.3} med {:.3}",
                    r.seed, f.interface, f.abs_err_p95, f.abs_err_median
                ));
            }
        }
    }
    let head = format!("{folds} folds, worst p95 {worst_p95:.4}, worst median {worst_med:.4}");
    if failing.is_empty() {
        Outcome::new(true, head)
    } else {
        Outcome::new(false, format!("{head}; over: {}", failing.join(", ")))
    }
}

fn check_control(model: &TrainedModel) -> Outcome {
    let topo = Arc::new(Topology::default_mesh());
    let setup = ControlSetup {
        interfaces: default_interfaces(&topo),
        topology: topo,
        profile: TrafficProfile::congested(),
        sim: SimConfig::new(CONTROL_SEED, CONTROL_HOURS * 3600.0, 3.0),
        telemetry: TelemetryConfig::default(),
    };
    let balance = control_loop(&setup, model, &PolicyConfig::new(PolicyKind::Balance)).unwrap();
    let block = control_loop(&setup, model, &PolicyConfig::new(PolicyKind::Block)).unwrap();
    let reduction = balance.overload_reduction();
    let below = block.controlled.fraction_below(block.settle_tick(), 0.95);
    let prefix = balance.prefix_identical && block.prefix_identical;
    Outcome::new(
        reduction >= 0.5 && below >= 0.9 && prefix,
        format!(
            "balance overload ticks {} -> {} ({:.0}% fewer); block below 0.95 after settling {:.1}%; prefixes identical {prefix}",
            balance.baseline.overload_ticks(),
            balance.controlled.overload_ticks(),
            100.0 * reduction,
            100.0 * below
        ),
    )
}

type Results = BTreeMap<usize, (String, Result<Outcome, String>)>;

/// Simulates, cross-validates and trains; runs the checks that need models.
/// Returns false if the evaluation runs themselves failed.
fn run_model_checks(results: &mut Results) -> bool {
    let mut seeds = Vec::new();
    let mut train_sets = None;
    let evaluation = catch_unwind(AssertUnwindSafe(|| {
        for &s in &SEEDS {
            let (r, ds) = evaluate_seed(s);
            seeds.push(r);
            if train_sets.is_none() {
                train_sets = Some(ds);
            }
        }
    }));
    if evaluation.is_ok() {
        run_check(results, 1, "forecaster ranking", Box::new(|| check_ranking(&seeds)));
        run_check(results, 2, "lstm per-fold error", Box::new(|| check_lstm_folds(&seeds)));
    } else {
        for (id, name) in [(1, "forecaster ranking"), (2, "lstm per-fold error")] {
            results.insert(id, (name.to_string(), Err("evaluation run failed".into())));
        }
    }

    let models = train_sets.map(|ds| {
        let refs: Vec<&Dataset> = ds.iter().collect();
        let cfg = TrainConfig {
            seed: SEEDS[0],
            ..TrainConfig::desk()
        };
        let t = Instant::now();
        let lstm = train_model(ModelKind::Lstm, &refs, &cfg, &ArimaConfig::default()).unwrap();
        let mlp = train_model(ModelKind::Mlp, &refs, &cfg, &ArimaConfig::default()).unwrap();
        let arima = train_model(ModelKind::Arima, &refs, &cfg, &ArimaConfig::default()).unwrap();
        eprintln!("  trained control models in {:.0}s", t.elapsed().as_secs_f64());
        (lstm, mlp, arima)
    });
    match &models {
        Some((lstm, mlp, arima)) => {
            run_check(results, 10, "predictive control", Box::new(|| check_control(lstm)));
            run_check(
                results,
                11,
                "checkpoint round trip",
                Box::new(|| check_checkpoints(&[lstm, mlp, arima])),
            );
        }
        None => {
            for (id, name) in [(10, "predictive control"), (11, "checkpoint round trip")] {
                results.insert(id, (name.to_string(), Err("no training data".into())));
            }
        }
    }

    evaluation.is_ok()
}

fn main() {
    let t0 = Instant::now();
    let mut results = Results::new();

    run_check(&mut results, 3, "gradient checks", Box::new(check_gradients));
    run_check(&mut results, 4, "adam hand trace", Box::new(check_adam));
    run_check(&mut results, 5, "arima order selection", Box::new(check_arima));
    run_check(&mut results, 6, "metrics oracle", Box::new(check_metrics));
    run_check(&mut results, 7, "dataset labels and scaling", Box::new(check_datasets));
    run_check(&mut results, 8, "feature aggregates", Box::new(check_features));
    run_check(&mut results, 9, "simulator invariants", Box::new(check_simulator));

    let quick = std::env::var("ACCEPTANCE_QUICK").is_ok_and(|v| v == "1");
    let evaluated = quick || run_model_checks(&mut results);

    let mut passed = 0;
    let mut broken = 0;
    println!();
    for (id, (name, r)) in &results {
        match r {
            Ok(o) => {
                if o.pass {
                    passed += 1;
                }
                println!("{} [{id:02}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
            }
            Err(msg) => {
                broken += 1;
                println!("FAIL [{id:02}] {name}: harness error: {msg}");
            }
        }
    }
    println!(
        "acceptance: {passed}/{} passed in {:.0}s",
        results.len(),
        t0.elapsed().as_secs_f64()
    );

    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if broken > 0 || !evaluated || (strict && passed < results.len()) {
        std::process::exit(1);
    }
}
