use std::sync::{Arc, OnceLock};

use bwpred::control::{
    control_loop, default_interfaces, run_controlled, ControlSetup, PolicyConfig, PolicyKind,
};
use bwpred::features::Dataset;
use bwpred::forecast::{train_model, ArimaConfig, ModelKind, TrainConfig, TrainedModel};
use bwpred::pipeline::{resolve_interfaces, simulate_samples, EVAL_INTERFACES};
use bwpred::sim::{run_simulation, SimConfig};
use bwpred::telemetry::TelemetryConfig;
use bwpred::topology::Topology;
use bwpred::traffic::TrafficProfile;

/// One hour of congested traffic plus one hour of the sparse profile, so
/// the models have seen idle links.
fn training_sets() -> &'static [Dataset] {
    static SETS: OnceLock<Vec<Dataset>> = OnceLock::new();
    SETS.get_or_init(|| {
        let topo = Arc::new(Topology::default_mesh());
        let ids: Vec<String> = EVAL_INTERFACES.iter().map(|s| s.to_string()).collect();
        let ifs = resolve_interfaces(&topo, &ids).unwrap();
        let mut sets = Vec::new();
        for (seed, profile) in [(4, TrafficProfile::congested()), (5, TrafficProfile::sparse())] {
            let run = simulate_samples(
                Arc::clone(&topo),
                profile,
                SimConfig::new(seed, 3600.0, 3.0),
                TelemetryConfig::default(),
                &ifs,
                None,
            )
            .unwrap();
            sets.extend(run.datasets(&topo, 5).unwrap());
        }
        sets
    })
}

fn model(kind: ModelKind, epochs: usize) -> TrainedModel {
    let refs: Vec<&Dataset> = training_sets().iter().collect();
    let cfg = TrainConfig {
        epochs,
        lstm_hidden: 8,
        lstm_dense: 16,
        ..TrainConfig::default()
    };
    train_model(kind, &refs, &cfg, &ArimaConfig::default()).unwrap()
}

fn mlp() -> &'static TrainedModel {
    static M: OnceLock<TrainedModel> = OnceLock::new();
    M.get_or_init(|| model(ModelKind::Mlp, 10))
}

fn setup(seed: u64, hours: f64) -> ControlSetup {
    let topo = Arc::new(Topology::default_mesh());
    ControlSetup {
        interfaces: default_interfaces(&topo),
        topology: topo,
        profile: TrafficProfile::congested(),
        sim: SimConfig::new(seed, hours * 3600.0, 3.0),
        telemetry: TelemetryConfig::default(),
    }
}

#[test]
fn policy_none_matches_an_uncontrolled_run() {
    let s = setup(12, 0.5);
    let run = run_controlled(&s, mlp(), &PolicyConfig::new(PolicyKind::None)).unwrap();
    let plain = run_simulation(Arc::clone(&s.topology), s.profile.clone(), s.sim.clone(), |_, _| {}).unwrap();
    assert!(run.actions.is_empty());
    assert_eq!(run.log.ticks, plain.ticks);
    assert_eq!(run.log.flows, plain.flows);
}

#[test]
fn block_at_full_utilization_never_acts() {
    let s = setup(13, 0.5);
    let policy = PolicyConfig {
        block_threshold: 1.0,
        ..PolicyConfig::new(PolicyKind::Block)
    };
    let r = control_loop(&s, mlp(), &policy).unwrap();
    assert!(r.controlled.actions.is_empty());
    assert_eq!(r.controlled.log.ticks, r.baseline.log.ticks);
    assert!(r.prefix_identical);
}

#[test]
fn lstm_warms_up_for_one_window() {
    let m = model(ModelKind::Lstm, 1);
    let s = setup(14, 0.1);
    let run = run_controlled(&s, &m, &PolicyConfig::new(PolicyKind::None)).unwrap();
    let w = m.window();
    for obs in &run.timeline {
        let ready = obs.prediction.iter().all(|p| p.is_some());
        let none = obs.prediction.iter().all(|p| p.is_none());
        if obs.tick < run.timeline[0].tick + w - 1 {
            assert!(none, "tick {}", obs.tick);
        } else {
            assert!(ready, "tick {}", obs.tick);
        }
    }
}

#[test]
fn idle_network_predicts_low_utilization() {
    let mut s = setup(15, 0.2);
    s.sim.traffic_enabled = false;
    let run = run_controlled(&s, mlp(), &PolicyConfig::new(PolicyKind::Balance)).unwrap();
    assert!(run.actions.is_empty());
    for obs in &run.timeline {
        assert!(obs.utilization.iter().all(|&u| u == 0.0));
        assert!(obs.prediction.iter().flatten().all(|&p| p < 0.05), "{:?}", obs.prediction);
    }
}

#[test]
fn controlled_runs_share_the_prefix_before_the_first_action() {
    let s = setup(16, 1.0);
    for kind in [PolicyKind::Block, PolicyKind::Balance] {
        let r = control_loop(&s, mlp(), &PolicyConfig::new(kind)).unwrap();
        assert!(r.prefix_identical, "{kind}");
        if let Some(t) = r.controlled.first_action_tick() {
            let n = r.controlled.timeline.iter().position(|o| o.tick == t).unwrap();
            assert_eq!(r.controlled.timeline[..=n], r.baseline.timeline[..=n], "{kind}");
        }
    }
}

#[test]
fn run_rejects_a_mismatched_interval() {
    let mut s = setup(17, 0.1);
    s.sim.interval = 5.0;
    assert!(run_controlled(&s, mlp(), &PolicyConfig::new(PolicyKind::Block)).is_err());
}
