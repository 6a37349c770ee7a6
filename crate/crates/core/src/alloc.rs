//! Fluid rate allocation.
//!
//! UDP is served first: on every link direction whose UDP demand exceeds the
//! capacity, UDP flows are scaled by `capacity / demand`, and a flow's rate is
//! its target scaled by the tightest such factor along its path. TCP then
//! shares what is left, max-min fairly, each flow capped at its target.

use crate::topology::Hop;
use crate::traffic::Protocol;

/// One path-routed demand.
#[derive(Debug, Clone, Copy)]
pub struct FlowDemand<'a> {
    pub protocol: Protocol,
    pub target: f64,
    pub path: &'a [Hop],
}

/// Computes one rate per flow. `capacity[slot]` is the capacity of each link
/// direction, indexed by [`Hop::slot`].
pub fn allocate_rates(capacity: &[f64], flows: &[FlowDemand<'_>]) -> Vec<f64> {
    let slots = capacity.len();
    let mut rates = vec![0.0; flows.len()];

    let mut udp_demand = vec![0.0; slots];
    for f in flows.iter().filter(|f| f.protocol == Protocol::Udp) {
        for h in f.path {
            udp_demand[h.slot()] += f.target;
        }
    }
    let scale: Vec<f64> = udp_demand
        .iter()
        .zip(capacity)
        .map(|(&d, &c)| if d > c { c / d } else { 1.0 })
        .collect();

    let mut residual = capacity.to_vec();
    for (i, f) in flows.iter().enumerate() {
        if f.protocol != Protocol::Udp {
            continue;
        }
        let s = f.path.iter().map(|h| scale[h.slot()]).fold(1.0, f64::min);
        rates[i] = f.target * s;
        for h in f.path {
            residual[h.slot()] -= rates[i];
        }
    }
    for r in residual.iter_mut() {
        *r = r.max(0.0);
    }

    let tcp: Vec<usize> = (0..flows.len())
        .filter(|&i| flows[i].protocol == Protocol::Tcp)
        .collect();
    water_fill(&residual, flows, &tcp, &mut rates);
    rates
}

/// Progressive filling: every unfrozen flow sits at a common `level`. The
/// level rises until either a link direction runs out of room (freezing all of
/// its unfrozen flows) or flows reach their target (freezing those).
fn water_fill(room: &[f64], flows: &[FlowDemand<'_>], members: &[usize], rates: &mut [f64]) {
    if members.is_empty() {
        return;
    }
    let slots = room.len();
    let mut frozen_sum = vec![0.0; slots];
    let mut unfrozen = vec![0usize; slots];
    let mut on_slot: Vec<Vec<usize>> = vec![Vec::new(); slots];
    for &i in members {
        for h in flows[i].path {
            unfrozen[h.slot()] += 1;
            on_slot[h.slot()].push(i);
        }
    }
    let mut by_target = members.to_vec();
    by_target.sort_by(|&a, &b| flows[a].target.total_cmp(&flows[b].target).then(a.cmp(&b)));
    let mut next_target = 0;
    let mut frozen = vec![false; flows.len()];
    let mut remaining = members.len();
    let mut level = 0.0f64;

    let freeze = |i: usize,
                  rate: f64,
                  frozen: &mut [bool],
                  frozen_sum: &mut [f64],
                  unfrozen: &mut [usize],
                  rates: &mut [f64]| {
        frozen[i] = true;
        rates[i] = rate;
        for h in flows[i].path {
            frozen_sum[h.slot()] += rate;
            unfrozen[h.slot()] -= 1;
        }
    };

    while remaining > 0 {
        while next_target < by_target.len() && frozen[by_target[next_target]] {
            next_target += 1;
        }
        let target_level = by_target
            .get(next_target)
            .map(|&i| flows[i].target)
            .unwrap_or(f64::INFINITY);

        let mut link_level = f64::INFINITY;
        let mut bottleneck = usize::MAX;
        for s in 0..slots {
            if unfrozen[s] == 0 {
                continue;
            }
            let l = ((room[s] - frozen_sum[s]) / unfrozen[s] as f64).max(level);
            if l < link_level {
                link_level = l;
                bottleneck = s;
            }
        }

        if target_level <= link_level {
            level = target_level;
            while next_target < by_target.len() {
                let i = by_target[next_target];
                if !frozen[i] {
                    if flows[i].target > level {
                        break;
                    }
                    freeze(i, flows[i].target, &mut frozen, &mut frozen_sum, &mut unfrozen, rates);
                    remaining -= 1;
                }
                next_target += 1;
            }
        } else {
            level = link_level;
            for k in 0..on_slot[bottleneck].len() {
                let i = on_slot[bottleneck][k];
                if !frozen[i] {
                    freeze(i, level, &mut frozen, &mut frozen_sum, &mut unfrozen, rates);
                    remaining -= 1;
                }
            }
        }
    }
}
