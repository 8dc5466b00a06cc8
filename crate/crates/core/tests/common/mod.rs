//! Scenario builders shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use metanet_core::network::{
    FreewayLink, FreewayParams, NetworkSpec, NodeSpec, QueueKind, QueueLinkSpec, Schedule, StationSpec,
};
use metanet_core::DemandProfile;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn freeway(id: &str, sections: u32, length: f64, lanes: u32, destinations: &[&str]) -> FreewayLink {
    FreewayLink {
        id: id.into(),
        sections,
        section_length: length,
        lanes,
        params: FreewayParams::default(),
        destinations: destinations.iter().map(|d| d.to_string()).collect(),
        initial: None,
    }
}

pub fn node(id: &str, from: &[&str], to: &[&str]) -> NodeSpec {
    NodeSpec {
        id: id.into(),
        in_links: from.iter().map(|s| s.to_string()).collect(),
        out_links: to.iter().map(|s| s.to_string()).collect(),
        splits: BTreeMap::new(),
        split_changes: Vec::new(),
    }
}

pub fn constant_demand(flow: f64) -> DemandProfile {
    DemandProfile { base: flow, peak: flow, center_step: 0, ramp_flow: 1.0, ramp_steps: 1.0, scale: 1.0 }
}

pub fn origin(
    id: &str,
    max_flow: f64,
    demand: DemandProfile,
    destinations: &[&str],
    composition: Vec<f64>,
) -> QueueLinkSpec {
    QueueLinkSpec {
        id: id.into(),
        kind: QueueKind::Origin,
        max_flow,
        destinations: destinations.iter().map(|d| d.to_string()).collect(),
        metering: Schedule::default(),
        demand: Some(demand),
        demand_composition: Some(composition),
        initial_queue: None,
        max_queue: None,
    }
}

/// One freeway link of `sections` sections fed by an origin with constant
/// demand.
pub fn single_link(sections: u32, inflow: f64, step: f64, horizon: u64) -> NetworkSpec {
    NetworkSpec {
        name: "single link".into(),
        step,
        horizon,
        destinations: vec!["m".into()],
        freeway: vec![freeway("m", sections, 0.3, 3, &["m"])],
        queue: vec![origin("o", (2.0 * inflow).max(1000.0), constant_demand(inflow), &["m"], vec![1.0])],
        node: vec![node("n0", &["o"], &["m"])],
        station: Vec::new(),
    }
}

/// Random valid network: a mainline of freeway links fed by an origin, with
/// optionally a store-and-forward link in the mainline and a service-station
/// detour. Demands stay below the origin capacity, which stays below the
/// mainline capacity.
pub fn random_scenario(rng: &mut ChaCha8Rng, horizon: u64) -> NetworkSpec {
    let n_main = rng.gen_range(2..=7usize);
    let with_station = rng.gen_bool(0.7) && n_main >= 3;
    let with_saf = rng.gen_bool(0.5);
    let lanes = rng.gen_range(1..=4u32);
    let params = FreewayParams {
        free_flow_speed: rng.gen_range(80.0..120.0),
        critical_density: rng.gen_range(18.0..30.0),
        ..FreewayParams::default()
    };
    let params = FreewayParams { jam_density: params.critical_density * rng.gen_range(1.4..3.0), ..params };
    let min_length = 0.3;
    let step = 0.8 * min_length
        / (params.free_flow_speed * 1.3)
            .max(params.free_flow_speed * params.critical_density / (params.jam_density - params.critical_density));
    let capacity = params.capacity_per_lane() * f64::from(lanes);

    let exit = format!("m{n_main}");
    let mut destinations = vec![exit.clone()];
    if with_station {
        destinations.push("st".into());
    }
    let dest_refs: Vec<&str> = destinations.iter().map(String::as_str).collect();
    let exit_only = [exit.as_str()];

    let (div, merge) = if with_station {
        let div = rng.gen_range(1..n_main - 1);
        (div, rng.gen_range(div + 1..n_main))
    } else {
        (0, 0)
    };
    let mut freeway_links = Vec::new();
    for i in 1..=n_main {
        let dests: &[&str] = if with_station && i <= div { &dest_refs } else { &exit_only };
        let mut f = freeway(&format!("m{i}"), rng.gen_range(1..=3), rng.gen_range(min_length..0.6), lanes, dests);
        f.params = params.clone();
        freeway_links.push(f);
    }
    let share = rng.gen_range(0.05..0.4);
    let composition = if with_station { vec![1.0 - share, share] } else { vec![1.0] };
    let q_o = capacity * rng.gen_range(0.5..0.9);
    let base = q_o * rng.gen_range(0.1..0.6);
    let demand = DemandProfile {
        base,
        peak: q_o * rng.gen_range(0.6..1.0),
        center_step: rng.gen_range(0..horizon),
        ramp_flow: 1.0,
        ramp_steps: rng.gen_range(1.0..20.0),
        scale: 1.0,
    };
    let mut queue = vec![origin("o", q_o, demand, &dest_refs, composition)];
    let mut nodes = vec![node("n0", &["o"], &["m1"])];
    let saf_after = with_saf.then(|| rng.gen_range(1..n_main));
    let mut station = Vec::new();
    if with_station {
        let mut s1 = freeway("s1", 1, rng.gen_range(min_length..0.5), 1, &["st"]);
        s1.params = params.clone();
        let mut s2 = freeway("s2", 1, rng.gen_range(min_length..0.5), 1, &exit_only);
        s2.params = params.clone();
        freeway_links.push(s1);
        freeway_links.push(s2);
        station.push(StationSpec {
            id: "st".into(),
            entry_ramp: "s1".into(),
            exit_ramp: "s2".into(),
            dwell_steps: rng.gen_range(0..400),
            capacity_flow: rng.gen_range(200.0..2000.0),
            max_occupancy: rng.gen_range(20.0..200.0),
            metering: Schedule::default(),
            exit_destination: exit.clone(),
            initial: None,
        });
    }
    for i in 1..n_main {
        let from = format!("m{i}");
        let to = format!("m{}", i + 1);
        let mut ins = vec![from.clone()];
        if with_station && i == merge {
            ins.push("s2".into());
        }
        let mut outs = vec![to.clone()];
        if with_station && i == div {
            outs.push("s1".into());
        }
        if saf_after == Some(i) && !(with_station && (i == div || i == merge)) {
            let dests = freeway_links[i - 1].destinations.clone();
            queue.push(QueueLinkSpec {
                id: "q".into(),
                kind: QueueKind::Saf,
                max_flow: capacity * rng.gen_range(0.6..1.0),
                destinations: dests,
                metering: Schedule::constant(rng.gen_range(0.8..1.0)),
                demand: None,
                demand_composition: None,
                initial_queue: None,
                max_queue: None,
            });
            let ins_ref: Vec<&str> = ins.iter().map(String::as_str).collect();
            nodes.push(node(&format!("n{i}a"), &ins_ref, &["q"]));
            nodes.push(node(&format!("n{i}"), &["q"], &[&to]));
            continue;
        }
        let ins_ref: Vec<&str> = ins.iter().map(String::as_str).collect();
        let outs_ref: Vec<&str> = outs.iter().map(String::as_str).collect();
        let mut n = node(&format!("n{i}"), &ins_ref, &outs_ref);
        if outs.len() > 1 {
            n.splits = BTreeMap::from([
                (exit.clone(), BTreeMap::from([(to.clone(), 1.0)])),
                ("st".to_string(), BTreeMap::from([("s1".to_string(), 1.0)])),
            ]);
        }
        nodes.push(n);
    }
    NetworkSpec {
        name: "random".into(),
        step,
        horizon,
        destinations,
        freeway: freeway_links,
        queue,
        node: nodes,
        station,
    }
}
