//! Built-in scenarios: the service-station stretch with the peak-hour demand.
//!
//! ```text
//!  o ─▶ m1 ─▶ m2 ─▶ m3 ─▶ m4 ─▶ m5 ─▶ m6 ─▶ m7 ─▶ (exit)
//!        │                      ▲
//!        s1 ─▶ [station st] ─▶ s2
//! ```

use std::collections::BTreeMap;

use crate::demand::DemandProfile;
use crate::network::{
    FreewayLink, FreewayParams, NetworkSpec, NodeSpec, QueueKind, QueueLinkSpec, Schedule, SectionInit, StationSpec,
};

/// Simulated time, h.
pub const HORIZON_H: f64 = 1.6;
pub const HORIZON_STEPS: u64 = 60_000;
/// Share of the demand stopping at the station.
pub const STATION_SHARE: f64 = 0.3;
/// Dwell time at the station, h.
pub const DWELL_H: f64 = 0.1;
/// Lanes per link; the per-lane demand profile is scaled by it.
pub const LANES: u32 = 3;
/// Average effective vehicle length used to size the station, km.
pub const VEHICLE_LENGTH_KM: f64 = 0.008;
pub const STATION_LENGTH_KM: f64 = 1.0;

pub const BUILTIN_NAMES: [&str; 2] = ["paper-fig3", "paper-fig4"];

/// Step length reconciling the step count with the simulated time.
pub fn paper_step() -> f64 {
    HORIZON_H / HORIZON_STEPS as f64
}

/// The service-station stretch with default station and origin settings.
pub fn build_paper_scenario() -> NetworkSpec {
    let step = paper_step();
    let params = FreewayParams::default();
    let link = |id: &str, destinations: &[&str], composition: Option<Vec<f64>>| FreewayLink {
        id: id.to_string(),
        sections: 1,
        section_length: 0.3,
        lanes: LANES,
        params: params.clone(),
        destinations: destinations.iter().map(|d| d.to_string()).collect(),
        initial: composition.map(|c| SectionInit { composition: Some(c), ..Default::default() }),
    };
    let mixed = vec![STATION_SHARE, 1.0 - STATION_SHARE];
    let mut freeway = vec![link("m1", &["st", "m7"], Some(mixed.clone()))];
    for id in ["m2", "m3", "m4", "m5", "m6", "m7"] {
        freeway.push(link(id, &["m7"], None));
    }
    freeway.push(link("s1", &["st"], None));
    freeway.push(link("s2", &["m7"], None));

    let chain = |id: &str, from: &[&str], to: &[&str]| NodeSpec {
        id: id.to_string(),
        in_links: from.iter().map(|s| s.to_string()).collect(),
        out_links: to.iter().map(|s| s.to_string()).collect(),
        splits: BTreeMap::new(),
        split_changes: Vec::new(),
    };
    let mut diverge = chain("n1", &["m1"], &["m2", "s1"]);
    diverge.splits = BTreeMap::from([
        ("st".to_string(), BTreeMap::from([("s1".to_string(), 1.0)])),
        ("m7".to_string(), BTreeMap::from([("m2".to_string(), 1.0)])),
    ]);
    let node = vec![
        chain("n0", &["o"], &["m1"]),
        diverge,
        chain("n2", &["m2"], &["m3"]),
        chain("n3", &["m3"], &["m4"]),
        chain("n4", &["m4", "s2"], &["m5"]),
        chain("n5", &["m5"], &["m6"]),
        chain("n6", &["m6"], &["m7"]),
    ];

    NetworkSpec {
        name: "service-station stretch".to_string(),
        step,
        horizon: HORIZON_STEPS,
        destinations: vec!["m7".to_string(), "st".to_string()],
        freeway,
        queue: vec![QueueLinkSpec {
            id: "o".to_string(),
            kind: QueueKind::Origin,
            max_flow: 4000.0,
            destinations: vec!["st".to_string(), "m7".to_string()],
            metering: Schedule::default(),
            demand: Some(DemandProfile { scale: f64::from(LANES), ..DemandProfile::default() }),
            demand_composition: Some(mixed),
            initial_queue: None,
            max_queue: None,
        }],
        node,
        station: vec![StationSpec {
            id: "st".to_string(),
            entry_ramp: "s1".to_string(),
            exit_ramp: "s2".to_string(),
            dwell_steps: (DWELL_H / step).round() as u64,
            capacity_flow: 1500.0,
            max_occupancy: (STATION_LENGTH_KM / VEHICLE_LENGTH_KM).round(),
            metering: Schedule::default(),
            exit_destination: "m7".to_string(),
            initial: None,
        }],
    }
}

/// Origin capacity, station merge-back capacity, dwell and station size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calibration {
    pub origin_max_flow: f64,
    pub station_capacity: f64,
    pub dwell_steps: u64,
    pub max_occupancy: f64,
}

/// Station-limited peak: the merge-back capacity caps the station share
/// below its arrival rate, so the queue spills back onto m1 and m5 settles
/// at `capacity / (share * lanes)` per lane after the peak.
pub const FIG4: Calibration =
    Calibration { origin_max_flow: 4300.0, station_capacity: 1000.0, dwell_steps: 7500, max_occupancy: 200.0 };

/// Overloaded merge: m5 congests, the exit ramp follows and the station
/// fills behind it.
pub const FIG3: Calibration =
    Calibration { origin_max_flow: 4700.0, station_capacity: 1400.0, dwell_steps: 3750, max_occupancy: 125.0 };

/// The service-station stretch with `cal` applied.
pub fn calibrated(name: &str, cal: &Calibration) -> NetworkSpec {
    let mut spec = build_paper_scenario();
    spec.name = name.to_string();
    spec.queue[0].max_flow = cal.origin_max_flow;
    let st = &mut spec.station[0];
    st.capacity_flow = cal.station_capacity;
    st.dwell_steps = cal.dwell_steps;
    st.max_occupancy = cal.max_occupancy;
    spec
}

/// Calibration used for the capacity-drop comparison.
pub fn paper_fig4() -> NetworkSpec {
    calibrated("paper-fig4", &FIG4)
}

/// Calibration used for the back-propagation experiment.
pub fn paper_fig3() -> NetworkSpec {
    calibrated("paper-fig3", &FIG3)
}

/// Looks up a built-in scenario by name.
pub fn builtin(name: &str) -> Option<NetworkSpec> {
    match name {
        "paper-fig3" => Some(paper_fig3()),
        "paper-fig4" => Some(paper_fig4()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::validate;

    #[test]
    fn paper_scenario_is_valid() {
        let report = validate(&build_paper_scenario());
        assert!(report.is_ok(), "{report}");
        for name in BUILTIN_NAMES {
            let report = validate(&builtin(name).unwrap());
            assert!(report.is_ok(), "{name}: {report}");
        }
    }

    #[test]
    fn paper_scenario_shape() {
        let spec = build_paper_scenario();
        assert_eq!(spec.freeway.len() + spec.queue.len() + spec.station.len(), 11);
        assert_eq!(spec.freeway.iter().filter(|f| f.id.starts_with('m')).count(), 7);
        assert!(spec.freeway.iter().all(|f| f.section_length == 0.3 && f.lanes == 3));
        let o = spec.queue_link("o").unwrap();
        assert_eq!(o.demand_composition.as_deref(), Some(&[0.3, 0.7][..]));
        assert_eq!(o.destinations[0], "st");
        assert_eq!(spec.horizon, 60_000);
        assert_eq!(spec.station("st").unwrap().max_occupancy, 125.0);
        assert_eq!(spec.station("st").unwrap().dwell_steps, 3750);
    }

    #[test]
    fn table_parameters() {
        let p = &build_paper_scenario().freeway[0].params;
        assert_eq!(
            (
                p.relaxation_time,
                p.free_flow_speed,
                p.jam_density,
                p.stability,
                p.anticipation,
                p.critical_density,
                p.exponent
            ),
            (0.005, 102.0, 30.0, 40.0, 60.0, 20.0, 2.34)
        );
    }

    #[test]
    fn calibrations_applied() {
        let spec = paper_fig4();
        assert_eq!(spec.queue_link("o").unwrap().max_flow, 4300.0);
        assert_eq!(spec.station("st").unwrap().dwell_steps, 7500);
        assert_eq!(paper_fig3().station("st").unwrap().capacity_flow, 1400.0);
        assert_eq!(spec.queue_link("o").unwrap().demand.as_ref().unwrap().max_demand(), 7500.0);
    }

    #[test]
    fn deterministic_construction() {
        assert_eq!(build_paper_scenario(), build_paper_scenario());
    }
}
