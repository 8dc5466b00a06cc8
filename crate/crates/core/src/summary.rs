//! Run summaries: conservation bookkeeping, per-link peaks, capacity-drop
//! metrics and station event markers.
//!
//! The saturated window is the set of steps in which the total origin
//! demand is at least the total origin capacity. Link peaks are taken over
//! the steps up to the end of that window. The post-peak plateau is the
//! median per-lane exit flow over the window steps at or after the peak; the
//! drop is `1 - plateau / peak`.

use serde::{Deserialize, Serialize};

use crate::sim::{ModelKind, Network, SimState, StepFlows};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub model: ModelKind,
    pub scenario: String,
    pub steps: u64,
    pub step_h: f64,
    pub entered_veh: f64,
    pub exited_veh: f64,
    pub stored_initial_veh: f64,
    pub stored_final_veh: f64,
    /// `entered - exited - (stored_final - stored_initial)`.
    pub conservation_residual_veh: f64,
    pub clamp_events: u64,
    pub queue_limit_events: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saturated_window: Option<Window>,
    pub links: Vec<LinkSummary>,
    pub queues: Vec<QueueSummary>,
    pub stations: Vec<StationSummary>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub first_step: u64,
    pub last_step: u64,
    pub first_time_h: f64,
    pub last_time_h: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkSummary {
    pub id: String,
    /// Peak exit flow of the link, veh/h/lane.
    pub peak_flow_per_lane: f64,
    pub peak_step: u64,
    pub peak_time_h: f64,
    pub max_density: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plateau_flow_per_lane: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drop_fraction: Option<f64>,
    /// Vehicles leaving the link during the saturated window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_throughput_veh: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueueSummary {
    pub id: String,
    pub max_queue_veh: f64,
    pub max_queue_step: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationSummary {
    pub id: String,
    /// First step with the exit ramp at or above its critical density.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exit_ramp_congested_step: Option<u64>,
    /// First step with the merge-back capacity below its nominal value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity_reduced_step: Option<u64>,
    pub max_occupancy_veh: f64,
    pub max_occupancy_step: u64,
    pub max_exit_queue_veh: f64,
    pub entry_ramp_peak_density: f64,
    pub entry_ramp_peak_density_step: u64,
}

impl RunSummary {
    pub fn link(&self, id: &str) -> Option<&LinkSummary> {
        self.links.iter().find(|l| l.id == id)
    }

    pub fn station(&self, id: &str) -> Option<&StationSummary> {
        self.stations.iter().find(|s| s.id == id)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("summary serializes")
    }
}

/// Accumulates per-step observations during a run.
pub(crate) struct SummaryBuilder {
    model: ModelKind,
    stored_initial: f64,
    saturated: Vec<bool>,
    /// Per-lane exit flow of every freeway link at every step.
    exit_flows: Vec<Vec<f64>>,
    max_density: Vec<f64>,
    queues: Vec<QueueSummary>,
    stations: Vec<StationSummary>,
}

impl SummaryBuilder {
    pub(crate) fn new(net: &Network, model: ModelKind, horizon: u64, state: &SimState) -> Self {
        let cap = horizon.min(1 << 24) as usize;
        SummaryBuilder {
            model,
            stored_initial: net.stored_vehicles(state),
            saturated: Vec::with_capacity(cap),
            exit_flows: net.spec.freeway.iter().map(|_| Vec::with_capacity(cap)).collect(),
            max_density: vec![0.0; net.spec.freeway.len()],
            queues: net
                .spec
                .queue
                .iter()
                .map(|q| QueueSummary { id: q.id.clone(), max_queue_veh: 0.0, max_queue_step: 0 })
                .collect(),
            stations: net
                .spec
                .station
                .iter()
                .map(|s| StationSummary {
                    id: s.id.clone(),
                    exit_ramp_congested_step: None,
                    capacity_reduced_step: None,
                    max_occupancy_veh: 0.0,
                    max_occupancy_step: 0,
                    max_exit_queue_veh: 0.0,
                    entry_ramp_peak_density: 0.0,
                    entry_ramp_peak_density_step: 0,
                })
                .collect(),
        }
    }

    pub(crate) fn observe(&mut self, net: &Network, state: &SimState, flows: &StepFlows) {
        let k = state.step;
        let spec = &net.spec;
        self.saturated.push(spec.total_demand(k) >= spec.origin_capacity());
        for (i, f) in spec.freeway.iter().enumerate() {
            let q = *flows.sections[i].last().unwrap();
            self.exit_flows[i].push(q / f64::from(f.lanes));
            for s in &state.freeway[i] {
                self.max_density[i] = self.max_density[i].max(s.density);
            }
        }
        for (q, qs) in self.queues.iter_mut().zip(&state.queues) {
            if qs.queue > q.max_queue_veh {
                q.max_queue_veh = qs.queue;
                q.max_queue_step = k;
            }
        }
        for (s, summary) in self.stations.iter_mut().enumerate() {
            let topo = &net.topo.stations[s];
            let st = &state.stations[s];
            let exit = &state.freeway[topo.exit][0];
            if summary.exit_ramp_congested_step.is_none()
                && exit.density >= spec.freeway[topo.exit].params.critical_density
            {
                summary.exit_ramp_congested_step = Some(k);
            }
            if summary.capacity_reduced_step.is_none() && flows.stations[s].capacity < spec.station[s].capacity_flow {
                summary.capacity_reduced_step = Some(k);
            }
            if st.occupancy > summary.max_occupancy_veh {
                summary.max_occupancy_veh = st.occupancy;
                summary.max_occupancy_step = k;
            }
            summary.max_exit_queue_veh = summary.max_exit_queue_veh.max(st.exit_queue);
            let entry = state.freeway[topo.entry].last().unwrap().density;
            if entry > summary.entry_ramp_peak_density {
                summary.entry_ramp_peak_density = entry;
                summary.entry_ramp_peak_density_step = k;
            }
        }
    }

    pub(crate) fn finish(self, net: &Network, state: &SimState) -> RunSummary {
        let t = net.spec.step;
        let stored_final = net.stored_vehicles(state);
        let d = &state.diagnostics;
        let window_steps: Vec<usize> = (0..self.saturated.len()).filter(|&k| self.saturated[k]).collect();
        let saturated_window = match (window_steps.first(), window_steps.last()) {
            (Some(&a), Some(&b)) => Some(Window {
                first_step: a as u64,
                last_step: b as u64,
                first_time_h: a as f64 * t,
                last_time_h: b as f64 * t,
            }),
            _ => None,
        };
        let links = net
            .spec
            .freeway
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let series = &self.exit_flows[i];
                let until = window_steps.last().map_or(series.len(), |&b| b + 1);
                let (peak_step, peak) = series[..until]
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |acc, (k, &q)| if q > acc.1 { (k, q) } else { acc });
                let peak = if series.is_empty() { 0.0 } else { peak };
                let after_peak: Vec<f64> =
                    window_steps.iter().filter(|&&k| k >= peak_step).map(|&k| series[k]).collect();
                let plateau = median(after_peak);
                let throughput = (!window_steps.is_empty())
                    .then(|| window_steps.iter().map(|&k| series[k]).sum::<f64>() * t * f64::from(f.lanes));
                LinkSummary {
                    id: f.id.clone(),
                    peak_flow_per_lane: peak,
                    peak_step: peak_step as u64,
                    peak_time_h: peak_step as f64 * t,
                    max_density: self.max_density[i],
                    plateau_flow_per_lane: plateau,
                    drop_fraction: plateau.filter(|_| peak > 0.0).map(|p| 1.0 - p / peak),
                    window_throughput_veh: throughput,
                }
            })
            .collect();
        RunSummary {
            model: self.model,
            scenario: net.spec.name.clone(),
            steps: self.saturated.len() as u64,
            step_h: t,
            entered_veh: d.entered,
            exited_veh: d.exited,
            stored_initial_veh: self.stored_initial,
            stored_final_veh: stored_final,
            conservation_residual_veh: d.entered - d.exited - (stored_final - self.stored_initial),
            clamp_events: d.clamp_events,
            queue_limit_events: d.queue_limit_events,
            saturated_window,
            links,
            queues: self.queues,
            stations: self.stations,
        }
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}
