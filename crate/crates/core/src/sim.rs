//! State, flows and the fixed-step run loop shared by both models.
//!
//! A step is split into two phases. [`Model::flows`] reads the state at step
//! `k` only and computes every flow, node split and boundary value;
//! [`Model::advance`] then applies all conservation and speed updates at
//! once. The trace records the state at `k` together with the flows of `k`.

use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::freeway::{desired_speed, SectionState};
use crate::network::{compile, Downstream, LinkRef, NetworkSpec, QueueKind, Topology};
use crate::node::{gather, scatter, NodeInflow, OutFlow};
use crate::queue::{max_outflow, service_composition, step_partial_queues, step_queue, DownstreamView};
use crate::station::{step_station, StationState};
use crate::summary::{RunSummary, SummaryBuilder};
use crate::trace::{TraceRecord, TraceSink};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    MetanetS,
    CtmS,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::MetanetS => "metanet_s",
            ModelKind::CtmS => "ctm_s",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueueState {
    pub queue: f64,
    /// Partial queues aligned with the link's destinations.
    pub partial: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Diagnostics {
    /// Negative densities or partial densities clamped to zero.
    pub clamp_events: u64,
    /// Steps in which a queue exceeded its diagnostic limit.
    pub queue_limit_events: u64,
    /// Cumulative vehicles entered through origins.
    pub entered: f64,
    /// Cumulative vehicles that left through destination links.
    pub exited: f64,
}

/// Complete simulation state at step `step`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub step: u64,
    pub freeway: Vec<Vec<SectionState>>,
    pub queues: Vec<QueueState>,
    pub stations: Vec<StationState>,
    pub diagnostics: Diagnostics,
}

/// A flow with its composition over the receiving link's destinations.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Inflow {
    pub flow: f64,
    pub composition: Vec<f64>,
}

impl From<OutFlow> for Inflow {
    fn from(o: OutFlow) -> Self {
        Inflow { flow: o.flow, composition: o.composition }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StationFlows {
    /// Flow from the entry ramp into the station.
    pub inflow: f64,
    /// Entry flow from `dwell_steps` steps ago.
    pub delayed_inflow: f64,
    /// Merge-back capacity.
    pub capacity: f64,
    pub outflow: f64,
}

/// Everything computed from the state at one step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepFlows {
    pub step: u64,
    /// Outflow of every section, per freeway link.
    pub sections: Vec<Vec<f64>>,
    /// Section speeds to report instead of the state speeds.
    pub speeds: Option<Vec<Vec<f64>>>,
    /// Inflow into the first section of each freeway link.
    pub boundary: Vec<Inflow>,
    /// Speed upstream of the first section of each freeway link.
    pub upstream_speed: Vec<f64>,
    /// Density downstream of the last section of each freeway link.
    pub downstream_density: Vec<f64>,
    pub queue_in: Vec<Inflow>,
    pub queue_out: Vec<Inflow>,
    pub stations: Vec<StationFlows>,
    /// Total flow entering through origins.
    pub entering: f64,
    /// Total flow leaving through destination links.
    pub leaving: f64,
}

/// A validated network ready for simulation.
#[derive(Clone, Debug)]
pub struct Network {
    pub spec: NetworkSpec,
    pub topo: Topology,
}

impl Network {
    pub fn new(spec: NetworkSpec) -> Result<Self, SimError> {
        let topo = compile(&spec).map_err(SimError::Invalid)?;
        Ok(Network { spec, topo })
    }

    pub fn initial_state(&self) -> SimState {
        let freeway = self
            .spec
            .freeway
            .iter()
            .map(|f| {
                let n = f.sections as usize;
                let nd = f.destinations.len();
                let init = f.initial.clone().unwrap_or_default();
                let pick = |v: &Option<Vec<f64>>, i: usize| v.as_ref().map(|v| if v.len() == 1 { v[0] } else { v[i] });
                let composition = init.composition.clone().unwrap_or_else(|| vec![1.0 / nd as f64; nd]);
                (0..n)
                    .map(|i| {
                        let density = pick(&init.density, i).unwrap_or(1.0);
                        let mut s = SectionState::equilibrium(density, composition.clone(), &f.params);
                        if let Some(v) = pick(&init.speed, i) {
                            s.speed = v;
                        }
                        s
                    })
                    .collect()
            })
            .collect();
        let queues = self
            .spec
            .queue
            .iter()
            .map(|q| {
                let partial = q.initial_queue.clone().unwrap_or_else(|| vec![0.0; q.destinations.len()]);
                QueueState { queue: partial.iter().sum(), partial }
            })
            .collect();
        let stations = self
            .spec
            .station
            .iter()
            .map(|s| {
                let mut st = StationState::empty(s.dwell_steps as usize);
                if let Some(init) = &s.initial {
                    st.occupancy = init.occupancy;
                    st.exit_queue = init.exit_queue;
                    if !init.history.is_empty() {
                        st.history = init.history.iter().copied().collect();
                    }
                }
                st
            })
            .collect();
        SimState { step: 0, freeway, queues, stations, diagnostics: Diagnostics::default() }
    }

    /// Vehicles stored on links, in queues and at stations.
    pub fn stored_vehicles(&self, state: &SimState) -> f64 {
        let on_links: f64 = self
            .spec
            .freeway
            .iter()
            .zip(&state.freeway)
            .map(|(f, secs)| secs.iter().map(|s| s.density).sum::<f64>() * f.section_length * f64::from(f.lanes))
            .sum();
        let queued: f64 = state.queues.iter().map(|q| q.queue).sum();
        let stations: f64 = state.stations.iter().map(|s| s.occupancy).sum();
        on_links + queued + stations
    }

    pub(crate) fn empty_flows(&self, k: u64) -> StepFlows {
        let nf = self.spec.freeway.len();
        let nq = self.spec.queue.len();
        StepFlows {
            step: k,
            sections: self.spec.freeway.iter().map(|f| vec![0.0; f.sections as usize]).collect(),
            speeds: None,
            boundary: vec![Inflow::default(); nf],
            upstream_speed: vec![0.0; nf],
            downstream_density: vec![0.0; nf],
            queue_in: vec![Inflow::default(); nq],
            queue_out: vec![Inflow::default(); nq],
            stations: vec![StationFlows::default(); self.spec.station.len()],
            entering: 0.0,
            leaving: 0.0,
        }
    }

    /// Demand entering origin `i` at step `k`.
    pub(crate) fn origin_inflow(&self, i: usize, k: u64) -> Inflow {
        let q = &self.spec.queue[i];
        let flow = q.demand.as_ref().map_or(0.0, |d| d.demand(k));
        let composition = q.demand_composition.clone().unwrap_or_else(|| vec![1.0]);
        Inflow { flow, composition }
    }

    /// Density bounds of the first section of freeway link `i`.
    pub(crate) fn entry_view(&self, state: &SimState, i: usize) -> DownstreamView {
        let p = &self.spec.freeway[i].params;
        DownstreamView {
            density: state.freeway[i][0].density,
            critical_density: p.critical_density,
            jam_density: p.jam_density,
        }
    }

    /// Maximum outflow of queue link `i`, limited by the most congested
    /// freeway link leaving its downstream node.
    pub(crate) fn queue_max_flow(&self, state: &SimState, i: usize) -> f64 {
        let cap = self.spec.queue[i].max_flow;
        let Some(p) = self.topo.queue[i].downstream else {
            return cap;
        };
        self.topo.nodes[p]
            .outputs
            .iter()
            .filter_map(|l| match l {
                LinkRef::Freeway(f) => Some(max_outflow(cap, &self.entry_view(state, *f))),
                LinkRef::Queue(_) => None,
            })
            .fold(cap, f64::min)
    }

    /// Splits the flows entering node `p` over its outgoing links.
    pub(crate) fn route(&self, p: usize, k: u64, inputs: &[(f64, &[f64])]) -> Vec<OutFlow> {
        let node = &self.topo.nodes[p];
        let inflows: Vec<NodeInflow<'_>> = node
            .inputs
            .iter()
            .zip(inputs)
            .map(|(l, (flow, composition))| NodeInflow {
                flow: *flow,
                composition,
                destinations: self.topo.link_destinations(*l),
            })
            .collect();
        let totals = gather(&inflows, self.topo.destinations.len());
        let out_dests: Vec<&[usize]> = node.outputs.iter().map(|l| self.topo.link_destinations(*l)).collect();
        scatter(&totals, node.splits_at(k), &out_dests)
    }

    /// Composition of the flow a station releases onto its exit ramp.
    pub(crate) fn station_exit_composition(&self, s: usize) -> Vec<f64> {
        let st = &self.topo.stations[s];
        let mut comp = vec![0.0; self.topo.freeway[st.exit].destinations.len()];
        comp[st.exit_destination] = 1.0;
        comp
    }

    /// Flow leaving the network through destination links.
    pub(crate) fn leaving_flow(&self, flows: &StepFlows) -> f64 {
        let freeway: f64 = self
            .topo
            .freeway
            .iter()
            .zip(&flows.sections)
            .filter(|(t, _)| t.downstream == Downstream::Exit)
            .map(|(_, q)| *q.last().unwrap())
            .sum();
        let queues: f64 = self
            .topo
            .queue
            .iter()
            .zip(&flows.queue_out)
            .filter(|(t, _)| t.downstream.is_none())
            .map(|(_, q)| q.flow)
            .sum();
        freeway + queues
    }

    pub(crate) fn entering_flow(&self, flows: &StepFlows) -> f64 {
        self.spec
            .queue
            .iter()
            .zip(&flows.queue_in)
            .filter(|(q, _)| q.kind == QueueKind::Origin)
            .map(|(_, f)| f.flow)
            .sum()
    }

    /// Queue and station updates common to both models.
    pub(crate) fn advance_storage(&self, state: &mut SimState, flows: &StepFlows) {
        let t = self.spec.step;
        for (i, q) in state.queues.iter_mut().enumerate() {
            let inflow = &flows.queue_in[i];
            let outflow = &flows.queue_out[i];
            q.queue = step_queue(q.queue, inflow.flow, outflow.flow, t);
            let next = step_partial_queues(
                &q.partial,
                &inflow.composition,
                inflow.flow,
                &outflow.composition,
                outflow.flow,
                t,
            );
            q.partial = next.partial;
            if let Some(limit) = self.spec.queue[i].max_queue {
                if q.queue > limit {
                    state.diagnostics.queue_limit_events += 1;
                }
            }
        }
        for (s, st) in state.stations.iter_mut().enumerate() {
            let f = &flows.stations[s];
            step_station(st, f.inflow, f.outflow, self.spec.station[s].max_occupancy, t);
        }
        state.diagnostics.entered += t * flows.entering;
        state.diagnostics.exited += t * flows.leaving;
    }

    /// Outflow and service composition of queue link `i` given its inflow
    /// and its maximum outflow.
    pub(crate) fn serve_queue(&self, state: &SimState, i: usize, inflow: &Inflow, max_flow: f64, k: u64) -> Inflow {
        let t = self.spec.step;
        let q = &state.queues[i];
        let metering = self.spec.queue[i].metering.at(k);
        Inflow {
            flow: crate::queue::saf_outflow(inflow.flow, q.queue, t, max_flow, metering),
            composition: service_composition(&q.partial, inflow.flow, &inflow.composition, t),
        }
    }

    pub(crate) fn check_finite(&self, state: &SimState) -> Result<(), SimError> {
        let bad = |entity: &str| SimError::NonFinite { step: state.step, entity: entity.to_string() };
        for (f, secs) in self.spec.freeway.iter().zip(&state.freeway) {
            if secs.iter().any(|s| !(s.density.is_finite() && s.speed.is_finite())) {
                return Err(bad(&f.id));
            }
        }
        for (q, st) in self.spec.queue.iter().zip(&state.queues) {
            if !st.queue.is_finite() {
                return Err(bad(&q.id));
            }
        }
        for (s, st) in self.spec.station.iter().zip(&state.stations) {
            if !(st.occupancy.is_finite() && st.exit_queue.is_finite()) {
                return Err(bad(&s.id));
            }
        }
        Ok(())
    }

    /// Trace rows for the state at `k` and the flows computed from it.
    pub fn trace_rows(&self, state: &SimState, flows: &StepFlows) -> Vec<TraceRecord> {
        let time_h = state.step as f64 * self.spec.step;
        let base =
            |entity: &str| TraceRecord { step: state.step, time_h, entity: entity.to_string(), ..Default::default() };
        let mut rows = Vec::new();
        for (i, f) in self.spec.freeway.iter().enumerate() {
            let lanes = f64::from(f.lanes);
            for (j, s) in state.freeway[i].iter().enumerate() {
                let q = flows.sections[i][j];
                let speed = flows.speeds.as_ref().map_or(s.speed, |v| v[i][j]);
                rows.push(TraceRecord {
                    section: Some(j as u32 + 1),
                    density: Some(s.density),
                    speed: Some(speed),
                    flow: Some(q),
                    flow_per_lane: Some(q / lanes),
                    ..base(&f.id)
                });
            }
        }
        for (i, q) in self.spec.queue.iter().enumerate() {
            rows.push(TraceRecord {
                flow: Some(flows.queue_out[i].flow),
                queue: Some(state.queues[i].queue),
                ..base(&q.id)
            });
        }
        for (s, st) in self.spec.station.iter().enumerate() {
            rows.push(TraceRecord {
                flow: Some(flows.stations[s].outflow),
                occupancy: Some(state.stations[s].occupancy),
                exit_queue: Some(state.stations[s].exit_queue),
                ..base(&st.id)
            });
            rows.push(TraceRecord { flow: Some(flows.stations[s].capacity), ..base(&format!("{}.q_max", st.id)) });
        }
        rows
    }

    /// Equilibrium speed of a section under the second-order model.
    pub fn desired_speed(&self, link: usize, density: f64) -> f64 {
        desired_speed(density, &self.spec.freeway[link].params)
    }
}

/// A discrete-time traffic model over a [`Network`].
pub trait Model: Sync {
    fn kind(&self) -> ModelKind;

    fn network(&self) -> &Network;

    fn initial_state(&self) -> SimState {
        self.network().initial_state()
    }

    /// Flows at the state's step, from the state alone.
    fn flows(&self, state: &SimState) -> Result<StepFlows, SimError>;

    /// Applies the flows, moving the state to the next step.
    fn advance(&self, state: &mut SimState, flows: &StepFlows) -> Result<(), SimError>;

    fn step(&self, state: &mut SimState) -> Result<StepFlows, SimError> {
        let flows = self.flows(state)?;
        self.advance(state, &flows)?;
        Ok(flows)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunOptions {
    /// Record every `stride`-th step in the trace.
    pub stride: u64,
    /// Overrides the spec's horizon.
    pub horizon: Option<u64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { stride: 50, horizon: None }
    }
}

/// Runs `model` from its initial state over the horizon, feeding every
/// `stride`-th step to the sinks.
pub fn run(model: &dyn Model, sinks: &mut [&mut dyn TraceSink], opts: &RunOptions) -> Result<RunSummary, SimError> {
    let net = model.network();
    let horizon = opts.horizon.unwrap_or(net.spec.horizon);
    let stride = opts.stride.max(1);
    let mut state = model.initial_state();
    let mut summary = SummaryBuilder::new(net, model.kind(), horizon, &state);
    for k in 0..horizon {
        debug_assert_eq!(state.step, k);
        let flows = model.flows(&state)?;
        summary.observe(net, &state, &flows);
        if k % stride == 0 && !sinks.is_empty() {
            for row in net.trace_rows(&state, &flows) {
                for sink in sinks.iter_mut() {
                    sink.record(&row)?;
                }
            }
        }
        model.advance(&mut state, &flows)?;
    }
    for sink in sinks.iter_mut() {
        sink.finish()?;
    }
    Ok(summary.finish(net, &state))
}

/// Builds the chosen model for `spec` and runs it.
pub fn run_spec(
    spec: &NetworkSpec,
    kind: ModelKind,
    sinks: &mut [&mut dyn TraceSink],
    opts: &RunOptions,
) -> Result<RunSummary, SimError> {
    let net = Network::new(spec.clone())?;
    match kind {
        ModelKind::MetanetS => run(&crate::metanet::MetanetS::new(net), sinks, opts),
        ModelKind::CtmS => run(&crate::ctm::CtmS::new(net)?, sinks, opts),
    }
}
