//! First-order baseline: a cell transmission model on the same network, with
//! the service station driven by sending and receiving flows.
//!
//! Each freeway section is one cell with a triangular fundamental diagram
//! sharing the free-flow speed, critical density and jam density of the
//! second-order link. Node flows scale all incoming sending flows by one
//! common factor so that no outgoing freeway cell receives more than its
//! receiving flow.

use crate::error::SimError;
use crate::freeway::{step_density, step_partial_densities, SectionState, EMPTY_DENSITY};
use crate::network::{Downstream, FreewayParams, LinkRef, QueueKind, ValidationReport, Violation};
use crate::sim::{Inflow, Model, ModelKind, Network, SimState, StationFlows, StepFlows};
use crate::station::{station_capacity, station_outflow};

/// Triangular fundamental diagram of one cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellParams {
    /// km/h
    pub free_flow_speed: f64,
    /// veh/km/lane
    pub jam_density: f64,
    pub lanes: u32,
    /// Total capacity, veh/h.
    pub capacity: f64,
    /// Congestion wave speed, km/h.
    pub wave_speed: f64,
}

impl CellParams {
    /// Diagram through the free-flow speed and critical density of a
    /// second-order link: capacity `v * rho_cr * lanes`, wave speed chosen so
    /// the supply vanishes at the jam density.
    pub fn from_freeway(p: &FreewayParams, lanes: u32) -> Self {
        let l = f64::from(lanes);
        let capacity = p.free_flow_speed * p.critical_density * l;
        CellParams {
            free_flow_speed: p.free_flow_speed,
            jam_density: p.jam_density,
            lanes,
            capacity,
            wave_speed: capacity / ((p.jam_density - p.critical_density) * l),
        }
    }
}

/// Sending flow of a cell.
pub fn cell_demand(density: f64, c: &CellParams) -> f64 {
    (c.free_flow_speed * density * f64::from(c.lanes)).min(c.capacity)
}

/// Receiving flow of a cell.
pub fn cell_supply(density: f64, c: &CellParams) -> f64 {
    (c.wave_speed * (c.jam_density - density) * f64::from(c.lanes)).min(c.capacity).max(0.0)
}

pub struct CtmS {
    net: Network,
    cells: Vec<CellParams>,
}

impl CtmS {
    /// Fails when a cell violates `step * max(free_flow_speed, wave_speed) <= length`.
    pub fn new(net: Network) -> Result<Self, SimError> {
        let cells: Vec<CellParams> =
            net.spec.freeway.iter().map(|f| CellParams::from_freeway(&f.params, f.lanes)).collect();
        let violations: Vec<Violation> = net
            .spec
            .freeway
            .iter()
            .zip(&cells)
            .filter(|(f, c)| net.spec.step * c.free_flow_speed.max(c.wave_speed) > f.section_length)
            .map(|(f, _)| Violation {
                entity: f.id.clone(),
                message: "CFL condition of the cell model violated".into(),
            })
            .collect();
        if !violations.is_empty() {
            return Err(SimError::Invalid(ValidationReport { violations }));
        }
        Ok(CtmS { net, cells })
    }

    pub fn cell(&self, link: usize) -> &CellParams {
        &self.cells[link]
    }
}

impl Model for CtmS {
    fn kind(&self) -> ModelKind {
        ModelKind::CtmS
    }

    fn network(&self) -> &Network {
        &self.net
    }

    fn flows(&self, state: &SimState) -> Result<StepFlows, SimError> {
        let net = &self.net;
        let spec = &net.spec;
        let topo = &net.topo;
        let k = state.step;
        let t = spec.step;
        let mut fl = net.empty_flows(k);

        let sending: Vec<Vec<f64>> = state
            .freeway
            .iter()
            .zip(&self.cells)
            .map(|(secs, c)| secs.iter().map(|s| cell_demand(s.density, c)).collect())
            .collect();
        let receiving: Vec<Vec<f64>> = state
            .freeway
            .iter()
            .zip(&self.cells)
            .map(|(secs, c)| secs.iter().map(|s| cell_supply(s.density, c)).collect())
            .collect();

        for (i, ft) in topo.freeway.iter().enumerate() {
            let n = sending[i].len();
            for j in 0..n - 1 {
                fl.sections[i][j] = sending[i][j].min(receiving[i][j + 1]);
            }
            if ft.downstream == Downstream::Exit {
                fl.sections[i][n - 1] = sending[i][n - 1];
            }
        }

        for (s, st_topo) in topo.stations.iter().enumerate() {
            let st_spec = &spec.station[s];
            let st = &state.stations[s];
            let space = ((st_spec.max_occupancy - st.occupancy) / t).max(0.0);
            let inflow = sending[st_topo.entry].last().unwrap().min(space);
            *fl.sections[st_topo.entry].last_mut().unwrap() = inflow;
            let delayed_inflow = st.delayed_inflow(inflow);
            let capacity = station_capacity(st_spec.capacity_flow, &net.entry_view(state, st_topo.exit))
                .min(receiving[st_topo.exit][0]);
            let outflow = station_outflow(delayed_inflow, st.exit_queue, capacity, st_spec.metering.at(k), t);
            fl.stations[s] = StationFlows { inflow, delayed_inflow, capacity, outflow };
            fl.boundary[st_topo.exit] = Inflow { flow: outflow, composition: net.station_exit_composition(s) };
        }

        // Queue sending flows, resolved in node order like the outflows of
        // the second-order model.
        let mut queue_sending = vec![Inflow::default(); spec.queue.len()];
        for (i, q) in spec.queue.iter().enumerate() {
            if q.kind == QueueKind::Origin {
                fl.queue_in[i] = net.origin_inflow(i, k);
                queue_sending[i] = net.serve_queue(state, i, &fl.queue_in[i], q.max_flow, k);
                if topo.queue[i].downstream.is_none() {
                    fl.queue_out[i] = queue_sending[i].clone();
                }
            }
        }

        for &p in &topo.node_order {
            let node = &topo.nodes[p];
            let outs = {
                let inputs: Vec<(f64, &[f64])> = node
                    .inputs
                    .iter()
                    .map(|l| match *l {
                        LinkRef::Freeway(i) => {
                            (*sending[i].last().unwrap(), state.freeway[i].last().unwrap().composition.as_slice())
                        }
                        LinkRef::Queue(i) => (queue_sending[i].flow, queue_sending[i].composition.as_slice()),
                    })
                    .collect();
                net.route(p, k, &inputs)
            };
            let scale = node
                .outputs
                .iter()
                .zip(&outs)
                .filter_map(|(l, o)| match *l {
                    LinkRef::Freeway(i) if o.flow > 0.0 => Some(receiving[i][0] / o.flow),
                    _ => None,
                })
                .fold(1.0_f64, f64::min);
            for l in &node.inputs {
                match *l {
                    LinkRef::Freeway(i) => *fl.sections[i].last_mut().unwrap() = scale * sending[i].last().unwrap(),
                    LinkRef::Queue(i) => {
                        fl.queue_out[i] = Inflow {
                            flow: scale * queue_sending[i].flow,
                            composition: queue_sending[i].composition.clone(),
                        }
                    }
                }
            }
            for (l, out) in node.outputs.iter().zip(outs) {
                let scaled = Inflow { flow: scale * out.flow, composition: out.composition };
                match *l {
                    LinkRef::Freeway(i) => fl.boundary[i] = scaled,
                    LinkRef::Queue(i) => {
                        fl.queue_in[i] = scaled;
                        let max_flow = spec.queue[i].max_flow;
                        queue_sending[i] = net.serve_queue(state, i, &fl.queue_in[i], max_flow, k);
                        if topo.queue[i].downstream.is_none() {
                            fl.queue_out[i] = queue_sending[i].clone();
                        }
                    }
                }
            }
        }

        let speeds = state
            .freeway
            .iter()
            .zip(&self.cells)
            .zip(&fl.sections)
            .map(|((secs, c), q)| {
                secs.iter()
                    .zip(q)
                    .map(|(s, q)| {
                        if s.density > EMPTY_DENSITY {
                            q / (s.density * f64::from(c.lanes))
                        } else {
                            c.free_flow_speed
                        }
                    })
                    .collect()
            })
            .collect();
        fl.speeds = Some(speeds);
        fl.entering = net.entering_flow(&fl);
        fl.leaving = net.leaving_flow(&fl);
        Ok(fl)
    }

    fn advance(&self, state: &mut SimState, fl: &StepFlows) -> Result<(), SimError> {
        let net = &self.net;
        let t = net.spec.step;
        let speeds = fl.speeds.as_ref();
        for (i, f) in net.spec.freeway.iter().enumerate() {
            let old = &state.freeway[i];
            let mut next = Vec::with_capacity(old.len());
            for (j, sec) in old.iter().enumerate() {
                let (inflow, inflow_composition) = if j == 0 {
                    (fl.boundary[i].flow, fl.boundary[i].composition.as_slice())
                } else {
                    (fl.sections[i][j - 1], old[j - 1].composition.as_slice())
                };
                let outflow = fl.sections[i][j];
                let density = step_density(sec.density, inflow, outflow, f.section_length, f.lanes, t);
                let partial = step_partial_densities(
                    sec,
                    inflow,
                    inflow_composition,
                    outflow,
                    density.value,
                    f.section_length,
                    f.lanes,
                    t,
                );
                state.diagnostics.clamp_events += u64::from(density.clamped) + partial.clamps as u64;
                next.push(SectionState {
                    density: density.value,
                    speed: speeds.map_or(sec.speed, |v| v[i][j]),
                    partial: partial.partial,
                    composition: partial.composition,
                });
            }
            state.freeway[i] = next;
        }
        net.advance_storage(state, fl);
        state.step += 1;
        net.check_finite(state)
    }
}
