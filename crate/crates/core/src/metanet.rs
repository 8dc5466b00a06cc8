//! Second-order model with service stations.

use crate::error::SimError;
use crate::freeway::{section_flow, step_density, step_partial_densities, step_speed, SectionBoundary, SectionState};
use crate::network::{Downstream, LinkRef, QueueKind, Upstream};
use crate::sim::{Inflow, Model, ModelKind, Network, SimState, StationFlows, StepFlows};
use crate::station::{station_capacity, station_inflow, station_outflow};

pub struct MetanetS {
    net: Network,
}

impl MetanetS {
    pub fn new(net: Network) -> Self {
        MetanetS { net }
    }

    /// Flow-weighted mean speed of the freeway links entering node `p`, or
    /// `None` when no freeway link enters it.
    fn node_upstream_speed(&self, state: &SimState, flows: &StepFlows, p: usize) -> Option<f64> {
        let mut weighted = 0.0;
        let mut total = 0.0;
        let mut speeds = Vec::new();
        for l in &self.net.topo.nodes[p].inputs {
            if let LinkRef::Freeway(i) = *l {
                let v = state.freeway[i].last().unwrap().speed;
                let q = *flows.sections[i].last().unwrap();
                weighted += v * q;
                total += q;
                speeds.push(v);
            }
        }
        if speeds.is_empty() {
            None
        } else if total > 0.0 {
            Some(weighted / total)
        } else {
            Some(speeds.iter().sum::<f64>() / speeds.len() as f64)
        }
    }

    /// Density seen downstream of a node: `sum(rho^2) / sum(rho)` over the
    /// first sections of its outgoing freeway links.
    fn node_downstream_density(&self, state: &SimState, p: usize) -> Option<f64> {
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut any = false;
        for l in &self.net.topo.nodes[p].outputs {
            if let LinkRef::Freeway(i) = *l {
                let rho = state.freeway[i][0].density;
                sum += rho;
                sum_sq += rho * rho;
                any = true;
            }
        }
        match (any, sum > 0.0) {
            (false, _) => None,
            (true, true) => Some(sum_sq / sum),
            (true, false) => Some(0.0),
        }
    }
}

impl Model for MetanetS {
    fn kind(&self) -> ModelKind {
        ModelKind::MetanetS
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

        for (i, f) in spec.freeway.iter().enumerate() {
            for (j, s) in state.freeway[i].iter().enumerate() {
                fl.sections[i][j] = section_flow(s, f.lanes);
            }
        }

        for (s, st_topo) in topo.stations.iter().enumerate() {
            let st_spec = &spec.station[s];
            let st = &state.stations[s];
            let entry = &spec.freeway[st_topo.entry];
            let last = state.freeway[st_topo.entry].last().unwrap();
            let inflow = station_inflow(last.density, last.speed, entry.lanes, st.occupancy, st_spec.max_occupancy, t);
            *fl.sections[st_topo.entry].last_mut().unwrap() = inflow;
            let delayed_inflow = st.delayed_inflow(inflow);
            let capacity = station_capacity(st_spec.capacity_flow, &net.entry_view(state, st_topo.exit));
            let outflow = station_outflow(delayed_inflow, st.exit_queue, capacity, st_spec.metering.at(k), t);
            fl.stations[s] = StationFlows { inflow, delayed_inflow, capacity, outflow };
            fl.boundary[st_topo.exit] = Inflow { flow: outflow, composition: net.station_exit_composition(s) };
        }

        for (i, q) in spec.queue.iter().enumerate() {
            if q.kind == QueueKind::Origin {
                fl.queue_in[i] = net.origin_inflow(i, k);
                let max_flow = net.queue_max_flow(state, i);
                fl.queue_out[i] = net.serve_queue(state, i, &fl.queue_in[i], max_flow, k);
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
                            (*fl.sections[i].last().unwrap(), state.freeway[i].last().unwrap().composition.as_slice())
                        }
                        LinkRef::Queue(i) => (fl.queue_out[i].flow, fl.queue_out[i].composition.as_slice()),
                    })
                    .collect();
                net.route(p, k, &inputs)
            };
            for (l, out) in node.outputs.iter().zip(outs) {
                match *l {
                    LinkRef::Freeway(i) => fl.boundary[i] = out.into(),
                    LinkRef::Queue(i) => {
                        fl.queue_in[i] = out.into();
                        let max_flow = net.queue_max_flow(state, i);
                        fl.queue_out[i] = net.serve_queue(state, i, &fl.queue_in[i], max_flow, k);
                    }
                }
            }
        }

        for (i, ft) in topo.freeway.iter().enumerate() {
            let secs = &state.freeway[i];
            fl.upstream_speed[i] = match ft.upstream {
                Upstream::Node(p) => self.node_upstream_speed(state, &fl, p),
                Upstream::Station(_) => None,
            }
            .unwrap_or(secs[0].speed);
            fl.downstream_density[i] = match ft.downstream {
                Downstream::Node(p) => self.node_downstream_density(state, p),
                Downstream::Station(_) | Downstream::Exit => None,
            }
            .unwrap_or(secs.last().unwrap().density);
        }

        fl.entering = net.entering_flow(&fl);
        fl.leaving = net.leaving_flow(&fl);
        Ok(fl)
    }

    fn advance(&self, state: &mut SimState, fl: &StepFlows) -> Result<(), SimError> {
        let net = &self.net;
        let t = net.spec.step;
        for (i, f) in net.spec.freeway.iter().enumerate() {
            let old = &state.freeway[i];
            let n = old.len();
            let mut next = Vec::with_capacity(n);
            for (j, sec) in old.iter().enumerate() {
                let (inflow, inflow_composition, upstream_speed) = if j == 0 {
                    (fl.boundary[i].flow, fl.boundary[i].composition.as_slice(), fl.upstream_speed[i])
                } else {
                    (fl.sections[i][j - 1], old[j - 1].composition.as_slice(), old[j - 1].speed)
                };
                let downstream_density = if j + 1 == n { fl.downstream_density[i] } else { old[j + 1].density };
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
                let boundary = SectionBoundary {
                    inflow,
                    inflow_composition: inflow_composition.to_vec(),
                    upstream_speed,
                    downstream_density,
                };
                let speed = step_speed(sec, &boundary, &f.params, f.section_length, t);
                if speed * t > f.section_length {
                    return Err(SimError::Cfl { step: state.step, entity: f.id.clone(), distance: speed * t });
                }
                state.diagnostics.clamp_events += u64::from(density.clamped) + partial.clamps as u64;
                next.push(SectionState {
                    density: density.value,
                    speed,
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
