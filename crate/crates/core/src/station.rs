//! Service-station dynamics: vehicles leave the mainstream over an entry
//! ramp, dwell for a fixed number of steps, then queue at the exit until the
//! merge-back capacity lets them onto the exit ramp.

use std::collections::VecDeque;

use crate::queue::{permit, DownstreamView};

/// Mutable station state.
///
/// `history` holds the entry-ramp flows of the last `dwell_steps` steps,
/// oldest first; with zero dwell it is empty and the current entry flow is
/// the delayed flow.
#[derive(Clone, Debug, PartialEq)]
pub struct StationState {
    /// Vehicles at the station, dwelling or queued.
    pub occupancy: f64,
    /// Vehicles done dwelling and waiting to merge back.
    pub exit_queue: f64,
    pub history: VecDeque<f64>,
}

impl StationState {
    pub fn empty(dwell_steps: usize) -> Self {
        StationState { occupancy: 0.0, exit_queue: 0.0, history: std::iter::repeat_n(0.0, dwell_steps).collect() }
    }

    /// Entry flow from `dwell_steps` steps ago, given this step's entry flow.
    pub fn delayed_inflow(&self, current_inflow: f64) -> f64 {
        self.history.front().copied().unwrap_or(current_inflow)
    }
}

/// Flow from the entry ramp into the station, limited by the free space.
pub fn station_inflow(
    ramp_density: f64,
    ramp_speed: f64,
    ramp_lanes: u32,
    occupancy: f64,
    max_occupancy: f64,
    step: f64,
) -> f64 {
    let nominal = ramp_density * ramp_speed * f64::from(ramp_lanes);
    let space = (max_occupancy - occupancy) / step;
    nominal.min(space).max(0.0)
}

/// Merge-back capacity, reduced when the exit ramp is congested.
pub fn station_capacity(capacity_flow: f64, exit_ramp: &DownstreamView) -> f64 {
    if exit_ramp.density < exit_ramp.critical_density {
        capacity_flow
    } else {
        capacity_flow * permit(exit_ramp)
    }
}

pub fn station_outflow(delayed_inflow: f64, exit_queue: f64, max_flow: f64, metering: f64, step: f64) -> f64 {
    metering * (delayed_inflow + exit_queue / step).min(max_flow)
}

/// Advances the station by one step given this step's entry flow and
/// outflow. Occupancy is kept in `[0, max_occupancy]` and the exit queue in
/// `[0, occupancy]`; under admissible flows this only trims rounding residue.
pub fn step_station(st: &mut StationState, inflow: f64, outflow: f64, max_occupancy: f64, step: f64) {
    let delayed = st.delayed_inflow(inflow);
    let occupancy = (st.occupancy + step * (inflow - outflow)).clamp(0.0, max_occupancy);
    let exit_queue = (st.exit_queue + step * (delayed - outflow)).max(0.0).min(occupancy);
    st.occupancy = occupancy;
    st.exit_queue = exit_queue;
    if !st.history.is_empty() {
        st.history.pop_front();
        st.history.push_back(inflow);
    }
}
