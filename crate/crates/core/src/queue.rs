//! Store-and-forward and origin links: point queues with a capped, metered
//! outflow.

/// Density bounds of the first section of the link downstream of a queue.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DownstreamView {
    pub density: f64,
    pub critical_density: f64,
    pub jam_density: f64,
}

/// Fraction of a queue's capacity admitted by the downstream section, in [0, 1].
pub fn permit(dv: &DownstreamView) -> f64 {
    ((dv.jam_density - dv.density) / (dv.jam_density - dv.critical_density)).clamp(0.0, 1.0)
}

/// Maximum outflow of a queue link given the state downstream.
pub fn max_outflow(capacity: f64, dv: &DownstreamView) -> f64 {
    if dv.density < dv.critical_density {
        capacity
    } else {
        capacity * permit(dv)
    }
}

/// Outflow of a queue link: everything that arrived plus the stored queue,
/// up to the maximum outflow, scaled by the metering rate.
pub fn saf_outflow(inflow: f64, queue: f64, step: f64, max_flow: f64, metering: f64) -> f64 {
    metering * (inflow + queue / step).min(max_flow)
}

/// Queue length after one step. Rounding residue below zero is dropped.
pub fn step_queue(queue: f64, inflow: f64, outflow: f64, step: f64) -> f64 {
    (queue + step * (inflow - outflow)).max(0.0)
}

/// Composition of the vehicles a queue can serve during a step: the stored
/// partial queues plus this step's arrivals. Reduces to the stored
/// composition when nothing arrives and to the arrival composition when the
/// queue is empty.
pub fn service_composition(partial: &[f64], inflow: f64, inflow_composition: &[f64], step: f64) -> Vec<f64> {
    let pool: Vec<f64> = partial.iter().zip(inflow_composition).map(|(w_j, g)| w_j + step * g * inflow).collect();
    let total: f64 = pool.iter().sum();
    if total > 0.0 {
        pool.iter().map(|p| p / total).collect()
    } else {
        inflow_composition.to_vec()
    }
}

/// Partial queues after one step and the composition of the remaining queue.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialQueues {
    pub partial: Vec<f64>,
    pub composition: Vec<f64>,
}

pub fn step_partial_queues(
    partial: &[f64],
    inflow_composition: &[f64],
    inflow: f64,
    outflow_composition: &[f64],
    outflow: f64,
    step: f64,
) -> PartialQueues {
    let next: Vec<f64> = partial
        .iter()
        .zip(inflow_composition)
        .zip(outflow_composition)
        .map(|((w_j, g_in), g_out)| (w_j + step * (g_in * inflow - g_out * outflow)).max(0.0))
        .collect();
    let total: f64 = next.iter().sum();
    let composition = if total > 0.0 { next.iter().map(|w| w / total).collect() } else { inflow_composition.to_vec() };
    PartialQueues { partial: next, composition }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dv(density: f64) -> DownstreamView {
        DownstreamView { density, critical_density: 20.0, jam_density: 30.0 }
    }

    #[test]
    fn permit_bounds() {
        assert_eq!(permit(&dv(20.0)), 1.0);
        assert_eq!(permit(&dv(30.0)), 0.0);
        assert_eq!(permit(&dv(45.0)), 0.0);
        assert_eq!(permit(&dv(3.0)), 1.0);
    }

    #[test]
    fn max_outflow_cases() {
        assert_eq!(max_outflow(4000.0, &dv(10.0)), 4000.0);
        assert_eq!(max_outflow(4000.0, &dv(30.0)), 0.0);
        // Continuous at the critical density.
        assert_eq!(max_outflow(4000.0, &dv(20.0)), 4000.0);
    }

    #[test]
    fn closed_meter_blocks_everything() {
        assert_eq!(saf_outflow(2500.0, 40.0, 1e-3, 4000.0, 0.0), 0.0);
    }

    #[test]
    fn queue_steady_when_balanced() {
        assert_eq!(step_queue(7.25, 1800.0, 1800.0, 1e-3), 7.25);
    }

    #[test]
    fn queue_drains_to_exactly_zero() {
        let step = 1.0 / 600.0;
        let out = 2500.0;
        let w = step * out;
        assert_eq!(step_queue(w, 0.0, out, step), 0.0);
    }

    #[test]
    fn single_destination_queue_composition() {
        let q = step_partial_queues(&[3.0], &[1.0], 1000.0, &[1.0], 1500.0, 1e-3);
        assert_eq!(q.composition, vec![1.0]);
        assert!((q.partial[0] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn symmetric_partial_queues_scale_together() {
        let q = step_partial_queues(&[2.0, 6.0], &[0.25, 0.75], 2000.0, &[0.25, 0.75], 1000.0, 1e-3);
        assert!((q.partial[1] / q.partial[0] - 3.0).abs() < 1e-12);
        assert!((q.composition[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn service_composition_limits() {
        let g = service_composition(&[0.0, 0.0], 2500.0, &[0.3, 0.7], 1e-3);
        assert!((g[0] - 0.3).abs() < 1e-15 && (g[1] - 0.7).abs() < 1e-15);
        assert_eq!(service_composition(&[1.0, 3.0], 0.0, &[0.3, 0.7], 1e-3), vec![0.25, 0.75]);
        assert_eq!(service_composition(&[0.0, 0.0], 0.0, &[0.3, 0.7], 1e-3), vec![0.3, 0.7]);
    }

    #[test]
    fn full_drain_with_mismatched_composition_stays_nonnegative() {
        let step = 1e-3;
        let partial = [2.0, 0.0];
        let (q_in, g_in) = (1000.0, [0.0, 1.0]);
        let g_out = service_composition(&partial, q_in, &g_in, step);
        let w: f64 = partial.iter().sum();
        let out = saf_outflow(q_in, w, step, 1e9, 1.0);
        let next = step_partial_queues(&partial, &g_in, q_in, &g_out, out, step);
        assert!(next.partial.iter().all(|w| *w >= 0.0));
        assert!(next.partial.iter().sum::<f64>() < 1e-12);
    }
}
