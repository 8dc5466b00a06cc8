//! Per-section dynamics of freeway links.
//!
//! Densities are per lane (veh/km/lane), speeds in km/h and all flows are
//! total flows across the lanes of a link (veh/h).

use crate::network::FreewayParams;

/// Density below which a section is treated as empty when deriving its
/// composition rates.
pub const EMPTY_DENSITY: f64 = 1e-9;

/// State of one section at step `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct SectionState {
    pub density: f64,
    pub speed: f64,
    /// Partial densities, aligned with the destination list of the link.
    pub partial: Vec<f64>,
    /// Composition rates carried from the last non-empty step.
    pub composition: Vec<f64>,
}

impl SectionState {
    /// Section at density `density` moving at the desired speed, with the
    /// given composition.
    pub fn equilibrium(density: f64, composition: Vec<f64>, params: &FreewayParams) -> Self {
        let partial = composition.iter().map(|g| g * density).collect();
        SectionState { density, speed: desired_speed(density, params), partial, composition }
    }
}

/// Quantities entering a section's update from its neighbours.
#[derive(Clone, Debug, PartialEq)]
pub struct SectionBoundary {
    /// Total inflow from the upstream section or node.
    pub inflow: f64,
    /// Composition of the inflow, aligned with the link's destinations.
    pub inflow_composition: Vec<f64>,
    /// Speed of the upstream section.
    pub upstream_speed: f64,
    /// Density of the downstream section.
    pub downstream_density: f64,
}

/// Equilibrium speed for a given density, floored at the minimum speed.
pub fn desired_speed(density: f64, p: &FreewayParams) -> f64 {
    let ratio = density / p.critical_density;
    let v = p.free_flow_speed * (-(ratio.powf(p.exponent)) / p.exponent).exp();
    v.max(p.min_speed)
}

/// Total flow leaving a section.
pub fn section_flow(s: &SectionState, lanes: u32) -> f64 {
    s.density * s.speed * f64::from(lanes)
}

/// Conservation update of the section density, before any clamping.
pub fn density_update(density: f64, inflow: f64, outflow: f64, length: f64, lanes: u32, step: f64) -> f64 {
    density + step / (length * f64::from(lanes)) * (inflow - outflow)
}

/// Result of a density update: the clamped value and whether clamping was needed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Clamped {
    pub value: f64,
    pub clamped: bool,
}

pub fn step_density(density: f64, inflow: f64, outflow: f64, length: f64, lanes: u32, step: f64) -> Clamped {
    let raw = density_update(density, inflow, outflow, length, lanes, step);
    if raw < 0.0 {
        Clamped { value: 0.0, clamped: true }
    } else {
        Clamped { value: raw, clamped: false }
    }
}

/// Speed update with relaxation, convection and anticipation terms.
/// The minimum speed floor is applied to the complete update.
pub fn step_speed(s: &SectionState, b: &SectionBoundary, p: &FreewayParams, length: f64, step: f64) -> f64 {
    let v = s.speed;
    let relaxation = step / p.relaxation_time * (desired_speed(s.density, p) - v);
    let convection = step / length * v * (b.upstream_speed - v);
    let anticipation = p.anticipation * step * (b.downstream_density - s.density)
        / (p.relaxation_time * length * (s.density + p.stability));
    (v + relaxation + convection - anticipation).max(p.min_speed)
}

/// Partial densities and composition after one step.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialUpdate {
    pub partial: Vec<f64>,
    pub composition: Vec<f64>,
    /// Number of partial densities that had to be clamped at zero.
    pub clamps: usize,
}

/// Updates the per-destination densities of a section. `new_density` is the
/// already updated total density, used for the composition rates; when it is
/// (nearly) empty the previous composition is kept.
#[allow(clippy::too_many_arguments)]
pub fn step_partial_densities(
    s: &SectionState,
    inflow: f64,
    inflow_composition: &[f64],
    outflow: f64,
    new_density: f64,
    length: f64,
    lanes: u32,
    step: f64,
) -> PartialUpdate {
    let factor = step / (length * f64::from(lanes));
    let mut clamps = 0;
    let partial: Vec<f64> = s
        .partial
        .iter()
        .zip(inflow_composition)
        .zip(&s.composition)
        .map(|((rho_j, g_in), g_out)| {
            let next = rho_j + factor * (g_in * inflow - g_out * outflow);
            if next < 0.0 {
                clamps += 1;
                0.0
            } else {
                next
            }
        })
        .collect();
    let composition = composition_of(&partial, new_density, &s.composition);
    PartialUpdate { partial, composition, clamps }
}

/// Composition `parts / total`, falling back to `previous` when the total is
/// below [`EMPTY_DENSITY`].
pub(crate) fn composition_of(parts: &[f64], total: f64, previous: &[f64]) -> Vec<f64> {
    if total < EMPTY_DENSITY {
        return previous.to_vec();
    }
    let sum: f64 = parts.iter().sum();
    if sum <= 0.0 {
        return previous.to_vec();
    }
    // Normalise by the sum of the parts so the rates add up to one even when
    // the partition carries rounding error.
    parts.iter().map(|p| p / sum).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table2() -> FreewayParams {
        FreewayParams::default()
    }

    #[test]
    fn desired_speed_free_flow_at_zero_density() {
        assert_eq!(desired_speed(0.0, &table2()), 102.0);
    }

    #[test]
    fn desired_speed_decreasing() {
        let p = table2();
        assert!(desired_speed(25.0, &p) < desired_speed(20.0, &p));
        assert!(desired_speed(20.0, &p) < desired_speed(19.999, &p));
    }

    #[test]
    fn desired_speed_floor() {
        let p = table2();
        assert_eq!(desired_speed(200.0, &p), p.min_speed);
    }

    #[test]
    fn flow_of_empty_road_is_zero() {
        let s = SectionState::equilibrium(0.0, vec![1.0], &table2());
        assert_eq!(section_flow(&s, 3), 0.0);
    }

    #[test]
    fn zero_net_flux_keeps_density() {
        let r = step_density(17.5, 1234.0, 1234.0, 0.3, 3, 1.0 / 600.0);
        assert_eq!(r.value, 17.5);
        assert!(!r.clamped);
    }

    #[test]
    fn empty_section_without_inflow_stays_empty() {
        let r = step_density(0.0, 0.0, 0.0, 0.3, 3, 1.0 / 600.0);
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn negative_density_is_clamped() {
        let r = step_density(0.1, 0.0, 10_000.0, 0.3, 3, 1.0 / 600.0);
        assert!(r.clamped);
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn equilibrium_is_fixed_point_of_speed_update() {
        let p = table2();
        let s = SectionState::equilibrium(14.0, vec![1.0], &p);
        let b = SectionBoundary {
            inflow: 0.0,
            inflow_composition: vec![1.0],
            upstream_speed: s.speed,
            downstream_density: s.density,
        };
        assert_eq!(step_speed(&s, &b, &p, 0.3, 2.0e-5), s.speed);
    }

    #[test]
    fn congestion_ahead_slows_traffic() {
        let p = table2();
        let s = SectionState::equilibrium(14.0, vec![1.0], &p);
        let b = SectionBoundary {
            inflow: 0.0,
            inflow_composition: vec![1.0],
            upstream_speed: s.speed,
            downstream_density: 25.0,
        };
        assert!(step_speed(&s, &b, &p, 0.3, 2.0e-5) < s.speed);
    }

    #[test]
    fn single_destination_composition_is_one() {
        let s = SectionState::equilibrium(12.0, vec![1.0], &table2());
        let u = step_partial_densities(&s, 900.0, &[1.0], 2400.0, 11.0, 0.3, 3, 1e-4);
        assert_eq!(u.composition.len(), 1);
        assert!((u.composition[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_split_is_preserved() {
        let s = SectionState::equilibrium(12.0, vec![0.5, 0.5], &table2());
        let u = step_partial_densities(&s, 3100.0, &[0.5, 0.5], 1700.0, 13.0, 0.3, 3, 1e-4);
        assert_eq!(u.composition, vec![0.5, 0.5]);
    }

    #[test]
    fn empty_section_keeps_previous_composition() {
        let s = SectionState { density: 0.0, speed: 102.0, partial: vec![0.0, 0.0], composition: vec![0.3, 0.7] };
        let u = step_partial_densities(&s, 0.0, &[0.5, 0.5], 0.0, 0.0, 0.3, 3, 1e-4);
        assert_eq!(u.composition, vec![0.3, 0.7]);
    }
}
