use serde::{Deserialize, Serialize};

/// Symmetric piecewise-linear peak on top of a constant floor:
///
/// `d(k) = scale * max(base, peak - ramp_flow * |k - center_step| / ramp_steps)`
///
/// `scale` multiplies the whole profile, e.g. by the number of lanes when the
/// profile is expressed per lane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandProfile {
    pub base: f64,
    pub peak: f64,
    pub center_step: u64,
    pub ramp_flow: f64,
    pub ramp_steps: f64,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for DemandProfile {
    /// Peak-hour profile: 500 veh/h floor, 2500 veh/h peak at step 30000,
    /// changing by 1 veh/h every 9 steps.
    fn default() -> Self {
        DemandProfile { base: 500.0, peak: 2500.0, center_step: 30_000, ramp_flow: 1.0, ramp_steps: 9.0, scale: 1.0 }
    }
}

impl DemandProfile {
    /// Demand at step `k` in veh/h.
    pub fn demand(&self, k: u64) -> f64 {
        let distance = k.abs_diff(self.center_step) as f64;
        let ramp = self.peak - distance * self.ramp_flow / self.ramp_steps;
        self.scale * ramp.max(self.base)
    }

    pub fn max_demand(&self) -> f64 {
        self.scale * self.peak.max(self.base)
    }

    pub(crate) fn check(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, v) in [("base", self.base), ("peak", self.peak), ("scale", self.scale)] {
            if !(v.is_finite() && v >= 0.0) {
                out.push(format!("demand {name} must be finite and non-negative"));
            }
        }
        if !(self.ramp_steps.is_finite() && self.ramp_steps > 0.0) {
            out.push("demand ramp_steps must be positive".into());
        }
        if !(self.ramp_flow.is_finite() && self.ramp_flow >= 0.0) {
            out.push("demand ramp_flow must be finite and non-negative".into());
        }
        out
    }
}
