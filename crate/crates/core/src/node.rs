//! Destination-oriented node model: collects the flows leaving the incoming
//! links per destination and distributes them over the outgoing links with
//! the splitting rates.

/// Flow leaving one incoming link during the step.
#[derive(Clone, Copy, Debug)]
pub struct NodeInflow<'a> {
    pub flow: f64,
    /// Composition aligned with `destinations`.
    pub composition: &'a [f64],
    /// Global destination indices of the link.
    pub destinations: &'a [usize],
}

/// Splitting rates of a node for one step: `rates[j][d]` is the share of the
/// flow bound for destination `j` that leaves through outgoing link `d`.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitTable {
    pub rates: Vec<Vec<f64>>,
}

impl SplitTable {
    pub fn rate(&self, destination: usize, out: usize) -> f64 {
        self.rates[destination][out]
    }
}

/// Flow and composition handed to one outgoing link.
#[derive(Clone, Debug, PartialEq)]
pub struct OutFlow {
    pub flow: f64,
    /// Composition aligned with the outgoing link's destinations.
    pub composition: Vec<f64>,
}

/// Total flow entering the node.
pub fn total_node_flow(flows: impl IntoIterator<Item = f64>) -> f64 {
    flows.into_iter().sum()
}

/// Per-destination totals over all incoming links.
pub fn gather(inflows: &[NodeInflow<'_>], n_destinations: usize) -> Vec<f64> {
    let mut totals = vec![0.0; n_destinations];
    for inflow in inflows {
        for (&j, &g) in inflow.destinations.iter().zip(inflow.composition) {
            totals[j] += inflow.flow * g;
        }
    }
    totals
}

/// Distributes the per-destination totals over the outgoing links.
/// `out_destinations[d]` lists the global destinations of outgoing link `d`.
pub fn scatter(totals: &[f64], splits: &SplitTable, out_destinations: &[&[usize]]) -> Vec<OutFlow> {
    out_destinations
        .iter()
        .enumerate()
        .map(|(d, dests)| {
            let parts: Vec<f64> = dests.iter().map(|&j| splits.rate(j, d) * totals[j]).collect();
            let flow: f64 = parts.iter().sum();
            let composition = if flow > 0.0 {
                parts.iter().map(|p| p / flow).collect()
            } else {
                idle_composition(dests, |j| splits.rate(j, d) > 0.0)
            };
            OutFlow { flow, composition }
        })
        .collect()
}

/// Uniform composition over the destinations routed to a link, or over all
/// of its destinations when none is routed.
fn idle_composition(dests: &[usize], routed: impl Fn(usize) -> bool) -> Vec<f64> {
    let mask: Vec<bool> = dests.iter().map(|&j| routed(j)).collect();
    let n_routed = mask.iter().filter(|m| **m).count();
    if n_routed == 0 {
        let n = dests.len() as f64;
        return vec![1.0 / n; dests.len()];
    }
    mask.iter().map(|&m| if m { 1.0 / n_routed as f64 } else { 0.0 }).collect()
}
