//! Network description: links, nodes, stations and their parameters.
//!
//! A [`NetworkSpec`] is plain data and doubles as the scenario file schema.
//! [`validate`] reports every violated constraint; a spec with an empty
//! report can be compiled into a [`Topology`] and simulated.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::demand::DemandProfile;
use crate::node::SplitTable;

const SUM_TOLERANCE: f64 = 1e-9;

/// Fundamental-diagram and speed-dynamics parameters of a freeway link.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreewayParams {
    /// km/h
    pub free_flow_speed: f64,
    /// veh/km/lane
    pub critical_density: f64,
    /// veh/km/lane
    pub jam_density: f64,
    pub exponent: f64,
    /// h
    pub relaxation_time: f64,
    /// Anticipation constant, km²/h.
    pub anticipation: f64,
    /// Stability constant in the anticipation denominator, veh/km/lane.
    pub stability: f64,
    /// Speed floor, km/h.
    #[serde(default = "default_min_speed")]
    pub min_speed: f64,
    /// Merging-term coefficient (h/km). Accepted but not used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub merging_coeff: Option<f64>,
    /// Lane-drop-term coefficient (h/km). Accepted but not used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lane_drop_coeff: Option<f64>,
}

fn default_min_speed() -> f64 {
    7.0
}

impl Default for FreewayParams {
    fn default() -> Self {
        FreewayParams {
            free_flow_speed: 102.0,
            critical_density: 20.0,
            jam_density: 30.0,
            exponent: 2.34,
            relaxation_time: 0.005,
            anticipation: 60.0,
            stability: 40.0,
            min_speed: default_min_speed(),
            merging_coeff: None,
            lane_drop_coeff: None,
        }
    }
}

impl FreewayParams {
    /// Maximum equilibrium flow per lane, reached at the critical density.
    pub fn capacity_per_lane(&self) -> f64 {
        self.critical_density * crate::freeway::desired_speed(self.critical_density, self)
    }

    fn check(&self, out: &mut Vec<String>) {
        let p = self;
        let finite = [
            p.free_flow_speed,
            p.critical_density,
            p.jam_density,
            p.exponent,
            p.relaxation_time,
            p.anticipation,
            p.stability,
            p.min_speed,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            out.push("parameters must be finite".into());
            return;
        }
        if !(p.critical_density > 0.0 && p.critical_density < p.jam_density) {
            out.push("need 0 < critical_density < jam_density".into());
        }
        if p.free_flow_speed <= 0.0 {
            out.push("free_flow_speed must be positive".into());
        }
        if p.exponent <= 0.0 {
            out.push("exponent must be positive".into());
        }
        if p.relaxation_time <= 0.0 {
            out.push("relaxation_time must be positive".into());
        }
        if p.stability <= 0.0 {
            out.push("stability must be positive".into());
        }
        if p.anticipation < 0.0 {
            out.push("anticipation must be non-negative".into());
        }
        if !(p.min_speed >= 0.0 && p.min_speed < p.free_flow_speed) {
            out.push("need 0 <= min_speed < free_flow_speed".into());
        }
    }
}

/// Piecewise-constant schedule over simulation steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    /// Value before the first change.
    #[serde(default = "one")]
    pub value: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub changes: Vec<ScheduleChange>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleChange {
    pub step: u64,
    pub value: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::constant(1.0)
    }
}

impl Schedule {
    pub fn constant(value: f64) -> Self {
        Schedule { value, changes: Vec::new() }
    }

    pub fn at(&self, k: u64) -> f64 {
        self.changes.iter().take_while(|c| c.step <= k).last().map_or(self.value, |c| c.value)
    }

    fn values(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(self.value).chain(self.changes.iter().map(|c| c.value))
    }

    fn is_sorted(&self) -> bool {
        self.changes.windows(2).all(|w| w[0].step < w[1].step)
    }
}

/// Initial conditions of a freeway link. Density and speed vectors hold one
/// value per section or a single value for all sections.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionInit {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<Vec<f64>>,
    /// Composition per destination, shared by all sections.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub composition: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreewayLink {
    pub id: String,
    pub sections: u32,
    /// km
    pub section_length: f64,
    pub lanes: u32,
    #[serde(default)]
    pub params: FreewayParams,
    /// Destinations reachable from this link.
    pub destinations: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<SectionInit>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueueKind {
    Saf,
    Origin,
}

/// Store-and-forward or origin link.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueueLinkSpec {
    pub id: String,
    pub kind: QueueKind,
    /// Maximum outflow, veh/h.
    pub max_flow: f64,
    pub destinations: Vec<String>,
    #[serde(default)]
    pub metering: Schedule,
    /// Demand entering an origin link.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demand: Option<DemandProfile>,
    /// Destination shares of the demand, aligned with `destinations`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demand_composition: Option<Vec<f64>>,
    /// Initial partial queues, aligned with `destinations`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_queue: Option<Vec<f64>>,
    /// Queue length above which a diagnostic is raised. No cap is imposed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_queue: Option<f64>,
}

/// Junction between links. `splits[destination][out_link]` gives the
/// splitting rates; missing entries are zero. A node with a single
/// outgoing link may omit its splits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: String,
    pub in_links: Vec<String>,
    pub out_links: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub splits: BTreeMap<String, BTreeMap<String, f64>>,
    /// Splitting rates taking effect from a given step onwards.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub split_changes: Vec<SplitChange>,
}

pub type Splits = BTreeMap<String, BTreeMap<String, f64>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitChange {
    pub step: u64,
    pub splits: Splits,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationInit {
    #[serde(default)]
    pub occupancy: f64,
    #[serde(default)]
    pub exit_queue: f64,
    /// Entry flows of the `dwell_steps` steps before the start, oldest first.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<f64>,
}

/// Service station fed by an entry ramp and discharging onto an exit ramp.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationSpec {
    pub id: String,
    /// Freeway link whose outflow enters the station.
    pub entry_ramp: String,
    /// Freeway link receiving the station outflow.
    pub exit_ramp: String,
    /// Dwell time in simulation steps.
    pub dwell_steps: u64,
    /// Merge-back capacity, veh/h.
    pub capacity_flow: f64,
    /// veh
    pub max_occupancy: f64,
    #[serde(default)]
    pub metering: Schedule,
    /// Destination assigned to vehicles leaving the station.
    pub exit_destination: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<StationInit>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    #[serde(default)]
    pub name: String,
    /// Step length, h.
    pub step: f64,
    /// Number of simulated steps.
    pub horizon: u64,
    /// Destination links and stations.
    pub destinations: Vec<String>,
    #[serde(default)]
    pub freeway: Vec<FreewayLink>,
    #[serde(default)]
    pub queue: Vec<QueueLinkSpec>,
    #[serde(default)]
    pub node: Vec<NodeSpec>,
    #[serde(default)]
    pub station: Vec<StationSpec>,
}

impl NetworkSpec {
    pub fn freeway_link(&self, id: &str) -> Option<&FreewayLink> {
        self.freeway.iter().find(|f| f.id == id)
    }

    pub fn freeway_link_mut(&mut self, id: &str) -> Option<&mut FreewayLink> {
        self.freeway.iter_mut().find(|f| f.id == id)
    }

    pub fn queue_link(&self, id: &str) -> Option<&QueueLinkSpec> {
        self.queue.iter().find(|q| q.id == id)
    }

    pub fn queue_link_mut(&mut self, id: &str) -> Option<&mut QueueLinkSpec> {
        self.queue.iter_mut().find(|q| q.id == id)
    }

    pub fn station(&self, id: &str) -> Option<&StationSpec> {
        self.station.iter().find(|s| s.id == id)
    }

    pub fn station_mut(&mut self, id: &str) -> Option<&mut StationSpec> {
        self.station.iter_mut().find(|s| s.id == id)
    }

    /// Total demand over all origins at step `k`.
    pub fn total_demand(&self, k: u64) -> f64 {
        self.queue.iter().filter_map(|q| q.demand.as_ref()).map(|d| d.demand(k)).sum()
    }

    /// Sum of the origin capacities.
    pub fn origin_capacity(&self) -> f64 {
        self.queue.iter().filter(|q| q.kind == QueueKind::Origin).map(|q| q.max_flow).sum()
    }
}

/// One violated constraint.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub entity: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.entity, self.message)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, entity: &str, message: impl Into<String>) {
        self.violations.push(Violation { entity: entity.to_string(), message: message.into() });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Reports every constraint the spec violates. Empty iff the spec can be run.
pub fn validate(spec: &NetworkSpec) -> ValidationReport {
    analyse(spec).0
}

/// Reference to a link by kind and position in the spec.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LinkRef {
    Freeway(usize),
    Queue(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Upstream {
    Node(usize),
    Station(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Downstream {
    Node(usize),
    Station(usize),
    Exit,
}

#[derive(Clone, Debug)]
pub struct FreewayTopo {
    pub destinations: Vec<usize>,
    pub upstream: Upstream,
    pub downstream: Downstream,
}

#[derive(Clone, Debug)]
pub struct QueueTopo {
    pub destinations: Vec<usize>,
    pub upstream: Option<usize>,
    pub downstream: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct NodeTopo {
    pub inputs: Vec<LinkRef>,
    pub outputs: Vec<LinkRef>,
    /// Split tables with the step from which they apply, ascending.
    pub splits: Vec<(u64, SplitTable)>,
}

impl NodeTopo {
    pub fn splits_at(&self, k: u64) -> &SplitTable {
        let idx = self.splits.iter().take_while(|(s, _)| *s <= k).count().max(1) - 1;
        &self.splits[idx].1
    }
}

#[derive(Clone, Debug)]
pub struct StationTopo {
    pub entry: usize,
    pub exit: usize,
    /// Position of the station's exit destination in the exit ramp's list.
    pub exit_destination: usize,
}

/// Index-based view of a validated spec used by the simulators.
#[derive(Clone, Debug)]
pub struct Topology {
    pub destinations: Vec<String>,
    pub freeway: Vec<FreewayTopo>,
    pub queue: Vec<QueueTopo>,
    pub nodes: Vec<NodeTopo>,
    pub stations: Vec<StationTopo>,
    /// Node evaluation order: every queue link feeding a node is fed by an
    /// earlier node or is an origin.
    pub node_order: Vec<usize>,
}

impl Topology {
    pub fn link_destinations(&self, link: LinkRef) -> &[usize] {
        match link {
            LinkRef::Freeway(i) => &self.freeway[i].destinations,
            LinkRef::Queue(i) => &self.queue[i].destinations,
        }
    }
}

/// Compiles a spec into its topology, or returns the validation report.
pub fn compile(spec: &NetworkSpec) -> Result<Topology, ValidationReport> {
    match analyse(spec) {
        (report, Some(topo)) if report.is_ok() => Ok(topo),
        (report, _) => Err(report),
    }
}

fn analyse(spec: &NetworkSpec) -> (ValidationReport, Option<Topology>) {
    let mut r = ValidationReport::default();

    if !(spec.step.is_finite() && spec.step > 0.0) {
        r.push("network", "step must be positive");
    }

    // Identifiers.
    let mut links: HashMap<&str, LinkRef> = HashMap::new();
    let mut seen: HashSet<&str> = HashSet::new();
    let all_ids = spec
        .freeway
        .iter()
        .map(|f| f.id.as_str())
        .chain(spec.queue.iter().map(|q| q.id.as_str()))
        .chain(spec.station.iter().map(|s| s.id.as_str()));
    for id in all_ids {
        if !seen.insert(id) {
            r.push(id, "duplicate identifier");
        }
    }
    for (i, f) in spec.freeway.iter().enumerate() {
        links.entry(&f.id).or_insert(LinkRef::Freeway(i));
    }
    for (i, q) in spec.queue.iter().enumerate() {
        links.entry(&q.id).or_insert(LinkRef::Queue(i));
    }
    let stations: HashMap<&str, usize> = spec.station.iter().enumerate().map(|(i, s)| (s.id.as_str(), i)).collect();
    let node_ids: HashSet<&str> = spec.node.iter().map(|n| n.id.as_str()).collect();
    if node_ids.len() != spec.node.len() {
        r.push("network", "duplicate node identifier");
    }

    let mut dest_index: HashMap<&str, usize> = HashMap::new();
    for (i, d) in spec.destinations.iter().enumerate() {
        if dest_index.insert(d, i).is_some() {
            r.push(d, "destination declared twice");
        }
        if !links.contains_key(d.as_str()) && !stations.contains_key(d.as_str()) {
            r.push(d, "destination is not a declared link or station");
        }
    }
    let resolve_dests = |owner: &str, dests: &[String], r: &mut ValidationReport| -> Vec<usize> {
        if dests.is_empty() {
            r.push(owner, "destination set must be non-empty");
        }
        let mut uniq = HashSet::new();
        dests
            .iter()
            .filter_map(|d| {
                if !uniq.insert(d) {
                    r.push(owner, format!("destination {d} listed twice"));
                }
                match dest_index.get(d.as_str()) {
                    Some(&j) => Some(j),
                    None => {
                        r.push(owner, format!("unknown destination {d}"));
                        None
                    }
                }
            })
            .collect()
    };

    // Per-link checks.
    let mut freeway_dests = Vec::with_capacity(spec.freeway.len());
    for f in &spec.freeway {
        let mut msgs = Vec::new();
        f.params.check(&mut msgs);
        if f.sections < 1 {
            msgs.push("needs at least one section".into());
        }
        if !(f.section_length.is_finite() && f.section_length > 0.0) {
            msgs.push("section_length must be positive".into());
        }
        if f.lanes < 1 {
            msgs.push("needs at least one lane".into());
        }
        if spec.step * f.params.free_flow_speed > f.section_length {
            msgs.push(format!(
                "CFL condition violated: step * free_flow_speed = {} km exceeds section length {} km",
                spec.step * f.params.free_flow_speed,
                f.section_length
            ));
        }
        if f.params.merging_coeff.is_some() || f.params.lane_drop_coeff.is_some() {
            log::warn!("{}: merging/lane-drop coefficients are ignored", f.id);
        }
        if let Some(init) = &f.initial {
            let n = f.sections as usize;
            for (name, v) in [("density", &init.density), ("speed", &init.speed)] {
                if let Some(v) = v {
                    if v.len() != 1 && v.len() != n {
                        msgs.push(format!("initial {name} needs 1 or {n} values"));
                    }
                    if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                        msgs.push(format!("initial {name} must be finite and non-negative"));
                    }
                }
            }
            if let Some(c) = &init.composition {
                check_composition(c, f.destinations.len(), "initial composition", &mut msgs);
            }
        }
        for m in msgs {
            r.push(&f.id, m);
        }
        freeway_dests.push(resolve_dests(&f.id, &f.destinations, &mut r));
    }
    let mut queue_dests = Vec::with_capacity(spec.queue.len());
    for q in &spec.queue {
        let mut msgs = Vec::new();
        if !(q.max_flow.is_finite() && q.max_flow > 0.0) {
            msgs.push("max_flow must be positive".into());
        }
        check_schedule(&q.metering, "metering", &mut msgs);
        match (q.kind, &q.demand) {
            (QueueKind::Origin, None) => msgs.push("origin link needs a demand profile".into()),
            (QueueKind::Saf, Some(_)) => msgs.push("only origin links take a demand profile".into()),
            (_, Some(d)) => msgs.extend(d.check()),
            _ => {}
        }
        match (q.kind, &q.demand_composition) {
            (QueueKind::Origin, Some(c)) => check_composition(c, q.destinations.len(), "demand_composition", &mut msgs),
            (QueueKind::Origin, None) if q.destinations.len() > 1 => {
                msgs.push("demand_composition required with several destinations".into())
            }
            (QueueKind::Saf, Some(_)) => msgs.push("only origin links take a demand composition".into()),
            _ => {}
        }
        if let Some(w) = &q.initial_queue {
            if w.len() != q.destinations.len() {
                msgs.push("initial_queue needs one value per destination".into());
            }
            if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                msgs.push("initial_queue must be finite and non-negative".into());
            }
        }
        for m in msgs {
            r.push(&q.id, m);
        }
        queue_dests.push(resolve_dests(&q.id, &q.destinations, &mut r));
    }

    // Wiring.
    let mut upstream_node: HashMap<LinkRef, usize> = HashMap::new();
    let mut downstream_node: HashMap<LinkRef, usize> = HashMap::new();
    let mut node_links: Vec<(Vec<LinkRef>, Vec<LinkRef>)> = Vec::new();
    for (p, n) in spec.node.iter().enumerate() {
        if n.in_links.is_empty() || n.out_links.is_empty() {
            r.push(&n.id, "node needs incoming and outgoing links");
        }
        let mut ins = Vec::new();
        let mut outs = Vec::new();
        for id in &n.in_links {
            match links.get(id.as_str()) {
                Some(&l) => {
                    if downstream_node.insert(l, p).is_some() {
                        r.push(id, "link is an incoming link of several nodes");
                    }
                    ins.push(l);
                }
                None => r.push(&n.id, format!("unknown incoming link {id}")),
            }
        }
        for id in &n.out_links {
            match links.get(id.as_str()) {
                Some(&l) => {
                    if upstream_node.insert(l, p).is_some() {
                        r.push(id, "link is an outgoing link of several nodes");
                    }
                    if let LinkRef::Queue(i) = l {
                        if spec.queue[i].kind == QueueKind::Origin {
                            r.push(id, "origin link cannot be fed by a node");
                        }
                    }
                    outs.push(l);
                }
                None => r.push(&n.id, format!("unknown outgoing link {id}")),
            }
        }
        node_links.push((ins, outs));
    }

    let mut station_topo = Vec::new();
    let mut entry_ramps: HashMap<usize, usize> = HashMap::new();
    let mut exit_ramps: HashMap<usize, usize> = HashMap::new();
    for (s, st) in spec.station.iter().enumerate() {
        let mut msgs: Vec<String> = Vec::new();
        if !(st.capacity_flow.is_finite() && st.capacity_flow > 0.0) {
            msgs.push("capacity_flow must be positive".into());
        }
        if !(st.max_occupancy.is_finite() && st.max_occupancy > 0.0) {
            msgs.push("max_occupancy must be positive".into());
        }
        check_schedule(&st.metering, "metering", &mut msgs);
        if !dest_index.contains_key(st.id.as_str()) {
            msgs.push("station must be declared as a destination".into());
        }
        if let Some(init) = &st.initial {
            if init.history.len() as u64 != st.dwell_steps && !init.history.is_empty() {
                msgs.push("initial history needs dwell_steps values".into());
            }
            if init.history.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                msgs.push("initial history must be finite and non-negative".into());
            }
            let dwelling: f64 = init.history.iter().sum::<f64>() * spec.step;
            if !(init.exit_queue >= 0.0 && init.occupancy <= st.max_occupancy) {
                msgs.push("need 0 <= exit_queue and occupancy <= max_occupancy".into());
            }
            if (init.occupancy - init.exit_queue - dwelling).abs() > 1e-9 * init.occupancy.max(1.0) {
                msgs.push("initial occupancy must equal exit_queue plus the vehicles in the history".into());
            }
        }
        let entry = match links.get(st.entry_ramp.as_str()) {
            Some(LinkRef::Freeway(i)) => Some(*i),
            _ => {
                msgs.push(format!("entry ramp {} is not a freeway link", st.entry_ramp));
                None
            }
        };
        let exit = match links.get(st.exit_ramp.as_str()) {
            Some(LinkRef::Freeway(i)) => Some(*i),
            _ => {
                msgs.push(format!("exit ramp {} is not a freeway link", st.exit_ramp));
                None
            }
        };
        let mut exit_dest = None;
        if let Some(e) = entry {
            if entry_ramps.insert(e, s).is_some() {
                msgs.push("entry ramp feeds several stations".into());
            }
            if downstream_node.contains_key(&LinkRef::Freeway(e)) {
                msgs.push("entry ramp must not also feed a node".into());
            }
            if spec.freeway[e].destinations != [st.id.clone()] {
                msgs.push("entry ramp destinations must be exactly the station".into());
            }
        }
        if let Some(x) = exit {
            if exit_ramps.insert(x, s).is_some() {
                msgs.push("exit ramp fed by several stations".into());
            }
            if upstream_node.contains_key(&LinkRef::Freeway(x)) {
                msgs.push("exit ramp must not also be fed by a node".into());
            }
            exit_dest = spec.freeway[x].destinations.iter().position(|d| *d == st.exit_destination);
            if exit_dest.is_none() {
                msgs.push("exit_destination must be a destination of the exit ramp".into());
            }
        }
        for m in msgs {
            r.push(&st.id, m);
        }
        if let (Some(entry), Some(exit), Some(exit_destination)) = (entry, exit, exit_dest) {
            station_topo.push(StationTopo { entry, exit, exit_destination });
        }
    }

    let mut freeway_topo = Vec::new();
    for (i, f) in spec.freeway.iter().enumerate() {
        let l = LinkRef::Freeway(i);
        let upstream = match (upstream_node.get(&l), exit_ramps.get(&i)) {
            (Some(&p), None) => Some(Upstream::Node(p)),
            (None, Some(&s)) => Some(Upstream::Station(s)),
            _ => {
                r.push(&f.id, "freeway link needs exactly one upstream node or station");
                None
            }
        };
        let downstream = match (downstream_node.get(&l), entry_ramps.get(&i)) {
            (Some(&p), None) => Downstream::Node(p),
            (None, Some(&s)) => Downstream::Station(s),
            _ => {
                check_exit(&f.id, &f.destinations, &dest_index, &mut r);
                Downstream::Exit
            }
        };
        if let Some(upstream) = upstream {
            freeway_topo.push(FreewayTopo { destinations: freeway_dests[i].clone(), upstream, downstream });
        }
    }
    let mut queue_topo = Vec::new();
    for (i, q) in spec.queue.iter().enumerate() {
        let l = LinkRef::Queue(i);
        let upstream = upstream_node.get(&l).copied();
        if q.kind == QueueKind::Saf && upstream.is_none() {
            r.push(&q.id, "store-and-forward link needs an upstream node");
        }
        let downstream = downstream_node.get(&l).copied();
        if downstream.is_none() {
            check_exit(&q.id, &q.destinations, &dest_index, &mut r);
        }
        queue_topo.push(QueueTopo { destinations: queue_dests[i].clone(), upstream, downstream });
    }

    // Splitting rates.
    let n_dest = spec.destinations.len();
    let mut nodes = Vec::new();
    for (p, n) in spec.node.iter().enumerate() {
        let (ins, outs) = &node_links[p];
        let link_dests = |l: &LinkRef| -> &[usize] {
            match l {
                LinkRef::Freeway(i) => &freeway_dests[*i],
                LinkRef::Queue(i) => &queue_dests[*i],
            }
        };
        let mut reaching: Vec<usize> = ins.iter().flat_map(|l| link_dests(l).iter().copied()).collect();
        reaching.sort_unstable();
        reaching.dedup();
        let mut tables = Vec::new();
        let ordered = n.split_changes.windows(2).all(|w| w[0].step < w[1].step);
        if !ordered || n.split_changes.first().is_some_and(|c| c.step == 0) {
            r.push(&n.id, "split_changes must have increasing positive steps");
        }
        let stages = std::iter::once((0, &n.splits)).chain(n.split_changes.iter().map(|c| (c.step, &c.splits)));
        for (from, splits) in stages {
            let table = split_table(
                &n.id,
                splits,
                &n.out_links,
                outs,
                &reaching,
                n_dest,
                &spec.destinations,
                &dest_index,
                &link_dests,
                &mut r,
            );
            tables.push((from, table));
        }
        nodes.push(NodeTopo { inputs: ins.clone(), outputs: outs.clone(), splits: tables });
    }

    // Evaluation order: nodes whose queue inputs are already resolved first.
    let mut node_order = Vec::new();
    let mut done = vec![false; spec.node.len()];
    loop {
        let before = node_order.len();
        for p in 0..spec.node.len() {
            if done[p] {
                continue;
            }
            let ready = node_links[p].0.iter().all(|l| match l {
                LinkRef::Queue(i) => match upstream_node.get(l) {
                    Some(&u) => done[u],
                    None => spec.queue[*i].kind == QueueKind::Origin,
                },
                LinkRef::Freeway(_) => true,
            });
            if ready {
                done[p] = true;
                node_order.push(p);
            }
        }
        if node_order.len() == before {
            break;
        }
    }
    if node_order.len() != spec.node.len() {
        r.push("network", "store-and-forward links form a cycle without a freeway link");
    }

    let complete = freeway_topo.len() == spec.freeway.len() && station_topo.len() == spec.station.len();
    if !r.is_ok() || !complete {
        return (r, None);
    }
    let topo = Topology {
        destinations: spec.destinations.clone(),
        freeway: freeway_topo,
        queue: queue_topo,
        nodes,
        stations: station_topo,
        node_order,
    };
    (r, Some(topo))
}

fn check_exit(id: &str, dests: &[String], dest_index: &HashMap<&str, usize>, r: &mut ValidationReport) {
    if !dest_index.contains_key(id) {
        r.push(id, "link without downstream node must be a declared destination");
    } else if dests != [id.to_string()] {
        r.push(id, "destination link must list only itself as destination");
    }
}

fn check_composition(c: &[f64], n: usize, what: &str, msgs: &mut Vec<String>) {
    if c.len() != n {
        msgs.push(format!("{what} needs one value per destination"));
        return;
    }
    if c.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
        msgs.push(format!("{what} must be non-negative"));
    }
    if (c.iter().sum::<f64>() - 1.0).abs() > SUM_TOLERANCE {
        msgs.push(format!("{what} must sum to 1"));
    }
}

fn check_schedule(s: &Schedule, what: &str, msgs: &mut Vec<String>) {
    if s.values().any(|v| !(0.0..=1.0).contains(&v)) {
        msgs.push(format!("{what} rates must lie in [0, 1]"));
    }
    if !s.is_sorted() {
        msgs.push(format!("{what} changes must have increasing steps"));
    }
}

#[allow(clippy::too_many_arguments)]
fn split_table<'a>(
    node: &str,
    splits: &Splits,
    out_ids: &[String],
    outs: &[LinkRef],
    reaching: &[usize],
    n_dest: usize,
    dest_names: &[String],
    dest_index: &HashMap<&str, usize>,
    link_dests: &dyn Fn(&LinkRef) -> &'a [usize],
    r: &mut ValidationReport,
) -> SplitTable {
    let mut rates = vec![vec![0.0; outs.len()]; n_dest];
    if splits.is_empty() && outs.len() == 1 {
        for row in &mut rates {
            row[0] = 1.0;
        }
    } else {
        for (dest, row) in splits {
            let Some(&j) = dest_index.get(dest.as_str()) else {
                r.push(node, format!("splits name unknown destination {dest}"));
                continue;
            };
            for (out, &beta) in row {
                match out_ids.iter().position(|o| o == out) {
                    Some(d) => rates[j][d] = beta,
                    None => r.push(node, format!("splits name {out}, which is not an outgoing link")),
                }
            }
        }
    }
    for &j in reaching {
        let row = &rates[j];
        if row.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
            r.push(node, format!("splitting rates for {} must be non-negative", dest_names[j]));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            r.push(node, format!("splitting rates must sum to 1 for destination {} (got {sum})", dest_names[j]));
        }
        for (d, &beta) in row.iter().enumerate() {
            if beta > 0.0 && d < outs.len() && !link_dests(&outs[d]).contains(&j) {
                r.push(node, format!("destination {} routed to {}, which cannot reach it", dest_names[j], out_ids[d]));
            }
        }
    }
    SplitTable { rates }
}
