//! Plot-ready series: one `time_h,<quantity>` file per requested quantity.

use std::fmt;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use metanet_core::{RunSummary, TraceRecord};

/// A traced variable of one entity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variable {
    /// Flow: per lane for freeway links, total otherwise.
    Flow,
    Density,
    Speed,
    /// Queue length of a queue link.
    Queue,
    /// Station occupancy.
    Occupancy,
    /// Station exit queue.
    ExitQueue,
    /// Station merge-back capacity.
    Capacity,
}

impl Variable {
    const PREFIXES: [(&'static str, Variable); 7] = [
        ("q", Variable::Flow),
        ("rho", Variable::Density),
        ("v", Variable::Speed),
        ("w", Variable::Queue),
        ("l", Variable::Occupancy),
        ("wst", Variable::ExitQueue),
        ("qmax", Variable::Capacity),
    ];

    fn prefix(self) -> &'static str {
        Self::PREFIXES.iter().find(|(_, v)| *v == self).unwrap().0
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Quantity {
    pub variable: Variable,
    pub entity: String,
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.variable.prefix(), self.entity)
    }
}

impl FromStr for Quantity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (prefix, entity) = s
            .split_once('_')
            .filter(|(_, e)| !e.is_empty())
            .ok_or_else(|| format!("`{s}` is not of the form <variable>_<entity>"))?;
        let variable = Variable::PREFIXES
            .iter()
            .find(|(p, _)| *p == prefix)
            .map(|(_, v)| *v)
            .ok_or_else(|| format!("unknown variable `{prefix}` (expected q, rho, v, w, l, wst or qmax)"))?;
        Ok(Quantity { variable, entity: entity.to_string() })
    }
}

/// Quantities plotted by default for a built-in scenario.
pub fn default_quantities(builtin: &str) -> Vec<Quantity> {
    let names: &[&str] = match builtin {
        "paper-fig4" => &["q_m4", "q_m5", "q_m6", "rho_m4", "rho_m5", "rho_m6"],
        "paper-fig3" => &["q_st", "qmax_st", "rho_s2", "q_s1", "l_st", "q_m1", "rho_s1", "q_m2", "rho_m2"],
        _ => &[],
    };
    names.iter().map(|n| n.parse().unwrap()).collect()
}

fn value(q: &Quantity, r: &TraceRecord) -> Option<f64> {
    let station_capacity = r.entity.strip_suffix(".q_max") == Some(q.entity.as_str());
    if r.entity != q.entity && !station_capacity {
        return None;
    }
    match q.variable {
        Variable::Capacity => station_capacity.then_some(r.flow).flatten(),
        _ if station_capacity => None,
        Variable::Flow => r.flow_per_lane.or(r.flow),
        Variable::Density => r.density,
        Variable::Speed => r.speed,
        Variable::Queue => r.queue,
        Variable::Occupancy => r.occupancy,
        Variable::ExitQueue => r.exit_queue,
    }
}

/// Extracts the `(time_h, value)` series of `q`. Freeway links report their
/// last section.
pub fn series(trace: &[TraceRecord], q: &Quantity) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut last_step = None;
    for r in trace {
        if let Some(v) = value(q, r) {
            if last_step == Some(r.step) {
                out.last_mut().unwrap().1 = v;
            } else {
                out.push((r.time_h, v));
                last_step = Some(r.step);
            }
        }
    }
    out
}

/// Writes one series file per quantity and `summary.toml` into `dir`.
/// Returns the files written.
pub fn emit_plot_data(
    trace: &[TraceRecord],
    quantities: &[Quantity],
    summary: &RunSummary,
    dir: &Path,
) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for q in quantities {
        let points = series(trace, q);
        if points.is_empty() {
            log::warn!("{q}: no such series in the trace");
            continue;
        }
        let path = dir.join(format!("{q}.csv"));
        let mut w = BufWriter::new(fs::File::create(&path)?);
        writeln!(w, "time_h,{q}")?;
        for (t, v) in points {
            writeln!(w, "{t},{v}")?;
        }
        w.flush()?;
        written.push(path);
    }
    let path = dir.join("summary.toml");
    fs::write(&path, summary.to_toml())?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(step: u64, entity: &str) -> TraceRecord {
        TraceRecord { step, time_h: step as f64 * 0.5, entity: entity.into(), ..Default::default() }
    }

    #[test]
    fn quantity_names_round_trip() {
        for name in ["q_m5", "rho_s2", "v_m1", "w_o", "l_st", "wst_st", "qmax_st"] {
            assert_eq!(name.parse::<Quantity>().unwrap().to_string(), name);
        }
        assert!("x_m5".parse::<Quantity>().is_err());
        assert!("q_".parse::<Quantity>().is_err());
        assert!("m5".parse::<Quantity>().is_err());
    }

    #[test]
    fn flow_prefers_per_lane_and_last_section() {
        let mut a = rec(0, "m5");
        a.flow = Some(3000.0);
        a.flow_per_lane = Some(1000.0);
        let mut b = rec(0, "m5");
        b.flow_per_lane = Some(900.0);
        let mut c = rec(2, "o");
        c.flow = Some(2500.0);
        let trace = [a, b, c];
        assert_eq!(series(&trace, &"q_m5".parse().unwrap()), vec![(0.0, 900.0)]);
        assert_eq!(series(&trace, &"q_o".parse().unwrap()), vec![(1.0, 2500.0)]);
    }

    #[test]
    fn station_capacity_row() {
        let mut st = rec(0, "st");
        st.flow = Some(400.0);
        st.occupancy = Some(10.0);
        let mut cap = rec(0, "st.q_max");
        cap.flow = Some(1500.0);
        let trace = [st, cap];
        assert_eq!(series(&trace, &"qmax_st".parse().unwrap()), vec![(0.0, 1500.0)]);
        assert_eq!(series(&trace, &"q_st".parse().unwrap()), vec![(0.0, 400.0)]);
        assert_eq!(series(&trace, &"l_st".parse().unwrap()), vec![(0.0, 10.0)]);
    }
}
