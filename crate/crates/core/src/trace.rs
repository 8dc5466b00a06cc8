//! Per-step trace rows and sinks.

use std::io::{self, Write};

pub const TRACE_HEADER: &str =
    "time_h,entity,section,rho_veh_km_lane,v_km_h,q_veh_h,q_veh_h_lane,w_veh,l_st_veh,w_st_veh";

/// One trace row. Columns that do not apply to the entity are `None` and
/// written as empty fields.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TraceRecord {
    pub step: u64,
    pub time_h: f64,
    pub entity: String,
    /// 1-based section index for freeway links.
    pub section: Option<u32>,
    pub density: Option<f64>,
    pub speed: Option<f64>,
    pub flow: Option<f64>,
    pub flow_per_lane: Option<f64>,
    pub queue: Option<f64>,
    pub occupancy: Option<f64>,
    pub exit_queue: Option<f64>,
}

impl TraceRecord {
    pub fn to_csv_line(&self) -> String {
        fn opt<T: ToString>(v: Option<T>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.time_h,
            self.entity,
            opt(self.section),
            opt(self.density),
            opt(self.speed),
            opt(self.flow),
            opt(self.flow_per_lane),
            opt(self.queue),
            opt(self.occupancy),
            opt(self.exit_queue),
        )
    }
}

pub trait TraceSink {
    fn record(&mut self, rec: &TraceRecord) -> io::Result<()>;

    fn finish(&mut self) -> io::Result<()> {
        Ok(())
    }
}

impl TraceSink for Vec<TraceRecord> {
    fn record(&mut self, rec: &TraceRecord) -> io::Result<()> {
        self.push(rec.clone());
        Ok(())
    }
}

/// Writes the trace as CSV with [`TRACE_HEADER`].
pub struct CsvTrace<W: Write> {
    out: W,
    header_written: bool,
}

impl<W: Write> CsvTrace<W> {
    pub fn new(out: W) -> Self {
        CsvTrace { out, header_written: false }
    }

    pub fn into_inner(self) -> W {
        self.out
    }

    fn header(&mut self) -> io::Result<()> {
        if !self.header_written {
            writeln!(self.out, "{TRACE_HEADER}")?;
            self.header_written = true;
        }
        Ok(())
    }
}

impl<W: Write> TraceSink for CsvTrace<W> {
    fn record(&mut self, rec: &TraceRecord) -> io::Result<()> {
        self.header()?;
        writeln!(self.out, "{}", rec.to_csv_line())
    }

    fn finish(&mut self) -> io::Result<()> {
        self.header()?;
        self.out.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_columns_stay_empty() {
        let rec = TraceRecord {
            time_h: 0.5,
            entity: "o".into(),
            flow: Some(3600.0),
            queue: Some(12.5),
            ..Default::default()
        };
        assert_eq!(rec.to_csv_line(), "0.5,o,,,,3600,,12.5,,");
    }

    #[test]
    fn csv_sink_writes_header_once() {
        let mut sink = CsvTrace::new(Vec::new());
        let rec = TraceRecord::default();
        sink.record(&rec).unwrap();
        sink.record(&rec).unwrap();
        sink.finish().unwrap();
        let text = String::from_utf8(sink.into_inner()).unwrap();
        assert_eq!(text.lines().filter(|l| *l == TRACE_HEADER).count(), 1);
        assert_eq!(text.lines().count(), 3);
    }
}
