//! Per-control-step run log and its CSV form.
//!
//! The file starts with one metadata line,
//! `#schema=1;plan=x:y x:y ...;mssps=mssp1 mssp2 ...;dt=0.02`, followed by
//! a header row and one row per control step:
//!
//! `t,phase,true_x,true_y,true_psi,true_v,fused_x,fused_y,`
//! `mssp<i>_x,mssp<i>_y,mssp<i>_tcap` (per unit)`,yaw_rate_cmd`
//!
//! Empty cells mean "absent". A unit's columns are filled only on the step
//! its estimate arrived. Floats are written in shortest round-trip form.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::nodes::{Phase, VehicleStepOutput};

use super::HarnessError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsspCell {
    pub x: f64,
    pub y: f64,
    pub t_capture: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLogRow {
    pub t: f64,
    pub phase: Phase,
    pub true_x: f64,
    pub true_y: f64,
    pub true_psi: f64,
    pub true_v: f64,
    pub fused: Option<(f64, f64)>,
    /// One entry per unit, in [`RunLog::mssps`] order.
    pub mssp: Vec<Option<MsspCell>>,
    pub yaw_rate_cmd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub plan: Vec<(f64, f64)>,
    pub mssps: Vec<String>,
    pub dt: f64,
    pub rows: Vec<RunLogRow>,
}

impl RunLog {
    pub fn new(plan: Vec<(f64, f64)>, mssps: Vec<String>, dt: f64) -> Self {
        Self {
            plan,
            mssps,
            dt,
            rows: Vec::new(),
        }
    }

    /// Appends the row for one vehicle step.
    pub fn record(&mut self, t: f64, out: &VehicleStepOutput) {
        let mut cells = vec![None; self.mssps.len()];
        for e in &out.fresh {
            if let Some(i) = self.mssps.iter().position(|m| *m == e.mssp_id) {
                cells[i] = Some(MsspCell {
                    x: e.x,
                    y: e.y,
                    t_capture: e.t_capture,
                });
            }
        }
        self.rows.push(RunLogRow {
            t,
            phase: out.phase,
            true_x: out.state.pose.x,
            true_y: out.state.pose.y,
            true_psi: out.state.pose.psi,
            true_v: out.state.v,
            fused: out.fix.map(|f| (f.x, f.y)),
            mssp: cells,
            yaw_rate_cmd: out.command.yaw_rate_cmd,
        });
    }

    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = [
            "t", "phase", "true_x", "true_y", "true_psi", "true_v", "fused_x", "fused_y",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for m in &self.mssps {
            h.push(format!("{m}_x"));
            h.push(format!("{m}_y"));
            h.push(format!("{m}_tcap"));
        }
        h.push("yaw_rate_cmd".into());
        h
    }

    fn metadata_line(&self) -> String {
        let plan: Vec<String> = self.plan.iter().map(|(x, y)| format!("{x}:{y}")).collect();
        format!(
            "#schema={SCHEMA_VERSION};plan={};mssps={};dt={}",
            plan.join(" "),
            self.mssps.join(" "),
            self.dt
        )
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), HarnessError> {
        writeln!(w, "{}", self.metadata_line())?;
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(self.header())?;
        for r in &self.rows {
            let mut rec = vec![
                r.t.to_string(),
                r.phase.as_str().to_string(),
                r.true_x.to_string(),
                r.true_y.to_string(),
                r.true_psi.to_string(),
                r.true_v.to_string(),
                opt(r.fused.map(|f| f.0)),
                opt(r.fused.map(|f| f.1)),
            ];
            for c in &r.mssp {
                rec.push(opt(c.map(|c| c.x)));
                rec.push(opt(c.map(|c| c.y)));
                rec.push(opt(c.map(|c| c.t_capture)));
            }
            rec.push(r.yaw_rate_cmd.to_string());
            csv.write_record(&rec)?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), HarnessError> {
        let f = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn read_csv(path: &Path) -> Result<Self, HarnessError> {
        Self::read_from(std::fs::File::open(path)?)
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self, HarnessError> {
        let mut reader = BufReader::new(r);
        let mut first = String::new();
        reader.read_line(&mut first)?;
        let mut log = parse_metadata(first.trim_end())?;
        let mut csv = csv::Reader::from_reader(reader);
        let header: Vec<String> = csv.headers()?.iter().map(str::to_string).collect();
        if header != log.header() {
            return Err(HarnessError::BadLog("header does not match metadata".into()));
        }
        let n = log.mssps.len();
        for (line, rec) in csv.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| HarnessError::BadLog(format!("row {}: {what}", line + 1));
            let num = |i: usize| -> Result<f64, HarnessError> {
                rec[i].parse().map_err(|_| bad(&format!("column {i} is not a number")))
            };
            let maybe = |i: usize| -> Result<Option<f64>, HarnessError> {
                if rec[i].is_empty() {
                    Ok(None)
                } else {
                    num(i).map(Some)
                }
            };
            let phase = Phase::parse(&rec[1]).ok_or_else(|| bad("unknown phase"))?;
            let fused = match (maybe(6)?, maybe(7)?) {
                (Some(x), Some(y)) => Some((x, y)),
                (None, None) => None,
                _ => return Err(bad("half a fused position")),
            };
            let mut mssp = Vec::with_capacity(n);
            for k in 0..n {
                let base = 8 + 3 * k;
                mssp.push(match (maybe(base)?, maybe(base + 1)?, maybe(base + 2)?) {
                    (Some(x), Some(y), Some(t_capture)) => Some(MsspCell { x, y, t_capture }),
                    (None, None, None) => None,
                    _ => return Err(bad("partial estimate")),
                });
            }
            let t = num(0)?;
            if log.rows.last().is_some_and(|prev| prev.t >= t) {
                return Err(bad("time does not increase"));
            }
            log.rows.push(RunLogRow {
                t,
                phase,
                true_x: num(2)?,
                true_y: num(3)?,
                true_psi: num(4)?,
                true_v: num(5)?,
                fused,
                mssp,
                yaw_rate_cmd: num(8 + 3 * n)?,
            });
        }
        Ok(log)
    }

    /// Truth position linearly interpolated at `t`, if `t` lies inside the log.
    pub fn truth_at(&self, t: f64) -> Option<(f64, f64)> {
        let rows = &self.rows;
        let first = rows.first()?;
        let last = rows.last()?;
        if t < first.t || t > last.t {
            return None;
        }
        let i = rows.partition_point(|r| r.t <= t);
        if i == rows.len() {
            return Some((last.true_x, last.true_y));
        }
        let (a, b) = (&rows[i - 1], &rows[i]);
        let s = (t - a.t) / (b.t - a.t);
        Some((
            a.true_x + s * (b.true_x - a.true_x),
            a.true_y + s * (b.true_y - a.true_y),
        ))
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn parse_metadata(line: &str) -> Result<RunLog, HarnessError> {
    let bad = |m: &str| HarnessError::BadLog(format!("metadata: {m}"));
    let body = line.strip_prefix('#').ok_or_else(|| bad("missing"))?;
    let mut schema = None;
    let mut plan = None;
    let mut mssps = None;
    let mut dt = None;
    for field in body.split(';') {
        let (k, v) = field.split_once('=').ok_or_else(|| bad(field))?;
        match k {
            "schema" => schema = v.parse::<u32>().ok(),
            "plan" => {
                let pts: Option<Vec<(f64, f64)>> = v
                    .split_whitespace()
                    .map(|p| {
                        let (x, y) = p.split_once(':')?;
                        Some((x.parse().ok()?, y.parse().ok()?))
                    })
                    .collect();
                plan = Some(pts.ok_or_else(|| bad("plan"))?);
            }
            "mssps" => mssps = Some(v.split_whitespace().map(str::to_string).collect()),
            "dt" => dt = v.parse::<f64>().ok(),
            _ => {}
        }
    }
    if schema != Some(SCHEMA_VERSION) {
        return Err(bad("unsupported schema"));
    }
    Ok(RunLog::new(
        plan.ok_or_else(|| bad("no plan"))?,
        mssps.ok_or_else(|| bad("no units"))?,
        dt.ok_or_else(|| bad("no dt"))?,
    ))
}
