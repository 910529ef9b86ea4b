use std::io::{Read, Write};

use crate::contact_estimation::{ContactEstimate, Wrench};
use crate::error::{Error, Result};
use crate::geometry::Vec2;

/// Fixed leading columns of `trace.csv`; obstacle positions follow as
/// `obs{i}_x, obs{i}_y`.
pub const TRACE_COLUMNS: [&str; 16] = [
    "t",
    "x",
    "y",
    "theta",
    "v_cmd",
    "omega_cmd",
    "fx",
    "fy",
    "mz",
    "gamma_est",
    "f_mag_est",
    "in_contact",
    "xi_u_x",
    "xi_u_y",
    "xi_d_x",
    "xi_d_y",
];

/// One control period.
///
/// `xi_u`/`xi_d` are in the robot frame: nominal and desired contact-point
/// velocity while the sliding controller is engaged, otherwise both equal the
/// planner velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v_cmd: f64,
    pub omega_cmd: f64,
    pub wrench: Wrench,
    pub estimate: ContactEstimate,
    pub xi_u: Vec2,
    pub xi_d: Vec2,
    pub obstacles: Vec<Vec2>,
}

impl TraceRecord {
    pub fn force_norm(&self) -> f64 {
        self.wrench.force_norm()
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    obstacle_count: usize,
    records: Vec<TraceRecord>,
}

impl Trace {
    pub fn new(obstacle_count: usize) -> Self {
        Self::with_capacity(obstacle_count, 0)
    }

    pub fn with_capacity(obstacle_count: usize, capacity: usize) -> Self {
        Self {
            obstacle_count,
            records: Vec::with_capacity(capacity),
        }
    }

    pub fn obstacle_count(&self) -> usize {
        self.obstacle_count
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, record: TraceRecord) {
        debug_assert_eq!(record.obstacles.len(), self.obstacle_count);
        self.records.push(record);
    }

    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = TRACE_COLUMNS.iter().map(|s| s.to_string()).collect();
        for i in 0..self.obstacle_count {
            h.push(format!("obs{i}_x"));
            h.push(format!("obs{i}_y"));
        }
        h
    }

    /// Write as CSV. Floats use the shortest representation that parses back
    /// to the same bits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header()).map_err(io_err)?;
        let mut row: Vec<String> =
            Vec::with_capacity(TRACE_COLUMNS.len() + 2 * self.obstacle_count);
        for r in &self.records {
            row.clear();
            let values = [
                r.t,
                r.x,
                r.y,
                r.theta,
                r.v_cmd,
                r.omega_cmd,
                r.wrench.fx,
                r.wrench.fy,
                r.wrench.mz,
                r.estimate.gamma,
                r.estimate.f_mag,
            ];
            row.extend(values.iter().map(|v| v.to_string()));
            row.push(if r.estimate.in_contact { "1" } else { "0" }.to_string());
            for v in [r.xi_u.x, r.xi_u.y, r.xi_d.x, r.xi_d.y] {
                row.push(v.to_string());
            }
            for p in &r.obstacles {
                row.push(p.x.to_string());
                row.push(p.y.to_string());
            }
            w.write_record(&row).map_err(io_err)?;
        }
        w.flush()
            .map_err(|e| Error::Scenario(format!("writing trace: {e}")))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let header = rdr.headers().map_err(io_err)?.clone();
        if header.len() < TRACE_COLUMNS.len()
            || header.iter().zip(TRACE_COLUMNS).any(|(a, b)| a != b)
        {
            return Err(Error::Scenario(format!(
                "trace header must start with {}",
                TRACE_COLUMNS.join(",")
            )));
        }
        let extra = header.len() - TRACE_COLUMNS.len();
        if !extra.is_multiple_of(2) {
            return Err(Error::Scenario(
                "obstacle columns must come in x/y pairs".into(),
            ));
        }
        let obstacle_count = extra / 2;
        let mut trace = Trace::new(obstacle_count);
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(io_err)?;
            let num = |i: usize| -> Result<f64> {
                rec[i].parse::<f64>().map_err(|e| {
                    Error::Scenario(format!("row {}: column `{}`: {e}", line + 2, &header[i]))
                })
            };
            let in_contact = match &rec[11] {
                "1" => true,
                "0" => false,
                other => {
                    return Err(Error::Scenario(format!(
                        "row {}: in_contact must be 0 or 1, got `{other}`",
                        line + 2
                    )))
                }
            };
            let obstacles = (0..obstacle_count)
                .map(|i| {
                    let base = TRACE_COLUMNS.len() + 2 * i;
                    Ok(Vec2::new(num(base)?, num(base + 1)?))
                })
                .collect::<Result<Vec<_>>>()?;
            trace.push(TraceRecord {
                t: num(0)?,
                x: num(1)?,
                y: num(2)?,
                theta: num(3)?,
                v_cmd: num(4)?,
                omega_cmd: num(5)?,
                wrench: Wrench::new(num(6)?, num(7)?, num(8)?),
                estimate: ContactEstimate {
                    gamma: num(9)?,
                    f_mag: num(10)?,
                    in_contact,
                },
                xi_u: Vec2::new(num(12)?, num(13)?),
                xi_d: Vec2::new(num(14)?, num(15)?),
                obstacles,
            });
        }
        Ok(trace)
    }
}

fn io_err(e: csv::Error) -> Error {
    Error::Scenario(format!("trace csv: {e}"))
}
