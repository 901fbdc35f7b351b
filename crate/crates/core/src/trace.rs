//! Per-tick trace in a wide CSV layout and the run report derived from it.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::dynamics::{in_contact, LaneGeometry};
use crate::types::{VehicleId, VehicleState};

const FIELDS: [&str; 13] = [
    "s", "lane", "y", "v", "a", "ctrl", "vset", "maneuver", "role", "gap", "target", "size", "tko",
];

/// Rounds to the six decimals written to the CSV, so that a parsed trace
/// equals the recorded one.
pub fn quantize(x: f64) -> f64 {
    let q: f64 = format!("{x:.6}").parse().expect("formatted float parses");
    if q == 0.0 {
        0.0
    } else {
        q
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleRow {
    pub s: f64,
    pub lane: u32,
    /// Lateral position from the center of lane 0 (m).
    pub y: f64,
    pub v: f64,
    pub a: f64,
    pub ctrl: String,
    pub vset: Option<f64>,
    pub maneuver: String,
    pub role: String,
    /// Radar gap as seen by the vehicle; empty when the reading is invalid.
    pub gap: Option<f64>,
    pub target: Option<VehicleId>,
    pub size: usize,
    pub takeover: bool,
}

impl VehicleRow {
    pub fn quantized(mut self) -> Self {
        self.s = quantize(self.s);
        self.y = quantize(self.y);
        self.v = quantize(self.v);
        self.a = quantize(self.a);
        self.vset = self.vset.map(quantize);
        self.gap = self.gap.map(quantize);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub tick: u64,
    pub time: f64,
    /// One cell per traced vehicle; `None` before an intruder appears.
    pub cells: Vec<Option<VehicleRow>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub spec_hash: String,
    pub vehicles: Vec<VehicleId>,
    pub rows: Vec<TraceRow>,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("trace line {line}: {message}")]
pub struct TraceError {
    pub line: usize,
    pub message: String,
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6}")).unwrap_or_default()
}

impl Trace {
    pub fn new(spec_hash: String, vehicles: Vec<VehicleId>) -> Self {
        Self {
            spec_hash,
            vehicles,
            rows: Vec::new(),
        }
    }

    pub fn cell(&self, row: usize, id: VehicleId) -> Option<&VehicleRow> {
        let col = self.vehicles.iter().position(|&v| v == id)?;
        self.rows.get(row)?.cells.get(col)?.as_ref()
    }

    /// Iterates `(time, cell)` for one vehicle over the rows where it exists.
    pub fn series(&self, id: VehicleId) -> impl Iterator<Item = (f64, &VehicleRow)> + '_ {
        let col = self.vehicles.iter().position(|&v| v == id);
        self.rows.iter().filter_map(move |r| {
            let c = r.cells.get(col?)?.as_ref()?;
            Some((r.time, c))
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("tick,time");
        for id in &self.vehicles {
            for f in FIELDS {
                let _ = write!(out, ",{}.{}", id, f);
            }
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{},{:.6}", row.tick, row.time);
            for cell in &row.cells {
                match cell {
                    Some(c) => {
                        let _ = write!(
                            out,
                            ",{:.6},{},{:.6},{:.6},{:.6},{},{},{},{},{},{},{},{}",
                            c.s,
                            c.lane,
                            c.y,
                            c.v,
                            c.a,
                            c.ctrl,
                            opt(c.vset),
                            c.maneuver,
                            c.role,
                            opt(c.gap),
                            c.target.map(|t| t.0.to_string()).unwrap_or_default(),
                            c.size,
                            u8::from(c.takeover)
                        );
                    }
                    None => out.push_str(&",".repeat(FIELDS.len())),
                }
            }
            out.push('\n');
        }
        out
    }

    /// Parses a trace written by [`Trace::to_csv`].
    pub fn from_csv(text: &str, spec_hash: &str) -> Result<Trace, TraceError> {
        let err = |line: usize, message: String| TraceError { line, message };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty trace".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 2 || cols[0] != "tick" || cols[1] != "time" {
            return Err(err(1, "header must start with tick,time".into()));
        }
        let rest = &cols[2..];
        if !rest.len().is_multiple_of(FIELDS.len()) {
            return Err(err(1, format!("{} vehicle columns is not a multiple of {}", rest.len(), FIELDS.len())));
        }
        let mut vehicles = Vec::new();
        for chunk in rest.chunks(FIELDS.len()) {
            let mut id = None;
            for (name, field) in chunk.iter().zip(FIELDS) {
                let (prefix, suffix) = name
                    .split_once('.')
                    .ok_or_else(|| err(1, format!("malformed column {name}")))?;
                let n: u32 = prefix
                    .strip_prefix('v')
                    .and_then(|d| d.parse().ok())
                    .ok_or_else(|| err(1, format!("malformed vehicle in column {name}")))?;
                if suffix != field || id.is_some_and(|i| i != n) {
                    return Err(err(1, format!("unexpected column {name}")));
                }
                id = Some(n);
            }
            vehicles.push(VehicleId(id.expect("chunk is non-empty")));
        }
        let mut trace = Trace::new(spec_hash.to_string(), vehicles);
        for (i, line) in lines {
            let n = i + 1;
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != cols.len() {
                return Err(err(n, format!("expected {} fields, found {}", cols.len(), f.len())));
            }
            let num = |s: &str| -> Result<f64, TraceError> {
                s.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| err(n, format!("bad number {s:?}")))
            };
            let opt_num = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
            let int = |s: &str| s.parse::<u64>().map_err(|_| err(n, format!("bad integer {s:?}")));
            let tick = int(f[0])?;
            let time = num(f[1])?;
            let mut cells = Vec::with_capacity(trace.vehicles.len());
            for c in f[2..].chunks(FIELDS.len()) {
                if c.iter().all(|x| x.is_empty()) {
                    cells.push(None);
                    continue;
                }
                let lane = u32::try_from(int(c[1])?).map_err(|_| err(n, "lane out of range".into()))?;
                let target = if c[10].is_empty() {
                    None
                } else {
                    let t = u32::try_from(int(c[10])?).map_err(|_| err(n, "target out of range".into()))?;
                    Some(VehicleId(t))
                };
                let takeover = match c[12] {
                    "0" => false,
                    "1" => true,
                    other => return Err(err(n, format!("bad takeover flag {other:?}"))),
                };
                cells.push(Some(VehicleRow {
                    s: num(c[0])?,
                    lane,
                    y: num(c[2])?,
                    v: num(c[3])?,
                    a: num(c[4])?,
                    ctrl: c[5].to_string(),
                    vset: opt_num(c[6])?,
                    maneuver: c[7].to_string(),
                    role: c[8].to_string(),
                    gap: opt_num(c[9])?,
                    target,
                    size: int(c[11])? as usize,
                    takeover,
                }));
            }
            trace.rows.push(TraceRow { tick, time, cells });
        }
        Ok(trace)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReplayVerdict {
    Equal,
    SpecHashMismatch,
    Diverged { row: usize, detail: String },
}

/// Bit-exact comparison of two traces of the same scenario.
pub fn replay_check(a: &Trace, b: &Trace) -> ReplayVerdict {
    if a.spec_hash != b.spec_hash {
        return ReplayVerdict::SpecHashMismatch;
    }
    if a.vehicles != b.vehicles {
        return ReplayVerdict::Diverged {
            row: 0,
            detail: "vehicle columns differ".into(),
        };
    }
    for (i, (ra, rb)) in a.rows.iter().zip(&b.rows).enumerate() {
        if ra != rb {
            let which = ra
                .cells
                .iter()
                .zip(&rb.cells)
                .position(|(x, y)| x != y)
                .map(|c| a.vehicles[c].to_string())
                .unwrap_or_else(|| "tick/time".into());
            return ReplayVerdict::Diverged {
                row: i,
                detail: format!("tick {} differs at {which}", ra.tick),
            };
        }
    }
    if a.rows.len() != b.rows.len() {
        return ReplayVerdict::Diverged {
            row: a.rows.len().min(b.rows.len()),
            detail: format!("{} rows vs {}", a.rows.len(), b.rows.len()),
        };
    }
    ReplayVerdict::Equal
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub spec_hash: String,
    pub ticks: u64,
    pub end_time: f64,
    pub collided: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Collision {
    pub time: f64,
    pub a: VehicleId,
    pub b: VehicleId,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinGap {
    pub ahead: VehicleId,
    pub behind: VehicleId,
    pub gap: f64,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Completion {
    pub time: f64,
    pub maneuver: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Takeover {
    pub time: f64,
    pub vehicle: VehicleId,
}

/// Metrics derived from a trace alone.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub summary: Summary,
    /// First contact of every pair.
    pub collisions: Vec<Collision>,
    /// Smallest bumper gap seen between a vehicle and the one directly ahead
    /// of it in its corridor.
    pub min_gaps: Vec<MinGap>,
    /// Maneuvers completed by the platoon leader, in order.
    pub completions: Vec<Completion>,
    pub takeovers: Vec<Takeover>,
}

fn state_of(id: VehicleId, c: &VehicleRow, geom: &LaneGeometry) -> VehicleState {
    let mut st = VehicleState::new(id, c.s, c.lane, c.v, geom.vehicle_length);
    st.lateral_offset = c.y - c.lane as f64 * geom.lane_width;
    st
}

impl RunReport {
    pub fn from_trace(trace: &Trace, geom: &LaneGeometry, leader: VehicleId) -> Self {
        let mut collisions: Vec<Collision> = Vec::new();
        let mut gaps: BTreeMap<(VehicleId, VehicleId), (f64, f64)> = BTreeMap::new();
        for row in &trace.rows {
            let states: Vec<VehicleState> = trace
                .vehicles
                .iter()
                .zip(&row.cells)
                .filter_map(|(&id, c)| c.as_ref().map(|c| state_of(id, c, geom)))
                .collect();
            for (i, a) in states.iter().enumerate() {
                for b in &states[i + 1..] {
                    if in_contact(a, b, geom.lane_width, geom.vehicle_width) {
                        let pair = if a.id < b.id { (a.id, b.id) } else { (b.id, a.id) };
                        if !collisions.iter().any(|c| (c.a, c.b) == pair) {
                            collisions.push(Collision {
                                time: row.time,
                                a: pair.0,
                                b: pair.1,
                            });
                        }
                    }
                }
            }
            for back in &states {
                let yb = back.lateral_position(geom.lane_width);
                let ahead = states
                    .iter()
                    .filter(|f| f.id != back.id && f.s > back.s)
                    .filter(|f| (f.lateral_position(geom.lane_width) - yb).abs() < geom.vehicle_width / 2.0)
                    .min_by(|x, y| x.s.total_cmp(&y.s).then(x.id.cmp(&y.id)));
                if let Some(front) = ahead {
                    let gap = quantize(front.rear() - back.s);
                    let e = gaps.entry((front.id, back.id)).or_insert((gap, row.time));
                    if gap < e.0 {
                        *e = (gap, row.time);
                    }
                }
            }
        }
        let min_gaps = gaps
            .into_iter()
            .map(|((ahead, behind), (gap, time))| MinGap {
                ahead,
                behind,
                gap,
                time,
            })
            .collect();
        let mut completions = Vec::new();
        let mut prev: Option<&str> = None;
        for (time, c) in trace.series(leader) {
            if let Some(p) = prev {
                if p != "Platooning" && c.maneuver == "Platooning" {
                    completions.push(Completion {
                        time,
                        maneuver: p.to_string(),
                    });
                }
            }
            prev = Some(&c.maneuver);
        }
        let mut takeovers = Vec::new();
        for &id in &trace.vehicles {
            if let Some((time, _)) = trace.series(id).find(|(_, c)| c.takeover) {
                takeovers.push(Takeover { time, vehicle: id });
            }
        }
        takeovers.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.vehicle.cmp(&b.vehicle)));
        let last = trace.rows.last();
        RunReport {
            summary: Summary {
                spec_hash: trace.spec_hash.clone(),
                ticks: last.map_or(0, |r| r.tick),
                end_time: last.map_or(0.0, |r| r.time),
                collided: !collisions.is_empty(),
            },
            collisions,
            min_gaps,
            completions,
            takeovers,
        }
    }

    pub fn min_gap(&self, ahead: VehicleId, behind: VehicleId) -> Option<f64> {
        self.min_gaps
            .iter()
            .find(|g| g.ahead == ahead && g.behind == behind)
            .map(|g| g.gap)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(s: f64, v: f64) -> VehicleRow {
        VehicleRow {
            s,
            lane: 1,
            y: 3.5,
            v,
            a: 0.0,
            ctrl: "CACC".into(),
            vset: None,
            maneuver: "Platooning".into(),
            role: "Follower".into(),
            gap: Some(13.0),
            target: Some(VehicleId(1)),
            size: 2,
            takeover: false,
        }
    }

    fn sample() -> Trace {
        let mut t = Trace::new("abc".into(), vec![VehicleId(1), VehicleId(2), VehicleId(3)]);
        for k in 0..3u64 {
            let lead = VehicleRow {
                ctrl: "CC".into(),
                vset: Some(20.0),
                role: "Leader".into(),
                gap: None,
                target: None,
                ..row(100.0 + k as f64, 20.0)
            };
            t.rows.push(TraceRow {
                tick: k,
                time: quantize(k as f64 * 0.05),
                cells: vec![Some(lead), Some(row(82.0 + k as f64 * 0.5, 19.5)), None],
            });
        }
        t
    }

    #[test]
    fn csv_round_trip() {
        let t = sample();
        let csv = t.to_csv();
        assert!(csv.starts_with("tick,time,v1.s,v1.lane,v1.y,"));
        let back = Trace::from_csv(&csv, "abc").unwrap();
        assert_eq!(back, t);
        assert_eq!(replay_check(&t, &back), ReplayVerdict::Equal);
    }

    #[test]
    fn parser_rejects_garbage() {
        assert!(Trace::from_csv("", "x").is_err());
        assert!(Trace::from_csv("tick,time,v1.s\n", "x").is_err());
        let mut csv = sample().to_csv();
        csv.push_str("3,0.15,1\n");
        assert_eq!(Trace::from_csv(&csv, "x").unwrap_err().line, 5);
    }

    #[test]
    fn replay_reports_first_divergence() {
        let a = sample();
        let mut b = a.clone();
        b.rows[2].cells[1].as_mut().unwrap().v = 19.0;
        assert_eq!(
            replay_check(&a, &b),
            ReplayVerdict::Diverged {
                row: 2,
                detail: "tick 2 differs at v2".into()
            }
        );
        b.spec_hash = "other".into();
        assert_eq!(replay_check(&a, &b), ReplayVerdict::SpecHashMismatch);
    }

    #[test]
    fn report_from_trace() {
        let geom = LaneGeometry::default();
        let r = RunReport::from_trace(&sample(), &geom, VehicleId(1));
        assert!(r.collisions.is_empty());
        // 100 - 5 - 82 = 13, then the follower is slower and falls back.
        assert_eq!(r.min_gap(VehicleId(1), VehicleId(2)), Some(13.0));
        let text = r.to_toml();
        assert!(text.find("[summary]").unwrap() < text.find("[[min_gaps]]").unwrap());
    }

    #[test]
    fn quantize_is_idempotent_and_signless_at_zero() {
        assert_eq!(quantize(-0.0000001), 0.0);
        assert!(quantize(-0.0000001).is_sign_positive());
        let x = quantize(1.23456789);
        assert_eq!(quantize(x), x);
    }
}
