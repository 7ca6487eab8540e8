//! Space-time data panels: observations on stations x hours with station
//! coordinates and yearly block labels, plus the CSV formats shared by the
//! CLI pipeline (wide panels, long observation files, station tables).

use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

/// Observations `z[s, t]` on `S` stations and `T` hours, stored time-major.
/// Missing values are NaN. Block labels mark mutually independent periods
/// (summers/years); they must be contiguous in time.
#[derive(Debug, Clone)]
pub struct SpaceTimePanel {
    pub station_ids: Vec<String>,
    /// Projected station coordinates, km.
    pub coords: Vec<[f64; 2]>,
    /// Raw time labels, preserved byte-for-byte on output.
    pub times: Vec<String>,
    /// Per-time-index block label (year).
    pub block_labels: Vec<i64>,
    values: Vec<f64>,
}

impl SpaceTimePanel {
    pub fn new(
        station_ids: Vec<String>,
        coords: Vec<[f64; 2]>,
        times: Vec<String>,
        block_labels: Vec<i64>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let s = station_ids.len();
        let t = times.len();
        if coords.len() != s {
            return Err(Error::domain("coords/station_ids length mismatch"));
        }
        if block_labels.len() != t || values.len() != s * t {
            return Err(Error::domain("panel dimension mismatch"));
        }
        // Contiguous blocks: a label never reappears after a different one.
        let mut seen_done: Vec<i64> = Vec::new();
        let mut current: Option<i64> = None;
        for &b in &block_labels {
            match current {
                Some(c) if c == b => {}
                _ => {
                    if seen_done.contains(&b) {
                        return Err(Error::domain(format!(
                            "block label {b} not contiguous in time"
                        )));
                    }
                    if let Some(c) = current {
                        seen_done.push(c);
                    }
                    current = Some(b);
                }
            }
        }
        Ok(Self {
            station_ids,
            coords,
            times,
            block_labels,
            values,
        })
    }

    pub fn n_stations(&self) -> usize {
        self.station_ids.len()
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    #[inline]
    pub fn value(&self, t: usize, s: usize) -> f64 {
        self.values[t * self.station_ids.len() + s]
    }

    #[inline]
    pub fn is_present(&self, t: usize, s: usize) -> bool {
        self.value(t, s).is_finite()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Distinct block labels in time order, with their index ranges.
    pub fn blocks(&self) -> Vec<(i64, std::ops::Range<usize>)> {
        let mut out = Vec::new();
        let mut start = 0usize;
        for i in 1..=self.block_labels.len() {
            if i == self.block_labels.len() || self.block_labels[i] != self.block_labels[start] {
                out.push((self.block_labels[start], start..i));
                start = i;
            }
        }
        out
    }

    /// Panel restricted to all blocks except `drop`, preserving order.
    pub fn without_block(&self, drop: i64) -> SpaceTimePanel {
        let s = self.n_stations();
        let keep: Vec<usize> = (0..self.n_times())
            .filter(|&t| self.block_labels[t] != drop)
            .collect();
        let mut values = Vec::with_capacity(keep.len() * s);
        let mut times = Vec::with_capacity(keep.len());
        let mut blocks = Vec::with_capacity(keep.len());
        for &t in &keep {
            times.push(self.times[t].clone());
            blocks.push(self.block_labels[t]);
            for st in 0..s {
                values.push(self.value(t, st));
            }
        }
        SpaceTimePanel {
            station_ids: self.station_ids.clone(),
            coords: self.coords.clone(),
            times,
            block_labels: blocks,
            values,
        }
    }

    /// All present values must be strictly positive on the Fréchet scale.
    pub fn validate_frechet(&self) -> Result<()> {
        for (i, &v) in self.values.iter().enumerate() {
            if v.is_finite() && v <= 0.0 {
                return Err(Error::domain(format!(
                    "non-positive Fréchet value {v} at flat index {i}"
                )));
            }
        }
        Ok(())
    }

    /// Same-block pairs `(z[s1, t], z[s2, t+h])` with both members present.
    pub fn lag_pairs(&self, s1: usize, s2: usize, h: usize) -> Vec<(f64, f64)> {
        let t_max = self.n_times();
        let mut out = Vec::new();
        for t in 0..t_max.saturating_sub(h) {
            if self.block_labels[t] != self.block_labels[t + h] {
                continue;
            }
            let (a, b) = (self.value(t, s1), self.value(t + h, s2));
            if a.is_finite() && b.is_finite() {
                out.push((a, b));
            }
        }
        out
    }

    /// Replace the data matrix, keeping the frame.
    pub fn with_values(&self, values: Vec<f64>) -> Result<SpaceTimePanel> {
        SpaceTimePanel::new(
            self.station_ids.clone(),
            self.coords.clone(),
            self.times.clone(),
            self.block_labels.clone(),
            values,
        )
    }
}

// ---------------------------------------------------------------------------
// Time labels
// ---------------------------------------------------------------------------

/// Days from 1970-01-01 for a civil date (standard era-based algorithm).
fn days_from_civil(y: i64, m: u32, d: u32) -> i64 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = if y >= 0 { y } else { y - 399 } / 400;
    let yoe = y - era * 400;
    let mp = if m > 2 { m - 3 } else { m + 9 } as i64;
    let doy = (153 * mp + 2) / 5 + d as i64 - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146097 + doe - 719468
}

/// A parsed time label: either a plain integer hour index or an ISO-8601
/// timestamp `YYYY-MM-DD[THH[:MM[:SS]]]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeLabel {
    /// Hours since the epoch (or the raw integer).
    pub hour_index: i64,
    /// Calendar year; integer labels use year 0.
    pub year: i64,
}

pub fn parse_time_label(s: &str, line: usize) -> Result<TimeLabel> {
    let s = s.trim();
    if let Ok(v) = s.parse::<i64>() {
        return Ok(TimeLabel {
            hour_index: v,
            year: 0,
        });
    }
    let bad = |msg: &str| Error::Parse {
        line,
        message: format!("bad timestamp {s:?}: {msg}"),
    };
    let (date, time) = match s.split_once('T') {
        Some((d, t)) => (d, Some(t)),
        None => (s, None),
    };
    let mut parts = date.split('-');
    let y: i64 = parts
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| bad("year"))?;
    let m: u32 = parts
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| bad("month"))?;
    let d: u32 = parts
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| bad("day"))?;
    if !(1..=12).contains(&m) || !(1..=31).contains(&d) {
        return Err(bad("month/day out of range"));
    }
    let mut hour = 0i64;
    if let Some(t) = time {
        let mut tp = t.split(':');
        hour = tp
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("hour"))?;
        if hour > 23 {
            return Err(bad("hour out of range"));
        }
    }
    Ok(TimeLabel {
        hour_index: days_from_civil(y, m, d) * 24 + hour,
        year: y,
    })
}

// ---------------------------------------------------------------------------
// CSV formats
// ---------------------------------------------------------------------------

fn fmt_value(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

/// Write the wide panel format: `time,block,<station...>` with empty fields
/// for missing values. Shortest-round-trip float formatting keeps reruns
/// byte-identical and values exact.
pub fn write_wide_csv(panel: &SpaceTimePanel) -> String {
    let mut out = String::new();
    out.push_str("time,block");
    for id in &panel.station_ids {
        out.push(',');
        out.push_str(id);
    }
    out.push('\n');
    for t in 0..panel.n_times() {
        let _ = write!(out, "{},{}", panel.times[t], panel.block_labels[t]);
        for s in 0..panel.n_stations() {
            out.push(',');
            out.push_str(&fmt_value(panel.value(t, s)));
        }
        out.push('\n');
    }
    out
}

/// Stations table: `station_id,x_km,y_km`.
pub fn write_stations_csv(panel: &SpaceTimePanel) -> String {
    let mut out = String::from("station_id,x_km,y_km\n");
    for (id, c) in panel.station_ids.iter().zip(&panel.coords) {
        let _ = writeln!(out, "{},{},{}", id, c[0], c[1]);
    }
    out
}

pub fn read_stations_csv(text: &str) -> Result<Vec<(String, [f64; 2])>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("expected 3 columns, got {}", cols.len()),
            });
        }
        let x: f64 = cols[1].trim().parse().map_err(|_| Error::Parse {
            line: i + 1,
            message: format!("bad x_km {:?}", cols[1]),
        })?;
        let y: f64 = cols[2].trim().parse().map_err(|_| Error::Parse {
            line: i + 1,
            message: format!("bad y_km {:?}", cols[2]),
        })?;
        out.push((cols[0].trim().to_string(), [x, y]));
    }
    if out.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "stations file has no data rows".into(),
        });
    }
    Ok(out)
}

/// Read the wide panel format. Station coordinates come from the separate
/// stations table; stations missing there fail loudly. When the panel has
/// no `block` column, blocks are inferred from the timestamp year.
pub fn read_wide_csv(text: &str, stations: &[(String, [f64; 2])]) -> Result<SpaceTimePanel> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty panel file".into(),
    })?;
    let cols: Vec<&str> = header.split(',').map(|c| c.trim()).collect();
    if cols.first() != Some(&"time") {
        return Err(Error::Parse {
            line: 1,
            message: "first column must be `time`".into(),
        });
    }
    let has_block = cols.get(1) == Some(&"block");
    let first_station_col = if has_block { 2 } else { 1 };
    let ids: Vec<String> = cols[first_station_col..]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if ids.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no station columns".into(),
        });
    }
    let mut coords = Vec::with_capacity(ids.len());
    for id in &ids {
        let c = stations
            .iter()
            .find(|(sid, _)| sid == id)
            .ok_or_else(|| Error::Config(format!("station {id} missing from stations table")))?;
        coords.push(c.1);
    }

    let mut times = Vec::new();
    let mut blocks = Vec::new();
    let mut values = Vec::new();
    let mut prev_hour: Option<i64> = None;
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<&str> = line.split(',').collect();
        if row.len() != cols.len() {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("expected {} columns, got {}", cols.len(), row.len()),
            });
        }
        let label = parse_time_label(row[0], i + 1)?;
        if let Some(prev) = prev_hour {
            if label.hour_index <= prev {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "timestamps must be strictly increasing".into(),
                });
            }
        }
        prev_hour = Some(label.hour_index);
        times.push(row[0].trim().to_string());
        let block = if has_block {
            row[1].trim().parse::<i64>().map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("bad block label {:?}", row[1]),
            })?
        } else {
            label.year
        };
        blocks.push(block);
        for (j, cell) in row[first_station_col..].iter().enumerate() {
            let cell = cell.trim();
            if cell.is_empty() || cell.eq_ignore_ascii_case("na") {
                values.push(f64::NAN);
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    line: i + 1,
                    message: format!("bad value {cell:?} in column {}", ids[j]),
                })?;
                values.push(v);
            }
        }
    }
    SpaceTimePanel::new(ids, coords, times, blocks, values)
}

/// Read long observations `station_id,timestamp,value` and pivot to a wide
/// panel ordered by the stations table; missing cells become NaN.
pub fn read_long_csv(text: &str, stations: &[(String, [f64; 2])]) -> Result<SpaceTimePanel> {
    let ids: Vec<String> = stations.iter().map(|(id, _)| id.clone()).collect();
    let coords: Vec<[f64; 2]> = stations.iter().map(|(_, c)| *c).collect();
    let idx_of = |id: &str| ids.iter().position(|x| x == id);

    let mut rows: Vec<(i64, i64, String, usize, f64)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("expected 3 columns, got {}", cols.len()),
            });
        }
        let sid = cols[0].trim();
        let s = idx_of(sid).ok_or_else(|| Error::Parse {
            line: i + 1,
            message: format!("unknown station {sid:?}"),
        })?;
        let label = parse_time_label(cols[1], i + 1)?;
        let cell = cols[2].trim();
        let v = if cell.is_empty() || cell.eq_ignore_ascii_case("na") {
            f64::NAN
        } else {
            cell.parse().map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("bad value {cell:?}"),
            })?
        };
        rows.push((
            label.hour_index,
            label.year,
            cols[1].trim().to_string(),
            s,
            v,
        ));
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no observations".into(),
        });
    }
    rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.3.cmp(&b.3)));
    let mut times: Vec<String> = Vec::new();
    let mut hours: Vec<i64> = Vec::new();
    let mut blocks: Vec<i64> = Vec::new();
    for (h, y, label, _, _) in &rows {
        if hours.last() != Some(h) {
            hours.push(*h);
            times.push(label.clone());
            blocks.push(*y);
        }
    }
    let s = ids.len();
    let mut values = vec![f64::NAN; times.len() * s];
    for (h, _, _, st, v) in rows {
        let t = hours.binary_search(&h).unwrap();
        values[t * s + st] = v;
    }
    SpaceTimePanel::new(ids, coords, times, blocks, values)
}

pub fn read_panel_file(
    panel_path: &Path,
    stations_path: &Path,
    long: bool,
) -> Result<SpaceTimePanel> {
    let stations = read_stations_csv(&std::fs::read_to_string(stations_path)?)?;
    let text = std::fs::read_to_string(panel_path)?;
    if long {
        read_long_csv(&text, &stations)
    } else {
        read_wide_csv(&text, &stations)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_panel() -> SpaceTimePanel {
        SpaceTimePanel::new(
            vec!["A".into(), "B".into()],
            vec![[0.0, 0.0], [10.0, 0.0]],
            (0..6).map(|t| t.to_string()).collect(),
            vec![1, 1, 1, 2, 2, 2],
            vec![
                1.0,
                2.0,
                3.0,
                4.0,
                5.0,
                6.0,
                f64::NAN,
                8.0,
                9.0,
                10.0,
                11.0,
                12.0,
            ],
        )
        .unwrap()
    }

    #[test]
    fn block_contiguity_enforced() {
        let r = SpaceTimePanel::new(
            vec!["A".into()],
            vec![[0.0, 0.0]],
            vec!["0".into(), "1".into(), "2".into()],
            vec![1, 2, 1],
            vec![1.0, 2.0, 3.0],
        );
        assert!(r.is_err());
    }

    #[test]
    fn lag_pairs_respect_blocks_and_missing() {
        let p = toy_panel();
        // Values by (t, s): t0=(1,2) t1=(3,4) t2=(5,6) | t3=(NaN,8) t4=(9,10) t5=(11,12).
        // Lag 1, A->A: (1,3), (3,5) in block 1; block boundary kills t2->t3;
        // t3 is missing for A; (9,11) completes in block 2.
        let pairs = p.lag_pairs(0, 0, 1);
        assert_eq!(pairs, vec![(1.0, 3.0), (3.0, 5.0), (9.0, 11.0)]);
        // Lag 0, A-B: all times except the one with missing A.
        let pairs0 = p.lag_pairs(0, 1, 0);
        assert_eq!(pairs0.len(), 5);
    }

    #[test]
    fn without_block_drops_rows() {
        let p = toy_panel();
        let q = p.without_block(1);
        assert_eq!(q.n_times(), 3);
        assert_eq!(q.block_labels, vec![2, 2, 2]);
        assert!(q.value(0, 0).is_nan());
        assert_eq!(q.value(0, 1), 8.0);
    }

    #[test]
    fn time_label_parsing() {
        assert_eq!(
            parse_time_label("42", 1).unwrap(),
            TimeLabel {
                hour_index: 42,
                year: 0
            }
        );
        let t = parse_time_label("1970-01-01T00:00:00", 1).unwrap();
        assert_eq!(t.hour_index, 0);
        assert_eq!(t.year, 1970);
        let t = parse_time_label("1970-01-02T05:00", 1).unwrap();
        assert_eq!(t.hour_index, 29);
        let t = parse_time_label("2001-06-21T00:00:00", 1).unwrap();
        assert_eq!(t.year, 2001);
        // Leap-day handling: consecutive hours across 2000-02-29.
        let a = parse_time_label("2000-02-28T23:00", 1).unwrap();
        let b = parse_time_label("2000-02-29T00:00", 1).unwrap();
        assert_eq!(b.hour_index - a.hour_index, 1);
        assert!(parse_time_label("2001-13-01", 7).is_err());
    }

    #[test]
    fn wide_csv_round_trip_is_byte_identical() {
        let p = toy_panel();
        let stations: Vec<(String, [f64; 2])> = p
            .station_ids
            .iter()
            .cloned()
            .zip(p.coords.iter().copied())
            .collect();
        let text = write_wide_csv(&p);
        let q = read_wide_csv(&text, &stations).unwrap();
        assert_eq!(write_wide_csv(&q), text);
        assert_eq!(q.block_labels, p.block_labels);
        assert!(q.value(3, 0).is_nan());
    }

    #[test]
    fn blocks_inferred_from_summer_timestamps() {
        // Two summers of hourly data; blocks come from the year.
        let stations = vec![("S1".to_string(), [0.0, 0.0])];
        let mut text = String::from("time,S1\n");
        for h in 0..5 {
            text.push_str(&format!("2001-06-21T{h:02}:00,{}\n", h + 1));
        }
        for h in 0..5 {
            text.push_str(&format!("2002-06-21T{h:02}:00,{}\n", h + 10));
        }
        let p = read_wide_csv(&text, &stations).unwrap();
        assert_eq!(p.blocks().len(), 2);
        assert_eq!(p.blocks()[0].0, 2001);
        assert_eq!(p.blocks()[1].0, 2002);
    }

    #[test]
    fn long_format_pivots() {
        let stations = vec![
            ("A".to_string(), [0.0, 0.0]),
            ("B".to_string(), [5.0, 5.0]),
        ];
        let text = "station_id,timestamp,value\n\
                    A,2001-06-21T00:00,1.5\n\
                    B,2001-06-21T00:00,2.5\n\
                    A,2001-06-21T01:00,3.5\n";
        let p = read_long_csv(text, &stations).unwrap();
        assert_eq!(p.n_times(), 2);
        assert_eq!(p.value(0, 0), 1.5);
        assert_eq!(p.value(0, 1), 2.5);
        assert!(p.value(1, 1).is_nan());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let stations = vec![("A".to_string(), [0.0, 0.0])];
        let text = "time,A\n1,2.0\n2,oops\n";
        match read_wide_csv(text, &stations) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
