//! Catalog CSV ingestion.
//!
//! The header names the columns `time,lon,lat` and optionally `magnitude`
//! and `depth_km`, in any order. `time` is either a float number of days or
//! an ISO-8601 timestamp (`1926-01-01`, `1926-01-01T03:04:05.25`, a space in
//! place of `T`, or an RFC 3339 offset, which is converted to UTC).

use std::fmt;
use std::io::Read;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use declust::{Catalog, Location, Region};

use crate::error::{CliError, CliResult};

const NANOS_PER_DAY: f64 = 86_400e9;
const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Clone, Copy)]
pub struct IngestOptions {
    pub region: Region<f64>,
    /// Keep only events with magnitude strictly above this value.
    pub magnitude_above: Option<f64>,
    /// Keep only events with depth strictly below this value.
    pub depth_below: Option<f64>,
    /// Time zero for timestamps; defaults to midnight of the earliest date.
    pub origin: Option<NaiveDateTime>,
    /// Break exact ties by shifting the r-th repeat by `r · jitter` seconds.
    pub jitter_seconds: Option<f64>,
}

impl IngestOptions {
    pub fn new(region: Region<f64>) -> Self {
        Self {
            region,
            magnitude_above: None,
            depth_below: None,
            origin: None,
            jitter_seconds: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestSummary {
    pub rows: usize,
    pub kept: usize,
    pub outside_region: usize,
    pub below_magnitude: usize,
    pub too_deep: usize,
    pub missing_marks: usize,
    pub jittered: usize,
}

impl fmt::Display for IngestSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ingested {} of {} rows; dropped {} outside region, {} by magnitude, {} by depth, {} missing magnitude or depth",
            self.kept, self.rows, self.outside_region, self.below_magnitude, self.too_deep, self.missing_marks
        )?;
        if self.jittered > 0 {
            write!(f, "; jittered {} tied times", self.jittered)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
enum RawTime {
    Days(f64),
    Stamp(NaiveDateTime),
}

#[derive(Debug, Clone, Copy)]
struct Row {
    line: u64,
    time: RawTime,
    loc: Location<f64>,
}

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.naive_utc());
    }
    let s = s.strip_suffix('Z').unwrap_or(s);
    for fmt in [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt);
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
}

fn parse_time(s: &str) -> Option<RawTime> {
    if let Ok(v) = s.parse::<f64>() {
        return v.is_finite().then_some(RawTime::Days(v));
    }
    parse_timestamp(s).map(RawTime::Stamp)
}

fn days_between(from: NaiveDateTime, to: NaiveDateTime) -> Option<f64> {
    (to - from).num_nanoseconds().map(|ns| ns as f64 / NANOS_PER_DAY)
}

pub fn ingest(path: &Path, opts: &IngestOptions) -> CliResult<(Catalog<f64>, IngestSummary)> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    ingest_reader(file, opts).map_err(|e| match e {
        CliError::Data(msg) => CliError::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn ingest_reader<R: Read>(reader: R, opts: &IngestOptions) -> CliResult<(Catalog<f64>, IngestSummary)> {
    if let Some(j) = opts.jitter_seconds {
        if !(j > 0.0 && j < 1.0) {
            return Err(CliError::Usage(format!("jitter must lie in (0, 1) seconds, got {j}")));
        }
    }
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| CliError::data(format!("cannot read header: {e}")))?
        .clone();
    let column = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let need = |name: &str| column(name).ok_or_else(|| CliError::data(format!("header has no '{name}' column")));
    let (ti, xi, yi) = (need("time")?, need("lon")?, need("lat")?);
    let (mi, di) = (column("magnitude"), column("depth_km"));

    let mut summary = IngestSummary::default();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| CliError::data(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        summary.rows += 1;
        let field = |i: usize| record.get(i).unwrap_or("");
        let bad = |what: &str, raw: &str| CliError::data(format!("line {line}: cannot parse {what} '{raw}'"));
        let time = parse_time(field(ti)).ok_or_else(|| bad("time", field(ti)))?;
        let number = |i: usize, what: &str| -> CliResult<f64> {
            field(i).parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| bad(what, field(i)))
        };
        let optional = |i: Option<usize>, what: &str| -> CliResult<Option<f64>> {
            match i.map(field) {
                None | Some("") => Ok(None),
                Some(_) => number(i.unwrap(), what).map(Some),
            }
        };
        let loc = Location::new(number(xi, "lon")?, number(yi, "lat")?);
        let magnitude = optional(mi, "magnitude")?;
        let depth = optional(di, "depth_km")?;

        if let Some(m0) = opts.magnitude_above {
            match magnitude {
                None => {
                    summary.missing_marks += 1;
                    continue;
                }
                Some(m) if m <= m0 => {
                    summary.below_magnitude += 1;
                    continue;
                }
                _ => {}
            }
        }
        if let Some(d0) = opts.depth_below {
            match depth {
                None => {
                    summary.missing_marks += 1;
                    continue;
                }
                Some(d) if d >= d0 => {
                    summary.too_deep += 1;
                    continue;
                }
                _ => {}
            }
        }
        if !opts.region.contains(&loc) {
            summary.outside_region += 1;
            continue;
        }
        rows.push(Row { line, time, loc });
    }

    let origin = opts.origin.or_else(|| {
        rows.iter()
            .filter_map(|r| match r.time {
                RawTime::Stamp(s) => Some(s.date()),
                RawTime::Days(_) => None,
            })
            .min()
            .and_then(|d| d.and_hms_opt(0, 0, 0))
    });
    let mut timed = Vec::with_capacity(rows.len());
    for r in &rows {
        let t = match r.time {
            RawTime::Days(v) => v,
            RawTime::Stamp(s) => {
                let o = origin.expect("timestamps imply an origin");
                days_between(o, s)
                    .ok_or_else(|| CliError::data(format!("line {}: timestamp too far from origin", r.line)))?
            }
        };
        if t < 0.0 {
            return Err(CliError::data(format!("line {}: time {t} days precedes the origin", r.line)));
        }
        timed.push((t, r.line, r.loc));
    }
    timed.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut k = 1;
    while k < timed.len() {
        if timed[k].0 != timed[k - 1].0 {
            k += 1;
            continue;
        }
        let Some(jitter) = opts.jitter_seconds else {
            return Err(CliError::data(format!(
                "lines {} and {} have the same time ({} days); pass --jitter to break ties",
                timed[k - 1].1,
                timed[k].1,
                timed[k].0
            )));
        };
        let base = timed[k - 1].0;
        let start = k;
        while k < timed.len() && timed[k].0 == base {
            timed[k].0 = base + (k - start + 1) as f64 * jitter / SECONDS_PER_DAY;
            summary.jittered += 1;
            k += 1;
        }
        if k < timed.len() && timed[k - 1].0 >= timed[k].0 {
            return Err(CliError::data(format!(
                "jitter pushes line {} past line {}; use a smaller jitter",
                timed[k - 1].1,
                timed[k].1
            )));
        }
    }

    summary.kept = timed.len();
    let catalog = Catalog::from_points(opts.region, timed.into_iter().map(|(t, _, loc)| (t, loc)))?;
    let catalog = match origin {
        Some(o) => catalog.with_origin(o.format("%Y-%m-%dT%H:%M:%S").to_string()),
        None => catalog,
    };
    Ok((catalog, summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> IngestOptions {
        IngestOptions::new(Region::new(131.0, 140.0, 34.0, 39.0).unwrap())
    }

    fn run(text: &str, o: &IngestOptions) -> CliResult<(Catalog<f64>, IngestSummary)> {
        ingest_reader(text.as_bytes(), o)
    }

    #[test]
    fn magnitude_threshold_drops_small_events() {
        let text = "time,lon,lat,magnitude,depth_km\n1.0,135,36,4.5,10\n2.0,135,36,3.9,10\n3.0,135,36,5.1,20\n";
        let mut o = opts();
        o.magnitude_above = Some(4.0);
        let (cat, s) = run(text, &o).unwrap();
        assert_eq!(cat.len(), 2);
        assert_eq!(s.below_magnitude, 1);
        assert_eq!(cat.events()[1].t, 3.0);
    }

    #[test]
    fn depth_region_and_missing_marks_are_counted() {
        let text = "lat,lon,time,depth_km,magnitude\n36,135,1.0,150,5\n36,150,2.0,10,5\n36,135,3.0,,5\n36,135,4.0,99,5\n";
        let mut o = opts();
        o.depth_below = Some(100.0);
        let (cat, s) = run(text, &o).unwrap();
        assert_eq!(cat.len(), 1);
        assert_eq!((s.too_deep, s.outside_region, s.missing_marks, s.rows), (1, 1, 1, 4));
        assert!(s.to_string().contains("ingested 1 of 4 rows"));
    }

    #[test]
    fn rows_are_sorted() {
        let (cat, _) = run("time,lon,lat\n5.5,135,36\n0.25,136,37\n", &opts()).unwrap();
        assert_eq!(cat.events()[0].t, 0.25);
        assert_eq!(cat.events()[0].loc.lon, 136.0);
    }

    #[test]
    fn ties_name_both_lines() {
        let text = "time,lon,lat\n1.0,135,36\n2.0,135,36\n1.0,136,36\n";
        let err = run(text, &opts()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let msg = err.to_string();
        assert!(msg.contains("lines 2 and 4"), "{msg}");
    }

    #[test]
    fn jitter_breaks_ties_in_input_order() {
        let text = "time,lon,lat\n1.0,135,36\n1.0,136,36\n1.0,137,36\n2.0,135,36\n";
        let mut o = opts();
        o.jitter_seconds = Some(0.5);
        let (cat, s) = run(text, &o).unwrap();
        let ev = cat.events();
        assert_eq!(s.jittered, 2);
        assert_eq!(ev[0].t, 1.0);
        assert_eq!(ev[1].loc.lon, 136.0);
        assert!((ev[1].t - 1.0 - 0.5 / 86_400.0).abs() < 1e-15);
        assert!((ev[2].t - 1.0 - 1.0 / 86_400.0).abs() < 1e-15);
        o.jitter_seconds = Some(2.0);
        assert_eq!(run(text, &o).unwrap_err().exit_code(), 1);
    }

    #[test]
    fn iso_times_measure_days_from_origin() {
        let text = "time,lon,lat\n1926-01-01T00:00:00,135,36\n1995-12-31T23:59:59,135,36\n";
        let (cat, _) = run(text, &opts()).unwrap();
        // 70 years with 17 leap days
        let expect = 25_567.0 - 1.0 / 86_400.0;
        assert!((cat.last_time().unwrap() - expect).abs() < 1e-9);
        assert_eq!(cat.origin(), Some("1926-01-01T00:00:00"));
    }

    #[test]
    fn explicit_origin_and_offsets() {
        let text = "time,lon,lat\n2000-01-02T06:00:00+06:00,135,36\n2000-01-02 12:00,135,36\n";
        let mut o = opts();
        o.origin = parse_timestamp("2000-01-01");
        let (cat, _) = run(text, &o).unwrap();
        assert_eq!(cat.events()[0].t, 1.0);
        assert_eq!(cat.events()[1].t, 1.5);
        o.origin = parse_timestamp("2000-01-03");
        assert!(run(text, &o).unwrap_err().to_string().contains("line 2"));
    }

    #[test]
    fn bad_rows_report_their_line() {
        let err = run("time,lon,lat\n1.0,135,36\nsoon,135,36\n", &opts()).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let err = run("time,lon,lat\n1.0,east,36\n", &opts()).unwrap_err();
        assert!(err.to_string().contains("line 2"));
        assert!(run("when,lon,lat\n1.0,135,36\n", &opts()).is_err());
    }

    #[test]
    fn float_days_round_trip_exactly() {
        let t = 12_345.678_901_234_567_f64;
        let text = format!("time,lon,lat\n{t},135.123456789012345,36\n");
        let (cat, _) = run(&text, &opts()).unwrap();
        assert_eq!(cat.events()[0].t, t);
        assert_eq!(cat.events()[0].loc.lon, 135.123456789012345);
    }
}
