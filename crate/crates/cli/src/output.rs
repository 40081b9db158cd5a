//! CSV writers and readers. Every file has a fixed header and uses `.` as
//! the decimal separator.
//!
//! | file              | header                                   |
//! |-------------------|------------------------------------------|
//! | catalog           | `time,lon,lat,magnitude,depth_km`        |
//! | labels            | `index,label,kills,D,E`                  |
//! | posterior         | `index,t,lon,lat,p_member`               |
//! | active series     | `t,p_active`                             |
//! | histograms        | `bin_lo,bin_hi,count`                    |
//! | top-K time–space  | `t,lon,lat`                              |
//! | fit trace         | `iteration,neg_loglik`                   |
//!
//! Catalog coordinates and times are written in shortest round-trip form so
//! re-ingesting reproduces them bit for bit; everything else carries 12
//! significant digits.

use std::path::Path;

use declust::report::{ActiveRow, HistogramBin, PosteriorRow};
use declust::{Catalog, HiddenLabel, LabeledPath};

use crate::error::{CliError, CliResult};

/// `x` with 12 significant digits, without exponent for ordinary
/// magnitudes and without trailing zeros.
pub fn sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-6..=15).contains(&exp) {
        return format!("{x:.11e}");
    }
    let decimals = (11 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn write_rows<I>(path: &Path, header: &[&str], rows: I) -> CliResult<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    w.write_record(header).map_err(|e| CliError::io(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_catalog(path: &Path, catalog: &Catalog<f64>) -> CliResult<()> {
    let rows = catalog.events().iter().map(|e| {
        vec![
            format!("{}", e.t),
            format!("{}", e.loc.lon),
            format!("{}", e.loc.lat),
            String::new(),
            String::new(),
        ]
    });
    write_rows(path, &["time", "lon", "lat", "magnitude", "depth_km"], rows)
}

pub fn write_labels(path: &Path, labels: &LabeledPath) -> CliResult<()> {
    let rows = labels.labels().iter().enumerate().map(|(k, label)| {
        let kills = matches!(label, HiddenLabel::Offspring { kills: true });
        vec![
            (k + 1).to_string(),
            label.name().to_string(),
            u8::from(kills).to_string(),
            u8::from(labels.active()[k]).to_string(),
            labels.latest_mother()[k].to_string(),
        ]
    });
    write_rows(path, &["index", "label", "kills", "D", "E"], rows)
}

pub fn write_posterior(path: &Path, rows: &[PosteriorRow<f64>]) -> CliResult<()> {
    let rows = rows.iter().map(|r| {
        vec![
            r.index.to_string(),
            sig12(r.t),
            sig12(r.lon),
            sig12(r.lat),
            sig12(r.p_member),
        ]
    });
    write_rows(path, &["index", "t", "lon", "lat", "p_member"], rows)
}

pub fn write_active(path: &Path, rows: &[ActiveRow<f64>]) -> CliResult<()> {
    let rows = rows.iter().map(|r| vec![sig12(r.t), sig12(r.p_active)]);
    write_rows(path, &["t", "p_active"], rows)
}

pub fn write_histogram(path: &Path, bins: &[HistogramBin]) -> CliResult<()> {
    let rows = bins
        .iter()
        .map(|b| vec![sig12(b.lo), sig12(b.hi), b.count.to_string()]);
    write_rows(path, &["bin_lo", "bin_hi", "count"], rows)
}

pub fn write_time_space(path: &Path, rows: &[PosteriorRow<f64>]) -> CliResult<()> {
    let rows = rows
        .iter()
        .map(|r| vec![sig12(r.t), sig12(r.lon), sig12(r.lat)]);
    write_rows(path, &["t", "lon", "lat"], rows)
}

pub fn write_trace(path: &Path, trace: &[f64]) -> CliResult<()> {
    let rows = trace
        .iter()
        .enumerate()
        .map(|(k, f)| vec![k.to_string(), sig12(*f)]);
    write_rows(path, &["iteration", "neg_loglik"], rows)
}

/// Per-event probabilities from an external CSV with a header: the column
/// named `p` or `p_member` if present, otherwise the last column.
pub fn read_probabilities(path: &Path) -> CliResult<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::io(path, e))?;
    let headers = rdr.headers().map_err(|e| CliError::io(path, e))?.clone();
    let col = headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case("p") || h.eq_ignore_ascii_case("p_member"))
        .or_else(|| headers.len().checked_sub(1))
        .ok_or_else(|| CliError::data(format!("{}: empty header", path.display())))?;
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| CliError::io(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let raw = record.get(col).unwrap_or("");
        let p = raw
            .parse::<f64>()
            .ok()
            .filter(|p| (0.0..=1.0).contains(p))
            .ok_or_else(|| {
                CliError::data(format!("{}: line {line}: '{raw}' is not a probability", path.display()))
            })?;
        out.push(p);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(sig12(25_566.123_456_789_01), "25566.1234568");
        assert_eq!(sig12(0.5), "0.5");
        assert_eq!(sig12(1.0), "1");
        assert_eq!(sig12(0.000_123_456_789_012_345), "0.000123456789012");
        assert_eq!(sig12(-2.0 / 3.0), "-0.666666666667");
        assert_eq!(sig12(0.0), "0");
        assert_eq!(sig12(1e-9), "1.00000000000e-9");
        assert_eq!(sig12(123_456_789_012_345.0), "123456789012345");
    }

    #[test]
    fn external_probabilities_pick_named_or_last_column() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        std::fs::write(&a, "p,index\n0.25,1\n1,2\n").unwrap();
        assert_eq!(read_probabilities(&a).unwrap(), vec![0.25, 1.0]);
        let b = dir.path().join("b.csv");
        std::fs::write(&b, "index,prob\n1,0.1\n2,0.9\n").unwrap();
        assert_eq!(read_probabilities(&b).unwrap(), vec![0.1, 0.9]);
        std::fs::write(&b, "index,prob\n1,1.5\n").unwrap();
        assert!(read_probabilities(&b).unwrap_err().to_string().contains("line 2"));
    }

    #[test]
    fn labels_file_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.csv");
        let labels = LabeledPath::from_labels(vec![
            HiddenLabel::Noise,
            HiddenLabel::Mother,
            HiddenLabel::Offspring { kills: false },
            HiddenLabel::Offspring { kills: true },
        ])
        .unwrap();
        write_labels(&path, &labels).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "index,label,kills,D,E\n1,noise,0,0,0\n2,mother,0,1,2\n3,offspring,0,1,2\n4,offspring,1,0,2\n"
        );
    }
}
