//! CSV schemas.
//!
//! Floats are written with Rust's shortest round-trip formatting, so equal
//! inputs give byte-identical files and reading a file back recovers the
//! exact values.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use spinmag_core::estimate::Spectrum;
use spinmag_core::pulse::PhotocountPmf;
use spinmag_core::record::{
    ClickEvent, EnsembleStats, PhotocurrentBin, PhotocurrentRecord, Port, TrajectoryRecord, OBSERVABLE_COUNT,
};

use crate::{Error, Result};

pub const TRAJECTORY_COLUMNS: [&str; 12] = [
    "t",
    "fx",
    "fy",
    "fz",
    "vxx",
    "vxy",
    "vxz",
    "vyy",
    "vyz",
    "vzz",
    "clicks_plus_cum",
    "clicks_minus_cum",
];
pub const CLICK_COLUMNS: [&str; 2] = ["t", "port"];
pub const PHOTOCURRENT_COLUMNS: [&str; 4] = ["t", "dC_plus", "dC_minus", "dC_diff"];
pub const PMF_COLUMNS: [&str; 3] = ["c_plus", "c_minus", "probability"];
pub const SPECTRUM_COLUMNS: [&str; 2] = ["frequency_Hz", "power"];

fn open(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn write_table<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = open(path)?;
    w.write_record(header).map_err(|e| Error::csv(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn num(x: f64) -> String {
    format!("{x}")
}

pub fn write_trajectory(path: &Path, record: &TrajectoryRecord) -> Result<()> {
    write_table(
        path,
        &TRAJECTORY_COLUMNS,
        record
            .samples
            .iter()
            .map(|s| std::iter::once(num(s.time)).chain(s.observables().map(num))),
    )
}

pub fn write_clicks(path: &Path, events: &[ClickEvent]) -> Result<()> {
    write_table(
        path,
        &CLICK_COLUMNS,
        events.iter().map(|e| {
            let port = match e.port {
                Port::Plus => "+",
                Port::Minus => "-",
            };
            [num(e.time), port.to_string()]
        }),
    )
}

pub fn write_photocurrent(path: &Path, record: &PhotocurrentRecord) -> Result<()> {
    write_table(
        path,
        &PHOTOCURRENT_COLUMNS,
        record
            .bins
            .iter()
            .map(|b| [num(b.time), num(b.d_plus), num(b.d_minus), num(b.difference())]),
    )
}

pub fn write_pmf(path: &Path, pmf: &PhotocountPmf) -> Result<()> {
    write_table(
        path,
        &PMF_COLUMNS,
        pmf.entries().map(|(a, b, p)| [a.to_string(), b.to_string(), num(p)]),
    )
}

pub fn write_spectrum(path: &Path, spectrum: &Spectrum) -> Result<()> {
    write_table(
        path,
        &SPECTRUM_COLUMNS,
        spectrum
            .frequency_hz
            .iter()
            .zip(&spectrum.power)
            .map(|(f, p)| [num(*f), num(*p)]),
    )
}

/// Per-time ensemble means and standard errors: `t`, then `<name>_mean` and
/// `<name>_se` for every trajectory column.
pub fn write_ensemble(path: &Path, stats: &EnsembleStats) -> Result<()> {
    let mut header = vec!["t".to_string()];
    for name in &TRAJECTORY_COLUMNS[1..] {
        header.push(format!("{name}_mean"));
        header.push(format!("{name}_se"));
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_table(
        path,
        &header,
        (0..stats.times.len()).map(|i| {
            let mut row = vec![num(stats.times[i])];
            for k in 0..OBSERVABLE_COUNT {
                row.push(num(stats.mean[i][k]));
                row.push(num(stats.std_error[i][k]));
            }
            row
        }),
    )
}

/// Writes a free-form table; used for sweep summaries.
pub fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    write_table(path, header, rows.iter().cloned())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

fn reader(path: &Path, expected: &[&str]) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let header = r.headers().map_err(|e| Error::csv(path, e))?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::BadInput {
            path: path.into(),
            reason: format!("expected columns {}", expected.join(",")),
        });
    }
    Ok(r)
}

fn parse_row(path: &Path, rec: &csv::StringRecord) -> Result<Vec<f64>> {
    rec.iter()
        .map(|s| {
            s.trim().parse::<f64>().map_err(|_| Error::BadInput {
                path: path.into(),
                reason: format!("`{s}` is not a number"),
            })
        })
        .collect()
}

/// Rows of a trajectory CSV as `(t, observables)`.
pub fn read_trajectory(path: &Path) -> Result<Vec<(f64, [f64; OBSERVABLE_COUNT])>> {
    let mut r = reader(path, &TRAJECTORY_COLUMNS)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let v = parse_row(path, &rec.map_err(|e| Error::csv(path, e))?)?;
        let mut obs = [0.0; OBSERVABLE_COUNT];
        obs.copy_from_slice(&v[1..]);
        out.push((v[0], obs));
    }
    Ok(out)
}

/// Reads a photocurrent CSV; the bin width is the spacing of `t`, which
/// must be uniform.
pub fn read_photocurrent(path: &Path) -> Result<PhotocurrentRecord> {
    let mut r = reader(path, &PHOTOCURRENT_COLUMNS)?;
    let mut bins = Vec::new();
    for rec in r.records() {
        let v = parse_row(path, &rec.map_err(|e| Error::csv(path, e))?)?;
        bins.push(PhotocurrentBin {
            time: v[0],
            d_plus: v[1],
            d_minus: v[2],
        });
    }
    if bins.len() < 2 {
        return Err(Error::BadInput {
            path: path.into(),
            reason: "need at least two bins".into(),
        });
    }
    let bin_width = (bins[bins.len() - 1].time - bins[0].time) / (bins.len() - 1) as f64;
    let uniform = bins
        .windows(2)
        .all(|w| ((w[1].time - w[0].time) - bin_width).abs() <= 1e-6 * bin_width);
    if !(bin_width > 0.0) || !uniform {
        return Err(Error::BadInput {
            path: path.into(),
            reason: "bin times are not uniformly increasing".into(),
        });
    }
    Ok(PhotocurrentRecord { bin_width, bins })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> PhotocurrentRecord {
        PhotocurrentRecord {
            bin_width: 1e-4,
            bins: (0..5)
                .map(|i| PhotocurrentBin {
                    time: i as f64 * 1e-4,
                    d_plus: 0.1 * i as f64 + 1.0 / 3.0,
                    d_minus: -0.7,
                })
                .collect(),
        }
    }

    #[test]
    fn photocurrent_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pc.csv");
        let rec = record();
        write_photocurrent(&p, &rec).unwrap();
        let back = read_photocurrent(&p).unwrap();
        assert_eq!(back.bins, rec.bins);
        assert!((back.bin_width - 1e-4).abs() < 1e-18);
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("t,dC_plus,dC_minus,dC_diff\n"));
    }

    #[test]
    fn wrong_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        std::fs::write(&p, "t,a,b,c\n0,1,2,3\n1,1,2,3\n").unwrap();
        assert!(matches!(read_photocurrent(&p), Err(Error::BadInput { .. })));
    }

    #[test]
    fn nonuniform_bins_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        std::fs::write(&p, "t,dC_plus,dC_minus,dC_diff\n0,1,0,1\n1,1,0,1\n3,1,0,1\n").unwrap();
        assert!(read_photocurrent(&p).is_err());
    }
}
