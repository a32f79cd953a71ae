//! Text file formats.
//!
//! Every table file starts with one `#` line holding a JSON header, followed
//! by comma-separated numeric rows. The header names the columns, and the
//! column names carry the units (`frequency_hz`, `delay_ns`, `power_db`).
//! Ground truth and reports are plain JSON.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FrequencyGrid, FrequencySweep, ImpulseResponse, Pdp, SweepLabel};
use crate::synthesis::GroundTruth;

const SWEEP_COLUMNS: [&str; 3] = ["frequency_hz", "re", "im"];
const CIR_COLUMNS: [&str; 3] = ["delay_ns", "re", "im"];
const PDP_COLUMNS: [&str; 2] = ["delay_ns", "power_db"];

/// Thirteen significant digits, enough for a relative round-trip error
/// below 1e-12.
fn num(x: f64) -> String {
    format!("{x:.12e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SweepHeader {
    kind: String,
    columns: Vec<String>,
    grid: FrequencyGrid,
    #[serde(default)]
    label: SweepLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CirHeader {
    kind: String,
    columns: Vec<String>,
    delay_step_ns: f64,
    t0_ns: f64,
    n_taps: usize,
    #[serde(default)]
    label: SweepLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PdpHeader {
    kind: String,
    columns: Vec<String>,
    #[serde(with = "crate::serde_f64")]
    noise_floor_db: f64,
}

struct Table {
    path: String,
    header_json: String,
    /// (1-based line number, values)
    rows: Vec<(usize, Vec<f64>)>,
    last_line: usize,
}

fn parse_error(path: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        message: message.into(),
    }
}

fn read_table(path: &Path, n_columns: usize) -> Result<Table> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let shown = path.display().to_string();
    let mut lines = text.lines().enumerate();
    let header_json = match lines.next() {
        Some((_, l)) if l.starts_with('#') => l[1..].trim().to_string(),
        _ => return Err(parse_error(&shown, 1, "missing '#' header line")),
    };
    let mut rows = Vec::new();
    let mut last_line = 1;
    for (i, line) in lines {
        last_line = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let values: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_error(&shown, i + 1, format!("bad number: {e}")))?;
        if values.len() != n_columns {
            return Err(parse_error(
                &shown,
                i + 1,
                format!("expected {n_columns} columns, found {}", values.len()),
            ));
        }
        rows.push((i + 1, values));
    }
    Ok(Table {
        path: shown,
        header_json,
        rows,
        last_line,
    })
}

fn parse_header<T: for<'de> Deserialize<'de>>(table: &Table) -> Result<T> {
    serde_json::from_str(&table.header_json)
        .map_err(|e| parse_error(&table.path, 1, format!("bad header: {e}")))
}

fn check_kind(table: &Table, kind: &str, got_kind: &str, columns: &[String], want: &[&str]) -> Result<()> {
    if got_kind != kind {
        return Err(parse_error(
            &table.path,
            1,
            format!("expected a {kind} file, header says {got_kind}"),
        ));
    }
    if columns.len() != want.len() || columns.iter().zip(want).any(|(a, b)| a != b) {
        return Err(Error::UnitMismatch {
            path: table.path.clone(),
            message: format!("columns {columns:?}, expected {want:?}"),
        });
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn header_line<T: Serialize>(header: &T) -> String {
    format!("# {}\n", serde_json::to_string(header).expect("header serializes"))
}

pub fn write_sweep(path: &Path, sweep: &FrequencySweep) -> Result<()> {
    let header = SweepHeader {
        kind: "sweep".into(),
        columns: SWEEP_COLUMNS.iter().map(|s| s.to_string()).collect(),
        grid: *sweep.grid(),
        label: sweep.label.clone(),
    };
    let mut out = header_line(&header);
    for (k, g) in sweep.gains().iter().enumerate() {
        out.push_str(&format!(
            "{},{},{}\n",
            num(sweep.grid().frequency_hz(k)),
            num(g.re),
            num(g.im)
        ));
    }
    write_text(path, &out)
}

/// Reads a sweep file; rows must be strictly increasing in frequency and
/// sit on the header grid.
pub fn read_sweep(path: &Path) -> Result<FrequencySweep> {
    let table = read_table(path, 3)?;
    let header: SweepHeader = parse_header(&table)?;
    check_kind(&table, "sweep", &header.kind, &header.columns, &SWEEP_COLUMNS)?;
    let grid = FrequencyGrid::new(
        header.grid.start_hz(),
        header.grid.stop_hz(),
        header.grid.n_points(),
    )
    .map_err(|e| parse_error(&table.path, 1, e.to_string()))?;
    if table.rows.len() != grid.n_points() {
        return Err(parse_error(
            &table.path,
            table.last_line,
            format!(
                "{} rows against a {}-point header grid",
                table.rows.len(),
                grid.n_points()
            ),
        ));
    }
    let tol = 1e-6 * grid.spacing_hz();
    let mut gains = Vec::with_capacity(grid.n_points());
    for pair in table.rows.windows(2) {
        if !(pair[1].1[0] > pair[0].1[0]) {
            return Err(parse_error(
                &table.path,
                pair[1].0,
                "frequencies must be strictly increasing",
            ));
        }
    }
    for (k, (line, v)) in table.rows.iter().enumerate() {
        if (v[0] - grid.frequency_hz(k)).abs() > tol {
            return Err(parse_error(
                &table.path,
                *line,
                format!("frequency {} Hz is off the header grid", v[0]),
            ));
        }
        gains.push(Complex64::new(v[1], v[2]));
    }
    FrequencySweep::new(grid, gains, header.label).map_err(|e| match e {
        Error::NonFinite(i) => parse_error(&table.path, table.rows[i].0, "non-finite gain"),
        other => other,
    })
}

/// Writes the nonzero taps; the header records the full tap count.
pub fn write_cir(path: &Path, cir: &ImpulseResponse, label: &SweepLabel) -> Result<()> {
    let header = CirHeader {
        kind: "cir".into(),
        columns: CIR_COLUMNS.iter().map(|s| s.to_string()).collect(),
        delay_step_ns: cir.delay_step_ns(),
        t0_ns: cir.t0_ns(),
        n_taps: cir.taps().len(),
        label: label.clone(),
    };
    let mut out = header_line(&header);
    for (k, h) in cir.taps().iter().enumerate() {
        if h.norm_sqr() == 0.0 {
            continue;
        }
        out.push_str(&format!("{},{},{}\n", num(cir.delay_ns(k)), num(h.re), num(h.im)));
    }
    write_text(path, &out)
}

pub fn read_cir(path: &Path) -> Result<(ImpulseResponse, SweepLabel)> {
    let table = read_table(path, 3)?;
    let header: CirHeader = parse_header(&table)?;
    check_kind(&table, "cir", &header.kind, &header.columns, &CIR_COLUMNS)?;
    let step = header.delay_step_ns;
    if !(step > 0.0) {
        return Err(parse_error(&table.path, 1, "delay_step_ns must be positive"));
    }
    let mut taps = vec![Complex64::new(0.0, 0.0); header.n_taps];
    for (line, v) in &table.rows {
        let pos = (v[0] - header.t0_ns) / step;
        let k = pos.round();
        if (pos - k).abs() > 1e-6 || k < 0.0 || k >= header.n_taps as f64 {
            return Err(parse_error(
                &table.path,
                *line,
                format!("delay {} ns is off the tap grid", v[0]),
            ));
        }
        taps[k as usize] = Complex64::new(v[1], v[2]);
    }
    let cir = ImpulseResponse::new(step, header.t0_ns, taps)
        .map_err(|e| parse_error(&table.path, 1, e.to_string()))?;
    Ok((cir, header.label))
}

fn to_db(p: f64) -> f64 {
    10.0 * p.log10()
}

/// Writes powers in dB; zero power becomes `-inf`.
pub fn write_pdp(path: &Path, pdp: &Pdp) -> Result<()> {
    let header = PdpHeader {
        kind: "pdp".into(),
        columns: PDP_COLUMNS.iter().map(|s| s.to_string()).collect(),
        noise_floor_db: to_db(pdp.noise_floor),
    };
    let mut out = header_line(&header);
    for (d, p) in pdp.delays_ns.iter().zip(&pdp.powers) {
        out.push_str(&format!("{},{}\n", num(*d), num(to_db(*p))));
    }
    write_text(path, &out)
}

pub fn read_pdp(path: &Path) -> Result<Pdp> {
    let table = read_table(path, 2)?;
    let header: PdpHeader = parse_header(&table)?;
    check_kind(&table, "pdp", &header.kind, &header.columns, &PDP_COLUMNS)?;
    let delays = table.rows.iter().map(|(_, v)| v[0]).collect();
    let powers = table
        .rows
        .iter()
        .map(|(_, v)| 10f64.powf(v[1] / 10.0))
        .collect();
    Pdp::new(delays, powers, 10f64.powf(header.noise_floor_db / 10.0))
        .map_err(|e| parse_error(&table.path, 1, e.to_string()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::io(path, format!("cannot serialize: {e}")))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })
}

pub fn write_ground_truth(path: &Path, truth: &GroundTruth) -> Result<()> {
    write_json(path, truth)
}

pub fn read_ground_truth(path: &Path) -> Result<GroundTruth> {
    read_json(path)
}

/// Files in `dir` with the given extension, sorted by name.
pub fn list_files(dir: &Path, extension: &str) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == extension))
        .collect();
    files.sort();
    Ok(files)
}

pub fn read_sweep_dir(dir: &Path) -> Result<Vec<FrequencySweep>> {
    list_files(dir, "csv")?.iter().map(|p| read_sweep(p)).collect()
}

/// `system.csv`, `tx_antenna.csv` and `rx_antenna.csv` from `dir`.
pub fn read_calibration(dir: &Path) -> Result<crate::dsp::CalibrationSet> {
    Ok(crate::dsp::CalibrationSet {
        system_resp: read_sweep(&dir.join("system.csv"))?,
        tx_antenna_resp: read_sweep(&dir.join("tx_antenna.csv"))?,
        rx_antenna_resp: read_sweep(&dir.join("rx_antenna.csv"))?,
    })
}
