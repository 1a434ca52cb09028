//! CSV formats: recordings, wrench windows, forecasts, comparison exports and
//! loss histories.
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! value reparses to the identical `f64`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use gripcast_core::dataset::{check_spacing, CHANNEL_NAMES, SAMPLE_PERIOD_MS, WRENCH_CHANNELS};
use gripcast_core::optim::{LossHistory, Metrics};
use gripcast_core::{HandoverRecord, TrainingSample, WrenchSample};

use crate::error::{CliError, CliResult};

pub const RECORDING_COLUMNS: [&str; 11] = [
    "pair_id",
    "handover_id",
    "t_ms",
    "fx_N",
    "fy_N",
    "fz_N",
    "tx_Nm",
    "ty_Nm",
    "tz_Nm",
    "grip_giver_N",
    "grip_taker_N",
];

/// Columns of a wrench window (prediction input and stream ticks).
pub const WINDOW_COLUMNS: [&str; 7] = ["t_ms", "fx_N", "fy_N", "fz_N", "tx_Nm", "ty_Nm", "tz_Nm"];

fn open(path: &Path) -> CliResult<File> {
    File::open(path).map_err(|e| CliError::io(path, e))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn csv_err(source: &str, e: csv::Error) -> CliError {
    CliError::Data(format!("{source}: {e}"))
}

fn write_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("write failed: {e}"))
}

/// Column positions looked up by name from a header row.
struct Columns<const N: usize> {
    index: [usize; N],
    names: [&'static str; N],
}

impl<const N: usize> Columns<N> {
    fn locate(source: &str, header: &csv::StringRecord, names: [&'static str; N]) -> CliResult<Self> {
        let mut index = [0; N];
        for (slot, name) in index.iter_mut().zip(names) {
            *slot = header
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| CliError::Data(format!("{source}: missing column `{name}`")))?;
        }
        Ok(Columns { index, names })
    }

    fn raw<'r>(&self, row: &'r csv::StringRecord, col: usize, source: &str, line: u64) -> CliResult<&'r str> {
        row.get(self.index[col]).map(str::trim).ok_or_else(|| {
            CliError::Data(format!("{source}: line {line}, field `{}`: missing value", self.names[col]))
        })
    }

    fn float(&self, row: &csv::StringRecord, col: usize, source: &str, line: u64) -> CliResult<f64> {
        let raw = self.raw(row, col, source, line)?;
        let v: f64 = raw.parse().map_err(|_| {
            CliError::Data(format!(
                "{source}: line {line}, field `{}`: cannot parse `{raw}` as a number",
                self.names[col]
            ))
        })?;
        if !v.is_finite() {
            return Err(CliError::Data(format!(
                "{source}: line {line}, field `{}`: non-finite value",
                self.names[col]
            )));
        }
        Ok(v)
    }

    fn id(&self, row: &csv::StringRecord, col: usize, source: &str, line: u64) -> CliResult<u32> {
        let raw = self.raw(row, col, source, line)?;
        raw.parse().map_err(|_| {
            CliError::Data(format!(
                "{source}: line {line}, field `{}`: `{raw}` is not a non-negative integer",
                self.names[col]
            ))
        })
    }
}

#[derive(Default)]
struct Group {
    t_ms: Vec<f64>,
    wrench: Vec<WrenchSample>,
    giver: Vec<f64>,
    taker: Vec<f64>,
}

/// Parses a recording CSV. Rows are grouped by `(pair_id, handover_id)` and
/// the groups returned in that order; rows of one handover must already be in
/// time order on the 120 Hz grid.
pub fn read_recordings<R: Read>(reader: R, source: &str) -> CliResult<Vec<HandoverRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_err(source, e))?.clone();
    let cols = Columns::locate(source, &header, RECORDING_COLUMNS)?;
    let mut groups: BTreeMap<(u32, u32), Group> = BTreeMap::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_err(source, e))?;
        let line = row.position().map_or(0, |p| p.line());
        let key = (cols.id(&row, 0, source, line)?, cols.id(&row, 1, source, line)?);
        let t = cols.float(&row, 2, source, line)?;
        let mut w = [0.0; WRENCH_CHANNELS];
        for (k, v) in w.iter_mut().enumerate() {
            *v = cols.float(&row, 3 + k, source, line)?;
        }
        let giver = cols.float(&row, 9, source, line)?;
        let taker = cols.float(&row, 10, source, line)?;

        let g = groups.entry(key).or_default();
        if let Some(&prev) = g.t_ms.last() {
            check_spacing(prev, t).map_err(|msg| {
                CliError::Data(format!(
                    "{source}: line {line}, field `t_ms`: {msg} (pair {}, handover {})",
                    key.0, key.1
                ))
            })?;
        }
        g.t_ms.push(t);
        g.wrench.push(WrenchSample::from_array(w));
        g.giver.push(giver);
        g.taker.push(taker);
    }
    groups
        .into_iter()
        .map(|((pair, handover), g)| {
            HandoverRecord::new(pair, handover, g.t_ms, g.wrench, g.giver, g.taker).map_err(|e| {
                CliError::Data(format!("{source}: pair {pair}, handover {handover}: {e}"))
            })
        })
        .collect()
}

pub fn load_recordings(path: &Path) -> CliResult<Vec<HandoverRecord>> {
    read_recordings(open(path)?, &path.display().to_string())
}

pub fn write_recordings<W: Write>(writer: W, records: &[HandoverRecord]) -> CliResult<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(RECORDING_COLUMNS).map_err(write_err)?;
    for r in records {
        for k in 0..r.len() {
            let mut row = vec![r.pair_id.to_string(), r.handover_id.to_string(), r.t_ms[k].to_string()];
            row.extend(r.wrench[k].to_array().iter().map(f64::to_string));
            row.push(r.grip_giver[k].to_string());
            row.push(r.grip_taker[k].to_string());
            wtr.write_record(&row).map_err(write_err)?;
        }
    }
    wtr.flush().map_err(write_err)
}

pub fn save_recordings(path: &Path, records: &[HandoverRecord]) -> CliResult<()> {
    write_recordings(create(path)?, records)
}

/// A wrench window with its timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct WrenchWindow {
    pub t_ms: Vec<f64>,
    pub wrench: Vec<WrenchSample>,
}

pub fn read_window<R: Read>(reader: R, source: &str) -> CliResult<WrenchWindow> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_err(source, e))?.clone();
    let cols = Columns::locate(source, &header, WINDOW_COLUMNS)?;
    let mut window = WrenchWindow { t_ms: Vec::new(), wrench: Vec::new() };
    for row in rdr.records() {
        let row = row.map_err(|e| csv_err(source, e))?;
        let line = row.position().map_or(0, |p| p.line());
        let t = cols.float(&row, 0, source, line)?;
        if window.t_ms.last().is_some_and(|&prev| t <= prev) {
            return Err(CliError::Data(format!(
                "{source}: line {line}, field `t_ms`: timestamps not strictly increasing"
            )));
        }
        let mut w = [0.0; WRENCH_CHANNELS];
        for (k, v) in w.iter_mut().enumerate() {
            *v = cols.float(&row, 1 + k, source, line)?;
        }
        window.t_ms.push(t);
        window.wrench.push(WrenchSample::from_array(w));
    }
    if window.t_ms.is_empty() {
        return Err(CliError::Data(format!("{source}: no wrench samples")));
    }
    Ok(window)
}

pub fn load_window(path: &Path) -> CliResult<WrenchWindow> {
    read_window(open(path)?, &path.display().to_string())
}

pub fn write_window<W: Write>(writer: W, t_ms: &[f64], wrench: &[WrenchSample]) -> CliResult<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(WINDOW_COLUMNS).map_err(write_err)?;
    for (t, w) in t_ms.iter().zip(wrench) {
        wtr.write_record(window_row(*t, w)).map_err(write_err)?;
    }
    wtr.flush().map_err(write_err)
}

fn window_row(t: f64, w: &WrenchSample) -> Vec<String> {
    let mut row = vec![t.to_string()];
    row.extend(w.to_array().iter().map(f64::to_string));
    row
}

/// One line of tick input for streaming: `t_ms` and six wrench values.
pub fn parse_tick(line: &str) -> Result<(f64, WrenchSample), String> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != WINDOW_COLUMNS.len() {
        return Err(format!(
            "expected {} fields, found {}",
            WINDOW_COLUMNS.len(),
            fields.len()
        ));
    }
    let mut vals = [0.0f64; 7];
    for ((v, raw), name) in vals.iter_mut().zip(&fields).zip(WINDOW_COLUMNS) {
        *v = raw
            .parse()
            .map_err(|_| format!("field `{name}`: cannot parse `{raw}` as a number"))?;
        if !v.is_finite() {
            return Err(format!("field `{name}`: non-finite value"));
        }
    }
    let [t, fx, fy, fz, tx, ty, tz] = vals;
    Ok((t, WrenchSample::new(fx, fy, fz, tx, ty, tz)))
}

/// Timestamps of a forecast that continues the grid after `last_t_ms`.
pub fn forecast_times(last_t_ms: f64, horizon: usize) -> Vec<f64> {
    (1..=horizon)
        .map(|k| last_t_ms + k as f64 * SAMPLE_PERIOD_MS)
        .collect()
}

pub fn write_forecast<W: Write>(writer: W, t_ms: &[f64], grip: &[f64]) -> CliResult<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["t_ms", CHANNEL_NAMES[6]]).map_err(write_err)?;
    for (t, g) in t_ms.iter().zip(grip) {
        wtr.write_record([t.to_string(), g.to_string()]).map_err(write_err)?;
    }
    wtr.flush().map_err(write_err)
}

/// Reads a forecast CSV back as `(t_ms, grip_N)` columns.
pub fn read_forecast<R: Read>(reader: R, source: &str) -> CliResult<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_err(source, e))?.clone();
    let cols = Columns::locate(source, &header, ["t_ms", "grip_N"])?;
    let (mut t, mut g) = (Vec::new(), Vec::new());
    for row in rdr.records() {
        let row = row.map_err(|e| csv_err(source, e))?;
        let line = row.position().map_or(0, |p| p.line());
        t.push(cols.float(&row, 0, source, line)?);
        g.push(cols.float(&row, 1, source, line)?);
    }
    Ok((t, g))
}

pub const COMPARISON_COLUMNS: [&str; 5] = ["sample_id", "step", "t_ms", "predicted_N", "actual_N"];

/// Predicted against actual grip for every step of every sample.
pub fn write_comparison<W: Write>(writer: W, samples: &[TrainingSample], metrics: &Metrics) -> CliResult<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(COMPARISON_COLUMNS).map_err(write_err)?;
    for (id, (s, r)) in samples.iter().zip(&metrics.residuals).enumerate() {
        for (step, (p, a)) in r.predicted_n.iter().zip(&r.actual_n).enumerate() {
            wtr.write_record([
                id.to_string(),
                step.to_string(),
                s.y_time_ms(step).to_string(),
                p.to_string(),
                a.to_string(),
            ])
            .map_err(write_err)?;
        }
    }
    wtr.flush().map_err(write_err)
}

/// One row of `comparison.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonRow {
    pub sample_id: usize,
    pub step: usize,
    pub t_ms: f64,
    pub predicted_n: f64,
    pub actual_n: f64,
}

pub fn read_comparison<R: Read>(reader: R, source: &str) -> CliResult<Vec<ComparisonRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_err(source, e))?.clone();
    let cols = Columns::locate(source, &header, COMPARISON_COLUMNS)?;
    let mut rows = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_err(source, e))?;
        let line = row.position().map_or(0, |p| p.line());
        rows.push(ComparisonRow {
            sample_id: cols.id(&row, 0, source, line)? as usize,
            step: cols.id(&row, 1, source, line)? as usize,
            t_ms: cols.float(&row, 2, source, line)?,
            predicted_n: cols.float(&row, 3, source, line)?,
            actual_n: cols.float(&row, 4, source, line)?,
        });
    }
    Ok(rows)
}

/// `epoch,train_mse,test_mse` with 1-based epochs; `test_mse` is empty when
/// no pairs were held out.
pub fn write_loss_history<W: Write>(writer: W, history: &LossHistory) -> CliResult<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["epoch", "train_mse", "test_mse"]).map_err(write_err)?;
    for (e, (tr, te)) in history.train_mse.iter().zip(&history.test_mse).enumerate() {
        let te = te.map(|v| v.to_string()).unwrap_or_default();
        wtr.write_record([(e + 1).to_string(), tr.to_string(), te])
            .map_err(write_err)?;
    }
    wtr.flush().map_err(write_err)
}

pub(crate) fn create_file(path: &Path) -> CliResult<BufWriter<File>> {
    create(path)
}
