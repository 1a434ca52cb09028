//! Online forecasting over a sliding wrench window.

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use gripcast_core::dataset::window_len;
use gripcast_core::{predict_grip, ModelParams, WrenchSample};

use crate::error::{CliError, CliResult};
use crate::formats::parse_tick;

pub const DEFAULT_WINDOW_MS: f64 = 260.0;
/// Shortest and longest window the model was trained on.
pub const MIN_WINDOW_MS: f64 = 10.0;
pub const MAX_WINDOW_MS: f64 = 1250.0;

/// Number of ticks covering `window_ms`, both ends included.
pub fn window_ticks(window_ms: f64) -> CliResult<usize> {
    if !(MIN_WINDOW_MS..=MAX_WINDOW_MS).contains(&window_ms) {
        return Err(CliError::Usage(format!(
            "--window-ms must lie in [{MIN_WINDOW_MS}, {MAX_WINDOW_MS}], got {window_ms}"
        )));
    }
    Ok(window_len(-window_ms, 0.0))
}

/// Keeps the last `capacity` ticks and forecasts once the window is full.
pub struct StreamPredictor<'a> {
    params: &'a ModelParams,
    capacity: usize,
    window: VecDeque<WrenchSample>,
    last_t: Option<f64>,
}

impl<'a> StreamPredictor<'a> {
    pub fn new(params: &'a ModelParams, capacity: usize) -> Self {
        StreamPredictor {
            params,
            capacity,
            window: VecDeque::with_capacity(capacity),
            last_t: None,
        }
    }

    /// Adds one tick. Returns a forecast in newtons once `capacity` ticks have
    /// been seen; a timestamp that does not increase is an error.
    pub fn push(&mut self, t_ms: f64, w: WrenchSample) -> CliResult<Option<Vec<f64>>> {
        if let Some(prev) = self.last_t {
            if t_ms <= prev {
                return Err(CliError::Data(format!(
                    "tick t_ms {t_ms} does not follow previous tick {prev}"
                )));
            }
        }
        self.last_t = Some(t_ms);
        if self.window.len() == self.capacity {
            self.window.pop_front();
        }
        self.window.push_back(w);
        if self.window.len() < self.capacity {
            return Ok(None);
        }
        let x: Vec<WrenchSample> = self.window.iter().copied().collect();
        Ok(Some(predict_grip(&x, self.params)?))
    }
}

/// Counts from one streaming session.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StreamSummary {
    pub ticks: usize,
    pub skipped: usize,
    pub forecasts: usize,
}

/// Reads ticks line by line and writes `t_ms,g1,...,g70` for every tick once
/// the window is full. A header line and blank lines are ignored; malformed
/// lines are reported on `diag` and skipped.
pub fn run_stream<R, W, E>(
    params: &ModelParams,
    window_ms: f64,
    input: R,
    mut out: W,
    mut diag: E,
) -> CliResult<StreamSummary>
where
    R: BufRead,
    W: Write,
    E: Write,
{
    let mut predictor = StreamPredictor::new(params, window_ticks(window_ms)?);
    let mut summary = StreamSummary::default();
    let write_err = |e: std::io::Error| CliError::Data(format!("output: {e}"));
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| CliError::Data(format!("input: {e}")))?;
        let text = line.trim();
        if text.is_empty() || (n == 0 && text.starts_with("t_ms")) {
            continue;
        }
        let (t, w) = match parse_tick(text) {
            Ok(tick) => tick,
            Err(msg) => {
                summary.skipped += 1;
                let _ = writeln!(diag, "line {}: {msg}; tick skipped", n + 1);
                continue;
            }
        };
        summary.ticks += 1;
        if let Some(forecast) = predictor.push(t, w)? {
            let mut row = t.to_string();
            for v in &forecast {
                row.push(',');
                row.push_str(&v.to_string());
            }
            writeln!(out, "{row}").map_err(write_err)?;
            out.flush().map_err(write_err)?;
            summary.forecasts += 1;
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use gripcast_core::dataset::SAMPLE_PERIOD_MS;
    use gripcast_core::init_params;

    #[test]
    fn window_sizes() {
        assert_eq!(window_ticks(260.0).unwrap(), 32);
        assert_eq!(window_ticks(10.0).unwrap(), 2);
        assert_eq!(window_ticks(1250.0).unwrap(), 151);
        assert_eq!(window_ticks(5.0).unwrap_err().exit_code(), 1);
        assert!(window_ticks(1300.0).is_err());
        assert!(window_ticks(f64::NAN).is_err());
    }

    fn ticks(n: usize) -> String {
        (0..n)
            .map(|k| {
                let t = k as f64 * SAMPLE_PERIOD_MS;
                format!("{t},{},0,4.5,0,0.001,0\n", 0.01 * k as f64)
            })
            .collect()
    }

    #[test]
    fn emits_after_fill() {
        let p = init_params(1, 4).unwrap();
        let input = format!("t_ms,fx_N,fy_N,fz_N,tx_Nm,ty_Nm,tz_Nm\n{}", ticks(40));
        let mut out = Vec::new();
        let mut diag = Vec::new();
        let s = run_stream(&p, 260.0, input.as_bytes(), &mut out, &mut diag).unwrap();
        assert_eq!(s, StreamSummary { ticks: 40, skipped: 0, forecasts: 9 });
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 9);
        assert!(lines.iter().all(|l| l.split(',').count() == 71));
        assert!(diag.is_empty());
    }

    #[test]
    fn malformed_lines_are_skipped() {
        let p = init_params(1, 4).unwrap();
        let mut input = ticks(33);
        input.insert_str(0, "garbage\n");
        input.push_str("1e9,1,2\n");
        let mut out = Vec::new();
        let mut diag = Vec::new();
        let s = run_stream(&p, 260.0, input.as_bytes(), &mut out, &mut diag).unwrap();
        assert_eq!((s.ticks, s.skipped, s.forecasts), (33, 2, 2));
        let d = String::from_utf8(diag).unwrap();
        assert!(d.contains("line 1") && d.contains("line 35"), "{d}");
    }

    #[test]
    fn non_monotone_is_fatal() {
        let p = init_params(1, 4).unwrap();
        let input = "0,0,0,0,0,0,0\n8,0,0,0,0,0,0\n8,0,0,0,0,0,0\n";
        let err = run_stream(&p, 260.0, input.as_bytes(), Vec::new(), Vec::new()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
