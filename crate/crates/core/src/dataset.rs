//! Handover records, grip-intersection alignment, window sampling,
//! pair-disjoint splits and per-channel normalization.
//!
//! All records are sampled at 120 Hz. Once aligned, sample `k` carries the
//! timestamp `(k - k0) · 1000/120` ms where `k0` is the first sample at or
//! after the downward crossing of `grip_giver - grip_taker`.
//!
//! A training window is addressed by two nominal times: `t_o` (window start)
//! and `t_e` (window end). `x` holds the wrench from the sample nearest `t_e`
//! back over `round((t_e - t_o) · 0.12) + 1` samples; `y` holds the giver grip
//! on the [`HORIZON`] samples strictly after that, so the two series meet at
//! `t_e` without sharing a sample.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{contract, Error, Result};

pub const SAMPLE_RATE_HZ: f64 = 120.0;
pub const SAMPLE_PERIOD_MS: f64 = 1000.0 / SAMPLE_RATE_HZ;
/// Forecast length in samples (583.33 ms at 120 Hz).
pub const HORIZON: usize = 70;
pub const HORIZON_MS: f64 = HORIZON as f64 * SAMPLE_PERIOD_MS;
pub const WRENCH_CHANNELS: usize = 6;
/// Allowed relative deviation of the sample spacing from the nominal period.
pub const SPACING_TOLERANCE: f64 = 0.01;

/// Channel names in normalization order: six wrench channels, then grip.
pub const CHANNEL_NAMES: [&str; 7] = ["fx_N", "fy_N", "fz_N", "tx_Nm", "ty_Nm", "tz_Nm", "grip_N"];

/// Converts a duration in milliseconds to the nearest whole number of samples.
#[inline]
pub fn ms_to_steps(ms: f64) -> i64 {
    libm::round(ms * SAMPLE_RATE_HZ / 1000.0) as i64
}

/// One interaction force-torque reading.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WrenchSample {
    pub fx: f64,
    pub fy: f64,
    pub fz: f64,
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
}

impl WrenchSample {
    pub const fn new(fx: f64, fy: f64, fz: f64, tx: f64, ty: f64, tz: f64) -> Self {
        WrenchSample { fx, fy, fz, tx, ty, tz }
    }

    pub fn from_array(a: [f64; WRENCH_CHANNELS]) -> Self {
        WrenchSample::new(a[0], a[1], a[2], a[3], a[4], a[5])
    }

    pub fn to_array(self) -> [f64; WRENCH_CHANNELS] {
        [self.fx, self.fy, self.fz, self.tx, self.ty, self.tz]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// One recorded handover: wrench and both grip forces on a uniform 120 Hz grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HandoverRecord {
    pub pair_id: u32,
    pub handover_id: u32,
    pub rate_hz: f64,
    pub t_ms: Vec<f64>,
    pub wrench: Vec<WrenchSample>,
    pub grip_giver: Vec<f64>,
    pub grip_taker: Vec<f64>,
    pub aligned: bool,
}

impl HandoverRecord {
    /// Builds an unaligned record and checks its invariants.
    pub fn new(
        pair_id: u32,
        handover_id: u32,
        t_ms: Vec<f64>,
        wrench: Vec<WrenchSample>,
        grip_giver: Vec<f64>,
        grip_taker: Vec<f64>,
    ) -> Result<Self> {
        let record = HandoverRecord {
            pair_id,
            handover_id,
            rate_hz: SAMPLE_RATE_HZ,
            t_ms,
            wrench,
            grip_giver,
            grip_taker,
            aligned: false,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn len(&self) -> usize {
        self.t_ms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_ms.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.t_ms.len();
        if n == 0 {
            return Err(Error::InvalidRecord("empty record".into()));
        }
        if self.wrench.len() != n || self.grip_giver.len() != n || self.grip_taker.len() != n {
            return Err(Error::InvalidRecord(format!(
                "sequence lengths differ: t={} wrench={} giver={} taker={}",
                n,
                self.wrench.len(),
                self.grip_giver.len(),
                self.grip_taker.len()
            )));
        }
        if self.rate_hz != SAMPLE_RATE_HZ {
            return Err(Error::InvalidRecord(format!(
                "rate {} Hz, expected {SAMPLE_RATE_HZ}",
                self.rate_hz
            )));
        }
        for (i, t) in self.t_ms.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::InvalidRecord(format!("non-finite t_ms at sample {i}")));
            }
        }
        for (i, w) in self.t_ms.windows(2).enumerate() {
            check_spacing(w[0], w[1]).map_err(|msg| {
                Error::InvalidRecord(format!("sample {}: {msg}", i + 1))
            })?;
        }
        for i in 0..n {
            if !self.wrench[i].is_finite()
                || !self.grip_giver[i].is_finite()
                || !self.grip_taker[i].is_finite()
            {
                return Err(Error::InvalidRecord(format!("non-finite value at sample {i}")));
            }
        }
        Ok(())
    }

    /// Index of the `t = 0` sample of an aligned record.
    pub fn zero_index(&self) -> Option<usize> {
        if !self.aligned {
            return None;
        }
        let k0 = -ms_to_steps(self.t_ms[0]);
        (0..self.len() as i64).contains(&k0).then_some(k0 as usize)
    }
}

/// Checks one timestamp step against the 120 Hz grid.
pub fn check_spacing(prev: f64, next: f64) -> core::result::Result<(), &'static str> {
    let dt = next - prev;
    if !(dt > 0.0) {
        return Err("timestamps not strictly increasing");
    }
    if libm::fabs(dt - SAMPLE_PERIOD_MS) > SPACING_TOLERANCE * SAMPLE_PERIOD_MS {
        return Err("sample spacing deviates from 120 Hz by more than 1%");
    }
    Ok(())
}

/// Indices `k` where `giver - taker` flips sign between `k - 1` and `k`,
/// classifying values as positive or non-positive.
fn sign_changes(record: &HandoverRecord) -> (Vec<usize>, Vec<usize>) {
    let mut down = Vec::new();
    let mut up = Vec::new();
    let diff = |k: usize| record.grip_giver[k] - record.grip_taker[k];
    for k in 1..record.len() {
        let (a, b) = (diff(k - 1) > 0.0, diff(k) > 0.0);
        if a && !b {
            down.push(k);
        } else if !a && b {
            up.push(k);
        }
    }
    (down, up)
}

/// Re-times `record` so `t = 0` sits on the first sample at or after the
/// downward grip crossing.
///
/// A record must show exactly one sign change of `giver - taker`, and it must
/// be downward. Anything else is reported rather than resolved.
pub fn align_handover(record: &HandoverRecord) -> Result<HandoverRecord> {
    record.validate()?;
    let (down, up) = sign_changes(record);
    if down.len() + up.len() > 1 {
        let mut all: Vec<usize> = down.iter().chain(up.iter()).copied().collect();
        all.sort_unstable();
        return Err(Error::AmbiguousCrossing(all));
    }
    let k0 = *down.first().ok_or(Error::NoCrossing)?;
    let mut out = record.clone();
    for (k, t) in out.t_ms.iter_mut().enumerate() {
        *t = (k as f64 - k0 as f64) * SAMPLE_PERIOD_MS;
    }
    out.aligned = true;
    Ok(out)
}

/// Closed interval in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeMs {
    pub lo: f64,
    pub hi: f64,
}

impl RangeMs {
    pub const fn new(lo: f64, hi: f64) -> Self {
        RangeMs { lo, hi }
    }

    pub fn contains(&self, t: f64) -> bool {
        self.lo <= t && t <= self.hi
    }
}

/// Grid over window end (`t_e`) and start (`t_o`) times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingPolicy {
    pub t_e_range_ms: RangeMs,
    pub t_o_range_ms: RangeMs,
    pub t_e_stride_ms: f64,
    pub t_o_stride_ms: f64,
}

impl Default for SamplingPolicy {
    fn default() -> Self {
        SamplingPolicy {
            t_e_range_ms: RangeMs::new(-250.0, 0.0),
            t_o_range_ms: RangeMs::new(-1250.0, -260.0),
            t_e_stride_ms: 50.0,
            t_o_stride_ms: 250.0,
        }
    }
}

const GRID_EPS: f64 = 1e-9;

/// Descending grid over `range`: `hi, hi - stride, ...` down to `lo`, with
/// `lo` itself appended when the stride does not land on it.
pub fn grid_points(range: RangeMs, stride: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut i = 0u32;
    loop {
        let v = range.hi - i as f64 * stride;
        if v < range.lo - GRID_EPS {
            break;
        }
        out.push(v);
        i += 1;
    }
    if let Some(&last) = out.last() {
        if last - range.lo > GRID_EPS {
            out.push(range.lo);
        }
    }
    out
}

impl SamplingPolicy {
    pub fn validate(&self) -> Result<()> {
        let (e, o) = (self.t_e_range_ms, self.t_o_range_ms);
        if !(e.lo <= e.hi) || !(o.lo <= o.hi) {
            return Err(contract("sampling ranges must be non-empty"));
        }
        if !(self.t_e_stride_ms > 0.0) || !(self.t_o_stride_ms > 0.0) {
            return Err(contract("sampling strides must be positive"));
        }
        if !(o.hi < e.lo) {
            return Err(contract("t_o range must lie entirely before t_e range"));
        }
        if ms_to_steps(e.lo - o.hi) < 1 {
            return Err(contract("t_o and t_e ranges closer than one sample"));
        }
        Ok(())
    }

    pub fn t_e_grid(&self) -> Vec<f64> {
        grid_points(self.t_e_range_ms, self.t_e_stride_ms)
    }

    pub fn t_o_grid(&self) -> Vec<f64> {
        grid_points(self.t_o_range_ms, self.t_o_stride_ms)
    }
}

/// One `(X, Y)` pair: a wrench window and the giver grip that follows it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub pair_id: u32,
    pub handover_id: u32,
    /// Nominal grid times the window was drawn for.
    pub t_o_ms: f64,
    pub t_e_ms: f64,
    pub t_f_ms: f64,
    /// Timestamp of `x[0]` on the record's grid.
    pub x_start_ms: f64,
    pub x: Vec<WrenchSample>,
    pub y: Vec<f64>,
}

impl TrainingSample {
    /// Timestamp of the last `x` sample.
    pub fn x_end_ms(&self) -> f64 {
        self.x_start_ms + (self.x.len() - 1) as f64 * SAMPLE_PERIOD_MS
    }

    /// Timestamp of `y[step]`.
    pub fn y_time_ms(&self, step: usize) -> f64 {
        self.x_start_ms + (self.x.len() + step) as f64 * SAMPLE_PERIOD_MS
    }
}

/// Number of `x` samples for a window from `t_o` to `t_e`, both endpoints included.
pub fn window_len(t_o_ms: f64, t_e_ms: f64) -> usize {
    (ms_to_steps(t_e_ms - t_o_ms) + 1) as usize
}

/// Cuts every in-extent `(t_o, t_e)` grid window out of an aligned record.
///
/// Output order is `t_e` descending, then `t_o` descending. Windows that would
/// run past either end of the record are skipped.
pub fn extract_samples(record: &HandoverRecord, policy: &SamplingPolicy) -> Result<Vec<TrainingSample>> {
    let k0 = record
        .zero_index()
        .ok_or_else(|| contract("extract_samples needs an aligned record"))? as i64;
    policy.validate()?;
    let n = record.len() as i64;
    let t_os = policy.t_o_grid();
    let mut out = Vec::new();
    for &t_e in &policy.t_e_grid() {
        let end = k0 + ms_to_steps(t_e);
        for &t_o in &t_os {
            let len = window_len(t_o, t_e) as i64;
            let start = end - (len - 1);
            if start < 0 || end + HORIZON as i64 >= n {
                continue;
            }
            let (s, e) = (start as usize, end as usize);
            out.push(TrainingSample {
                pair_id: record.pair_id,
                handover_id: record.handover_id,
                t_o_ms: t_o,
                t_e_ms: t_e,
                t_f_ms: t_e + HORIZON_MS,
                x_start_ms: record.t_ms[s],
                x: record.wrench[s..=e].to_vec(),
                y: record.grip_giver[e + 1..=e + HORIZON].to_vec(),
            });
        }
    }
    Ok(out)
}

/// Partitions records by participant pair. Order within each side is preserved.
pub fn split_by_pair(
    records: Vec<HandoverRecord>,
    test_pair_ids: &BTreeSet<u32>,
) -> Result<(Vec<HandoverRecord>, Vec<HandoverRecord>)> {
    let present: BTreeSet<u32> = records.iter().map(|r| r.pair_id).collect();
    if let Some(missing) = test_pair_ids.difference(&present).next() {
        return Err(contract(format!("test pair id {missing} not present in data")));
    }
    Ok(records
        .into_iter()
        .partition(|r| !test_pair_ids.contains(&r.pair_id)))
}

/// Per-channel z-score statistics: six wrench channels, then giver grip.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mean: [f64; 7],
    pub std: [f64; 7],
}

pub const GRIP_CHANNEL: usize = 6;

impl NormStats {
    /// Zero mean, unit spread on every channel.
    pub const fn identity() -> Self {
        NormStats {
            mean: [0.0; 7],
            std: [1.0; 7],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for ch in 0..7 {
            if !self.mean[ch].is_finite() {
                return Err(contract(format!("non-finite mean on {}", CHANNEL_NAMES[ch])));
            }
            if !(self.std[ch] > 0.0) || !self.std[ch].is_finite() {
                return Err(Error::DegenerateChannel(CHANNEL_NAMES[ch]));
            }
        }
        Ok(())
    }

    pub fn normalize_wrench(&self, w: &WrenchSample, out: &mut [f64]) {
        for (ch, v) in w.to_array().iter().enumerate() {
            out[ch] = (v - self.mean[ch]) / self.std[ch];
        }
    }

    pub fn denormalize_wrench(&self, z: &[f64]) -> WrenchSample {
        let mut a = [0.0; WRENCH_CHANNELS];
        for ch in 0..WRENCH_CHANNELS {
            a[ch] = z[ch] * self.std[ch] + self.mean[ch];
        }
        WrenchSample::from_array(a)
    }

    pub fn normalize_grip(&self, g: f64) -> f64 {
        (g - self.mean[GRIP_CHANNEL]) / self.std[GRIP_CHANNEL]
    }

    pub fn denormalize_grip(&self, z: f64) -> f64 {
        z * self.std[GRIP_CHANNEL] + self.mean[GRIP_CHANNEL]
    }

    /// Flattens a raw wrench window into normalized `steps × 6` row-major form.
    pub fn normalize_window(&self, x: &[WrenchSample]) -> Vec<f64> {
        let mut out = alloc::vec![0.0; x.len() * WRENCH_CHANNELS];
        for (w, dst) in x.iter().zip(out.chunks_exact_mut(WRENCH_CHANNELS)) {
            self.normalize_wrench(w, dst);
        }
        out
    }
}

/// A training sample in model units.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSample {
    /// `steps × 6`, row-major.
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl NormalizedSample {
    pub fn steps(&self) -> usize {
        self.x.len() / WRENCH_CHANNELS
    }
}

/// Population mean and standard deviation of every channel over the training
/// windows: wrench channels over all `x` entries, grip over all `y` entries.
pub fn fit_norm_stats(train: &[TrainingSample]) -> Result<NormStats> {
    if train.is_empty() {
        return Err(contract("fit_norm_stats needs at least one sample"));
    }
    let mut stats = NormStats::identity();
    let wrench_count: usize = train.iter().map(|s| s.x.len()).sum();
    let grip_count: usize = train.iter().map(|s| s.y.len()).sum();
    if wrench_count == 0 || grip_count == 0 {
        return Err(contract("fit_norm_stats: samples carry no values"));
    }

    let mut sum = [0.0; 7];
    for s in train {
        for w in &s.x {
            for (ch, v) in w.to_array().iter().enumerate() {
                sum[ch] += v;
            }
        }
        sum[GRIP_CHANNEL] += s.y.iter().sum::<f64>();
    }
    for ch in 0..7 {
        let n = if ch == GRIP_CHANNEL { grip_count } else { wrench_count };
        stats.mean[ch] = sum[ch] / n as f64;
    }

    let mut sq = [0.0; 7];
    for s in train {
        for w in &s.x {
            for (ch, v) in w.to_array().iter().enumerate() {
                let d = v - stats.mean[ch];
                sq[ch] += d * d;
            }
        }
        for v in &s.y {
            let d = v - stats.mean[GRIP_CHANNEL];
            sq[GRIP_CHANNEL] += d * d;
        }
    }
    for ch in 0..7 {
        let n = if ch == GRIP_CHANNEL { grip_count } else { wrench_count };
        stats.std[ch] = libm::sqrt(sq[ch] / n as f64);
    }
    stats.validate()?;
    Ok(stats)
}

pub fn apply_norm(sample: &TrainingSample, stats: &NormStats) -> NormalizedSample {
    NormalizedSample {
        x: stats.normalize_window(&sample.x),
        y: sample.y.iter().map(|&g| stats.normalize_grip(g)).collect(),
    }
}

/// Inverse of [`apply_norm`]: raw wrench window and grip series.
pub fn invert_norm(sample: &NormalizedSample, stats: &NormStats) -> (Vec<WrenchSample>, Vec<f64>) {
    let x = sample
        .x
        .chunks_exact(WRENCH_CHANNELS)
        .map(|z| stats.denormalize_wrench(z))
        .collect();
    let y = sample.y.iter().map(|&z| stats.denormalize_grip(z)).collect();
    (x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn record_from_grips(giver: Vec<f64>, taker: Vec<f64>) -> HandoverRecord {
        let n = giver.len();
        let t = (0..n).map(|k| 1000.0 + k as f64 * SAMPLE_PERIOD_MS).collect();
        let wrench = (0..n)
            .map(|k| WrenchSample::new(k as f64, 1.0, 2.0, 0.1, 0.2, 0.3))
            .collect();
        HandoverRecord::new(1, 1, t, wrench, giver, taker).unwrap()
    }

    /// Aligned record covering `[lo_ms, hi_ms]` with a clean crossing at 0.
    fn aligned_span(lo_ms: f64, hi_ms: f64) -> HandoverRecord {
        let k_lo = ms_to_steps(lo_ms);
        let k_hi = ms_to_steps(hi_ms);
        let ks: Vec<i64> = (k_lo..=k_hi).collect();
        let giver: Vec<f64> = ks.iter().map(|&k| if k < 0 { 10.0 } else { 1.0 }).collect();
        let taker: Vec<f64> = ks.iter().map(|&k| if k < 0 { 1.0 } else { 10.0 }).collect();
        let rec = record_from_grips(giver, taker);
        align_handover(&rec).unwrap()
    }

    #[test]
    fn linear_crossing_aligns_at_five() {
        let giver: Vec<f64> = (0..=10).map(|i| 10.0 - i as f64).collect();
        let taker: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let a = align_handover(&record_from_grips(giver, taker)).unwrap();
        assert!(a.aligned);
        assert_eq!(a.zero_index(), Some(5));
        assert_eq!(a.t_ms[5], 0.0);
        assert_eq!(a.t_ms[0], -5.0 * SAMPLE_PERIOD_MS);
    }

    #[test]
    fn align_is_idempotent() {
        let giver: Vec<f64> = (0..=10).map(|i| 10.0 - i as f64).collect();
        let taker: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let once = align_handover(&record_from_grips(giver, taker)).unwrap();
        let twice = align_handover(&once).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn align_errors() {
        let flat = record_from_grips(vec![5.0; 6], vec![1.0; 6]);
        assert_eq!(align_handover(&flat).unwrap_err(), Error::NoCrossing);

        let upward = record_from_grips(vec![1.0, 1.0, 5.0], vec![2.0, 2.0, 2.0]);
        assert_eq!(align_handover(&upward).unwrap_err(), Error::NoCrossing);

        let wobbly = record_from_grips(vec![5.0, 1.0, 5.0, 1.0], vec![2.0; 4]);
        assert_eq!(
            align_handover(&wobbly).unwrap_err(),
            Error::AmbiguousCrossing(vec![1, 2, 3])
        );
    }

    #[test]
    fn record_validation() {
        let t = vec![0.0, SAMPLE_PERIOD_MS, 2.0 * SAMPLE_PERIOD_MS];
        let w = vec![WrenchSample::default(); 3];
        assert!(HandoverRecord::new(1, 1, t.clone(), w.clone(), vec![1.0; 3], vec![0.0; 3]).is_ok());
        assert!(HandoverRecord::new(1, 1, t.clone(), w.clone(), vec![1.0; 2], vec![0.0; 3]).is_err());
        let bad_rate = vec![0.0, 10.0, 20.0];
        assert!(HandoverRecord::new(1, 1, bad_rate, w.clone(), vec![1.0; 3], vec![0.0; 3]).is_err());
        let backwards = vec![2.0 * SAMPLE_PERIOD_MS, SAMPLE_PERIOD_MS, 0.0];
        assert!(HandoverRecord::new(1, 1, backwards, w.clone(), vec![1.0; 3], vec![0.0; 3]).is_err());
        assert!(HandoverRecord::new(1, 1, t, w, vec![1.0, f64::NAN, 1.0], vec![0.0; 3]).is_err());
        assert!(HandoverRecord::new(1, 1, vec![], vec![], vec![], vec![]).is_err());
    }

    #[test]
    fn default_grids() {
        let p = SamplingPolicy::default();
        assert_eq!(p.t_e_grid(), vec![0.0, -50.0, -100.0, -150.0, -200.0, -250.0]);
        assert_eq!(p.t_o_grid(), vec![-260.0, -510.0, -760.0, -1010.0, -1250.0]);
    }

    #[test]
    fn default_policy_yields_thirty() {
        let rec = aligned_span(-1300.0, 600.0);
        let samples = extract_samples(&rec, &SamplingPolicy::default()).unwrap();
        assert_eq!(samples.len(), 30);
        for s in &samples {
            assert_eq!(s.y.len(), HORIZON);
            assert!(s.x.len() >= 2);
            assert_eq!(s.x.len(), window_len(s.t_o_ms, s.t_e_ms));
            assert!((s.y_time_ms(0) - s.x_end_ms() - SAMPLE_PERIOD_MS).abs() < 1e-9);
            assert!((s.x_end_ms() - s.t_e_ms).abs() < 0.5 * SAMPLE_PERIOD_MS);
            assert!((s.t_f_ms - s.t_e_ms - 583.33).abs() < SAMPLE_PERIOD_MS);
        }
        // t_e descending, then t_o descending
        assert_eq!((samples[0].t_e_ms, samples[0].t_o_ms), (0.0, -260.0));
        assert_eq!((samples[1].t_e_ms, samples[1].t_o_ms), (0.0, -510.0));
        assert_eq!((samples[29].t_e_ms, samples[29].t_o_ms), (-250.0, -1250.0));
    }

    #[test]
    fn single_point_policy() {
        let rec = aligned_span(-400.0, 700.0);
        let p = SamplingPolicy {
            t_e_range_ms: RangeMs::new(0.0, 0.0),
            t_o_range_ms: RangeMs::new(-260.0, -260.0),
            ..SamplingPolicy::default()
        };
        let s = extract_samples(&rec, &p).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].x.len(), 32);
        assert_eq!(s[0].y.len(), 70);
        assert_eq!(s[0].x_end_ms(), 0.0);
        // y starts on the sample right after t_e
        let k0 = rec.zero_index().unwrap();
        assert_eq!(s[0].y[0], rec.grip_giver[k0 + 1]);
        assert_eq!(s[0].x[31], rec.wrench[k0]);
    }

    #[test]
    fn short_record_skips_out_of_extent_windows() {
        let rec = aligned_span(-800.0, 600.0);
        let samples = extract_samples(&rec, &SamplingPolicy::default()).unwrap();
        assert!(samples.iter().all(|s| s.t_o_ms >= -760.0));
        assert!(!samples.is_empty());
    }

    #[test]
    fn unaligned_is_rejected() {
        let rec = record_from_grips(vec![2.0, 1.0], vec![1.0, 2.0]);
        assert!(matches!(
            extract_samples(&rec, &SamplingPolicy::default()),
            Err(Error::Contract(_))
        ));
    }

    fn pair_records(ids: &[u32]) -> Vec<HandoverRecord> {
        ids.iter()
            .enumerate()
            .map(|(i, &p)| {
                let mut r = record_from_grips(vec![2.0, 1.0], vec![1.0, 2.0]);
                r.pair_id = p;
                r.handover_id = i as u32;
                r
            })
            .collect()
    }

    #[test]
    fn split_eleven_two() {
        let ids: Vec<u32> = (1..=13).collect();
        let test: BTreeSet<u32> = [12, 13].into_iter().collect();
        let (train, test_side) = split_by_pair(pair_records(&ids), &test).unwrap();
        let train_pairs: BTreeSet<u32> = train.iter().map(|r| r.pair_id).collect();
        assert_eq!(train_pairs.len(), 11);
        assert_eq!(test_side.len(), 2);

        let (all, none) = split_by_pair(pair_records(&ids), &BTreeSet::new()).unwrap();
        assert_eq!((all.len(), none.len()), (13, 0));

        let unknown: BTreeSet<u32> = [99].into_iter().collect();
        assert!(split_by_pair(pair_records(&ids), &unknown).is_err());
    }

    fn sample_with(x: Vec<WrenchSample>, y: Vec<f64>) -> TrainingSample {
        TrainingSample {
            pair_id: 1,
            handover_id: 1,
            t_o_ms: -260.0,
            t_e_ms: 0.0,
            t_f_ms: HORIZON_MS,
            x_start_ms: 0.0,
            x,
            y,
        }
    }

    fn varied_samples() -> Vec<TrainingSample> {
        (0..5)
            .map(|i| {
                let f = i as f64;
                let x = (0..4)
                    .map(|k| {
                        let k = k as f64;
                        WrenchSample::new(f + k, 2.0 * k - f, f * k, 0.1 * k, -0.3 * f, k * k)
                    })
                    .collect();
                sample_with(x, vec![f, f + 1.0, 3.0 * f])
            })
            .collect()
    }

    #[test]
    fn zscore_definition_and_roundtrip() {
        let train = varied_samples();
        let stats = fit_norm_stats(&train).unwrap();
        let normed: Vec<NormalizedSample> = train.iter().map(|s| apply_norm(s, &stats)).collect();
        for ch in 0..7 {
            let vals: Vec<f64> = if ch == GRIP_CHANNEL {
                normed.iter().flat_map(|s| s.y.iter().copied()).collect()
            } else {
                normed.iter().flat_map(|s| s.x.chunks(6).map(move |r| r[ch])).collect()
            };
            let n = vals.len() as f64;
            let m = vals.iter().sum::<f64>() / n;
            let sd = libm::sqrt(vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n);
            assert!(m.abs() < 1e-9 && (sd - 1.0).abs() < 1e-9, "channel {ch}");
        }
        for (raw, z) in train.iter().zip(&normed) {
            let (x, y) = invert_norm(z, &stats);
            for (a, b) in raw.x.iter().zip(&x) {
                for (u, v) in a.to_array().iter().zip(b.to_array()) {
                    assert!((u - v).abs() <= 1e-12 * u.abs().max(1.0));
                }
            }
            for (u, v) in raw.y.iter().zip(&y) {
                assert!((u - v).abs() <= 1e-12 * u.abs().max(1.0));
            }
        }
    }

    #[test]
    fn translation_shifts_mean_only() {
        let train = varied_samples();
        let shifted: Vec<TrainingSample> = train
            .iter()
            .map(|s| {
                let mut s = s.clone();
                for w in &mut s.x {
                    w.fz += 4.0;
                }
                s
            })
            .collect();
        let a = fit_norm_stats(&train).unwrap();
        let b = fit_norm_stats(&shifted).unwrap();
        assert!((b.mean[2] - a.mean[2] - 4.0).abs() < 1e-12);
        assert!((b.std[2] - a.std[2]).abs() < 1e-12);
    }

    #[test]
    fn degenerate_channel_is_named() {
        let train = vec![sample_with(
            vec![WrenchSample::new(1.0, 2.0, 3.0, 4.0, 5.0, 6.0), WrenchSample::new(2.0, 3.0, 3.0, 5.0, 6.0, 7.0)],
            vec![1.0, 2.0],
        )];
        assert_eq!(fit_norm_stats(&train).unwrap_err(), Error::DegenerateChannel("fz_N"));
        assert!(fit_norm_stats(&[]).is_err());
    }

    /// Brute-force count of `(t_o, t_e)` windows that fit a record whose
    /// aligned sample indices run over `k_lo..=k_hi`.
    fn brute_force_count(policy: &SamplingPolicy, k_lo: i64, k_hi: i64) -> usize {
        let mut count = 0;
        let mut t_e = policy.t_e_range_ms.hi;
        let mut t_es = vec![];
        while t_e >= policy.t_e_range_ms.lo - 1e-9 {
            t_es.push(t_e);
            t_e -= policy.t_e_stride_ms;
        }
        if (t_es.last().unwrap() - policy.t_e_range_ms.lo).abs() > 1e-9 {
            t_es.push(policy.t_e_range_ms.lo);
        }
        let mut t_os = vec![];
        let mut t_o = policy.t_o_range_ms.hi;
        while t_o >= policy.t_o_range_ms.lo - 1e-9 {
            t_os.push(t_o);
            t_o -= policy.t_o_stride_ms;
        }
        if (t_os.last().unwrap() - policy.t_o_range_ms.lo).abs() > 1e-9 {
            t_os.push(policy.t_o_range_ms.lo);
        }
        for &e in &t_es {
            for &o in &t_os {
                let end = libm::round(e * 0.12) as i64;
                let start = end - libm::round((e - o) * 0.12) as i64;
                if start >= k_lo && end + 70 <= k_hi {
                    count += 1;
                }
            }
        }
        count
    }

    proptest! {
        #[test]
        fn split_is_disjoint_partition(assign in proptest::collection::vec(1u32..8, 1..40), mask in any::<u8>()) {
            let records = pair_records(&assign);
            let present: BTreeSet<u32> = assign.iter().copied().collect();
            let test: BTreeSet<u32> = present.iter().copied().filter(|p| mask & (1 << p) != 0).collect();
            let (train, test_side) = split_by_pair(records.clone(), &test).unwrap();
            let a: BTreeSet<u32> = train.iter().map(|r| r.pair_id).collect();
            let b: BTreeSet<u32> = test_side.iter().map(|r| r.pair_id).collect();
            prop_assert!(a.is_disjoint(&b));
            prop_assert_eq!(train.len() + test_side.len(), records.len());
            let mut merged: Vec<u32> = train.iter().chain(test_side.iter()).map(|r| r.handover_id).collect();
            merged.sort_unstable();
            prop_assert_eq!(merged, (0..records.len() as u32).collect::<Vec<_>>());
        }

        #[test]
        fn sample_count_matches_enumeration(
            lo in -1600.0f64..-300.0,
            hi in 0.0f64..900.0,
            e_lo in -300.0f64..0.0,
            e_width in 0.0f64..200.0,
            o_width in 0.0f64..900.0,
            gap in 10.0f64..200.0,
            e_stride in 5.0f64..120.0,
            o_stride in 20.0f64..400.0,
        ) {
            let e_hi = (e_lo + e_width).min(0.0);
            let o_hi = e_lo - gap;
            let policy = SamplingPolicy {
                t_e_range_ms: RangeMs::new(e_lo, e_hi),
                t_o_range_ms: RangeMs::new(o_hi - o_width, o_hi),
                t_e_stride_ms: e_stride,
                t_o_stride_ms: o_stride,
            };
            let rec = aligned_span(lo, hi);
            let k0 = rec.zero_index().unwrap() as i64;
            let k_lo = -k0;
            let k_hi = rec.len() as i64 - 1 - k0;
            let samples = extract_samples(&rec, &policy).unwrap();
            prop_assert_eq!(samples.len(), brute_force_count(&policy, k_lo, k_hi));
            for s in &samples {
                prop_assert_eq!(s.y.len(), HORIZON);
                prop_assert!(s.x.len() >= 2);
            }
        }

        #[test]
        fn align_idempotent_prop(n in 3usize..60, cross in 1usize..59, offset in -5000.0f64..5000.0) {
            let cross = cross.min(n - 1);
            let giver: Vec<f64> = (0..n).map(|k| if k < cross { 9.0 } else { 0.5 }).collect();
            let taker: Vec<f64> = (0..n).map(|k| if k < cross { 0.5 } else { 9.0 }).collect();
            let mut rec = record_from_grips(giver, taker);
            for (k, t) in rec.t_ms.iter_mut().enumerate() {
                *t = offset + k as f64 * SAMPLE_PERIOD_MS;
            }
            let once = align_handover(&rec).unwrap();
            prop_assert_eq!(once.zero_index(), Some(cross));
            prop_assert_eq!(align_handover(&once).unwrap(), once);
        }
    }
}
