//! Parametric generator of handover-like recordings.
//!
//! Grip exchange follows logistic profiles around `m = transfer_midpoint_ms`
//! with width `w = transfer_width_ms`:
//!
//! ```text
//! s(t)   = σ((t - m) / w)
//! giver  = giver_hold · σ(-(t - m) / w)
//! taker  = taker_peak · s(t)
//! ```
//!
//! The noiseless curves cross once, at `m + w·ln(giver_hold / taker_peak)`.
//! The vertical force carries the taker's load share `load · s(t)`; the other
//! wrench channels mix in small fixed fractions of the transfer signals plus
//! smoothed (AR(1)) and white sensor noise. This is a test-signal generator,
//! not a model of grasp physics.

use alloc::format;
use alloc::vec::Vec;

use crate::dataset::{HandoverRecord, WrenchSample, SAMPLE_PERIOD_MS};
use crate::error::{contract, Error, Result};
use crate::numerics::{sigmoid, Rng};

/// Fraction of the giver grip that shows up as lateral force `fx`.
pub const FX_FROM_GIVER_GRIP: f64 = 0.08;
/// Peak of the transient lateral force `fy`, as a fraction of the load.
pub const FY_TRANSIENT: f64 = 0.15;
/// Torque `tx` per newton of taker load share (N·m/N).
pub const TX_FROM_LOAD_SHARE: f64 = 0.02;
/// Peak of the transient torque `ty`, per newton of load (N·m/N).
pub const TY_TRANSIENT: f64 = -0.015;
/// Torque `tz` per newton of giver grip (N·m/N).
pub const TZ_FROM_GIVER_GRIP: f64 = 0.004;
/// AR(1) coefficient of the smoothed wrench noise.
pub const DRIFT_COEFF: f64 = 0.95;

/// Extent a generated record must cover around the grip crossing, in ms.
pub const REQUIRED_BEFORE_CROSSING_MS: f64 = 1300.0;
pub const REQUIRED_AFTER_CROSSING_MS: f64 = 600.0;

/// Parameters of one synthetic handover.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    /// Record extent in the generator's frame (crossing target near 0).
    pub start_ms: f64,
    pub end_ms: f64,
    pub giver_hold_n: f64,
    pub taker_peak_n: f64,
    pub transfer_midpoint_ms: f64,
    pub transfer_width_ms: f64,
    pub load_n: f64,
    /// White and AR(1) noise on the force channels, N.
    pub force_noise_std: f64,
    /// White and AR(1) noise on the torque channels, N·m.
    pub torque_noise_std: f64,
    /// White noise on both grip channels, N.
    pub grip_noise_std: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            start_ms: -1500.0,
            end_ms: 800.0,
            giver_hold_n: 10.0,
            taker_peak_n: 10.0,
            transfer_midpoint_ms: 0.0,
            transfer_width_ms: 130.0,
            load_n: 4.5,
            force_noise_std: 0.05,
            torque_noise_std: 0.005,
            grip_noise_std: 0.01,
            seed: 0,
        }
    }
}

impl SynthParams {
    /// Time at which the noiseless grip curves cross.
    pub fn crossing_time_ms(&self) -> f64 {
        self.transfer_midpoint_ms + self.transfer_width_ms * libm::log(self.giver_hold_n / self.taker_peak_n)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("giver_hold_n", self.giver_hold_n),
            ("taker_peak_n", self.taker_peak_n),
            ("transfer_width_ms", self.transfer_width_ms),
            ("load_n", self.load_n),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Generation(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("force_noise_std", self.force_noise_std),
            ("torque_noise_std", self.torque_noise_std),
            ("grip_noise_std", self.grip_noise_std),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Generation(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !self.transfer_midpoint_ms.is_finite() || !(self.start_ms < self.end_ms) {
            return Err(Error::Generation("invalid time extent".into()));
        }
        let tc = self.crossing_time_ms();
        if self.start_ms > tc - REQUIRED_BEFORE_CROSSING_MS || self.end_ms < tc + REQUIRED_AFTER_CROSSING_MS {
            return Err(Error::Generation(format!(
                "duration [{}, {}] ms does not cover [{}, {}] ms around the crossing at {tc:.1} ms",
                self.start_ms,
                self.end_ms,
                tc - REQUIRED_BEFORE_CROSSING_MS,
                tc + REQUIRED_AFTER_CROSSING_MS
            )));
        }
        Ok(())
    }

    /// Sample times in the generator's frame: whole multiples of the sample
    /// period, so `t = 0` is hit exactly when it lies in range.
    pub fn sample_times(&self) -> Vec<f64> {
        let k_lo = libm::ceil(self.start_ms / SAMPLE_PERIOD_MS - 1e-9) as i64;
        let k_hi = libm::floor(self.end_ms / SAMPLE_PERIOD_MS + 1e-9) as i64;
        (k_lo..=k_hi).map(|k| k as f64 * SAMPLE_PERIOD_MS).collect()
    }

    pub fn giver_grip(&self, t_ms: f64) -> f64 {
        self.giver_hold_n * sigmoid(-(t_ms - self.transfer_midpoint_ms) / self.transfer_width_ms)
    }

    pub fn taker_grip(&self, t_ms: f64) -> f64 {
        self.taker_peak_n * sigmoid((t_ms - self.transfer_midpoint_ms) / self.transfer_width_ms)
    }

    /// Noiseless wrench at `t_ms`.
    pub fn wrench(&self, t_ms: f64) -> WrenchSample {
        let s = sigmoid((t_ms - self.transfer_midpoint_ms) / self.transfer_width_ms);
        let bump = 4.0 * s * (1.0 - s);
        let giver = self.giver_grip(t_ms);
        WrenchSample::new(
            FX_FROM_GIVER_GRIP * giver,
            FY_TRANSIENT * self.load_n * bump,
            self.load_n * s,
            TX_FROM_LOAD_SHARE * self.load_n * s,
            TY_TRANSIENT * self.load_n * bump,
            TZ_FROM_GIVER_GRIP * giver,
        )
    }
}

/// A generated record with its planted ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthHandover {
    pub record: HandoverRecord,
    /// First index at which the noiseless `giver - taker` is non-positive.
    pub crossing_index: usize,
    /// Offset added to the generator frame to produce the stored timestamps.
    pub time_offset_ms: f64,
}

/// Generates one unaligned handover record.
pub fn generate_handover(params: &SynthParams, pair_id: u32, handover_id: u32) -> Result<HandoverRecord> {
    generate_handover_with_truth(params, pair_id, handover_id).map(|h| h.record)
}

pub fn generate_handover_with_truth(params: &SynthParams, pair_id: u32, handover_id: u32) -> Result<SynthHandover> {
    params.validate()?;
    let times = params.sample_times();
    let mut rng = Rng::new(params.seed);
    let time_offset_ms = rng.uniform(-2000.0, 2000.0);

    let noise = [
        params.force_noise_std,
        params.force_noise_std,
        params.force_noise_std,
        params.torque_noise_std,
        params.torque_noise_std,
        params.torque_noise_std,
    ];
    let innovation = libm::sqrt(1.0 - DRIFT_COEFF * DRIFT_COEFF);
    let mut drift = [0.0; 6];
    for (d, sd) in drift.iter_mut().zip(noise) {
        *d = sd * rng.standard_normal();
    }

    let n = times.len();
    let mut t_ms = Vec::with_capacity(n);
    let mut wrench = Vec::with_capacity(n);
    let mut giver = Vec::with_capacity(n);
    let mut taker = Vec::with_capacity(n);
    let mut crossing_index = None;
    for (k, &t) in times.iter().enumerate() {
        let clean = params.wrench(t).to_array();
        let mut w = [0.0; 6];
        for ch in 0..6 {
            drift[ch] = DRIFT_COEFF * drift[ch] + innovation * noise[ch] * rng.standard_normal();
            w[ch] = clean[ch] + drift[ch] + noise[ch] * rng.standard_normal();
        }
        let g = params.giver_grip(t);
        let tk = params.taker_grip(t);
        if crossing_index.is_none() && k > 0 && g - tk <= 0.0 {
            crossing_index = Some(k);
        }
        t_ms.push(t + time_offset_ms);
        wrench.push(WrenchSample::from_array(w));
        giver.push(g + params.grip_noise_std * rng.standard_normal());
        taker.push(tk + params.grip_noise_std * rng.standard_normal());
    }
    let crossing_index =
        crossing_index.ok_or_else(|| Error::Generation("grip curves do not cross inside the record".into()))?;
    let record = HandoverRecord::new(pair_id, handover_id, t_ms, wrench, giver, taker)?;
    Ok(SynthHandover {
        record,
        crossing_index,
        time_offset_ms,
    })
}

/// Ranges that per-pair style parameters are drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthRanges {
    pub giver_hold_n: (f64, f64),
    pub taker_peak_n: (f64, f64),
    pub transfer_width_ms: (f64, f64),
    pub load_n: (f64, f64),
    /// Relative per-handover jitter around the pair's style, clamped back
    /// into the ranges above.
    pub jitter: f64,
    /// Template for everything not drawn (extent, midpoint, noise levels).
    pub base: SynthParams,
}

impl Default for SynthRanges {
    fn default() -> Self {
        SynthRanges {
            giver_hold_n: (8.0, 15.0),
            taker_peak_n: (8.0, 15.0),
            transfer_width_ms: (100.0, 160.0),
            load_n: (3.0, 6.0),
            jitter: 0.05,
            base: SynthParams::default(),
        }
    }
}

fn jittered(rng: &mut Rng, centre: f64, jitter: f64, range: (f64, f64)) -> f64 {
    (centre * (1.0 + jitter * rng.uniform(-1.0, 1.0))).clamp(range.0, range.1)
}

/// `n_pairs × handovers_per_pair` records with default ranges. Pair ids run
/// `1..=n_pairs`, handover ids `1..=handovers_per_pair`.
pub fn generate_dataset(n_pairs: usize, handovers_per_pair: usize, seed: u64) -> Result<Vec<HandoverRecord>> {
    generate_dataset_with(&SynthRanges::default(), n_pairs, handovers_per_pair, seed)
}

pub fn generate_dataset_with(
    ranges: &SynthRanges,
    n_pairs: usize,
    handovers_per_pair: usize,
    seed: u64,
) -> Result<Vec<HandoverRecord>> {
    if n_pairs == 0 || handovers_per_pair == 0 {
        return Err(contract("generate_dataset needs at least one pair and one handover"));
    }
    let mut rng = Rng::new(seed);
    let mut out = Vec::with_capacity(n_pairs * handovers_per_pair);
    for pair in 1..=n_pairs as u32 {
        let hold = rng.uniform(ranges.giver_hold_n.0, ranges.giver_hold_n.1);
        let peak = rng.uniform(ranges.taker_peak_n.0, ranges.taker_peak_n.1);
        let width = rng.uniform(ranges.transfer_width_ms.0, ranges.transfer_width_ms.1);
        let load = rng.uniform(ranges.load_n.0, ranges.load_n.1);
        for handover in 1..=handovers_per_pair as u32 {
            let params = SynthParams {
                giver_hold_n: jittered(&mut rng, hold, ranges.jitter, ranges.giver_hold_n),
                taker_peak_n: jittered(&mut rng, peak, ranges.jitter, ranges.taker_peak_n),
                transfer_width_ms: jittered(&mut rng, width, ranges.jitter, ranges.transfer_width_ms),
                load_n: jittered(&mut rng, load, ranges.jitter, ranges.load_n),
                seed: rng.next_u64(),
                ..ranges.base.clone()
            };
            out.push(generate_handover(&params, pair, handover)?);
        }
    }
    Ok(out)
}
