//! Scalar metrics extracted from a simulation record.

use thiserror::Error;

use crate::record::{Sample, TimeSeriesRecord};

/// Default extinction threshold as a fraction of the post-event peak.
pub const DEFAULT_EXTINCTION_FRACTION: f64 = 0.01;
/// Share of each inter-event interval treated as steady state.
pub const STEADY_FRACTION: f64 = 0.2;
/// Fewest samples a steady-state window may contain.
pub const MIN_WINDOW_SAMPLES: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SummaryError {
    #[error("cannot summarise an empty record")]
    EmptyRecord,
    #[error("extinction fraction must lie in (0, 1), got {0}")]
    InvalidFraction(f64),
}

/// Statistics over a time window of the record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStats {
    pub t0: f64,
    pub t1: f64,
    pub samples: usize,
    /// Mean of `v_C1 − v_C1_ref` (V).
    pub dc_error_mean: f64,
    /// Extremes of `v_C1 − v_C1_ref` (V).
    pub dc_error_min: f64,
    pub dc_error_max: f64,
    /// Mean `|i_g|` (A).
    pub i_g_mag: f64,
    /// Mean `|v_C2|` (V).
    pub v_c2_mag: f64,
    /// Largest `|p − p_i|` (W).
    pub power_mismatch_max: f64,
    pub p_mean: f64,
    pub q_mean: f64,
}

impl WindowStats {
    /// `None` if the window holds fewer than [`MIN_WINDOW_SAMPLES`] samples.
    pub fn over(rec: &TimeSeriesRecord, t0: f64, t1: f64) -> Option<Self> {
        let w = rec.window(t0, t1);
        if w.len() < MIN_WINDOW_SAMPLES {
            return None;
        }
        let n = w.len() as f64;
        let mean = |f: &dyn Fn(&Sample) -> f64| w.iter().map(f).sum::<f64>() / n;
        let dc = |s: &Sample| s.v_c1 - s.v_c1_ref;
        Some(Self {
            t0,
            t1,
            samples: w.len(),
            dc_error_mean: mean(&dc),
            dc_error_min: w.iter().map(dc).fold(f64::INFINITY, f64::min),
            dc_error_max: w.iter().map(dc).fold(f64::NEG_INFINITY, f64::max),
            i_g_mag: mean(&|s| s.i_g.norm()),
            v_c2_mag: mean(&|s| s.v_c2.norm()),
            power_mismatch_max: w.iter().map(|s| (s.p - s.p_i).abs()).fold(0.0, f64::max),
            p_mean: mean(&|s| s.p),
            q_mean: mean(&|s| s.q),
        })
    }
}

/// One interval between consecutive events (or the run boundaries).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    /// Last [`STEADY_FRACTION`] of the interval, if long enough.
    pub steady: Option<WindowStats>,
}

/// Decay of `|e_ξ1|` after an event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extinction {
    pub event_time: f64,
    /// End of the observation interval (next event or end of record).
    pub until: f64,
    /// Largest `|e_ξ1|` in the interval (J).
    pub peak: f64,
    /// Time after the event from which `|e_ξ1|` stays below the threshold;
    /// `None` if it never settles inside the interval.
    pub time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryMetrics {
    pub segments: Vec<Segment>,
    pub extinctions: Vec<Extinction>,
    /// Largest per-phase modulation magnitude.
    pub max_mu_phase: f64,
    pub max_abs_p: f64,
    pub max_abs_q: f64,
    pub guard_count: u64,
    pub end_time: f64,
}

impl SummaryMetrics {
    pub fn extinction_after(&self, event_time: f64) -> Option<&Extinction> {
        self.extinctions
            .iter()
            .find(|e| (e.event_time - event_time).abs() < 1e-9)
    }

    pub fn max_steady_power_mismatch(&self) -> Option<f64> {
        self.segments
            .iter()
            .filter_map(|s| s.steady)
            .map(|w| w.power_mismatch_max)
            .reduce(f64::max)
    }
}

impl std::fmt::Display for SummaryMetrics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "summary (t_end = {:.4} s)", self.end_time)?;
        writeln!(f, "  max per-phase |mu|      {:.6}", self.max_mu_phase)?;
        writeln!(f, "  max |p|                 {:.2} W", self.max_abs_p)?;
        writeln!(f, "  max |q|                 {:.2} var", self.max_abs_q)?;
        writeln!(f, "  guard trips             {}", self.guard_count)?;
        writeln!(f, "  steady-state windows:")?;
        for s in &self.segments {
            match s.steady {
                Some(w) => writeln!(
                    f,
                    "    [{:.4}, {:.4}] s  v_c1 - ref {:+.4} V  |i_g| {:.3} A  |v_c2| {:.2} V  max|p - p_i| {:.3} W",
                    w.t0, w.t1, w.dc_error_mean, w.i_g_mag, w.v_c2_mag, w.power_mismatch_max
                )?,
                None => writeln!(f, "    [{:.4}, {:.4}] s  unavailable (segment too short)", s.start, s.end)?,
            }
        }
        writeln!(f, "  e_xi1 extinction:")?;
        for e in &self.extinctions {
            match e.time {
                Some(dt) => writeln!(
                    f,
                    "    event {:.4} s  peak {:.4e} J  settled after {:.3} ms",
                    e.event_time,
                    e.peak,
                    dt * 1e3
                )?,
                None => writeln!(
                    f,
                    "    event {:.4} s  peak {:.4e} J  not settled before {:.4} s",
                    e.event_time, e.peak, e.until
                )?,
            }
        }
        Ok(())
    }
}

pub fn summarize(
    rec: &TimeSeriesRecord,
    event_times: &[f64],
) -> Result<SummaryMetrics, SummaryError> {
    summarize_with(rec, event_times, DEFAULT_EXTINCTION_FRACTION)
}

pub fn summarize_with(
    rec: &TimeSeriesRecord,
    event_times: &[f64],
    extinction_fraction: f64,
) -> Result<SummaryMetrics, SummaryError> {
    let (first, last) = match (rec.samples.first(), rec.samples.last()) {
        (Some(a), Some(b)) => (a.t, b.t),
        _ => return Err(SummaryError::EmptyRecord),
    };
    if !(extinction_fraction > 0.0 && extinction_fraction < 1.0) {
        return Err(SummaryError::InvalidFraction(extinction_fraction));
    }

    let mut bounds = vec![first];
    bounds.extend(
        event_times
            .iter()
            .copied()
            .filter(|&t| t > first && t < last),
    );
    bounds.push(last);
    bounds.dedup();

    let segments = bounds
        .windows(2)
        .map(|b| {
            let (start, end) = (b[0], b[1]);
            let t0 = end - STEADY_FRACTION * (end - start);
            Segment {
                start,
                end,
                steady: WindowStats::over(rec, t0, end),
            }
        })
        .collect();

    let extinctions = event_times
        .iter()
        .filter(|&&t| t >= first && t < last)
        .map(|&t| {
            let until = event_times
                .iter()
                .copied()
                .find(|&u| u > t)
                .unwrap_or(last)
                .min(last);
            extinction(rec.window(t, until), t, until, extinction_fraction)
        })
        .collect();

    let fold_max = |f: &dyn Fn(&Sample) -> f64| rec.samples.iter().map(f).fold(0.0, f64::max);
    Ok(SummaryMetrics {
        segments,
        extinctions,
        max_mu_phase: fold_max(&|s| s.mu_abc.max_abs()),
        max_abs_p: fold_max(&|s| s.p.abs()),
        max_abs_q: fold_max(&|s| s.q.abs()),
        guard_count: rec.samples.last().map_or(0, |s| s.guard_count),
        end_time: last,
    })
}

fn extinction(w: &[Sample], event_time: f64, until: f64, fraction: f64) -> Extinction {
    let peak = w.iter().map(|s| s.e1.norm()).fold(0.0, f64::max);
    let threshold = fraction * peak;
    let time = if peak == 0.0 {
        Some(0.0)
    } else {
        // The last sample at or above threshold; settled from the next one on.
        match w.iter().rposition(|s| s.e1.norm() >= threshold) {
            Some(i) if i + 1 < w.len() => Some(w[i + 1].t - event_time),
            _ => None,
        }
    };
    Extinction {
        event_time,
        until,
        peak,
        time,
    }
}
