//! Scenario timelines and smooth reference shaping.
//!
//! Input power, DC-link voltage reference and reactive power reference move
//! between set-points through exponential transitions with closed-form
//! derivatives (up to third order) and a closed-form running integral.
//! Grid-voltage magnitude changes are instantaneous steps.
//!
//! A transition of order `n` is the step response of a chain of `n`
//! first-order lags: one dominant lag plus `n − 1` fast lags at fixed
//! fractions of it. Order 1 is the plain exponential of [`exp_transition`];
//! higher orders keep the first `n − 1` derivatives continuous at the start of
//! a transition while still looking first-order. In every case the dominant
//! time constant is chosen so that the transition is within `e^{−4.6}` (≈1%)
//! of its target at the end of its window.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which scenario quantity an event drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// Power supplied by the source to the DC link (W).
    InputPower,
    /// DC-link voltage reference (V).
    DcRef,
    /// Reactive power reference at the PCC (var).
    ReactiveRef,
    /// Grid voltage magnitude as a fraction of nominal.
    GridMagnitude,
}

impl EventKind {
    pub const ALL: [EventKind; 4] = [
        EventKind::InputPower,
        EventKind::DcRef,
        EventKind::ReactiveRef,
        EventKind::GridMagnitude,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EventKind::InputPower => "input_power",
            EventKind::DcRef => "dc_ref",
            EventKind::ReactiveRef => "reactive_ref",
            EventKind::GridMagnitude => "grid_magnitude",
        }
    }
}

/// A timed set-point change. `window == 0` means a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioEvent {
    pub time: f64,
    pub kind: EventKind,
    pub target: f64,
    pub window: f64,
}

impl ScenarioEvent {
    pub fn new(time: f64, kind: EventKind, target: f64, window: f64) -> Self {
        Self {
            time,
            kind,
            target,
            window,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("event {index} ({kind}): {reason}")]
    InvalidEvent {
        index: usize,
        kind: &'static str,
        reason: String,
    },
    #[error("events are not sorted by time (event {index} at {time} s)")]
    Unsorted { index: usize, time: f64 },
    #[error("{kind} transitions overlap: event at {second} s starts before the one at {first} s has finished")]
    Overlap {
        kind: &'static str,
        first: f64,
        second: f64,
    },
    #[error("shaping order must be between 1 and {max}, got {order}")]
    InvalidShapingOrder { order: usize, max: usize },
    #[error("settling exponent must be finite and > 0, got {0}")]
    InvalidSettleExponent(f64),
    #[error("initial {field} is not finite")]
    NonFiniteInitial { field: &'static str },
}

/// Value and first three time derivatives of a shaped profile.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Transition {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

/// First-order exponential transition from `from` to `to` starting at `t0`.
///
/// Before `t0` the profile sits at `from` with zero derivatives.
pub fn exp_transition(t: f64, t0: f64, from: f64, to: f64, tau: f64) -> Transition {
    if t < t0 {
        return Transition {
            value: from,
            ..Default::default()
        };
    }
    let delta = to - from;
    let e = (-(t - t0) / tau).exp();
    Transition {
        value: to - delta * e,
        d1: delta * e / tau,
        d2: -delta * e / (tau * tau),
        d3: delta * e / (tau * tau * tau),
    }
}

/// Default `ln(1/residual)` at the end of a transition window (1% band).
pub const DEFAULT_SETTLE_EXPONENT: f64 = 4.6;

/// Fast-lag time constants as fractions of the dominant one.
const FAST_LAG_FRACTIONS: [f64; 3] = [1.0 / 4.0, 1.0 / 5.0, 1.0 / 6.0];

/// Reference shaping options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shaping {
    /// Number of lags in the chain, 1 (plain exponential) to 4.
    pub order: usize,
    /// Transitions reach within `e^{−settle_exponent}` of target at the end of
    /// their window.
    pub settle_exponent: f64,
}

impl Shaping {
    pub const MAX_ORDER: usize = 1 + FAST_LAG_FRACTIONS.len();

    pub fn exponential() -> Self {
        Self {
            order: 1,
            settle_exponent: DEFAULT_SETTLE_EXPONENT,
        }
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        if self.order == 0 || self.order > Self::MAX_ORDER {
            return Err(ScenarioError::InvalidShapingOrder {
                order: self.order,
                max: Self::MAX_ORDER,
            });
        }
        if !(self.settle_exponent.is_finite() && self.settle_exponent > 0.0) {
            return Err(ScenarioError::InvalidSettleExponent(self.settle_exponent));
        }
        Ok(())
    }
}

impl Shaping {
    /// Two lags: the lowest order with a continuous first derivative.
    pub const DEFAULT_ORDER: usize = 2;
}

impl Default for Shaping {
    fn default() -> Self {
        Self {
            order: Self::DEFAULT_ORDER,
            settle_exponent: DEFAULT_SETTLE_EXPONENT,
        }
    }
}

/// Unit step response of a chain of distinct first-order lags,
/// `y(x) = 1 − Σ c_i·e^{−x/τ_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagChain {
    taus: Vec<f64>,
    weights: Vec<f64>,
}

/// Unit-step response sample: `y`, its derivatives and `∫₀ˣ y`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LagSample {
    pub y: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub integral: f64,
}

impl LagChain {
    fn with_taus(taus: Vec<f64>) -> Self {
        let weights = taus
            .iter()
            .enumerate()
            .map(|(i, &ti)| {
                taus.iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &tj)| ti / (ti - tj))
                    .product::<f64>()
            })
            .collect();
        Self { taus, weights }
    }

    /// Chain of `shaping.order` lags that is within `e^{−settle_exponent}` of
    /// completion after `window` seconds.
    pub fn for_window(window: f64, shaping: &Shaping) -> Self {
        let fractions: Vec<f64> = std::iter::once(1.0)
            .chain(FAST_LAG_FRACTIONS.iter().copied())
            .take(shaping.order)
            .collect();
        let target = shaping.settle_exponent;
        // Dimensionless time u at which the unit-scaled chain has the required
        // residual; the plain exponential has u = settle_exponent exactly.
        let u = if fractions.len() == 1 {
            target
        } else {
            let unit = Self::with_taus(fractions.clone());
            let want = 1.0 - (-target).exp();
            let (mut lo, mut hi) = (target, target + 10.0 * fractions.iter().sum::<f64>());
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if unit.sample(mid).y < want {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let scale = window / u;
        Self::with_taus(fractions.into_iter().map(|f| f * scale).collect())
    }

    pub fn dominant_tau(&self) -> f64 {
        self.taus[0]
    }

    pub fn sample(&self, x: f64) -> LagSample {
        let mut s = LagSample {
            y: 1.0,
            integral: x,
            ..Default::default()
        };
        for (&tau, &c) in self.taus.iter().zip(&self.weights) {
            let e = (-x / tau).exp();
            let ce = c * e;
            s.y -= ce;
            s.d1 += ce / tau;
            s.d2 -= ce / (tau * tau);
            s.d3 += ce / (tau * tau * tau);
            // −c·τ·(1 − e) computed as c·τ·expm1 to keep precision near x = 0
            s.integral += c * tau * (-x / tau).exp_m1();
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Segment {
    t0: f64,
    from: f64,
    to: f64,
    chain: Option<LagChain>,
    integral_at_t0: f64,
}

/// Profile value, derivatives and running integral at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ProfileSample {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub integral: f64,
}

impl Segment {
    fn sample(&self, t: f64) -> ProfileSample {
        let x = (t - self.t0).max(0.0);
        match &self.chain {
            None => ProfileSample {
                value: self.to,
                integral: self.integral_at_t0 + self.to * x,
                ..Default::default()
            },
            Some(chain) => {
                let delta = self.to - self.from;
                let s = chain.sample(x);
                ProfileSample {
                    value: self.from + delta * s.y,
                    d1: delta * s.d1,
                    d2: delta * s.d2,
                    d3: delta * s.d3,
                    integral: self.integral_at_t0 + self.from * x + delta * s.integral,
                }
            }
        }
    }
}

/// Piecewise shaped profile for one [`EventKind`].
#[derive(Debug, Clone, PartialEq)]
struct Profile {
    segments: Vec<Segment>,
}

impl Profile {
    fn build(initial: f64, events: &[ScenarioEvent], shaping: &Shaping) -> Self {
        let mut segments = vec![Segment {
            t0: 0.0,
            from: initial,
            to: initial,
            chain: None,
            integral_at_t0: 0.0,
        }];
        for ev in events {
            let prev = segments
                .last()
                .expect("profile starts with the initial segment");
            let at = prev.sample(ev.time);
            let chain = (ev.window > 0.0).then(|| LagChain::for_window(ev.window, shaping));
            segments.push(Segment {
                t0: ev.time,
                from: at.value,
                to: ev.target,
                chain,
                integral_at_t0: at.integral,
            });
        }
        Self { segments }
    }

    /// Sample at `t` using only segments that started at or before `cutoff`.
    fn sample(&self, t: f64, cutoff: f64) -> ProfileSample {
        let idx = self.segments.partition_point(|s| s.t0 <= cutoff).max(1) - 1;
        self.segments[idx].sample(t)
    }
}

/// Initial set-points in force before the first event of each kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialSetpoints {
    pub input_power: f64,
    pub dc_ref: f64,
    pub reactive_ref: f64,
    pub grid_fraction: f64,
}

impl Default for InitialSetpoints {
    fn default() -> Self {
        Self {
            input_power: 0.0,
            dc_ref: 735.0,
            reactive_ref: 0.0,
            grid_fraction: 1.0,
        }
    }
}

/// Reference values and derivatives consumed by the controller at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReferenceFrame {
    pub v_ref: f64,
    pub v_ref_d1: f64,
    pub v_ref_d2: f64,
    pub v_ref_d3: f64,
    pub q_ref: f64,
    pub q_ref_d1: f64,
    pub q_ref_d2: f64,
    /// `∫₀ᵗ q_ref dτ`
    pub q_ref_int: f64,
    pub p_i: f64,
    pub p_i_d1: f64,
    pub p_i_d2: f64,
}

/// A validated, time-sorted scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    initial: InitialSetpoints,
    events: Vec<ScenarioEvent>,
    shaping: Shaping,
    input_power: Profile,
    dc_ref: Profile,
    reactive_ref: Profile,
}

impl Scenario {
    pub fn new(
        initial: InitialSetpoints,
        events: Vec<ScenarioEvent>,
        shaping: Shaping,
    ) -> Result<Self, ScenarioError> {
        shaping.validate()?;
        for (field, v) in [
            ("input_power", initial.input_power),
            ("dc_ref", initial.dc_ref),
            ("reactive_ref", initial.reactive_ref),
            ("grid_fraction", initial.grid_fraction),
        ] {
            if !v.is_finite() {
                return Err(ScenarioError::NonFiniteInitial { field });
            }
        }
        for (index, ev) in events.iter().enumerate() {
            let bad = |reason: &str| ScenarioError::InvalidEvent {
                index,
                kind: ev.kind.name(),
                reason: reason.into(),
            };
            if !(ev.time.is_finite() && ev.time >= 0.0) {
                return Err(bad("time must be finite and >= 0"));
            }
            if !(ev.window.is_finite() && ev.window >= 0.0) {
                return Err(bad("window must be finite and >= 0"));
            }
            if !ev.target.is_finite() {
                return Err(bad("target must be finite"));
            }
            if ev.kind == EventKind::GridMagnitude && ev.window != 0.0 {
                return Err(bad("grid magnitude changes are steps (window must be 0)"));
            }
            if index > 0 && ev.time < events[index - 1].time {
                return Err(ScenarioError::Unsorted {
                    index,
                    time: ev.time,
                });
            }
        }
        for kind in EventKind::ALL {
            let mut prev: Option<&ScenarioEvent> = None;
            for ev in events.iter().filter(|e| e.kind == kind) {
                if let Some(p) = prev {
                    if ev.time < p.time + p.window || ev.time == p.time {
                        return Err(ScenarioError::Overlap {
                            kind: kind.name(),
                            first: p.time,
                            second: ev.time,
                        });
                    }
                }
                prev = Some(ev);
            }
        }

        let of_kind = |k: EventKind| {
            events
                .iter()
                .filter(|e| e.kind == k)
                .copied()
                .collect::<Vec<_>>()
        };
        Ok(Self {
            input_power: Profile::build(
                initial.input_power,
                &of_kind(EventKind::InputPower),
                &shaping,
            ),
            dc_ref: Profile::build(initial.dc_ref, &of_kind(EventKind::DcRef), &shaping),
            reactive_ref: Profile::build(
                initial.reactive_ref,
                &of_kind(EventKind::ReactiveRef),
                &shaping,
            ),
            initial,
            events,
            shaping,
        })
    }

    /// The weak-grid test sequence for an 8 kVA converter:
    /// input power ramp, DC-link reference raise, reactive power ramp, three
    /// grid-voltage steps, then both powers back to zero.
    pub fn weak_grid_test_sequence(rated_power: f64) -> Self {
        use EventKind::*;
        let half = rated_power / std::f64::consts::SQRT_2;
        let events = vec![
            ScenarioEvent::new(0.010, InputPower, half, 0.010),
            ScenarioEvent::new(0.020, DcRef, 750.0, 0.010),
            ScenarioEvent::new(0.070, ReactiveRef, half, 0.010),
            ScenarioEvent::new(0.120, GridMagnitude, 0.8, 0.0),
            ScenarioEvent::new(0.160, GridMagnitude, 1.2, 0.0),
            ScenarioEvent::new(0.200, GridMagnitude, 1.0, 0.0),
            ScenarioEvent::new(0.220, ReactiveRef, 0.0, 0.010),
            ScenarioEvent::new(0.240, InputPower, 0.0, 0.010),
        ];
        Self::new(InitialSetpoints::default(), events, Shaping::default())
            .expect("built-in scenario is valid")
    }

    pub fn initial(&self) -> &InitialSetpoints {
        &self.initial
    }

    pub fn events(&self) -> &[ScenarioEvent] {
        &self.events
    }

    pub fn shaping(&self) -> &Shaping {
        &self.shaping
    }

    /// Same scenario with a different shaping.
    pub fn with_shaping(&self, shaping: Shaping) -> Result<Self, ScenarioError> {
        Self::new(self.initial, self.events.clone(), shaping)
    }

    /// Same scenario with every event time rounded to the nearest multiple of
    /// `dt`.
    pub fn aligned_to_step(&self, dt: f64) -> Result<Self, ScenarioError> {
        let events = self
            .events
            .iter()
            .map(|e| ScenarioEvent {
                time: (e.time / dt).round() * dt,
                ..*e
            })
            .collect();
        Self::new(self.initial, events, self.shaping)
    }

    /// Distinct event instants in increasing order.
    pub fn event_times(&self) -> Vec<f64> {
        let mut times: Vec<f64> = self.events.iter().map(|e| e.time).collect();
        times.dedup();
        times
    }

    pub fn reference_at(&self, t: f64) -> ReferenceFrame {
        self.reference_with_cutoff(t, t)
    }

    /// References at `t` taking into account only events at or before
    /// `cutoff`. Integrators use the step start as cutoff so that an event
    /// falling on a step boundary only affects the following step.
    pub fn reference_with_cutoff(&self, t: f64, cutoff: f64) -> ReferenceFrame {
        let p = self.input_power.sample(t, cutoff);
        let v = self.dc_ref.sample(t, cutoff);
        let q = self.reactive_ref.sample(t, cutoff);
        ReferenceFrame {
            v_ref: v.value,
            v_ref_d1: v.d1,
            v_ref_d2: v.d2,
            v_ref_d3: v.d3,
            q_ref: q.value,
            q_ref_d1: q.d1,
            q_ref_d2: q.d2,
            q_ref_int: q.integral,
            p_i: p.value,
            p_i_d1: p.d1,
            p_i_d2: p.d2,
        }
    }

    /// Grid voltage magnitude as a fraction of nominal.
    pub fn grid_magnitude_at(&self, t: f64) -> f64 {
        self.grid_magnitude_with_cutoff(t)
    }

    pub fn grid_magnitude_with_cutoff(&self, cutoff: f64) -> f64 {
        self.events
            .iter()
            .rev()
            .find(|e| e.kind == EventKind::GridMagnitude && e.time <= cutoff)
            .map_or(self.initial.grid_fraction, |e| e.target)
    }
}
