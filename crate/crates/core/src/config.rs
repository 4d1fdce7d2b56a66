//! Run configuration files.
//!
//! The format is TOML with one section each for the plant, the controller,
//! the scenario and the simulation. Every key carries its unit in its name
//! and unknown keys are rejected.

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::controller::{ControllerError, ControllerGains, GuardThresholds};
use crate::plant::{PlantError, PlantParams};
use crate::sim::{Initialization, SimConfig, SimError};
use crate::trajectory::{
    EventKind, InitialSetpoints, Scenario, ScenarioError, ScenarioEvent, Shaping,
};
use crate::tuning::{gains_from_poles, PoleSet, PoleSpec, TuningError};

/// The bundled weak-grid experiment.
pub const BUNDLED_CFG: &str = include_str!("../configs/paper_s4.cfg");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("configuration syntax: {0}")]
    Parse(String),
    #[error("configuration field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("plant: {0}")]
    Plant(#[from] PlantError),
    #[error("controller: {0}")]
    Controller(#[from] ControllerError),
    #[error("controller: {0}")]
    Tuning(#[from] TuningError),
    #[error("scenario: {0}")]
    Scenario(#[from] ScenarioError),
    #[error("simulation: {0}")]
    Sim(#[from] SimError),
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    plant: PlantSection,
    controller: ControllerSection,
    scenario: ScenarioSection,
    simulation: SimulationSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct PlantSection {
    c1_F: f64,
    l_H: f64,
    c2_F: f64,
    lg_H: f64,
    rg_ohm: f64,
    f_grid_Hz: f64,
    vg_phase_rms_V: f64,
    rated_power_VA: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct ControllerSection {
    ts_fast_s: Option<f64>,
    zeta_fast: Option<f64>,
    ts_slow_s: Option<f64>,
    zeta_slow: Option<f64>,
    band_factor: Option<f64>,
    k0: Option<f64>,
    k1: Option<f64>,
    k2: Option<f64>,
    k3: Option<f64>,
    i_guard_A: Option<f64>,
    v_guard_V: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct ScenarioSection {
    p_i_init_W: f64,
    v_dc_ref_init_V: f64,
    q_ref_init_var: f64,
    grid_fraction_init: f64,
    shaping_order: Option<usize>,
    #[serde(default)]
    event: Vec<EventEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct EventEntry {
    time_s: f64,
    kind: EventKind,
    target: f64,
    #[serde(default)]
    window_s: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct SimulationSection {
    dt_s: f64,
    t_end_s: f64,
    decimation: i64,
    v_floor_V: Option<f64>,
    init: Option<InitKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum InitKind {
    GridDriven,
    Matched,
}

/// Where the controller gains came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GainSource {
    Poles {
        fast: PoleSpec,
        slow: PoleSpec,
        band_factor: f64,
    },
    Explicit,
}

/// A validated configuration, ready to simulate.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: PlantParams,
    pub gains: ControllerGains,
    pub gain_source: GainSource,
    pub scenario: Scenario,
    pub sim: SimConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let file: FileConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        file.resolve()
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// The bundled weak-grid experiment.
    pub fn bundled() -> Self {
        Self::from_toml(BUNDLED_CFG).expect("bundled configuration is valid")
    }

    /// Apply command-line overrides and revalidate.
    pub fn with_overrides(
        mut self,
        dt: Option<f64>,
        t_end: Option<f64>,
        decimation: Option<usize>,
    ) -> Result<Self, ConfigError> {
        if let Some(dt) = dt {
            self.sim.dt = dt;
        }
        if let Some(t) = t_end {
            self.sim.t_end = t;
        }
        if let Some(d) = decimation {
            self.sim.decimation = d;
        }
        self.sim.validate()?;
        Ok(self)
    }
}

impl FileConfig {
    fn resolve(self) -> Result<RunConfig, ConfigError> {
        let pl = &self.plant;
        if !(pl.f_grid_Hz.is_finite() && pl.f_grid_Hz > 0.0) {
            return Err(invalid("plant.f_grid_Hz", "must be finite and > 0"));
        }
        let params = PlantParams {
            c1: pl.c1_F,
            l: pl.l_H,
            c2: pl.c2_F,
            lg: pl.lg_H,
            rg: pl.rg_ohm,
            omega: 2.0 * std::f64::consts::PI * pl.f_grid_Hz,
            vg_peak_phase: pl.vg_phase_rms_V * std::f64::consts::SQRT_2,
            rated_power: pl.rated_power_VA,
        };
        params.validate()?;

        let (gains, gain_source) = self.controller.gains()?;
        let defaults = GuardThresholds::default();
        let guard = GuardThresholds {
            i_guard: self.controller.i_guard_A.unwrap_or(defaults.i_guard),
            v_guard: self.controller.v_guard_V.unwrap_or(defaults.v_guard),
        };
        guard.validate()?;

        let sc = &self.scenario;
        let initial = InitialSetpoints {
            input_power: sc.p_i_init_W,
            dc_ref: sc.v_dc_ref_init_V,
            reactive_ref: sc.q_ref_init_var,
            grid_fraction: sc.grid_fraction_init,
        };
        let shaping = Shaping {
            order: sc.shaping_order.unwrap_or(Shaping::default().order),
            ..Default::default()
        };
        let events = sc
            .event
            .iter()
            .map(|e| ScenarioEvent::new(e.time_s, e.kind, e.target, e.window_s))
            .collect();
        let scenario = Scenario::new(initial, events, shaping)?;

        let s = &self.simulation;
        if s.decimation <= 0 {
            return Err(invalid(
                "simulation.decimation",
                "must be a positive integer",
            ));
        }
        let init = match s.init.unwrap_or(InitKind::GridDriven) {
            InitKind::GridDriven => Initialization::GridDriven,
            InitKind::Matched => Initialization::Matched,
        };
        let sim = SimConfig {
            dt: s.dt_s,
            t_end: s.t_end_s,
            decimation: s.decimation as usize,
            guard,
            v_floor: s.v_floor_V.unwrap_or(SimConfig::default().v_floor),
            init,
        };
        sim.validate()?;

        Ok(RunConfig {
            params,
            gains,
            gain_source,
            scenario,
            sim,
        })
    }
}

impl ControllerSection {
    fn gains(&self) -> Result<(ControllerGains, GainSource), ConfigError> {
        let poles = [
            self.ts_fast_s,
            self.zeta_fast,
            self.ts_slow_s,
            self.zeta_slow,
        ];
        let explicit = [self.k0, self.k1, self.k2, self.k3];
        let any_poles = poles.iter().any(Option::is_some);
        let any_gains = explicit.iter().any(Option::is_some);
        match (any_poles, any_gains) {
            (true, true) => Err(invalid(
                "controller",
                "give either pole specifications or explicit gains, not both",
            )),
            (false, false) => Err(invalid(
                "controller",
                "needs ts_fast_s/zeta_fast/ts_slow_s/zeta_slow or k0..k3",
            )),
            (true, false) => {
                let names = [
                    "controller.ts_fast_s",
                    "controller.zeta_fast",
                    "controller.ts_slow_s",
                    "controller.zeta_slow",
                ];
                let mut v = [0.0; 4];
                for (i, (value, name)) in poles.iter().zip(names).enumerate() {
                    v[i] = value.ok_or_else(|| invalid(name, "missing"))?;
                }
                let band_factor = self
                    .band_factor
                    .unwrap_or(crate::tuning::DEFAULT_BAND_FACTOR);
                let fast = PoleSpec::new(v[0], v[1])?;
                let slow = PoleSpec::new(v[2], v[3])?;
                let set = PoleSet::from_specs(&fast, &slow, band_factor)?;
                Ok((
                    gains_from_poles(set.poles())?,
                    GainSource::Poles {
                        fast,
                        slow,
                        band_factor,
                    },
                ))
            }
            (false, true) => {
                if self.band_factor.is_some() {
                    return Err(invalid(
                        "controller.band_factor",
                        "only meaningful with pole specifications",
                    ));
                }
                let names = [
                    "controller.k0",
                    "controller.k1",
                    "controller.k2",
                    "controller.k3",
                ];
                let mut v = [0.0; 4];
                for (i, (value, name)) in explicit.iter().zip(names).enumerate() {
                    v[i] = value.ok_or_else(|| invalid(name, "missing"))?;
                }
                let g = ControllerGains {
                    k0: v[0],
                    k1: v[1],
                    k2: v[2],
                    k3: v[3],
                };
                g.validate()?;
                Ok((g, GainSource::Explicit))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_config_matches_reference_setup() {
        let cfg = RunConfig::bundled();
        let p = PlantParams::weak_grid_reference();
        assert!((cfg.params.c1 - p.c1).abs() < 1e-15);
        assert!((cfg.params.omega - p.omega).abs() < 1e-12);
        assert!((cfg.params.vg_peak_phase - p.vg_peak_phase).abs() < 1e-9);
        let reference = Scenario::weak_grid_test_sequence(8000.0);
        assert_eq!(cfg.scenario.events().len(), reference.events().len());
        for (a, b) in cfg.scenario.events().iter().zip(reference.events()) {
            assert_eq!(a.kind, b.kind);
            assert!((a.time - b.time).abs() < 1e-15);
            assert!((a.target - b.target).abs() < 1e-9);
            assert!((a.window - b.window).abs() < 1e-15);
        }
        assert_eq!(cfg.sim, SimConfig::default());
        assert!(matches!(cfg.gain_source, GainSource::Poles { .. }));
    }

    fn replace(from: &str, to: &str) -> String {
        assert!(BUNDLED_CFG.contains(from), "{from}");
        BUNDLED_CFG.replacen(from, to, 1)
    }

    #[test]
    fn zero_end_time_is_rejected() {
        let err = RunConfig::from_toml(&replace("t_end_s = 0.28", "t_end_s = 0.0")).unwrap_err();
        assert!(err.to_string().contains("t_end"), "{err}");
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = RunConfig::from_toml(&replace("[plant]", "[plant]\nbogus_V = 1.0")).unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)));
        assert!(err.to_string().contains("bogus_V"), "{err}");
    }

    #[test]
    fn negative_capacitance_names_field() {
        let err = RunConfig::from_toml(&replace("c1_F = 2.7e-3", "c1_F = -2.7e-3")).unwrap_err();
        assert!(
            matches!(
                err,
                ConfigError::Plant(PlantError::InvalidParameter { field: "c1", .. })
            ),
            "{err}"
        );
    }

    #[test]
    fn explicit_gains_are_accepted() {
        let text = replace("ts_fast_s = 1e-3\nzeta_fast = 0.707\nts_slow_s = 10e-3\nzeta_slow = 0.707\nband_factor = 4.6 ", "k1 = 4.28e10\nk2 = 5.12e7\nk3 = 1.01e4\nk0 = 1.79e13\n");
        let cfg = RunConfig::from_toml(&text).unwrap();
        assert_eq!(cfg.gains.k3, 1.01e4);
        assert_eq!(cfg.gain_source, GainSource::Explicit);
    }

    #[test]
    fn mixed_gain_sources_are_rejected() {
        let err =
            RunConfig::from_toml(&replace("zeta_slow = 0.707", "zeta_slow = 0.707\nk0 = 1.0"))
                .unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { .. }));
    }

    #[test]
    fn overrides_revalidate() {
        let cfg = RunConfig::bundled();
        assert!(cfg.clone().with_overrides(Some(-1.0), None, None).is_err());
        let c = cfg.with_overrides(Some(2e-6), Some(0.01), Some(5)).unwrap();
        assert_eq!((c.sim.dt, c.sim.t_end, c.sim.decimation), (2e-6, 0.01, 5));
    }
}
