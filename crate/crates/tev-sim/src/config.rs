//! Scenario configuration: a TOML file with every scenario parameter as a
//! named key, plus validation.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ev_model::{EconomicParams, SliderDist};
use crate::market::SupplyCurve;

/// Charging direction capability for the whole fleet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Grid-to-vehicle only: export capability forced to zero.
    V1g,
    /// Bidirectional: vehicles may also discharge to the grid.
    V2g,
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "v1g" => Ok(Mode::V1g),
            "v2g" => Ok(Mode::V2g),
            other => Err(Error::Config(format!("unknown mode '{other}' (expected v1g or v2g)"))),
        }
    }
}

/// Economic parameters plus the bid deadband.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct EconomicsConfig {
    /// Inconvenience cost in $/kWh of below-full SOC per hour.
    pub alpha: f64,
    /// Smoothing coefficient in $/kWh^2 of metered throughput.
    pub beta: f64,
    /// Battery degradation cost in $/kWh cycled.
    pub phi: f64,
    /// Bid deadband price margin in $/kWh.
    pub deadband: f64,
}

impl Default for EconomicsConfig {
    fn default() -> Self {
        EconomicsConfig {
            alpha: 0.02,
            beta: 0.001,
            phi: 0.0,
            deadband: 0.005,
        }
    }
}

impl EconomicsConfig {
    pub fn params(&self) -> EconomicParams {
        EconomicParams {
            alpha: self.alpha,
            beta: self.beta,
            phi: self.phi,
        }
    }
}

/// Deterministic diurnal profile of the non-EV (inflexible) load, kWh per
/// hour. Real-time actuals add seeded multiplicative noise on top.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct InflexibleProfile {
    pub base_kwh: f64,
    /// Added during hours 6-9.
    pub morning_peak_kwh: f64,
    /// Added during hours 17-21.
    pub evening_peak_kwh: f64,
}

impl Default for InflexibleProfile {
    fn default() -> Self {
        InflexibleProfile {
            base_kwh: 300.0,
            morning_peak_kwh: 40.0,
            evening_peak_kwh: 80.0,
        }
    }
}

impl InflexibleProfile {
    /// Forecast load for an hour of day.
    pub fn hourly(&self, hour_of_day: u32) -> f64 {
        let mut load = self.base_kwh;
        if (6..=9).contains(&hour_of_day) {
            load += self.morning_peak_kwh;
        }
        if (17..=21).contains(&hour_of_day) {
            load += self.evening_peak_kwh;
        }
        load
    }
}

/// Full scenario description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Simulated days; the first two are warm-up and excluded from metrics.
    pub days: u32,
    pub fleet_size: usize,
    pub seed: u64,
    pub mode: Mode,
    /// Rolling optimization and DA bidding horizon in hours.
    pub horizon_hours: usize,
    /// Agents re-solve their QP every this many hours (1 = every DA round).
    pub resolve_every_hours: u32,
    /// Multiplicative half-width of RT inflexible-load noise (0 disables).
    pub rt_noise_pct: f64,
    pub slider: SliderDist,
    pub economics: EconomicsConfig,
    pub supply: SupplyCurve,
    pub inflexible: InflexibleProfile,
    /// Optional EV catalog CSV; the built-in catalog is used when absent.
    pub catalog_path: Option<PathBuf>,
    /// Optional driving-schedule CSV; a seeded synthetic pool is used when absent.
    pub schedule_path: Option<PathBuf>,
    /// Size of the synthetic schedule pool.
    pub schedule_pool_size: usize,
    /// Output directory for CSV/JSON artifacts (none = no files written).
    pub out_dir: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            days: 7,
            fleet_size: 20,
            seed: 42,
            mode: Mode::V1g,
            horizon_hours: 48,
            resolve_every_hours: 1,
            rt_noise_pct: 0.05,
            slider: SliderDist::Uniform { lo: 0.0, hi: 1.0 },
            economics: EconomicsConfig::default(),
            supply: SupplyCurve {
                base_price: 0.03,
                slope: 5e-5,
                feeder_limit: 550.0,
                surcharge: 0.05,
                evening_bump: 0.5,
            },
            inflexible: InflexibleProfile::default(),
            catalog_path: None,
            schedule_path: None,
            schedule_pool_size: 1000,
            out_dir: None,
        }
    }
}

impl ScenarioConfig {
    pub fn warmup_hours(&self) -> usize {
        (2 * 24).min(self.total_hours())
    }

    pub fn total_hours(&self) -> usize {
        self.days as usize * 24
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.days < 3 {
            problems.push(format!("days = {} (need >= 3: 2 warm-up + 1 measured)", self.days));
        }
        if self.fleet_size == 0 {
            problems.push("fleet_size = 0".to_string());
        }
        if self.horizon_hours < 24 {
            problems.push(format!("horizon_hours = {} (need >= 24)", self.horizon_hours));
        }
        if self.resolve_every_hours == 0 {
            problems.push("resolve_every_hours = 0".to_string());
        }
        if !(0.0..1.0).contains(&self.rt_noise_pct) {
            problems.push(format!("rt_noise_pct = {} (need 0 <= x < 1)", self.rt_noise_pct));
        }
        let e = &self.economics;
        if e.alpha < 0.0 || e.beta < 0.0 || e.phi < 0.0 || e.deadband < 0.0 {
            problems.push(format!(
                "economics must be non-negative (alpha={}, beta={}, phi={}, deadband={})",
                e.alpha, e.beta, e.phi, e.deadband
            ));
        }
        let s = &self.supply;
        if s.base_price <= 0.0 || s.slope < 0.0 || s.feeder_limit <= 0.0 || s.surcharge < 0.0 {
            problems.push(format!(
                "supply needs a > 0, b >= 0, Q_max > 0, s >= 0 (a={}, b={}, Q_max={}, s={})",
                s.base_price, s.slope, s.feeder_limit, s.surcharge
            ));
        }
        match &self.slider {
            SliderDist::Uniform { lo, hi } => {
                if !(0.0..=1.0).contains(lo) || !(0.0..=1.0).contains(hi) || lo > hi {
                    problems.push(format!("slider uniform range [{lo}, {hi}] invalid"));
                }
            }
            SliderDist::Fixed { value } => {
                if !(0.0..=1.0).contains(value) {
                    problems.push(format!("slider fixed value {value} outside [0, 1]"));
                }
            }
            SliderDist::Stratified { values } => {
                if values.is_empty() || values.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    problems.push("slider stratified values must be non-empty and in [0, 1]".to_string());
                }
            }
        }
        if self.inflexible.base_kwh < 0.0 {
            problems.push(format!("inflexible.base_kwh = {}", self.inflexible.base_kwh));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

/// Load and validate a scenario config from a TOML file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    let config: ScenarioConfig =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_validates() {
        ScenarioConfig::default().validate().unwrap();
    }

    #[test]
    fn short_run_rejected() {
        let cfg = ScenarioConfig {
            days: 2,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ScenarioConfig {
            days: 5,
            mode: Mode::V2g,
            slider: SliderDist::Stratified {
                values: vec![0.1, 0.5, 0.9],
            },
            ..Default::default()
        };
        let text = toml::to_string(&cfg).unwrap();
        let back: ScenarioConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.days, 5);
        assert_eq!(back.mode, Mode::V2g);
        assert!(matches!(back.slider, SliderDist::Stratified { .. }));
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = toml::from_str::<ScenarioConfig>("dayz = 7").unwrap_err();
        assert!(err.to_string().contains("dayz"));
    }

    #[test]
    fn profile_has_two_peaks() {
        let p = InflexibleProfile::default();
        assert!(p.hourly(7) > p.hourly(3));
        assert!(p.hourly(18) > p.hourly(7));
        assert_eq!(p.hourly(12), p.base_kwh);
    }
}
