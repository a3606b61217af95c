//! EV physical parameters, driving patterns, fleet synthesis, and SOC physics.

use std::io::Read;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::LogNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of battery capacity kept as a reserve floor (C_min).
pub const MIN_SOC_FRACTION: f64 = 0.05;
/// Default charger efficiency when the catalog does not provide one.
pub const DEFAULT_EFFICIENCY: f64 = 0.9;
/// Rejection-resampling attempt cap when pairing specs with schedules.
pub const PAIRING_ATTEMPT_CAP: usize = 10_000;

/// Physical parameters of one vehicle model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvSpec {
    pub model_name: String,
    /// Maximum miles per full charge cycle.
    pub range_miles: f64,
    /// Miles per kWh while driving.
    pub mileage: f64,
    /// Maximum battery-side charging energy per hour (kW).
    pub charge_rating: f64,
    /// Maximum battery-side discharging energy per hour (kW). Zero in V1G.
    pub discharge_rating: f64,
    pub eta_in: f64,
    pub eta_out: f64,
    /// Sampling weight; need not be normalized.
    pub sale_weight: f64,
}

impl EvSpec {
    /// Battery capacity in kWh, derived as range / mileage.
    pub fn battery_capacity(&self) -> f64 {
        self.range_miles / self.mileage
    }

    /// Reserve floor in kWh.
    pub fn min_soc(&self) -> f64 {
        MIN_SOC_FRACTION * self.battery_capacity()
    }

    /// Maximum metered (billing-side) import per hour: grid energy drawn at full charge rate.
    pub fn metered_import_limit(&self) -> f64 {
        self.charge_rating / self.eta_in
    }

    /// Maximum metered (billing-side) export per hour.
    pub fn metered_export_limit(&self) -> f64 {
        self.discharge_rating * self.eta_out
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.range_miles > 0.0
            && self.mileage > 0.0
            && self.charge_rating > 0.0
            && self.discharge_rating >= 0.0
            && self.eta_in > 0.0
            && self.eta_in <= 1.0
            && self.eta_out > 0.0
            && self.eta_out <= 1.0
            && self.sale_weight >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid EV spec for '{}'",
                self.model_name
            )))
        }
    }
}

/// Daily plug-in/plug-out hours and travel miles for one vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrivingSchedule {
    /// Home-arrival hour of day (0-23).
    pub t_in: u32,
    /// Home-departure hour of day (0-23).
    pub t_out: u32,
    /// Daily travel miles.
    pub daily_miles: f64,
}

impl DrivingSchedule {
    /// Plug-in duration in hours, wrapping midnight.
    pub fn plug_in_duration(&self) -> u32 {
        (self.t_out + 24 - self.t_in) % 24
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_in == self.t_out || self.t_in > 23 || self.t_out > 23 || self.daily_miles <= 0.0
        {
            return Err(Error::Config(format!(
                "invalid driving schedule t_in={} t_out={} d={}",
                self.t_in, self.t_out, self.daily_miles
            )));
        }
        Ok(())
    }

    /// True if the vehicle is at home (plugged in) during this hour of day.
    /// The arrival hour counts as plugged in; the departure hour does not.
    pub fn plugged_in(&self, hour_of_day: u32) -> bool {
        if self.t_in < self.t_out {
            hour_of_day >= self.t_in && hour_of_day < self.t_out
        } else {
            hour_of_day >= self.t_in || hour_of_day < self.t_out
        }
    }
}

/// What the vehicle is doing during one hour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HourKind {
    /// Arrival or departure hour: SOC drops by half the daily driving
    /// depletion and no energy is exchanged with the grid.
    Driving,
    /// Plugged in and available for charging/discharging.
    Parked,
    /// Not at home; no exchange, SOC unchanged.
    Away,
}

/// Classified hours over a scheduling horizon.
#[derive(Debug, Clone)]
pub struct HorizonSets {
    pub start_hour: u64,
    pub horizon_len: usize,
    /// Per-hour classification, indexed 0..horizon_len.
    pub kinds: Vec<HourKind>,
    /// Plugged-in hour indices (arrival hour included, departure excluded).
    pub trans_hours: Vec<usize>,
    pub arrival_hours: Vec<usize>,
    pub departure_hours: Vec<usize>,
}

impl HorizonSets {
    /// Hours at which energy may actually be exchanged: plugged in and not driving.
    pub fn exchange_hours(&self) -> impl Iterator<Item = usize> + '_ {
        self.kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == HourKind::Parked)
            .map(|(i, _)| i)
    }
}

/// Battery state plus the last hour's exchanged energy.
#[derive(Debug, Clone, Copy)]
pub struct EvState {
    pub soc: f64,
    pub c_max: f64,
    pub c_min: f64,
    pub hour_energy_in: f64,
    pub hour_energy_out: f64,
}

impl EvState {
    pub fn fully_charged(spec: &EvSpec) -> Self {
        EvState {
            soc: spec.battery_capacity(),
            c_max: spec.battery_capacity(),
            c_min: spec.min_soc(),
            hour_energy_in: 0.0,
            hour_energy_out: 0.0,
        }
    }
}

/// One agent: vehicle, usage pattern, and owner preferences.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentConfig {
    pub agent_id: String,
    pub spec: EvSpec,
    pub schedule: DrivingSchedule,
    /// Preference slider in [0,1]: 0 = max amenity, 1 = max savings.
    pub slider: f64,
    /// Inconvenience cost in $/kWh.
    pub inconvenience_rate: f64,
    /// Smoothing coefficient in $/kWh^2.
    pub smoothing_coeff: f64,
    /// Battery degradation cost in $/kWh.
    pub degradation_rate: f64,
}

/// Distribution from which agent sliders are drawn.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SliderDist {
    Uniform { lo: f64, hi: f64 },
    Fixed { value: f64 },
    /// Cycles through the given values in order (stratified assignment).
    Stratified { values: Vec<f64> },
}

impl SliderDist {
    fn draw(&self, index: usize, rng: &mut impl Rng) -> f64 {
        match self {
            SliderDist::Uniform { lo, hi } => rng.gen_range(*lo..=*hi),
            SliderDist::Fixed { value } => *value,
            SliderDist::Stratified { values } => values[index % values.len()],
        }
    }
}

/// Per-agent economic parameters applied at fleet synthesis.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EconomicParams {
    pub alpha: f64,
    pub beta: f64,
    pub phi: f64,
}

impl Default for EconomicParams {
    fn default() -> Self {
        EconomicParams {
            alpha: 0.02,
            beta: 0.001,
            phi: 0.0,
        }
    }
}

fn parse_cell(raw: &str, row: usize, column: &str) -> Result<f64> {
    let trimmed = raw.trim().trim_end_matches('%');
    trimmed.parse::<f64>().map_err(|e| Error::CatalogParse {
        row,
        column: column.to_string(),
        detail: format!("'{raw}': {e}"),
    })
}

/// Load an EV catalog from CSV.
///
/// Columns: model,sale_pct,range_miles,charger_kw,miles_per_kwh
/// with optional discharge_kw,eta_in,eta_out. Sale percentages may carry a
/// trailing '%' and are stored as fractions.
pub fn load_ev_catalog(source: impl Read) -> Result<Vec<EvSpec>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let required = |name: &str| {
        col(name).ok_or_else(|| Error::CatalogParse {
            row: 0,
            column: name.to_string(),
            detail: "missing column".to_string(),
        })
    };
    let c_model = required("model")?;
    let c_sale = required("sale_pct")?;
    let c_range = required("range_miles")?;
    let c_charger = required("charger_kw")?;
    let c_mileage = required("miles_per_kwh")?;
    let c_discharge = col("discharge_kw");
    let c_eta_in = col("eta_in");
    let c_eta_out = col("eta_out");

    let mut specs = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let get = |idx: usize, name: &str| -> Result<f64> {
            let raw = record.get(idx).ok_or_else(|| Error::CatalogParse {
                row,
                column: name.to_string(),
                detail: "missing cell".to_string(),
            })?;
            parse_cell(raw, row, name)
        };
        let charge_rating = get(c_charger, "charger_kw")?;
        let spec = EvSpec {
            model_name: record.get(c_model).unwrap_or("").to_string(),
            sale_weight: get(c_sale, "sale_pct")? / 100.0,
            range_miles: get(c_range, "range_miles")?,
            charge_rating,
            mileage: get(c_mileage, "miles_per_kwh")?,
            discharge_rating: match c_discharge {
                Some(idx) => get(idx, "discharge_kw")?,
                None => 0.0,
            },
            eta_in: match c_eta_in {
                Some(idx) => get(idx, "eta_in")?,
                None => DEFAULT_EFFICIENCY,
            },
            eta_out: match c_eta_out {
                Some(idx) => get(idx, "eta_out")?,
                None => DEFAULT_EFFICIENCY,
            },
        };
        spec.validate()?;
        specs.push(spec);
    }
    if specs.is_empty() {
        return Err(Error::EmptyCatalog);
    }
    Ok(specs)
}

/// Sale data for the top 15 commercially available EVs, 2016-2019.
pub const BUILTIN_CATALOG_CSV: &str = "\
model,sale_pct,range_miles,charger_kw,miles_per_kwh
Tesla Model 3,44.11%,220,11.5,3.84
Tesla Model S,14.52%,285,11.5,3.33
Tesla Model X,12.92%,258,11.5,2.85
Chevy Bolt,8.66%,238,3.3,3.57
Nissan Leaf,7.79%,151,3.3,3.33
BMW i3,3.70%,153,7.4,3.84
VW e-Golf,2.04%,125,7.2,3.57
Fiat 500E,1.48%,84,6.6,3.33
Audi e-tron,0.80%,204,11,2.17
Kia Soul EV,0.76%,111,6.6,3.22
Ford Focus EV,0.49%,115,6.6,3.22
Smart ED,0.46%,58,3.3,3.22
Chevy Spark,0.46%,84,3.3,3.57
Jaguar I-Pace,0.44%,234,7,2.27
Honda Clarity BEV,0.42%,89,7.7,3.33
";

/// The built-in EV catalog.
pub fn builtin_catalog() -> Vec<EvSpec> {
    load_ev_catalog(BUILTIN_CATALOG_CSV.as_bytes()).expect("builtin catalog is well formed")
}

/// Load driving schedules from CSV with columns t_in,t_out,daily_miles.
pub fn load_schedule_pool(source: impl Read) -> Result<Vec<DrivingSchedule>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let mut pool = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let parse = |idx: usize, name: &str| -> Result<f64> {
            record
                .get(idx)
                .ok_or_else(|| Error::ScheduleParse {
                    row,
                    detail: format!("missing {name}"),
                })?
                .parse::<f64>()
                .map_err(|e| Error::ScheduleParse {
                    row,
                    detail: format!("{name}: {e}"),
                })
        };
        let schedule = DrivingSchedule {
            t_in: parse(0, "t_in")? as u32,
            t_out: parse(1, "t_out")? as u32,
            daily_miles: parse(2, "daily_miles")?,
        };
        schedule.validate().map_err(|e| Error::ScheduleParse {
            row,
            detail: e.to_string(),
        })?;
        pool.push(schedule);
    }
    if pool.is_empty() {
        return Err(Error::ScheduleParse {
            row: 0,
            detail: "empty schedule pool".to_string(),
        });
    }
    Ok(pool)
}

/// Generate a seeded synthetic driving-schedule pool.
///
/// Arrival hours peak at 17-19, departure hours at 7-9, and daily miles
/// follow a lognormal with median 25 miles.
pub fn synthetic_schedule_pool(count: usize, seed: u64) -> Vec<DrivingSchedule> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5348_4544); // "SHED"
    let arrival_hours: [u32; 9] = [13, 14, 15, 16, 17, 18, 19, 20, 21];
    let arrival_weights: [f64; 9] = [1.0, 1.5, 2.5, 4.0, 6.0, 6.0, 6.0, 2.0, 1.0];
    let departure_hours: [u32; 8] = [5, 6, 7, 8, 9, 10, 11, 12];
    let departure_weights: [f64; 8] = [1.0, 2.0, 6.0, 6.0, 6.0, 2.5, 1.5, 1.0];
    let arrival_dist = WeightedIndex::new(arrival_weights).unwrap();
    let departure_dist = WeightedIndex::new(departure_weights).unwrap();
    let miles_dist = LogNormal::new(25.0_f64.ln(), 0.5).unwrap();

    (0..count)
        .map(|_| DrivingSchedule {
            t_in: arrival_hours[arrival_dist.sample(&mut rng)],
            t_out: departure_hours[departure_dist.sample(&mut rng)],
            daily_miles: miles_dist.sample(&mut rng).clamp(3.0, 150.0),
        })
        .collect()
}

/// True if the spec/schedule pairing passes both feasibility screens:
/// daily miles within range, and plug-in duration long enough to fully
/// recharge from empty.
pub fn pairing_feasible(spec: &EvSpec, schedule: &DrivingSchedule) -> bool {
    schedule.daily_miles < spec.range_miles
        && f64::from(schedule.plug_in_duration()) * spec.charge_rating > spec.battery_capacity()
}

/// Build a fleet of `n` agents by weighted model sampling and rejection
/// resampling of driving schedules. Deterministic for a fixed seed.
pub fn synthesize_fleet(
    catalog: &[EvSpec],
    schedules: &[DrivingSchedule],
    n: usize,
    rng_seed: u64,
    slider_dist: &SliderDist,
    econ: &EconomicParams,
) -> Result<Vec<AgentConfig>> {
    if catalog.is_empty() {
        return Err(Error::EmptyCatalog);
    }
    if schedules.is_empty() {
        return Err(Error::ScheduleParse {
            row: 0,
            detail: "empty schedule pool".to_string(),
        });
    }
    let weights: Vec<f64> = catalog.iter().map(|s| s.sale_weight.max(0.0)).collect();
    let model_dist = WeightedIndex::new(&weights)
        .map_err(|e| Error::Config(format!("bad sale weights: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);

    let mut fleet = Vec::with_capacity(n);
    for i in 0..n {
        let spec = &catalog[model_dist.sample(&mut rng)];
        let mut schedule = None;
        for _ in 0..PAIRING_ATTEMPT_CAP {
            let candidate = schedules[rng.gen_range(0..schedules.len())];
            if pairing_feasible(spec, &candidate) {
                schedule = Some(candidate);
                break;
            }
        }
        let schedule = schedule.ok_or_else(|| Error::InfeasiblePairing {
            model: spec.model_name.clone(),
            attempts: PAIRING_ATTEMPT_CAP,
        })?;
        let slider = slider_dist.draw(i, &mut rng).clamp(0.0, 1.0);
        fleet.push(AgentConfig {
            agent_id: format!("ev{i:03}"),
            spec: spec.clone(),
            schedule,
            slider,
            inconvenience_rate: econ.alpha,
            smoothing_coeff: econ.beta,
            degradation_rate: econ.phi,
        });
    }
    Ok(fleet)
}

/// Classify every hour of an `n`-hour horizon starting at absolute hour
/// `start_hour` according to one vehicle's daily pattern.
pub fn horizon_sets(schedule: &DrivingSchedule, start_hour: u64, n: usize) -> HorizonSets {
    let mut kinds = Vec::with_capacity(n);
    let mut trans_hours = Vec::new();
    let mut arrival_hours = Vec::new();
    let mut departure_hours = Vec::new();
    for i in 0..n {
        let hod = ((start_hour + i as u64) % 24) as u32;
        if schedule.plugged_in(hod) {
            trans_hours.push(i);
        }
        let kind = if hod == schedule.t_in {
            arrival_hours.push(i);
            HourKind::Driving
        } else if hod == schedule.t_out {
            departure_hours.push(i);
            HourKind::Driving
        } else if schedule.plugged_in(hod) {
            HourKind::Parked
        } else {
            HourKind::Away
        };
        kinds.push(kind);
    }
    HorizonSets {
        start_hour,
        horizon_len: n,
        kinds,
        trans_hours,
        arrival_hours,
        departure_hours,
    }
}

/// Metered (billing-side) energy for a battery-side exchange.
pub fn metered_energy(e_in: f64, e_out: f64, spec: &EvSpec) -> (f64, f64) {
    (e_in / spec.eta_in, e_out * spec.eta_out)
}

const SOC_TOL: f64 = 1e-9;

/// Advance SOC by one hour. Bound violations are errors, not silent clamps.
pub fn step_soc(
    state: &EvState,
    e_in: f64,
    e_out: f64,
    hour_kind: HourKind,
    daily_miles: f64,
    spec: &EvSpec,
    hour: usize,
) -> Result<EvState> {
    let mut next = *state;
    match hour_kind {
        HourKind::Driving => {
            if e_in != 0.0 || e_out != 0.0 {
                return Err(Error::ExchangeWhileUnavailable {
                    kind: "driving",
                    hour,
                    e_in,
                    e_out,
                });
            }
            next.soc -= daily_miles / spec.mileage / 2.0;
            next.hour_energy_in = 0.0;
            next.hour_energy_out = 0.0;
        }
        HourKind::Parked => {
            if e_in < 0.0
                || e_out < 0.0
                || e_in > spec.charge_rating + SOC_TOL
                || e_out > spec.discharge_rating + SOC_TOL
            {
                return Err(Error::ExchangeWhileUnavailable {
                    kind: "parked (rating exceeded)",
                    hour,
                    e_in,
                    e_out,
                });
            }
            next.soc += e_in - e_out;
            next.hour_energy_in = e_in;
            next.hour_energy_out = e_out;
        }
        HourKind::Away => {
            if e_in != 0.0 || e_out != 0.0 {
                return Err(Error::ExchangeWhileUnavailable {
                    kind: "away",
                    hour,
                    e_in,
                    e_out,
                });
            }
            next.hour_energy_in = 0.0;
            next.hour_energy_out = 0.0;
        }
    }
    if next.soc < next.c_min - SOC_TOL || next.soc > next.c_max + SOC_TOL {
        return Err(Error::SocOutOfBounds {
            hour,
            soc: next.soc,
            c_min: next.c_min,
            c_max: next.c_max,
        });
    }
    Ok(next)
}
