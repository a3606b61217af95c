//! Outcome metrics: the uncontrolled-charging reference case, per-agent
//! savings and amenity scores, fleet-level load statistics, and a rank
//! correlation helper for preference sweeps.

use serde::Serialize;

use crate::ev_model::{DrivingSchedule, EvSpec};

/// Fraction of capacity within which the battery counts as fully charged.
pub const FULL_CHARGE_EPS_FRACTION: f64 = 0.01;

/// Hourly trajectory of the uncontrolled reference policy: plug in on
/// arrival, charge at full rating starting the hour after arrival until full
/// (a final partial hour tops off), idle otherwise.
#[derive(Debug, Clone)]
pub struct BaseCaseRun {
    /// Metered import per hour, kWh.
    pub metered_import: Vec<f64>,
    /// SOC at the end of each hour.
    pub soc: Vec<f64>,
}

pub fn base_case_run(spec: &EvSpec, schedule: &DrivingSchedule, hours: usize) -> BaseCaseRun {
    let c_max = spec.battery_capacity();
    let drain = schedule.daily_miles / spec.mileage / 2.0;
    let mut soc = c_max;
    let mut metered_import = Vec::with_capacity(hours);
    let mut soc_traj = Vec::with_capacity(hours);
    for h in 0..hours {
        let hod = (h % 24) as u32;
        let mut import = 0.0;
        if hod == schedule.t_in || hod == schedule.t_out {
            soc -= drain;
        } else if schedule.plugged_in(hod) {
            let e_in = spec.charge_rating.min((c_max - soc).max(0.0));
            soc += e_in;
            import = e_in / spec.eta_in;
        }
        metered_import.push(import);
        soc_traj.push(soc);
    }
    BaseCaseRun {
        metered_import,
        soc: soc_traj,
    }
}

/// Charging cost of a metered profile under a price series (signed: exports
/// appear as negative metered energy and earn revenue).
pub fn profile_cost(metered: &[f64], prices: &[f64]) -> f64 {
    metered.iter().zip(prices).map(|(q, p)| q * p).sum()
}

/// Percentage cost reduction relative to the reference case. A free
/// reference case yields zero by convention.
pub fn savings_pct(base_cost: f64, trans_cost: f64) -> f64 {
    if base_cost.abs() < 1e-12 {
        0.0
    } else {
        100.0 * (base_cost - trans_cost) / base_cost
    }
}

/// Count plugged, non-driving hours in `range` where SOC is within tolerance
/// of full. `soc[h]` is end-of-hour state.
pub fn fully_charged_hours(
    soc: &[f64],
    schedule: &DrivingSchedule,
    c_max: f64,
    range: std::ops::Range<usize>,
) -> usize {
    let eps = FULL_CHARGE_EPS_FRACTION * c_max;
    range
        .filter(|&h| {
            let hod = (h % 24) as u32;
            hod != schedule.t_in
                && hod != schedule.t_out
                && schedule.plugged_in(hod)
                && soc[h] >= c_max - eps
        })
        .count()
}

/// Amenity retention: fully-charged plugged hours relative to the reference
/// case. A reference case with none retains full amenity by convention.
pub fn amenity_pct(trans_full_hours: usize, base_full_hours: usize) -> f64 {
    if base_full_hours == 0 {
        100.0
    } else {
        100.0 * trans_full_hours as f64 / base_full_hours as f64
    }
}

/// Per-agent outcome summary.
#[derive(Debug, Clone, Serialize)]
pub struct AgentReport {
    pub agent_id: String,
    pub slider: f64,
    pub base_cost: f64,
    pub trans_cost: f64,
    pub savings_pct: f64,
    pub amenity_pct: f64,
    pub energy_imported_kwh: f64,
    pub energy_exported_kwh: f64,
}

/// Fleet-level load statistics over the post-warm-up window.
#[derive(Debug, Clone, Serialize)]
pub struct SystemReport {
    pub peak_kwh: f64,
    pub mean_kwh: f64,
    pub load_variance: f64,
    pub congested_intervals: usize,
    pub mean_price: f64,
}

pub fn system_report(
    hourly_totals: &[f64],
    hourly_prices: &[f64],
    warmup_hours: usize,
    congested_intervals: usize,
) -> SystemReport {
    let window = &hourly_totals[warmup_hours.min(hourly_totals.len())..];
    let n = window.len().max(1) as f64;
    let mean = window.iter().sum::<f64>() / n;
    let variance = window.iter().map(|q| (q - mean).powi(2)).sum::<f64>() / n;
    let peak = window.iter().cloned().fold(0.0_f64, f64::max);
    let price_window = &hourly_prices[warmup_hours.min(hourly_prices.len())..];
    let mean_price = price_window.iter().sum::<f64>() / price_window.len().max(1) as f64;
    SystemReport {
        peak_kwh: peak,
        mean_kwh: mean,
        load_variance: variance,
        congested_intervals,
        mean_price,
    }
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0; // average rank for ties
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average-rank tie handling.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let rx = ranks(xs);
    let ry = ranks(ys);
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for i in 0..xs.len() {
        cov += (rx[i] - mx) * (ry[i] - my);
        vx += (rx[i] - mx).powi(2);
        vy += (ry[i] - my).powi(2);
    }
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ev_model::builtin_catalog;
    use approx::assert_relative_eq;

    fn spec() -> EvSpec {
        builtin_catalog()[0].clone() // 57.29 kWh pack, 11.5 kW charger
    }

    #[test]
    fn base_case_charges_after_arrival_until_full() {
        let s = spec();
        let sched = DrivingSchedule {
            t_in: 18,
            t_out: 8,
            daily_miles: 46.08, // drains 6 kWh per leg at 3.84 mi/kWh
        };
        let run = base_case_run(&s, &sched, 48);
        // hour 18: arrival drain on top of the morning departure drain
        assert_relative_eq!(run.metered_import[18], 0.0);
        assert_relative_eq!(run.soc[18], s.battery_capacity() - 12.0, epsilon = 1e-9);
        // hour 19: one full-rate hour, then a 0.5 kWh top-off
        assert_relative_eq!(run.metered_import[19], 11.5 / s.eta_in, epsilon = 1e-9);
        assert_relative_eq!(run.metered_import[20], 0.5 / s.eta_in, epsilon = 1e-9);
        assert_relative_eq!(run.soc[20], s.battery_capacity(), epsilon = 1e-9);
        // then idle at full
        assert_relative_eq!(run.metered_import[21], 0.0);
        // departure next day drains again
        assert_relative_eq!(
            run.soc[32],
            s.battery_capacity() - 6.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn base_case_partial_final_hour() {
        let mut s = spec();
        s.charge_rating = 4.0;
        let sched = DrivingSchedule {
            t_in: 18,
            t_out: 8,
            daily_miles: 38.4, // 10 kWh round trip, 5 per leg
        };
        let run = base_case_run(&s, &sched, 24);
        // 10 kWh deficit after both legs: two full-rate hours plus a partial
        assert_relative_eq!(run.metered_import[19], 4.0 / s.eta_in, epsilon = 1e-9);
        assert_relative_eq!(run.metered_import[20], 4.0 / s.eta_in, epsilon = 1e-9);
        assert_relative_eq!(run.metered_import[21], 2.0 / s.eta_in, epsilon = 1e-9);
        assert_relative_eq!(run.metered_import[22], 0.0);
    }

    #[test]
    fn energy_bookkeeping_closes_over_a_day() {
        let s = spec();
        let sched = DrivingSchedule {
            t_in: 17,
            t_out: 7,
            daily_miles: 30.0,
        };
        let run = base_case_run(&s, &sched, 24 * 5);
        // steady state: daily import (battery-side) equals daily drain
        let day4: f64 = run.metered_import[96..120].iter().sum::<f64>() * s.eta_in;
        assert_relative_eq!(day4, 30.0 / s.mileage, epsilon = 1e-9);
    }

    #[test]
    fn savings_conventions() {
        assert_relative_eq!(savings_pct(10.0, 8.0), 20.0);
        assert_relative_eq!(savings_pct(10.0, 12.0), -20.0);
        assert_relative_eq!(savings_pct(0.0, 5.0), 0.0);
    }

    #[test]
    fn amenity_counts_full_plugged_hours() {
        let s = spec();
        let sched = DrivingSchedule {
            t_in: 18,
            t_out: 8,
            daily_miles: 46.08,
        };
        let run = base_case_run(&s, &sched, 48);
        let full = fully_charged_hours(&run.soc, &sched, s.battery_capacity(), 0..48);
        // day pattern: full at hours 19..=23 and 0..=7 except the drained
        // arrival/departure hours; count positive and stable across days
        assert!(full > 0);
        let first_day = fully_charged_hours(&run.soc, &sched, s.battery_capacity(), 24..48);
        // hods 0..=7 plus 19..=23; the 0.5 kWh shortfall at hod 19 is within
        // the 1% full-charge tolerance
        assert_eq!(first_day, 13);
        assert_relative_eq!(amenity_pct(6, 12), 50.0);
        assert_relative_eq!(amenity_pct(0, 0), 100.0);
    }

    #[test]
    fn spearman_known_values() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let inc = [10.0, 20.0, 25.0, 40.0, 100.0];
        let dec = [5.0, 4.0, 3.0, 2.0, 1.0];
        assert_relative_eq!(spearman(&x, &inc), 1.0, epsilon = 1e-12);
        assert_relative_eq!(spearman(&x, &dec), -1.0, epsilon = 1e-12);
        let flat = [7.0; 5];
        assert_relative_eq!(spearman(&x, &flat), 0.0);
        // ties get average ranks, correlation stays strongly positive
        let tied = [1.0, 1.0, 2.0, 3.0, 4.0];
        assert!(spearman(&x, &tied) > 0.9);
    }

    #[test]
    fn system_report_skips_warmup() {
        let totals = [1000.0, 1000.0, 10.0, 20.0, 30.0];
        let prices = [0.9, 0.9, 0.05, 0.06, 0.07];
        let r = system_report(&totals, &prices, 2, 1);
        assert_relative_eq!(r.peak_kwh, 30.0);
        assert_relative_eq!(r.mean_kwh, 20.0);
        assert_relative_eq!(r.mean_price, 0.06, epsilon = 1e-12);
        assert_eq!(r.congested_intervals, 1);
    }
}
