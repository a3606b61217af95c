//! Retail market operation: price forecasting, bid aggregation, double-sided
//! clearing against a parametric supply curve, congestion surcharge, and
//! price-convergence tracking.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bidding::{quantity_at_price, scale_quantities, BidCurve};
use crate::error::{Error, Result};
use crate::scheduler::PriceForecast;

pub const SLOTS_PER_HOUR: u32 = 12;
pub const CLEARING_PRICE_TOL: f64 = 1e-9;
/// Hours of day over which the supply base price is modulated upward.
pub const EVENING_HOURS: std::ops::RangeInclusive<u32> = 17..=21;

/// Parametric wholesale supply: price = a(t) + b * quantity, capped by a
/// feeder limit beyond which a congestion surcharge applies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SupplyCurve {
    /// Base price a in $/kWh.
    pub base_price: f64,
    /// Slope b in $/kWh per kWh (hourly quantity units).
    pub slope: f64,
    /// Feeder limit Q_max in kWh per hour.
    pub feeder_limit: f64,
    /// Congestion surcharge s in $/kWh.
    pub surcharge: f64,
    /// Evening modulation: a(t) = a * (1 + bump) during evening hours.
    #[serde(default)]
    pub evening_bump: f64,
}

/// Supply parameters for one specific interval, in that interval's quantity
/// units (hourly for DA, per-slot for RT).
#[derive(Debug, Clone, Copy)]
pub struct EffectiveSupply {
    pub a: f64,
    pub b: f64,
    pub q_max: f64,
    pub s: f64,
}

impl SupplyCurve {
    pub fn base_at_hour(&self, hour_of_day: u32) -> f64 {
        if EVENING_HOURS.contains(&hour_of_day) {
            self.base_price * (1.0 + self.evening_bump)
        } else {
            self.base_price
        }
    }

    /// Hourly-resolution supply for a DA interval.
    pub fn da_interval(&self, hour: u64) -> EffectiveSupply {
        EffectiveSupply {
            a: self.base_at_hour((hour % 24) as u32),
            b: self.slope,
            q_max: self.feeder_limit,
            s: self.surcharge,
        }
    }

    /// Per-slot supply for a 5-minute RT interval: same price axis, energy
    /// divided across 12 slots.
    pub fn rt_interval(&self, hour: u64) -> EffectiveSupply {
        EffectiveSupply {
            a: self.base_at_hour((hour % 24) as u32),
            b: self.slope * f64::from(SLOTS_PER_HOUR),
            q_max: self.feeder_limit / f64::from(SLOTS_PER_HOUR),
            s: self.surcharge,
        }
    }
}

/// A bid tagged with its submitting agent.
#[derive(Debug, Clone)]
pub struct LabeledBid {
    pub agent_id: String,
    pub bid: BidCurve,
}

/// Aggregated demand: inflexible load plus the sum of all agent bid curves.
#[derive(Debug, Clone)]
pub struct DemandCurve {
    pub bids: Vec<BidCurve>,
    pub inflexible: f64,
    /// Union of the agents' corner prices, descending.
    pub breakpoints: Vec<f64>,
}

/// Build the aggregate demand curve for one interval.
pub fn aggregate_demand(bids: Vec<BidCurve>, inflexible: f64) -> DemandCurve {
    let mut breakpoints: Vec<f64> = bids
        .iter()
        .flat_map(|b| b.points.iter().map(|(p, _)| *p))
        .collect();
    breakpoints.sort_by(|a, b| b.partial_cmp(a).unwrap());
    breakpoints.dedup();
    DemandCurve {
        bids,
        inflexible,
        breakpoints,
    }
}

impl DemandCurve {
    /// Total quantity demanded at a probe price.
    pub fn quantity(&self, price: f64) -> f64 {
        self.inflexible
            + self
                .bids
                .iter()
                .map(|b| quantity_at_price(b, price))
                .sum::<f64>()
    }
}

/// Market-clearing outcome for one interval, before per-agent mapping.
#[derive(Debug, Clone, Copy)]
pub struct ClearingPoint {
    pub price: f64,
    pub quantity: f64,
    pub congested: bool,
}

/// Intersect aggregate demand with the supply curve by bisection on price.
/// If the pre-surcharge quantity exceeds the feeder limit, the surcharge is
/// added once and quantities are re-evaluated at the raised price.
pub fn clear(demand: &DemandCurve, supply: &EffectiveSupply) -> Result<ClearingPoint> {
    let (mut price, mut quantity);
    if supply.b <= 0.0 {
        price = supply.a;
        quantity = demand.quantity(price);
    } else {
        let supply_q = |p: f64| ((p - supply.a) / supply.b).max(0.0);
        let excess = |p: f64| demand.quantity(p) - supply_q(p);
        let mut lo = 0.0;
        let price_cap = 10.0 * supply.a + supply.b * demand.quantity(0.0).max(0.0) + 1.0;
        let mut hi = price_cap;
        if excess(hi) > 0.0 {
            return Err(Error::NoIntersection { price_cap });
        }
        if excess(lo) <= 0.0 {
            // demand never exceeds supply even at the floor price
            hi = lo;
        }
        while hi - lo > CLEARING_PRICE_TOL {
            let mid = 0.5 * (lo + hi);
            if excess(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // midpoint of the remaining interval doubles as the flat-overlap tie-break
        price = 0.5 * (lo + hi);
        quantity = demand.quantity(price);
    }
    let mut congested = false;
    if quantity > supply.q_max + 1e-9 {
        congested = true;
        price += supply.s;
        quantity = demand.quantity(price);
    }
    Ok(ClearingPoint {
        price,
        quantity,
        congested,
    })
}

/// Which market an interval belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MarketKind {
    Da,
    Rt,
}

/// Cleared interval with per-agent committed quantities.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClearedResult {
    /// Absolute delivery hour.
    pub interval: u64,
    pub kind: MarketKind,
    /// DA: hours of advance notice. RT: 0.
    pub lead_time: u32,
    /// RT slot within the hour, 0-11. 0 for DA.
    pub slot: u32,
    pub cleared_price: f64,
    pub total_quantity: f64,
    pub inflexible_quantity: f64,
    /// Committed metered quantity per agent, in the interval's energy units.
    pub per_agent_q: Vec<(String, f64)>,
    pub congested: bool,
}

fn map_agents(bids: &[LabeledBid], price: f64) -> Vec<(String, f64)> {
    bids.iter()
        .map(|lb| (lb.agent_id.clone(), quantity_at_price(&lb.bid, price)))
        .collect()
}

/// Clear one DA interval.
pub fn clear_da_interval(
    bids: &[LabeledBid],
    inflexible: f64,
    supply: &EffectiveSupply,
    interval: u64,
    lead_time: u32,
) -> Result<ClearedResult> {
    let demand = aggregate_demand(bids.iter().map(|lb| lb.bid.clone()).collect(), inflexible);
    let point = clear(&demand, supply)?;
    let per_agent_q = map_agents(bids, point.price);
    let total = inflexible + per_agent_q.iter().map(|(_, q)| q).sum::<f64>();
    Ok(ClearedResult {
        interval,
        kind: MarketKind::Da,
        lead_time,
        slot: 0,
        cleared_price: point.price,
        total_quantity: total,
        inflexible_quantity: inflexible,
        per_agent_q,
        congested: point.congested,
    })
}

/// Run one rolling DA round over the whole horizon: clear every lead hour and
/// record the price evolution. `bids_by_lead[l]` holds the bids for delivery
/// hour `clock_hour + l`.
pub fn da_round(
    bids_by_lead: &[Vec<LabeledBid>],
    inflexible_forecast: &[f64],
    supply: &SupplyCurve,
    clock_hour: u64,
    evolution: &mut PriceEvolution,
) -> Result<Vec<ClearedResult>> {
    let mut results = Vec::with_capacity(bids_by_lead.len());
    for (lead, bids) in bids_by_lead.iter().enumerate() {
        let hour = clock_hour + lead as u64;
        let result = clear_da_interval(
            bids,
            inflexible_forecast[lead],
            &supply.da_interval(hour),
            hour,
            lead as u32,
        )?;
        evolution.record(hour, result.cleared_price);
        results.push(result);
    }
    Ok(results)
}

/// Clear one 5-minute RT interval. Bids arrive in hourly-rate units and the
/// actual inflexible load is an hourly rate; both are scaled to per-slot
/// energy for clearing.
pub fn rt_step(
    bids: &[LabeledBid],
    inflexible_actual: f64,
    supply: &SupplyCurve,
    hour: u64,
    slot: u32,
) -> Result<ClearedResult> {
    let per_slot = 1.0 / f64::from(SLOTS_PER_HOUR);
    let slot_bids: Vec<LabeledBid> = bids
        .iter()
        .map(|lb| LabeledBid {
            agent_id: lb.agent_id.clone(),
            bid: scale_quantities(&lb.bid, per_slot),
        })
        .collect();
    let inflexible = inflexible_actual * per_slot;
    let demand = aggregate_demand(
        slot_bids.iter().map(|lb| lb.bid.clone()).collect(),
        inflexible,
    );
    let point = clear(&demand, &supply.rt_interval(hour))?;
    let per_agent_q = map_agents(&slot_bids, point.price);
    let total = inflexible + per_agent_q.iter().map(|(_, q)| q).sum::<f64>();
    Ok(ClearedResult {
        interval: hour,
        kind: MarketKind::Rt,
        lead_time: 0,
        slot,
        cleared_price: point.price,
        total_quantity: total,
        inflexible_quantity: inflexible,
        per_agent_q,
        congested: point.congested,
    })
}

/// For each target hour, the sequence of DA cleared prices obtained as the
/// rolling horizon approaches it.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PriceEvolution {
    pub per_hour: BTreeMap<u64, Vec<f64>>,
}

impl PriceEvolution {
    pub fn record(&mut self, target_hour: u64, price: f64) {
        self.per_hour.entry(target_hour).or_default().push(price);
    }

    /// Most recent cleared price for a target hour, if any.
    pub fn latest(&self, target_hour: u64) -> Option<f64> {
        self.per_hour.get(&target_hour).and_then(|v| v.last()).copied()
    }
}

/// True iff the last `k` cleared prices for a target hour vary by less than
/// `epsilon`.
pub fn check_convergence(prices: &[f64], epsilon: f64, k: usize) -> bool {
    assert!(k >= 2);
    if prices.len() < k {
        return false;
    }
    let window = &prices[prices.len() - k..];
    let max = window.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = window.iter().cloned().fold(f64::INFINITY, f64::min);
    max - min < epsilon
}

/// Exponential moving average (decay 0.5 per day) of final cleared prices by
/// hour of day.
#[derive(Debug, Clone, Default)]
pub struct PriceHistory {
    ema: [Option<f64>; 24],
}

impl PriceHistory {
    /// Fold in one cleared price with a half-life of one day's worth of
    /// samples: a single sample per hour-of-day per day weighs 0.5.
    pub fn record(&mut self, hour: u64, price: f64) {
        self.record_weighted(hour, price, 0.5);
    }

    /// Fold in one cleared price with an explicit per-sample retention
    /// factor. With `k` samples per hour-of-day per day, `0.5^(1/k)` keeps
    /// the half-life at one day.
    pub fn record_weighted(&mut self, hour: u64, price: f64, retention: f64) {
        let hod = (hour % 24) as usize;
        self.ema[hod] = Some(match self.ema[hod] {
            Some(prev) => retention * prev + (1.0 - retention) * price,
            None => price,
        });
    }

    pub fn get(&self, hour_of_day: u32) -> Option<f64> {
        self.ema[hour_of_day as usize]
    }
}

/// Operator price forecast over a horizon: same-hour-of-day EMA of cleared
/// prices, bootstrapped from the supply curve at the forecast inflexible load
/// where no history exists.
pub fn forecast_prices(
    history: &PriceHistory,
    inflexible_forecast: &[f64],
    supply: &SupplyCurve,
    start_hour: u64,
) -> PriceForecast {
    let prices = inflexible_forecast
        .iter()
        .enumerate()
        .map(|(i, load)| {
            let hour = start_hour + i as u64;
            let hod = (hour % 24) as u32;
            history
                .get(hod)
                .unwrap_or_else(|| supply.base_at_hour(hod) + supply.slope * load)
        })
        .collect();
    PriceForecast { start_hour, prices }
}
