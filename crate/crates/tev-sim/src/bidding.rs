//! Four-point demand bid curves.
//!
//! A bid carries only price/quantity points: the owner's slider, cost
//! coefficients, SOC, and schedule never leave the agent. Quantities are in
//! metered (billing-side) kWh, import positive.

use serde::{Deserialize, Serialize};

use crate::ev_model::EvSpec;

/// Default deadband price margin in $/kWh.
pub const DEFAULT_DEADBAND: f64 = 0.002;

/// One hour's flexible demand bid: four price-quantity points on a
/// non-increasing piecewise-linear curve centered on the planned quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BidCurve {
    /// (price $/kWh, quantity kWh) corners, P1 >= P2 >= P3 >= P4.
    pub points: [(f64, f64); 4],
    pub deadband: f64,
    pub slope: f64,
    pub intercept: f64,
    /// False for a non-participating (vertical) bid that always takes the plan.
    pub flexible: bool,
}

/// Flat wire record for the agent -> operator message. This is the only
/// information that crosses the privacy boundary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BidRecord {
    pub agent_id: String,
    pub hour: u64,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub q4: f64,
}

impl BidRecord {
    pub fn from_curve(agent_id: &str, hour: u64, bid: &BidCurve) -> Self {
        BidRecord {
            agent_id: agent_id.to_string(),
            hour,
            p1: bid.points[0].0,
            p2: bid.points[1].0,
            p3: bid.points[2].0,
            p4: bid.points[3].0,
            q1: bid.points[0].1,
            q2: bid.points[1].1,
            q3: bid.points[2].1,
            q4: bid.points[3].1,
        }
    }
}

/// Bid-curve slope over a forecast window. Flatter (smaller magnitude) for a
/// higher slider: a more transactive customer tolerates bigger quantity swings
/// per unit of price deviation. Returns 0 for a constant forecast.
///
/// Quantity limits are metered-side, consistent with the curve's axis.
pub fn bid_slope(prices: &[f64], omega: f64, spec: &EvSpec) -> f64 {
    assert!(omega > 0.0, "inflexible bids have no slope");
    let max_p = prices.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min_p = prices.iter().cloned().fold(f64::INFINITY, f64::min);
    let span = -spec.metered_export_limit() - spec.metered_import_limit();
    (max_p - min_p) / span / omega
}

/// Construct the four-point bid for one hour around the planned quantity.
/// A zero slider yields an inflexible vertical bid at the plan.
pub fn four_point_bid(
    q_plan_t: f64,
    p_f_t: f64,
    slope: f64,
    db: f64,
    spec: &EvSpec,
    omega: f64,
) -> BidCurve {
    let q_min = -spec.metered_export_limit();
    let q_max = spec.metered_import_limit();
    if omega == 0.0 {
        return BidCurve {
            points: [
                (p_f_t + db, q_plan_t),
                (p_f_t + db, q_plan_t),
                (p_f_t - db, q_plan_t),
                (p_f_t - db, q_plan_t),
            ],
            deadband: db,
            slope: 0.0,
            intercept: p_f_t,
            flexible: false,
        };
    }
    let intercept = p_f_t - slope * q_plan_t;
    let p1 = q_min * slope + intercept + db;
    let p2 = q_plan_t * slope + intercept + db;
    let p3 = p2 - 2.0 * db;
    // the fourth point shares the third point's price and spans to max import
    BidCurve {
        points: [(p1, q_min), (p2, q_plan_t), (p3, q_plan_t), (p3, q_max)],
        deadband: db,
        slope,
        intercept,
        flexible: true,
    }
}

/// Evaluate the committed quantity at a cleared price. Monotone non-increasing
/// in price, bounded by the curve's quantity span, and equal to the plan
/// inside the deadband. The third and fourth points share a price, so the
/// curve steps to max import just below the lower deadband edge.
pub fn quantity_at_price(bid: &BidCurve, price: f64) -> f64 {
    let [(p1, q1), (p2, q2), (_, _), (p4, q4)] = bid.points;
    if !bid.flexible {
        return q2;
    }
    if price >= p1 {
        return q1;
    }
    if price < p4 {
        return q4;
    }
    if price <= p2 || bid.slope == 0.0 {
        // deadband, or a degenerate flat curve from a constant forecast
        return q2;
    }
    // upper sloped segment between (P1,Q1) and (P2,Q2)
    (price - bid.intercept - bid.deadband) / bid.slope
}

/// Real-time bid for a 5-minute slot: same slope and deadband as the hour's
/// DA bid, re-anchored at the interpolation between the cleared DA quantity
/// and the next hour's plan. Quantities stay in hourly-rate units; the market
/// scales per-slot at clearing time.
pub fn rt_bid(
    da_cleared_q: f64,
    da_cleared_price: f64,
    q_plan_next_hour: f64,
    minute_slot: u32,
    hour_bid: &BidCurve,
) -> BidCurve {
    debug_assert!(minute_slot < 12);
    let frac = f64::from(minute_slot) / 12.0;
    let anchor = da_cleared_q + frac * (q_plan_next_hour - da_cleared_q);
    let db = hour_bid.deadband;
    if !hour_bid.flexible {
        return BidCurve {
            points: [
                (da_cleared_price + db, anchor),
                (da_cleared_price + db, anchor),
                (da_cleared_price - db, anchor),
                (da_cleared_price - db, anchor),
            ],
            deadband: db,
            slope: 0.0,
            intercept: da_cleared_price,
            flexible: false,
        };
    }
    let slope = hour_bid.slope;
    let q_min = hour_bid.points[0].1;
    let q_max = hour_bid.points[3].1;
    let intercept = da_cleared_price - slope * anchor;
    let p1 = q_min * slope + intercept + db;
    let p2 = anchor * slope + intercept + db;
    let p3 = p2 - 2.0 * db;
    BidCurve {
        points: [(p1, q_min), (p2, anchor), (p3, anchor), (p3, q_max)],
        deadband: db,
        slope,
        intercept,
        flexible: true,
    }
}

/// A copy of the curve with every quantity scaled by `factor` (used to clear
/// 5-minute markets in per-slot energy units).
pub fn scale_quantities(bid: &BidCurve, factor: f64) -> BidCurve {
    let mut scaled = bid.clone();
    for point in &mut scaled.points {
        point.1 *= factor;
    }
    if scaled.slope != 0.0 {
        scaled.slope /= factor;
        // keep the deadband center consistent: price at the (scaled) plan is unchanged
        scaled.intercept = scaled.points[1].0 - scaled.deadband - scaled.slope * scaled.points[1].1;
    }
    scaled
}
