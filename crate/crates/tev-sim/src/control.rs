//! Slot-level delivery control: turn a cleared real-time commitment into an
//! actual battery action, clipping to physical feasibility and flagging every
//! deviation from the commitment.

use serde::Serialize;

use crate::ev_model::EvSpec;
use crate::market::SLOTS_PER_HOUR;

const DELIVERY_TOL: f64 = 1e-9;

/// One agent's delivery outcome for one 5-minute slot.
#[derive(Debug, Clone, Serialize)]
pub struct ControlAction {
    pub agent_id: String,
    pub hour: u64,
    pub slot: u32,
    /// Metered (billing-side) commitment for the slot, kWh. Positive imports.
    pub committed_kwh: f64,
    /// Metered energy actually delivered after feasibility clipping.
    pub delivered_kwh: f64,
    /// Battery-side charge (+) or discharge (-) applied this slot, kWh.
    pub battery_delta: f64,
    pub soc_after: f64,
    /// True when the delivered quantity differs from the commitment.
    pub deviated: bool,
}

/// Apply one slot's commitment to the battery. The commitment is a metered
/// quantity; conversion to battery-side energy uses the charger efficiencies.
/// Delivery is clipped to the charger ratings and the SOC box; an unplugged
/// vehicle delivers nothing. The returned action carries the post-slot SOC.
pub fn apply_control(
    agent_id: &str,
    spec: &EvSpec,
    soc: f64,
    c_min: f64,
    c_max: f64,
    plugged: bool,
    committed_kwh: f64,
    hour: u64,
    slot: u32,
) -> ControlAction {
    let slots = f64::from(SLOTS_PER_HOUR);
    let (delivered, battery_delta) = if !plugged {
        (0.0, 0.0)
    } else if committed_kwh >= 0.0 {
        let e_in = (committed_kwh * spec.eta_in)
            .min(spec.charge_rating / slots)
            .min((c_max - soc).max(0.0));
        (e_in / spec.eta_in, e_in)
    } else {
        let e_out = (-committed_kwh / spec.eta_out)
            .min(spec.discharge_rating / slots)
            .min((soc - c_min).max(0.0));
        (-e_out * spec.eta_out, -e_out)
    };
    ControlAction {
        agent_id: agent_id.to_string(),
        hour,
        slot,
        committed_kwh,
        delivered_kwh: delivered,
        battery_delta,
        soc_after: soc + battery_delta,
        deviated: (delivered - committed_kwh).abs() > DELIVERY_TOL,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ev_model::builtin_catalog;
    use approx::assert_relative_eq;

    fn spec() -> EvSpec {
        builtin_catalog()[0].clone()
    }

    #[test]
    fn full_commitment_delivered_when_feasible() {
        let s = spec();
        let committed = 0.5; // metered kWh, well under ratings and headroom
        let a = apply_control("ev000", &s, 20.0, 2.86, 57.29, true, committed, 5, 3);
        assert!(!a.deviated);
        assert_relative_eq!(a.delivered_kwh, committed, epsilon = 1e-12);
        assert_relative_eq!(a.battery_delta, committed * s.eta_in, epsilon = 1e-12);
        assert_relative_eq!(a.soc_after, 20.0 + committed * s.eta_in, epsilon = 1e-12);
    }

    #[test]
    fn charge_clipped_at_capacity() {
        let s = spec();
        let c_max = 57.29;
        let a = apply_control("ev000", &s, c_max - 0.1, 2.86, c_max, true, 0.9, 5, 0);
        assert!(a.deviated);
        assert_relative_eq!(a.battery_delta, 0.1, epsilon = 1e-12);
        assert_relative_eq!(a.soc_after, c_max, epsilon = 1e-12);
        assert_relative_eq!(a.delivered_kwh, 0.1 / s.eta_in, epsilon = 1e-12);
    }

    #[test]
    fn discharge_clipped_at_floor() {
        let mut s = spec();
        s.discharge_rating = s.charge_rating;
        let c_min = 2.86;
        let a = apply_control("ev000", &s, c_min + 0.05, c_min, 57.29, true, -0.9, 5, 0);
        assert!(a.deviated);
        assert_relative_eq!(a.battery_delta, -0.05, epsilon = 1e-12);
        assert_relative_eq!(a.soc_after, c_min, epsilon = 1e-12);
        assert_relative_eq!(a.delivered_kwh, -0.05 * s.eta_out, epsilon = 1e-12);
    }

    #[test]
    fn rating_limits_slot_energy() {
        let s = spec();
        // commit more metered energy than one slot of the charger can move
        let committed = 2.0 * s.charge_rating / 12.0 / s.eta_in;
        let a = apply_control("ev000", &s, 10.0, 2.86, 57.29, true, committed, 0, 0);
        assert!(a.deviated);
        assert_relative_eq!(a.battery_delta, s.charge_rating / 12.0, epsilon = 1e-12);
    }

    #[test]
    fn unplugged_delivers_nothing() {
        let s = spec();
        let a = apply_control("ev000", &s, 20.0, 2.86, 57.29, false, 0.5, 12, 7);
        assert!(a.deviated);
        assert_relative_eq!(a.delivered_kwh, 0.0);
        assert_relative_eq!(a.soc_after, 20.0);
    }

    #[test]
    fn zero_commitment_is_exact() {
        let s = spec();
        let a = apply_control("ev000", &s, 20.0, 2.86, 57.29, true, 0.0, 0, 0);
        assert!(!a.deviated);
        assert_relative_eq!(a.battery_delta, 0.0);
    }
}
