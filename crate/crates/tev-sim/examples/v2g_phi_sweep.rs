//! Sweep the battery degradation cost and compare V2G against V1G for a
//! fully price-driven fleet: discharge arbitrage pays at low degradation
//! cost and washes out as the cost approaches the daily price spread.

use tev_sim::config::ScenarioConfig;
use tev_sim::ev_model::SliderDist;
use tev_sim::sim::compare_modes;

fn main() -> tev_sim::Result<()> {
    let config = ScenarioConfig {
        days: 4,
        fleet_size: 8,
        slider: SliderDist::Fixed { value: 1.0 },
        ..Default::default()
    };
    let rows = compare_modes(&config, &[0.0, 0.005, 0.008, 0.015])?;

    println!("phi $/kWh   V1G savings%   V2G savings%   delta%   delta peak kWh");
    for r in &rows {
        println!(
            "{:9.4} {:14.3} {:14.3} {:8.3} {:16.2}",
            r.phi, r.v1g_mean_savings_pct, r.v2g_mean_savings_pct, r.delta_savings_pct, r.delta_peak_kwh
        );
    }
    Ok(())
}
