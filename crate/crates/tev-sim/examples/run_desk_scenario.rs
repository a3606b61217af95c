//! The default desk-scale scenario: 20 agents, 7 days, V1G, sliders
//! stratified over 0.1..=0.9. Prints the headline system numbers and the
//! per-agent savings/amenity table.

use tev_sim::config::ScenarioConfig;
use tev_sim::ev_model::SliderDist;
use tev_sim::sim::run_scenario;

fn main() -> tev_sim::Result<()> {
    let config = ScenarioConfig {
        slider: SliderDist::Stratified {
            values: (1..=9).map(|i| i as f64 / 10.0).collect(),
        },
        ..Default::default()
    };
    let t0 = std::time::Instant::now();
    let run = run_scenario(&config)?;
    let s = &run.summary;

    println!("simulated {} agents x {} days in {:.1?}", config.fleet_size, config.days, t0.elapsed());
    println!();
    println!("peak load     base {:8.1} kWh   transactive {:8.1} kWh", s.base.peak_kwh, s.transactive.peak_kwh);
    println!("peak RT price base {:8.4} $/kWh transactive {:8.4} $/kWh", s.peak_rt_price_base, s.peak_rt_price_transactive);
    println!("mean price    base {:8.4} $/kWh transactive {:8.4} $/kWh", s.base.mean_price, s.transactive.mean_price);
    println!("DA convergence fraction: {:.3}", s.convergence_fraction);
    println!("mean |RT - DA| price gap: {:.5} $/kWh", s.mean_rt_da_gap);
    println!("mean savings {:.2}%  mean amenity {:.2}%", s.mean_savings_pct, s.mean_amenity_pct);
    println!("audit clean: {}", s.audit.clean());
    println!();
    println!("agent    slider  savings%  amenity%");
    for r in &run.agent_reports {
        println!("{:8} {:6.2} {:9.2} {:9.2}", r.agent_id, r.slider, r.savings_pct, r.amenity_pct);
    }
    Ok(())
}
