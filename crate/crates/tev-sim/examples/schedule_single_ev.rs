//! Solve one EV's rolling-horizon charging schedule against a synthetic
//! price forecast and print the hour-by-hour plan.

use tev_sim::ev_model::{horizon_sets, AgentConfig, DrivingSchedule, EvSpec, HourKind};
use tev_sim::scheduler::{optimal_schedule, PriceForecast};

fn main() -> tev_sim::Result<()> {
    let agent = AgentConfig {
        agent_id: "ev0".to_string(),
        spec: EvSpec {
            model_name: "sedan".to_string(),
            range_miles: 240.0,
            mileage: 4.0,
            charge_rating: 11.5,
            discharge_rating: 0.0,
            eta_in: 0.95,
            eta_out: 0.95,
            sale_weight: 1.0,
        },
        schedule: DrivingSchedule {
            t_in: 18,
            t_out: 8,
            daily_miles: 30.0,
        },
        slider: 0.8,
        inconvenience_rate: 0.02,
        smoothing_coeff: 0.001,
        degradation_rate: 0.0,
    };

    // evening-peaked daily price shape
    let start_hour: usize = 18;
    let n: usize = 48;
    let prices: Vec<f64> = (0..n)
        .map(|k| {
            let hod = (start_hour + k) % 24;
            0.05 + 0.03 * (std::f64::consts::TAU * (hod as f64 - 6.0) / 24.0).sin().max(0.0)
        })
        .collect();

    let sets = horizon_sets(&agent.schedule, start_hour as u64, n);
    let forecast = PriceForecast {
        start_hour: start_hour as u64,
        prices: prices.clone(),
    };
    let initial_soc = 0.5 * agent.spec.battery_capacity();
    let schedule = optimal_schedule(&agent, &sets, &forecast, initial_soc)?;

    println!(
        "capacity {:.1} kWh, start SOC {:.1} kWh, objective {:.4}",
        agent.spec.battery_capacity(),
        initial_soc,
        schedule.objective_value
    );
    println!("hour  state    price   charge  discharge     SOC");
    for k in 0..n {
        let state = match sets.kinds[k] {
            HourKind::Parked => "parked",
            HourKind::Driving => "drive",
            HourKind::Away => "away",
        };
        println!(
            "{:4}  {:6}  {:7.4}  {:7.2}  {:9.2}  {:6.1}",
            (start_hour + k) % 24,
            state,
            prices[k],
            schedule.e_in[k],
            schedule.e_out[k],
            schedule.soc_traj[k]
        );
    }
    Ok(())
}
