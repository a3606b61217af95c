//! Build four-point demand bids around a planned quantity and show how the
//! bid responds to the cleared price.

use tev_sim::bidding::{bid_slope, four_point_bid, quantity_at_price};
use tev_sim::ev_model::EvSpec;

fn main() {
    let spec = EvSpec {
        model_name: "sedan".to_string(),
        range_miles: 240.0,
        mileage: 4.0,
        charge_rating: 11.5,
        discharge_rating: 11.5,
        eta_in: 1.0,
        eta_out: 1.0,
        sale_weight: 1.0,
    };
    let omega = 0.5;
    let forecast = [0.04, 0.05, 0.06, 0.08, 0.07, 0.05];
    let slope = bid_slope(&forecast, omega, &spec);
    println!("forecast span {:?} -> bid slope {slope:.5} $/kWh per kWh", forecast);

    for (q_plan, p_f) in [(5.0, 0.06), (0.0, 0.05), (-4.0, 0.08)] {
        let bid = four_point_bid(q_plan, p_f, slope, 0.005, &spec, omega);
        println!("\nplan {q_plan:+.1} kWh at forecast {p_f:.3} $/kWh:");
        for (i, (p, q)) in bid.points.iter().enumerate() {
            println!("  P{} = {:.4} $/kWh  Q{} = {:+.2} kWh", i + 1, p, i + 1, q);
        }
        println!("  response to cleared price:");
        for price in [0.02, 0.05, 0.06, 0.07, 0.12] {
            println!(
                "    at {:.3} $/kWh -> {:+.2} kWh",
                price,
                quantity_at_price(&bid, price)
            );
        }
    }
}
