//! Clear a single day-ahead interval against the affine supply curve, first
//! uncongested and then with inflexible load pushed past the feeder limit.

use tev_sim::bidding::four_point_bid;
use tev_sim::ev_model::EvSpec;
use tev_sim::market::{clear_da_interval, LabeledBid, SupplyCurve};

fn main() -> tev_sim::Result<()> {
    let spec = EvSpec {
        model_name: "sedan".to_string(),
        range_miles: 240.0,
        mileage: 4.0,
        charge_rating: 11.5,
        discharge_rating: 0.0,
        eta_in: 1.0,
        eta_out: 1.0,
        sale_weight: 1.0,
    };
    let supply = SupplyCurve {
        base_price: 0.03,
        slope: 5e-5,
        feeder_limit: 550.0,
        surcharge: 0.05,
        evening_bump: 0.5,
    };

    // ten EVs each planning to charge 6 kWh at a 0.05 $/kWh forecast
    let bids: Vec<LabeledBid> = (0..10)
        .map(|i| LabeledBid {
            agent_id: format!("ev{i}"),
            bid: four_point_bid(6.0, 0.05, -0.002, 0.005, &spec, 0.7),
        })
        .collect();

    for inflexible in [300.0, 560.0] {
        let cleared = clear_da_interval(&bids, inflexible, &supply.da_interval(10), 10, 0)?;
        println!(
            "inflexible {inflexible:5.0} kWh -> price {:.4} $/kWh, total {:6.1} kWh, congested: {}",
            cleared.cleared_price, cleared.total_quantity, cleared.congested
        );
        for (agent, q) in &cleared.per_agent_q {
            print!("  {agent}: {q:+.2}");
        }
        println!("\n");
    }
    Ok(())
}
