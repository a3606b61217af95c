//! Shared test support: a brute-force dynamic-programming oracle for the
//! hourly scheduling problem, discretized on a battery-side energy grid.
//!
//! The oracle enumerates feasible plans independently of the QP solver and
//! evaluates them with the library's own cost function, so agreement checks
//! exercise the solver and constraint assembly, not a re-derivation of the
//! objective.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tev_sim::ev_model::{AgentConfig, DrivingSchedule, EvSpec, HorizonSets, HourKind};
use tev_sim::scheduler::{build_qp, schedule_cost, PriceForecast, QpProblem};

/// One randomized oracle instance: agent, horizon, prices, start SOC.
pub struct OracleInstance {
    pub agent: AgentConfig,
    pub sets: HorizonSets,
    pub forecast: PriceForecast,
    pub initial_soc: f64,
}

/// A grid-restricted optimum found by the DP.
pub struct OracleSolution {
    pub objective: f64,
    /// Net battery-side energy per hour (charge positive).
    pub plan: Vec<f64>,
}

fn snap(v: f64, step: f64) -> f64 {
    (v / step).round() * step
}

/// Randomized instance on a 0.5 kWh grid: every rating and the full-charge
/// deficit are grid multiples, so the grid DP can satisfy the departure
/// equality exactly. Hours are parked except for an optional trailing
/// departure (driving) hour; miles are zero so SOC moves only by
/// charge/discharge.
pub fn random_instance(seed: u64) -> OracleInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = rng.gen_range(4..=12);
    let with_departure = rng.gen_bool(0.7);

    let c_max = snap(rng.gen_range(20.0..=60.0), 0.5);
    let e_in_max = snap(rng.gen_range(2.0..=11.5), 0.5);
    let e_out_max = if rng.gen_bool(0.5) {
        snap(rng.gen_range(1.0..=e_in_max), 0.5)
    } else {
        0.0
    };

    let mut kinds = vec![HourKind::Parked; n];
    let mut departure_hours = Vec::new();
    let parked_before = if with_departure {
        kinds[n - 1] = HourKind::Driving;
        departure_hours.push(n - 1);
        n - 1
    } else {
        n
    };

    // deficit reachable within the parked window, and start SOC above floor
    let c_min = 0.05 * c_max;
    let max_deficit = (e_in_max * parked_before as f64).min(c_max - c_min - 0.5);
    let deficit = snap(rng.gen_range(0.0..=max_deficit.max(0.0)), 0.5).min(max_deficit);
    let initial_soc = c_max - deficit.max(0.0);

    let spec = EvSpec {
        model_name: "oracle".to_string(),
        range_miles: c_max,
        mileage: 1.0,
        charge_rating: e_in_max,
        discharge_rating: e_out_max,
        eta_in: rng.gen_range(0.85..=1.0),
        eta_out: rng.gen_range(0.85..=1.0),
        sale_weight: 1.0,
    };
    let agent = AgentConfig {
        agent_id: format!("oracle{seed}"),
        spec,
        schedule: DrivingSchedule {
            t_in: 18,
            t_out: 8,
            daily_miles: 0.0,
        },
        slider: rng.gen_range(0.0..=1.0),
        inconvenience_rate: rng.gen_range(0.0..=0.05),
        smoothing_coeff: [0.0, 0.001, 0.005][rng.gen_range(0..3)],
        degradation_rate: [0.0, 0.01][rng.gen_range(0..2)],
    };
    let prices = (0..n).map(|_| rng.gen_range(0.0..=0.15)).collect();
    let trans_hours = (0..n).filter(|&k| kinds[k] == HourKind::Parked).collect();
    OracleInstance {
        agent,
        sets: HorizonSets {
            start_hour: 0,
            horizon_len: n,
            kinds,
            trans_hours,
            arrival_hours: vec![],
            departure_hours,
        },
        forecast: PriceForecast {
            start_hour: 0,
            prices,
        },
        initial_soc,
    }
}

/// Exhaustive DP over net battery-side energies on `step`-kWh grid points.
/// Mixed simultaneous charge/discharge is excluded: with non-negative prices
/// and degradation cost it is dominated by the net action.
pub fn dp_optimum(problem: &QpProblem, inst: &OracleInstance, step: f64) -> OracleSolution {
    let n = inst.sets.horizon_len;
    let spec = &inst.agent.spec;
    let c_max = spec.battery_capacity();
    let c_min = spec.min_soc();
    let soc0 = inst.initial_soc;

    // SOC states are soc0 + j*step within the box
    let j_min = ((c_min - soc0) / step - 1e-9).ceil() as i64;
    let j_max = ((c_max - soc0) / step + 1e-9).floor() as i64;
    let n_states = (j_max - j_min + 1) as usize;
    let state_soc = |s: usize| soc0 + (j_min + s as i64) as f64 * step;
    let start_state = (-j_min) as usize;

    let a_in = (spec.charge_rating / step + 1e-9).floor() as i64;
    let a_out = (spec.discharge_rating / step + 1e-9).floor() as i64;

    const INF: f64 = f64::INFINITY;
    let mut cost = vec![INF; n_states];
    let mut parent: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    cost[start_state] = 0.0;

    for k in 0..n {
        let mut next = vec![INF; n_states];
        let mut back = vec![(usize::MAX, 0.0); n_states];
        let parked = inst.sets.kinds[k] == HourKind::Parked;
        let (lo, hi) = if parked { (-a_out, a_in) } else { (0, 0) };
        for s in 0..n_states {
            if cost[s] == INF {
                continue;
            }
            for a in lo..=hi {
                let t = s as i64 + a;
                if t < 0 || t >= n_states as i64 {
                    continue;
                }
                let t = t as usize;
                let net = a as f64 * step;
                let (e_in, e_out) = (net.max(0.0), (-net).max(0.0));
                let in_b = e_in / spec.eta_in;
                let out_b = e_out * spec.eta_out;
                let soc_end = state_soc(t);
                let hour_cost = inst.agent.slider
                    * (inst.forecast.prices[k] * (in_b - out_b)
                        + inst.agent.degradation_rate * (in_b + out_b))
                    + (1.0 - inst.agent.slider)
                        * inst.agent.inconvenience_rate
                        * (c_max - soc_end)
                    + inst.agent.smoothing_coeff * (in_b + out_b) * (in_b + out_b);
                let c = cost[s] + hour_cost;
                if c < next[t] {
                    next[t] = c;
                    back[t] = (s, net);
                }
            }
        }
        // departure hours require a full battery on entry, i.e. at the end
        // of the previous hour; the previous loop's state going INTO a
        // departure hour must be c_max
        parent.push(back);
        cost = next;
        if inst.sets.departure_hours.contains(&(k + 1)) {
            let full = ((c_max - soc0) / step).round() as i64 - j_min;
            for (s, c) in cost.iter_mut().enumerate() {
                if s as i64 != full {
                    *c = INF;
                }
            }
        }
    }

    let (mut best_s, mut best) = (0, INF);
    for (s, &c) in cost.iter().enumerate() {
        if c < best {
            best = c;
            best_s = s;
        }
    }
    assert!(best.is_finite(), "oracle DP found no feasible plan");

    // reconstruct the plan and re-evaluate with the library cost function so
    // both sides of the comparison use identical arithmetic
    let mut plan = vec![0.0; n];
    let mut s = best_s;
    for k in (0..n).rev() {
        let (prev, net) = parent[k][s];
        plan[k] = net;
        s = prev;
    }
    let mut e_in = vec![0.0; n];
    let mut e_out = vec![0.0; n];
    let mut soc_traj = Vec::with_capacity(n);
    let mut soc = soc0;
    for k in 0..n {
        e_in[k] = plan[k].max(0.0);
        e_out[k] = (-plan[k]).max(0.0);
        soc += plan[k];
        soc_traj.push(soc);
    }
    let objective = schedule_cost(problem, &e_in, &e_out, &soc_traj);
    OracleSolution { objective, plan }
}

/// Build the library QP for an oracle instance.
pub fn build_instance_qp(inst: &OracleInstance) -> QpProblem {
    build_qp(&inst.agent, &inst.sets, &inst.forecast, inst.initial_soc)
        .expect("oracle instances are feasible by construction")
}
