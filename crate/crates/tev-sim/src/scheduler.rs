//! Per-agent rolling-horizon charge/discharge optimization.
//!
//! Builds a convex QP over an N-hour horizon whose objective trades energy
//! cost (weighted by the slider) against a vehicle-readiness amenity term,
//! with a quadratic smoothing term that spreads charging across hours. SOC
//! dynamics are eliminated into cumulative-sum constraints, so the decision
//! vector is just `[e_in(0..N), e_out(0..N)]` in battery-side kWh.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::ev_model::{metered_energy, AgentConfig, HorizonSets, HourKind};
use crate::qp::{self, Qp, SparseRow};

pub const DEFAULT_SOLVE_TOL: f64 = 1e-9;
pub const SOLVER_ITER_CAP: usize = 200;

/// Forecast electricity prices over a horizon.
#[derive(Debug, Clone)]
pub struct PriceForecast {
    pub start_hour: u64,
    pub prices: Vec<f64>,
}

/// A built scheduling QP plus the context needed to interpret its solution.
#[derive(Debug, Clone)]
pub struct QpProblem {
    pub qp: Qp,
    horizon_len: usize,
    pub initial_soc: f64,
    /// SOC contribution of constants (initial SOC minus cumulative driving drain).
    soc_offset: Vec<f64>,
    agent: AgentConfig,
    prices: Vec<f64>,
    kinds: Vec<HourKind>,
}

/// Optimal plan for one agent over a horizon.
#[derive(Debug, Clone)]
pub struct Schedule {
    /// Planned net metered energy per hour (billing side, import positive).
    pub q_plan: Vec<f64>,
    /// Battery-side charging energy per hour.
    pub e_in: Vec<f64>,
    /// Battery-side discharging energy per hour.
    pub e_out: Vec<f64>,
    /// End-of-hour SOC trajectory.
    pub soc_traj: Vec<f64>,
    pub objective_value: f64,
}

fn greedy_max_soc(
    agent: &AgentConfig,
    sets: &HorizonSets,
    initial_soc: f64,
) -> (Vec<f64>, Vec<f64>) {
    let spec = &agent.spec;
    let c_max = spec.battery_capacity();
    let drain = agent.schedule.daily_miles / spec.mileage / 2.0;
    let mut soc = initial_soc;
    let mut traj = Vec::with_capacity(sets.horizon_len);
    let mut offset = Vec::with_capacity(sets.horizon_len);
    let mut cumulative_drain = 0.0;
    for kind in &sets.kinds {
        match kind {
            HourKind::Driving => {
                soc -= drain;
                cumulative_drain += drain;
            }
            HourKind::Parked => soc = (soc + spec.charge_rating).min(c_max),
            HourKind::Away => {}
        }
        traj.push(soc);
        offset.push(initial_soc - cumulative_drain);
    }
    (traj, offset)
}

/// Build the scheduling QP. With `relax_departures`, unreachable full-charge
/// departure targets are lowered to the greedy-max reachable SOC instead of
/// erroring; the strict form reports the binding departure hour.
pub fn build_qp_with(
    agent: &AgentConfig,
    sets: &HorizonSets,
    forecast: &PriceForecast,
    initial_soc: f64,
    relax_departures: bool,
) -> Result<QpProblem> {
    let n = sets.horizon_len;
    if forecast.prices.len() != n {
        return Err(Error::Config(format!(
            "forecast length {} != horizon length {}",
            forecast.prices.len(),
            n
        )));
    }
    let spec = &agent.spec;
    let c_max = spec.battery_capacity();
    let c_min = spec.min_soc();
    if !(c_min - 1e-9..=c_max + 1e-9).contains(&initial_soc) {
        return Err(Error::SocOutOfBounds {
            hour: 0,
            soc: initial_soc,
            c_min,
            c_max,
        });
    }
    let omega = agent.slider;
    let alpha = agent.inconvenience_rate;
    let beta = agent.smoothing_coeff;
    let phi = agent.degradation_rate;
    let eta_in = spec.eta_in;
    let eta_out = spec.eta_out;

    let (greedy_traj, soc_offset) = greedy_max_soc(agent, sets, initial_soc);

    let nv = 2 * n;
    let mut p = DMatrix::zeros(nv, nv);
    let mut q = DVector::zeros(nv);
    let lower = DVector::zeros(nv);
    let mut upper = DVector::zeros(nv);

    for k in 0..n {
        if sets.kinds[k] == HourKind::Parked {
            upper[k] = spec.charge_rating;
            upper[n + k] = spec.discharge_rating;
            let pf = forecast.prices[k];
            let amenity_weight = (1.0 - omega) * alpha * (n - k) as f64;
            q[k] = omega * (pf + phi) / eta_in - amenity_weight;
            q[n + k] = omega * (phi - pf) * eta_out + amenity_weight;
            p[(k, k)] = 2.0 * beta / (eta_in * eta_in);
            p[(n + k, n + k)] = 2.0 * beta * eta_out * eta_out;
            p[(k, n + k)] = 2.0 * beta * eta_out / eta_in;
            p[(n + k, k)] = p[(k, n + k)];
        }
        // driving/away hours: both variables pinned at zero (bounds 0..0)
    }

    // prefix of exchange-capable variable indices up to and including hour k
    let mut a_eq = Vec::new();
    let mut b_eq = Vec::new();
    let mut g_ineq = Vec::new();
    let mut h_ineq = Vec::new();

    let prefix_row = |upto: usize| -> SparseRow {
        let mut idx = Vec::new();
        let mut val = Vec::new();
        for j in 0..=upto {
            if sets.kinds[j] == HourKind::Parked {
                idx.push(j);
                val.push(1.0);
                idx.push(n + j);
                val.push(-1.0);
            }
        }
        SparseRow::new(idx, val)
    };

    // full charge entering every departure hour
    for &d in &sets.departure_hours {
        if d == 0 {
            continue; // pre-horizon condition, not a decision
        }
        let mut target = c_max;
        let reachable = greedy_traj[d - 1];
        if reachable < c_max - 1e-9 {
            if relax_departures {
                target = reachable.max(c_min);
            } else {
                return Err(Error::InfeasibleHorizon {
                    departure_hour: d,
                    needed: c_max - soc_offset[d - 1],
                    achievable: reachable - soc_offset[d - 1],
                });
            }
        }
        let row = prefix_row(d - 1);
        if row.idx.is_empty() {
            if (soc_offset[d - 1] - target).abs() > 1e-7 && !relax_departures {
                return Err(Error::InfeasibleHorizon {
                    departure_hour: d,
                    needed: target - soc_offset[d - 1],
                    achievable: 0.0,
                });
            }
            continue;
        }
        a_eq.push(row);
        b_eq.push(target - soc_offset[d - 1]);
    }

    // SOC box at every hour where the SOC can move. Prefix rows are nested,
    // so a box row with the same length as a departure equality is that same
    // row and would leave the interior-point method no slack; skip it.
    let eq_lens: Vec<usize> = a_eq.iter().map(|r| r.idx.len()).collect();
    for k in 0..n {
        if sets.kinds[k] == HourKind::Away {
            continue;
        }
        let row = prefix_row(k);
        if eq_lens.contains(&row.idx.len()) {
            continue;
        }
        if row.idx.is_empty() {
            if soc_offset[k] < c_min - 1e-9 || soc_offset[k] > c_max + 1e-9 {
                return Err(Error::SocOutOfBounds {
                    hour: k,
                    soc: soc_offset[k],
                    c_min,
                    c_max,
                });
            }
            continue;
        }
        g_ineq.push(row.clone());
        h_ineq.push(c_max - soc_offset[k]);
        let neg = SparseRow::new(row.idx.clone(), row.val.iter().map(|v| -v).collect());
        g_ineq.push(neg);
        h_ineq.push(soc_offset[k] - c_min);
    }

    Ok(QpProblem {
        qp: Qp {
            p,
            q,
            lower,
            upper,
            a_eq,
            b_eq,
            g_ineq,
            h_ineq,
        },
        horizon_len: n,
        initial_soc,
        soc_offset,
        agent: agent.clone(),
        prices: forecast.prices.clone(),
        kinds: sets.kinds.clone(),
    })
}

/// Build the scheduling QP, erroring if any departure's full-charge target is
/// unreachable.
pub fn build_qp(
    agent: &AgentConfig,
    sets: &HorizonSets,
    forecast: &PriceForecast,
    initial_soc: f64,
) -> Result<QpProblem> {
    build_qp_with(agent, sets, forecast, initial_soc, false)
}

/// Evaluate the full scheduling cost at a feasible plan.
pub fn schedule_cost(problem: &QpProblem, e_in: &[f64], e_out: &[f64], soc: &[f64]) -> f64 {
    let agent = &problem.agent;
    let spec = &agent.spec;
    let c_max = spec.battery_capacity();
    let mut cost = 0.0;
    for k in 0..problem.horizon_len {
        let (in_b, out_b) = metered_energy(e_in[k], e_out[k], spec);
        cost += agent.slider
            * (problem.prices[k] * (in_b - out_b) + agent.degradation_rate * (out_b + in_b));
        cost += (1.0 - agent.slider) * agent.inconvenience_rate * (c_max - soc[k]);
        cost += agent.smoothing_coeff * (out_b + in_b).powi(2);
    }
    cost
}

/// Solve a built problem and assemble the schedule.
pub fn solve_qp(problem: &QpProblem, tol: f64) -> Result<Schedule> {
    let n = problem.horizon_len;
    let spec = &problem.agent.spec;
    let sol = qp::solve(&problem.qp, tol, SOLVER_ITER_CAP)?;

    let mut e_in = vec![0.0; n];
    let mut e_out = vec![0.0; n];
    for k in 0..n {
        if problem.kinds[k] == HourKind::Parked {
            e_in[k] = sol.x[k].clamp(0.0, spec.charge_rating);
            e_out[k] = sol.x[n + k].clamp(0.0, spec.discharge_rating);
            if e_in[k] < 1e-9 {
                e_in[k] = 0.0;
            }
            if e_out[k] < 1e-9 {
                e_out[k] = 0.0;
            }
        }
    }

    let mut soc_traj = Vec::with_capacity(n);
    let mut acc = 0.0;
    let mut q_plan = vec![0.0; n];
    for k in 0..n {
        if problem.kinds[k] == HourKind::Parked {
            acc += e_in[k] - e_out[k];
            let (in_b, out_b) = metered_energy(e_in[k], e_out[k], spec);
            q_plan[k] = in_b - out_b;
        }
        soc_traj.push(problem.soc_offset[k] + acc);
    }

    let objective_value = schedule_cost(problem, &e_in, &e_out, &soc_traj);
    Ok(Schedule {
        q_plan,
        e_in,
        e_out,
        soc_traj,
        objective_value,
    })
}

/// Build and solve in one call.
pub fn optimal_schedule(
    agent: &AgentConfig,
    sets: &HorizonSets,
    forecast: &PriceForecast,
    initial_soc: f64,
) -> Result<Schedule> {
    let problem = build_qp(agent, sets, forecast, initial_soc)?;
    solve_qp(&problem, DEFAULT_SOLVE_TOL)
}
