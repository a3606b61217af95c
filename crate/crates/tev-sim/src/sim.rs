//! Scenario orchestration: the coupled DA/RT time loop, run once for the
//! transactive fleet and once for the non-transactive base case (inflexible
//! greedy chargers in their own market), followed by metrics, an invariant
//! audit, and artifact output.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bidding::{bid_slope, four_point_bid, rt_bid, BidCurve};
use crate::config::{Mode, ScenarioConfig};
use crate::control::{apply_control, ControlAction};
use crate::error::{Error, Result};
use crate::ev_model::{
    builtin_catalog, horizon_sets, load_ev_catalog, load_schedule_pool, synthesize_fleet,
    synthetic_schedule_pool, AgentConfig, HorizonSets, HourKind,
};
use crate::market::{
    check_convergence, da_round, forecast_prices, rt_step, ClearedResult, LabeledBid, MarketKind,
    PriceEvolution, PriceHistory, SLOTS_PER_HOUR,
};
use crate::metrics::{
    amenity_pct, fully_charged_hours, savings_pct, system_report, AgentReport, SystemReport,
};
use crate::scheduler::{build_qp, build_qp_with, solve_qp, PriceForecast, Schedule, DEFAULT_SOLVE_TOL};

const NOISE_SALT: u64 = 0x4e4f_4953;
const SOC_AUDIT_TOL: f64 = 1e-6;
const CONSERVATION_TOL: f64 = 1e-9;

/// One hour's final per-agent DA commitment.
#[derive(Debug, Clone, Serialize)]
pub struct Commitment {
    pub interval: u64,
    pub agent_id: String,
    pub q_committed: f64,
}

/// Post-run invariant check results.
#[derive(Debug, Clone, Default, Serialize)]
pub struct AuditReport {
    pub soc_violations: usize,
    pub conservation_violations: usize,
    pub unlogged_deviations: usize,
    pub energy_balance_violations: usize,
}

impl AuditReport {
    pub fn clean(&self) -> bool {
        self.soc_violations == 0
            && self.conservation_violations == 0
            && self.unlogged_deviations == 0
            && self.energy_balance_violations == 0
    }
}

/// Headline numbers for summary.json.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub transactive: SystemReport,
    pub base: SystemReport,
    /// Fraction of post-warm-up hours whose last six DA prices agree to 1e-3.
    pub convergence_fraction: f64,
    /// Mean |RT - DA| cleared price over post-warm-up intervals.
    pub mean_rt_da_gap: f64,
    pub peak_rt_price_base: f64,
    pub peak_rt_price_transactive: f64,
    pub mean_savings_pct: f64,
    pub mean_amenity_pct: f64,
    pub ev_profile_variance: f64,
    pub audit: AuditReport,
}

/// Everything produced by one scenario run.
pub struct RunArtifacts {
    pub config: ScenarioConfig,
    pub fleet: Vec<AgentConfig>,
    /// Transactive market: every DA lead clearing plus every RT slot.
    pub market_log: Vec<ClearedResult>,
    /// Base-case market (inflexible bids only).
    pub base_market_log: Vec<ClearedResult>,
    pub commitments: Vec<Commitment>,
    pub control_trace: Vec<ControlAction>,
    pub base_control_trace: Vec<ControlAction>,
    pub agent_reports: Vec<AgentReport>,
    /// End-of-hour SOC per agent (transactive run).
    pub trans_soc: Vec<Vec<f64>>,
    /// End-of-hour SOC per agent (base case).
    pub base_soc: Vec<Vec<f64>>,
    /// Aggregate EV metered net energy per hour.
    pub trans_ev_hourly: Vec<f64>,
    pub base_ev_hourly: Vec<f64>,
    pub evolution: PriceEvolution,
    pub summary: Summary,
}

fn load_fleet(config: &ScenarioConfig) -> Result<Vec<AgentConfig>> {
    let catalog = match &config.catalog_path {
        Some(path) => load_ev_catalog(std::fs::File::open(path)?)?,
        None => builtin_catalog(),
    };
    let schedules = match &config.schedule_path {
        Some(path) => load_schedule_pool(std::fs::File::open(path)?)?,
        None => synthetic_schedule_pool(config.schedule_pool_size, config.seed),
    };
    let econ = config.economics.params();
    let mut fleet = synthesize_fleet(
        &catalog,
        &schedules,
        config.fleet_size,
        config.seed,
        &config.slider,
        &econ,
    )?;
    for agent in &mut fleet {
        match config.mode {
            Mode::V1g => agent.spec.discharge_rating = 0.0,
            Mode::V2g => {
                if agent.spec.discharge_rating <= 0.0 {
                    agent.spec.discharge_rating = agent.spec.charge_rating;
                }
            }
        }
    }
    Ok(fleet)
}

/// The non-transactive counterpart of a fleet: inflexible vertical bidders
/// whose scheduling objective reduces to greedy charge-on-arrival.
fn base_fleet(fleet: &[AgentConfig]) -> Vec<AgentConfig> {
    fleet
        .iter()
        .map(|a| {
            let mut b = a.clone();
            b.slider = 0.0;
            b.smoothing_coeff = 0.0;
            b.degradation_rate = 0.0;
            b.spec.discharge_rating = 0.0;
            b
        })
        .collect()
}

/// Seeded multiplicative noise factor per 5-minute slot, shared by the base
/// and transactive runs so their RT loads differ only through the EVs.
fn rt_noise_factors(config: &ScenarioConfig) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ NOISE_SALT);
    let slots = config.total_hours() * SLOTS_PER_HOUR as usize;
    (0..slots)
        .map(|_| 1.0 + config.rt_noise_pct * rng.gen_range(-1.0..=1.0))
        .collect()
}

fn solve_agent(
    agent: &AgentConfig,
    sets: &HorizonSets,
    forecast: &PriceForecast,
    soc: f64,
    hour: u64,
) -> Result<Schedule> {
    let abort = |e: Error| Error::SimAbort {
        hour,
        agent: agent.agent_id.clone(),
        source: Box::new(e),
    };
    let problem = match build_qp(agent, sets, forecast, soc) {
        Ok(p) => p,
        Err(Error::InfeasibleHorizon { .. }) => {
            build_qp_with(agent, sets, forecast, soc, true).map_err(abort)?
        }
        Err(e) => return Err(abort(e)),
    };
    match solve_qp(&problem, DEFAULT_SOLVE_TOL) {
        Ok(s) => Ok(s),
        // retry at a looser tolerance before giving up
        Err(Error::Qp(crate::error::QpError::MaxIterations { .. })) => {
            solve_qp(&problem, 1e-6).map_err(abort)
        }
        Err(e) => Err(abort(e)),
    }
}

/// Output of one pass of the coupled DA/RT loop.
struct LoopRun {
    market_log: Vec<ClearedResult>,
    commitments: Vec<Commitment>,
    control_trace: Vec<ControlAction>,
    evolution: PriceEvolution,
    soc: Vec<Vec<f64>>,
    ev_hourly: Vec<f64>,
    hourly_load: Vec<f64>,
    hourly_price: Vec<f64>,
    /// Cleared RT price per slot, indexed hour * 12 + slot.
    rt_price: Vec<f64>,
    peak_rt_price: f64,
    congested: usize,
    rt_da_gap_sum: f64,
    rt_da_gap_count: usize,
}

/// Run the hourly DA round plus 12 RT slots with control for a given fleet.
fn run_market_loop(
    config: &ScenarioConfig,
    fleet: &[AgentConfig],
    noise: &[f64],
) -> Result<LoopRun> {
    let hours = config.total_hours();
    let horizon = config.horizon_hours;
    let warmup = config.warmup_hours();
    let n_agents = fleet.len();

    let mut history = PriceHistory::default();
    let mut evolution = PriceEvolution::default();
    let mut market_log: Vec<ClearedResult> = Vec::new();
    let mut commitments: Vec<Commitment> = Vec::new();
    let mut control_trace: Vec<ControlAction> = Vec::new();
    let mut soc_trace: Vec<Vec<f64>> = vec![Vec::with_capacity(hours); n_agents];
    let mut ev_hourly: Vec<f64> = Vec::with_capacity(hours);
    let mut hourly_load: Vec<f64> = Vec::with_capacity(hours);
    let mut hourly_price: Vec<f64> = Vec::with_capacity(hours);
    let mut rt_price: Vec<f64> = Vec::with_capacity(hours * 12);
    let mut peak_rt_price: f64 = 0.0;
    let mut congested = 0;
    let mut rt_da_gap_sum = 0.0;
    let mut rt_da_gap_count = 0usize;

    let mut socs: Vec<f64> = fleet.iter().map(|a| a.spec.battery_capacity()).collect();
    let mut schedules: Vec<Option<Schedule>> = vec![None; n_agents];
    let mut last_solve_hour: u64 = 0;

    for h in 0..hours as u64 {
        let hod = (h % 24) as u32;
        let infl_fc: Vec<f64> = (0..horizon)
            .map(|l| config.inflexible.hourly(((h + l as u64) % 24) as u32))
            .collect();
        let forecast = forecast_prices(&history, &infl_fc, &config.supply, h);

        let resolve = h % u64::from(config.resolve_every_hours) == 0
            || schedules.iter().any(|s| s.is_none());
        if resolve {
            for (i, agent) in fleet.iter().enumerate() {
                let sets = horizon_sets(&agent.schedule, h, horizon);
                schedules[i] = Some(solve_agent(agent, &sets, &forecast, socs[i], h)?);
            }
            last_solve_hour = h;
        }
        let offset = (h - last_solve_hour) as usize;

        // four-point bids per lead hour; agents bid only when plugged in
        let mut bids_by_lead: Vec<Vec<LabeledBid>> = vec![Vec::new(); horizon];
        let mut hour_bids: Vec<Option<BidCurve>> = vec![None; n_agents];
        let mut next_plans: Vec<f64> = vec![0.0; n_agents];
        for (i, agent) in fleet.iter().enumerate() {
            let schedule = schedules[i].as_ref().unwrap();
            let sets = horizon_sets(&agent.schedule, h, horizon);
            let slope = if agent.slider > 0.0 {
                bid_slope(&forecast.prices, agent.slider, &agent.spec)
            } else {
                0.0
            };
            for (lead, bids) in bids_by_lead.iter_mut().enumerate() {
                if sets.kinds[lead] != HourKind::Parked {
                    continue;
                }
                let plan_idx = lead + offset;
                let q_plan = if plan_idx < schedule.q_plan.len() {
                    schedule.q_plan[plan_idx]
                } else {
                    0.0
                };
                let bid = four_point_bid(
                    q_plan,
                    forecast.prices[lead],
                    slope,
                    config.economics.deadband,
                    &agent.spec,
                    agent.slider,
                );
                if lead == 0 {
                    hour_bids[i] = Some(bid.clone());
                }
                bids.push(LabeledBid {
                    agent_id: agent.agent_id.clone(),
                    bid,
                });
            }
            let next_idx = 1 + offset;
            next_plans[i] = if next_idx < schedule.q_plan.len() {
                schedule.q_plan[next_idx]
            } else {
                0.0
            };
        }

        let da_results = da_round(&bids_by_lead, &infl_fc, &config.supply, h, &mut evolution)?;
        let r0 = da_results[0].clone();
        // every lead clearing feeds the forecast; each hour-of-day sees one
        // sample per round, so `horizon` samples per day keep the half-life
        // at one day
        let retention = 0.5_f64.powf(1.0 / horizon as f64);
        for r in &da_results {
            history.record_weighted(r.interval, r.cleared_price, retention);
        }
        let da_price = r0.cleared_price;
        let da_q: BTreeMap<&str, f64> = r0
            .per_agent_q
            .iter()
            .map(|(id, q)| (id.as_str(), *q))
            .collect();
        for (id, q) in &r0.per_agent_q {
            commitments.push(Commitment {
                interval: h,
                agent_id: id.clone(),
                q_committed: *q,
            });
        }
        market_log.extend(da_results);

        // 12 RT slots: bid, clear, actuate
        let mut load_sum = 0.0;
        let mut price_sum = 0.0;
        let mut ev_net_hour = 0.0;
        for slot in 0..SLOTS_PER_HOUR {
            let mut rt_bids: Vec<LabeledBid> = Vec::new();
            for (i, agent) in fleet.iter().enumerate() {
                if let Some(hour_bid) = &hour_bids[i] {
                    let cleared = da_q.get(agent.agent_id.as_str()).copied().unwrap_or(0.0);
                    rt_bids.push(LabeledBid {
                        agent_id: agent.agent_id.clone(),
                        bid: rt_bid(cleared, da_price, next_plans[i], slot, hour_bid),
                    });
                }
            }
            let actual = config.inflexible.hourly(hod) * noise[h as usize * 12 + slot as usize];
            let rt = rt_step(&rt_bids, actual, &config.supply, h, slot)?;
            let slot_q: BTreeMap<&str, f64> = rt
                .per_agent_q
                .iter()
                .map(|(id, q)| (id.as_str(), *q))
                .collect();
            for (i, agent) in fleet.iter().enumerate() {
                let committed = slot_q.get(agent.agent_id.as_str()).copied().unwrap_or(0.0);
                let plugged = hour_bids[i].is_some();
                let action = apply_control(
                    &agent.agent_id,
                    &agent.spec,
                    socs[i],
                    agent.spec.min_soc(),
                    agent.spec.battery_capacity(),
                    plugged,
                    committed,
                    h,
                    slot,
                );
                socs[i] = action.soc_after;
                ev_net_hour += action.delivered_kwh;
                control_trace.push(action);
            }
            load_sum += rt.total_quantity;
            price_sum += rt.cleared_price;
            rt_price.push(rt.cleared_price);
            if h as usize >= warmup {
                peak_rt_price = peak_rt_price.max(rt.cleared_price);
                if rt.congested {
                    congested += 1;
                }
                rt_da_gap_sum += (rt.cleared_price - da_price).abs();
                rt_da_gap_count += 1;
            }
            market_log.push(rt);
        }

        // end of hour: driving drain for arrival/departure hours
        for (i, agent) in fleet.iter().enumerate() {
            if hod == agent.schedule.t_in || hod == agent.schedule.t_out {
                socs[i] -= agent.schedule.daily_miles / agent.spec.mileage / 2.0;
                let c_min = agent.spec.min_soc();
                if socs[i] < c_min - SOC_AUDIT_TOL {
                    return Err(Error::SimAbort {
                        hour: h,
                        agent: agent.agent_id.clone(),
                        source: Box::new(Error::SocOutOfBounds {
                            hour: h as usize,
                            soc: socs[i],
                            c_min,
                            c_max: agent.spec.battery_capacity(),
                        }),
                    });
                }
            }
            soc_trace[i].push(socs[i]);
        }
        ev_hourly.push(ev_net_hour);
        hourly_load.push(load_sum);
        hourly_price.push(price_sum / f64::from(SLOTS_PER_HOUR));
    }

    Ok(LoopRun {
        market_log,
        commitments,
        control_trace,
        evolution,
        soc: soc_trace,
        ev_hourly,
        hourly_load,
        hourly_price,
        rt_price,
        peak_rt_price,
        congested,
        rt_da_gap_sum,
        rt_da_gap_count,
    })
}

/// Per-agent bill and energy totals over the post-warm-up window.
fn bills(
    fleet: &[AgentConfig],
    trace: &[ControlAction],
    rt_price: &[f64],
    warmup: usize,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let index: BTreeMap<&str, usize> = fleet
        .iter()
        .enumerate()
        .map(|(i, a)| (a.agent_id.as_str(), i))
        .collect();
    let mut bill = vec![0.0; fleet.len()];
    let mut imported = vec![0.0; fleet.len()];
    let mut exported = vec![0.0; fleet.len()];
    for action in trace {
        if (action.hour as usize) < warmup {
            continue;
        }
        let i = index[action.agent_id.as_str()];
        let price = rt_price[action.hour as usize * 12 + action.slot as usize];
        bill[i] += price * action.delivered_kwh;
        if action.delivered_kwh >= 0.0 {
            imported[i] += action.delivered_kwh;
        } else {
            exported[i] -= action.delivered_kwh;
        }
    }
    (bill, imported, exported)
}

/// Run one full scenario: the transactive fleet and its non-transactive
/// counterpart, each in its own market.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunArtifacts> {
    config.validate()?;
    let fleet = load_fleet(config)?;
    let hours = config.total_hours();
    let warmup = config.warmup_hours();
    let n_agents = fleet.len();
    let noise = rt_noise_factors(config);

    let base = run_market_loop(config, &base_fleet(&fleet), &noise)?;
    let trans = run_market_loop(config, &fleet, &noise)?;

    let (trans_bill, imported, exported) = bills(&fleet, &trans.control_trace, &trans.rt_price, warmup);
    let (base_bill, _, _) = bills(&fleet, &base.control_trace, &base.rt_price, warmup);

    let mut agent_reports = Vec::with_capacity(n_agents);
    for (i, agent) in fleet.iter().enumerate() {
        let c_max = agent.spec.battery_capacity();
        let trans_full = fully_charged_hours(&trans.soc[i], &agent.schedule, c_max, warmup..hours);
        let base_full = fully_charged_hours(&base.soc[i], &agent.schedule, c_max, warmup..hours);
        agent_reports.push(AgentReport {
            agent_id: agent.agent_id.clone(),
            slider: agent.slider,
            base_cost: base_bill[i],
            trans_cost: trans_bill[i],
            savings_pct: savings_pct(base_bill[i], trans_bill[i]),
            amenity_pct: amenity_pct(trans_full, base_full),
            energy_imported_kwh: imported[i],
            energy_exported_kwh: exported[i],
        });
    }

    // convergence over post-warm-up delivery hours
    let mut converged = 0usize;
    let mut considered = 0usize;
    for h in warmup..hours {
        if let Some(prices) = trans.evolution.per_hour.get(&(h as u64)) {
            considered += 1;
            if check_convergence(prices, 0.001, 6) {
                converged += 1;
            }
        }
    }
    let convergence_fraction = if considered == 0 {
        0.0
    } else {
        converged as f64 / considered as f64
    };

    let transactive = system_report(
        &trans.hourly_load,
        &trans.hourly_price,
        warmup,
        trans.congested,
    );
    let base_report = system_report(&base.hourly_load, &base.hourly_price, warmup, base.congested);
    let ev_window = &trans.ev_hourly[warmup.min(hours)..];
    let ev_mean = ev_window.iter().sum::<f64>() / ev_window.len().max(1) as f64;
    let ev_profile_variance = ev_window
        .iter()
        .map(|q| (q - ev_mean).powi(2))
        .sum::<f64>()
        / ev_window.len().max(1) as f64;

    let mean_savings_pct =
        agent_reports.iter().map(|r| r.savings_pct).sum::<f64>() / n_agents.max(1) as f64;
    let mean_amenity_pct =
        agent_reports.iter().map(|r| r.amenity_pct).sum::<f64>() / n_agents.max(1) as f64;

    let mut artifacts = RunArtifacts {
        config: config.clone(),
        fleet,
        market_log: trans.market_log,
        base_market_log: base.market_log,
        commitments: trans.commitments,
        control_trace: trans.control_trace,
        base_control_trace: base.control_trace,
        agent_reports,
        trans_soc: trans.soc,
        base_soc: base.soc,
        trans_ev_hourly: trans.ev_hourly,
        base_ev_hourly: base.ev_hourly,
        evolution: trans.evolution,
        summary: Summary {
            transactive,
            base: base_report,
            convergence_fraction,
            mean_rt_da_gap: if trans.rt_da_gap_count == 0 {
                0.0
            } else {
                trans.rt_da_gap_sum / trans.rt_da_gap_count as f64
            },
            peak_rt_price_base: base.peak_rt_price,
            peak_rt_price_transactive: trans.peak_rt_price,
            mean_savings_pct,
            mean_amenity_pct,
            ev_profile_variance,
            audit: AuditReport::default(),
        },
    };
    artifacts.summary.audit = audit(&artifacts);
    if let Some(dir) = &config.out_dir {
        write_artifacts(&artifacts, dir)?;
    }
    Ok(artifacts)
}

/// Re-validate physics and market invariants from the run logs alone.
pub fn audit(artifacts: &RunArtifacts) -> AuditReport {
    let mut report = AuditReport::default();

    for (i, agent) in artifacts.fleet.iter().enumerate() {
        let c_min = agent.spec.min_soc();
        let c_max = agent.spec.battery_capacity();
        for trace in [&artifacts.trans_soc[i], &artifacts.base_soc[i]] {
            for &soc in trace {
                if soc < c_min - SOC_AUDIT_TOL || soc > c_max + SOC_AUDIT_TOL {
                    report.soc_violations += 1;
                }
            }
        }
    }

    for result in artifacts
        .market_log
        .iter()
        .chain(&artifacts.base_market_log)
    {
        let total: f64 =
            result.inflexible_quantity + result.per_agent_q.iter().map(|(_, q)| q).sum::<f64>();
        if (total - result.total_quantity).abs() > CONSERVATION_TOL {
            report.conservation_violations += 1;
        }
    }

    for action in artifacts
        .control_trace
        .iter()
        .chain(&artifacts.base_control_trace)
    {
        if (action.delivered_kwh - action.committed_kwh).abs() > CONSERVATION_TOL
            && !action.deviated
        {
            report.unlogged_deviations += 1;
        }
    }

    // per-agent hourly energy balance: slot deltas plus driving drain must
    // reproduce the end-of-hour SOC trace
    let index: BTreeMap<&str, usize> = artifacts
        .fleet
        .iter()
        .enumerate()
        .map(|(i, a)| (a.agent_id.as_str(), i))
        .collect();
    let hours = artifacts.config.total_hours();
    let mut hourly_delta = vec![vec![0.0; hours]; artifacts.fleet.len()];
    for action in &artifacts.control_trace {
        hourly_delta[index[action.agent_id.as_str()]][action.hour as usize] +=
            action.battery_delta;
    }
    for (i, agent) in artifacts.fleet.iter().enumerate() {
        let drain = agent.schedule.daily_miles / agent.spec.mileage / 2.0;
        let mut soc = agent.spec.battery_capacity();
        for h in 0..hours {
            let hod = (h % 24) as u32;
            soc += hourly_delta[i][h];
            if hod == agent.schedule.t_in || hod == agent.schedule.t_out {
                soc -= drain;
            }
            if (soc - artifacts.trans_soc[i][h]).abs() > CONSERVATION_TOL {
                report.energy_balance_violations += 1;
            }
        }
    }
    report
}

/// Savings/peak comparison of V1G vs V2G at one degradation rate.
#[derive(Debug, Clone, Serialize)]
pub struct PhiComparison {
    pub phi: f64,
    pub v1g_mean_savings_pct: f64,
    pub v2g_mean_savings_pct: f64,
    pub delta_savings_pct: f64,
    pub v1g_peak_kwh: f64,
    pub v2g_peak_kwh: f64,
    pub delta_peak_kwh: f64,
}

/// Run paired V1G/V2G scenarios (shared seed, hence identical fleets apart
/// from export capability) across a degradation-cost sweep.
pub fn compare_modes(config: &ScenarioConfig, phis: &[f64]) -> Result<Vec<PhiComparison>> {
    let mut rows = Vec::with_capacity(phis.len());
    for &phi in phis {
        let mut base_cfg = config.clone();
        base_cfg.economics.phi = phi;
        base_cfg.out_dir = None;
        let mut v1g_cfg = base_cfg.clone();
        v1g_cfg.mode = Mode::V1g;
        let mut v2g_cfg = base_cfg;
        v2g_cfg.mode = Mode::V2g;
        let v1g = run_scenario(&v1g_cfg)?;
        let v2g = run_scenario(&v2g_cfg)?;
        rows.push(PhiComparison {
            phi,
            v1g_mean_savings_pct: v1g.summary.mean_savings_pct,
            v2g_mean_savings_pct: v2g.summary.mean_savings_pct,
            delta_savings_pct: v2g.summary.mean_savings_pct - v1g.summary.mean_savings_pct,
            v1g_peak_kwh: v1g.summary.transactive.peak_kwh,
            v2g_peak_kwh: v2g.summary.transactive.peak_kwh,
            delta_peak_kwh: v2g.summary.transactive.peak_kwh - v1g.summary.transactive.peak_kwh,
        });
    }
    Ok(rows)
}

fn market_csv(results: &[ClearedResult], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "interval",
        "kind",
        "lead_time",
        "cleared_price",
        "total_q",
        "inflexible_q",
        "congested",
    ])?;
    for r in results {
        // RT rows index the 5-minute slot; DA rows index the delivery hour
        let interval = match r.kind {
            MarketKind::Da => r.interval,
            MarketKind::Rt => r.interval * 12 + u64::from(r.slot),
        };
        let kind = match r.kind {
            MarketKind::Da => "DA",
            MarketKind::Rt => "RT",
        };
        w.write_record([
            interval.to_string(),
            kind.to_string(),
            r.lead_time.to_string(),
            format!("{:.9}", r.cleared_price),
            format!("{:.9}", r.total_quantity),
            format!("{:.9}", r.inflexible_quantity),
            (r.congested as u8).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Write all run artifacts as CSV/JSON files.
pub fn write_artifacts(artifacts: &RunArtifacts, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    market_csv(&artifacts.market_log, &dir.join("market_log.csv"))?;
    market_csv(&artifacts.base_market_log, &dir.join("base_market_log.csv"))?;

    let mut w = csv::Writer::from_path(dir.join("commitments.csv"))?;
    w.write_record(["interval", "agent_id", "q_committed"])?;
    for c in &artifacts.commitments {
        w.write_record([
            c.interval.to_string(),
            c.agent_id.clone(),
            format!("{:.9}", c.q_committed),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("control_trace.csv"))?;
    w.write_record([
        "hour",
        "slot",
        "agent_id",
        "committed_kwh",
        "delivered_kwh",
        "soc",
    ])?;
    for a in &artifacts.control_trace {
        w.write_record([
            a.hour.to_string(),
            a.slot.to_string(),
            a.agent_id.clone(),
            format!("{:.9}", a.committed_kwh),
            format!("{:.9}", a.delivered_kwh),
            format!("{:.9}", a.soc_after),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("per_agent.csv"))?;
    w.write_record([
        "agent_id",
        "slider",
        "model",
        "t_in",
        "t_out",
        "daily_miles",
        "charger_kw",
        "base_cost",
        "trans_cost",
        "savings_pct",
        "amenity_pct",
    ])?;
    for (agent, r) in artifacts.fleet.iter().zip(&artifacts.agent_reports) {
        w.write_record([
            r.agent_id.clone(),
            format!("{:.6}", r.slider),
            agent.spec.model_name.clone(),
            agent.schedule.t_in.to_string(),
            agent.schedule.t_out.to_string(),
            format!("{:.3}", agent.schedule.daily_miles),
            format!("{:.3}", agent.spec.charge_rating),
            format!("{:.6}", r.base_cost),
            format!("{:.6}", r.trans_cost),
            format!("{:.4}", r.savings_pct),
            format!("{:.4}", r.amenity_pct),
        ])?;
    }
    w.flush()?;

    let json = serde_json::to_string_pretty(&artifacts.summary)
        .map_err(|e| Error::Config(format!("summary serialization: {e}")))?;
    std::fs::write(dir.join("summary.json"), json)?;
    Ok(())
}

/// Write a V1G/V2G comparison as CSV.
pub fn write_comparison(rows: &[PhiComparison], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "phi",
        "v1g_mean_savings_pct",
        "v2g_mean_savings_pct",
        "delta_savings_pct",
        "v1g_peak_kwh",
        "v2g_peak_kwh",
        "delta_peak_kwh",
    ])?;
    for r in rows {
        w.write_record([
            format!("{:.6}", r.phi),
            format!("{:.6}", r.v1g_mean_savings_pct),
            format!("{:.6}", r.v2g_mean_savings_pct),
            format!("{:.6}", r.delta_savings_pct),
            format!("{:.6}", r.v1g_peak_kwh),
            format!("{:.6}", r.v2g_peak_kwh),
            format!("{:.6}", r.delta_peak_kwh),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ev_model::SliderDist;

    fn tiny_config() -> ScenarioConfig {
        ScenarioConfig {
            days: 3,
            fleet_size: 3,
            seed: 7,
            rt_noise_pct: 0.0,
            slider: SliderDist::Stratified {
                values: vec![0.0, 0.5, 0.9],
            },
            ..Default::default()
        }
    }

    #[test]
    fn tiny_scenario_runs_clean() {
        let artifacts = run_scenario(&tiny_config()).unwrap();
        assert!(artifacts.summary.audit.clean(), "{:?}", artifacts.summary.audit);
        assert_eq!(artifacts.trans_soc.len(), 3);
        assert_eq!(artifacts.trans_soc[0].len(), 72);
        // RT rows: 72 hours * 12 slots; DA rows: 72 rounds * 48 leads
        let rt = artifacts
            .market_log
            .iter()
            .filter(|r| r.kind == MarketKind::Rt)
            .count();
        assert_eq!(rt, 72 * 12);
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let a = run_scenario(&tiny_config()).unwrap();
        let b = run_scenario(&tiny_config()).unwrap();
        for (x, y) in a.market_log.iter().zip(&b.market_log) {
            assert_eq!(x.cleared_price.to_bits(), y.cleared_price.to_bits());
            assert_eq!(x.total_quantity.to_bits(), y.total_quantity.to_bits());
        }
        for (x, y) in a.trans_soc.iter().zip(&b.trans_soc) {
            assert_eq!(x, y);
        }
    }
}
