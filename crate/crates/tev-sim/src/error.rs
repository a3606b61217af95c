use thiserror::Error;

/// Errors surfaced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("catalog parse error at row {row}, column '{column}': {detail}")]
    CatalogParse {
        row: usize,
        column: String,
        detail: String,
    },

    #[error("empty catalog")]
    EmptyCatalog,

    #[error("schedule parse error at row {row}: {detail}")]
    ScheduleParse { row: usize, detail: String },

    #[error("no feasible driving schedule found for EV model '{model}' after {attempts} attempts")]
    InfeasiblePairing { model: String, attempts: usize },

    #[error("physics violation at hour {hour}: SOC {soc:.6} kWh outside [{c_min:.6}, {c_max:.6}]")]
    SocOutOfBounds {
        hour: usize,
        soc: f64,
        c_min: f64,
        c_max: f64,
    },

    #[error("energy exchange during a {kind} hour (hour {hour}): e_in={e_in}, e_out={e_out}")]
    ExchangeWhileUnavailable {
        kind: &'static str,
        hour: usize,
        e_in: f64,
        e_out: f64,
    },

    #[error("infeasible horizon: cannot reach full charge before departure at horizon hour {departure_hour} (need {needed:.3} kWh, at most {achievable:.3} kWh reachable)")]
    InfeasibleHorizon {
        departure_hour: usize,
        needed: f64,
        achievable: f64,
    },

    #[error("QP solver failed: {0}")]
    Qp(#[from] QpError),

    #[error("market clearing found no intersection within price bounds [0, {price_cap:.4}] $/kWh")]
    NoIntersection { price_cap: f64 },

    #[error("invalid scenario config: {0}")]
    Config(String),

    #[error("simulation aborted at hour {hour}, agent '{agent}': {source}")]
    SimAbort {
        hour: u64,
        agent: String,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Errors from the interior-point QP solver.
#[derive(Debug, Error)]
pub enum QpError {
    #[error("problem is infeasible: constraint residual {residual:.3e} after presolve")]
    Infeasible { residual: f64 },

    #[error("did not converge within {iterations} iterations (primal residual {primal_res:.3e}, dual residual {dual_res:.3e}, gap {gap:.3e})")]
    MaxIterations {
        iterations: usize,
        primal_res: f64,
        dual_res: f64,
        gap: f64,
        best_x: Vec<f64>,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("KKT system is singular")]
    SingularKkt,
}

pub type Result<T> = std::result::Result<T, Error>;
