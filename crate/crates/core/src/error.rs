use thiserror::Error;

use crate::lp::LpStatus;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("measures are defined on different grids")]
    GridMismatch,

    #[error("unbalanced measures: supply mass {supply}, demand mass {demand}")]
    Unbalanced { supply: f64, demand: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("linear program is {0}")]
    Lp(LpStatus),

    #[error("big-cost variable {index} carries mass {value} at the optimum")]
    BigCostActive { index: usize, value: f64 },

    #[error("dual ascent did not converge in {iterations} iterations (bounds [{lower}, {upper}])")]
    NotConverged {
        iterations: usize,
        lower: f64,
        upper: f64,
    },

    #[error("enumeration needs {required} simplex points, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u128 },

    #[error("CFL condition violated: dt * max speed = {lhs} > dx = {dx}")]
    Cfl { lhs: f64, dx: f64 },

    #[error("step rejected: density {value} in cell {cell} at t = {t}")]
    DensityOutOfRange { cell: usize, value: f64, t: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
