//! Generalized Wasserstein distance with mass creation and destruction
//! priced at `a` per unit anywhere, and transport priced at `b` per unit
//! cost.
//!
//! Eliminating the remaining masses leaves the inequality LP
//!
//! ```text
//! minimize Σ (b c_jk − 2a) γ_jk   s.t.  Σ_k γ_jk ≤ m^s_j,  Σ_j γ_jk ≤ m^d_k,  γ ≥ 0
//! ```
//!
//! whose optimum plus `a Σ (m^s + m^d)` is the distance.

use crate::classic::{check_same_grid, TransportPlan};
use crate::error::{Error, Result};
use crate::grid::{cost_matrix, DiscreteMeasure};
use crate::lp::{solve_lp_default, LpProblem, Sense};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrParams {
    pub a: f64,
    pub b: f64,
    pub p: f64,
}

impl PrParams {
    pub fn new(a: f64, b: f64, p: f64) -> Result<Self> {
        let params = Self { a, b, p };
        params.validate()?;
        Ok(params)
    }

    fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a.is_finite() && self.b > 0.0 && self.b.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "a and b must be positive, got a = {}, b = {}",
                self.a, self.b
            )));
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(Error::InvalidParameter(format!("need p >= 1, got {}", self.p)));
        }
        Ok(())
    }
}

impl Default for PrParams {
    fn default() -> Self {
        Self {
            a: 1.0,
            b: 1.0,
            p: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PrSolution {
    pub value: f64,
    pub plan: TransportPlan,
    /// Untransported mass per cell: destroyed on the supply side, created on
    /// the demand side.
    pub remaining_supply: Vec<f64>,
    pub remaining_demand: Vec<f64>,
}

impl PrSolution {
    /// Mass destroyed from the supply plus mass created for the demand.
    pub fn created_and_destroyed(&self) -> f64 {
        self.remaining_supply.iter().sum::<f64>() + self.remaining_demand.iter().sum::<f64>()
    }
}

pub fn pr_distance(ms: &DiscreteMeasure, md: &DiscreteMeasure, params: PrParams) -> Result<PrSolution> {
    check_same_grid(ms, md)?;
    params.validate()?;
    let PrParams { a, b, p } = params;
    let c = cost_matrix(ms.grid(), p)?;
    let n = ms.len();
    let src = ms.support();
    let dst = md.support();
    let ceiling = a * (ms.total_mass() + md.total_mass());

    // Pairs with b c_jk − 2a ≥ 0 are never worth using, so only profitable
    // pairs become variables.
    let ns = src.len();
    let mut vars = Vec::new();
    let mut costs = Vec::new();
    let mut columns = Vec::new();
    for (r, &j) in src.iter().enumerate() {
        for (q, &k) in dst.iter().enumerate() {
            let cost = b * c.get(j, k) - 2.0 * a;
            if cost < 0.0 {
                vars.push((j, k));
                costs.push(cost);
                columns.push(vec![(r, 1.0), (ns + q, 1.0)]);
            }
        }
    }

    let mut plan = TransportPlan::zeros(n);
    let objective = if vars.is_empty() {
        0.0
    } else {
        let rhs: Vec<f64> = src
            .iter()
            .map(|&j| ms.masses()[j])
            .chain(dst.iter().map(|&k| md.masses()[k]))
            .collect();
        let lp = LpProblem::from_columns(costs, &columns, rhs, Sense::LessEqual)?;
        let sol = solve_lp_default(&lp)?.into_optimal()?;
        for (&(j, k), &x) in vars.iter().zip(&sol.x) {
            if x > 0.0 {
                plan.set(j, k, x);
            }
        }
        sol.value
    };
    let total = (objective + ceiling).max(0.0);
    let value = if p == 1.0 { total } else { total.powf(1.0 / p) };
    let leftover = |m: &[f64], used: Vec<f64>| m.iter().zip(used).map(|(m, u)| (m - u).max(0.0)).collect();
    Ok(PrSolution {
        value,
        remaining_supply: leftover(ms.masses(), plan.row_sums()),
        remaining_demand: leftover(md.masses(), plan.col_sums()),
        plan,
    })
}
