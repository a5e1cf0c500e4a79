//! Generalized Wasserstein distance with the domain boundary acting as an
//! unlimited reservoir: mass may be imported from or exported to the end
//! cells `0` and `N − 1` at the ordinary transport cost.

use crate::classic::{check_same_grid, staircase, TransportPlan};
use crate::error::{Error, Result};
use crate::grid::{cost_matrix, CostMatrix, DiscreteMeasure};
use crate::lp::{solve_lp_default, LpProblem, Sense};

/// Ratio between the encoded "infinite" corner cost and the largest finite
/// cost.
pub const BIG_FACTOR: f64 = 1e6;

/// Mass created at (`supply_*`) or absorbed by (`demand_*`) each boundary
/// cell: the row and column sums of the end rows and columns of the plan.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundaryMasses {
    pub supply_first: f64,
    pub supply_last: f64,
    pub demand_first: f64,
    pub demand_last: f64,
}

impl BoundaryMasses {
    pub fn supply(&self) -> f64 {
        self.supply_first + self.supply_last
    }

    pub fn demand(&self) -> f64 {
        self.demand_first + self.demand_last
    }
}

/// Prices for creating mass at / sending mass into each boundary cell.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CreationCosts {
    pub supply_first: f64,
    pub supply_last: f64,
    pub demand_first: f64,
    pub demand_last: f64,
}

impl CreationCosts {
    fn as_array(&self) -> [f64; 4] {
        [
            self.supply_first,
            self.supply_last,
            self.demand_first,
            self.demand_last,
        ]
    }
}

#[derive(Debug, Clone)]
pub struct FgSolution {
    pub value: f64,
    /// Plan on the full grid; rows and columns `0` and `N − 1` are the
    /// reservoir.
    pub plan: TransportPlan,
    pub boundary: BoundaryMasses,
}

/// Interior mass excess `ΔM = Σ_int (m^s − m^d)`.
pub fn mass_unbalance(ms: &DiscreteMeasure, md: &DiscreteMeasure) -> f64 {
    let n = ms.len();
    (1..n - 1).map(|i| ms.masses()[i] - md.masses()[i]).sum()
}

fn boundary_masses(plan: &TransportPlan) -> BoundaryMasses {
    let rows = plan.row_sums();
    let cols = plan.col_sums();
    let last = plan.len() - 1;
    BoundaryMasses {
        supply_first: rows[0],
        supply_last: rows[last],
        demand_first: cols[0],
        demand_last: cols[last],
    }
}

fn root(value: f64, p: f64) -> f64 {
    let v = value.max(0.0);
    if p == 1.0 {
        v
    } else {
        v.powf(1.0 / p)
    }
}

fn interior_support(m: &DiscreteMeasure) -> Vec<usize> {
    let n = m.len();
    m.support().into_iter().filter(|&i| i != 0 && i != n - 1).collect()
}

/// Constraint form: interior rows and columns carry the prescribed masses,
/// the reservoir rows/columns are free apart from the flow balance
/// `Σ_k (γ_0k + γ_{N−1,k}) − Σ_j (γ_j0 + γ_{j,N−1}) = Σ_int m^d − Σ_int m^s`.
///
/// Corner entries (reservoir to reservoir) are omitted; they would cancel in
/// every constraint and only add cost.
pub fn fg_distance(ms: &DiscreteMeasure, md: &DiscreteMeasure, p: f64) -> Result<FgSolution> {
    check_same_grid(ms, md)?;
    ms.ensure_empty_boundary()?;
    md.ensure_empty_boundary()?;
    let c = cost_matrix(ms.grid(), p)?;
    fg_with_cost(ms, md, &c)
}

fn fg_with_cost(ms: &DiscreteMeasure, md: &DiscreteMeasure, c: &CostMatrix) -> Result<FgSolution> {
    let n = ms.len();
    let last = n - 1;
    let src = interior_support(ms);
    let dst = interior_support(md);
    let mut plan = TransportPlan::zeros(n);
    if src.is_empty() && dst.is_empty() {
        return Ok(FgSolution {
            value: 0.0,
            plan,
            boundary: BoundaryMasses::default(),
        });
    }

    // Rows: one per supported interior supply cell, one per supported
    // interior demand cell, then the boundary balance.
    let (ns, nd) = (src.len(), dst.len());
    let balance_row = ns + nd;
    let mut vars: Vec<(usize, usize)> = Vec::new();
    let mut costs = Vec::new();
    let mut columns = Vec::new();
    let mut push = |j: usize, k: usize, col: Vec<(usize, f64)>| {
        vars.push((j, k));
        costs.push(c.get(j, k));
        columns.push(col);
    };
    for (a, &j) in src.iter().enumerate() {
        for (b, &k) in dst.iter().enumerate() {
            push(j, k, vec![(a, 1.0), (ns + b, 1.0)]);
        }
        for k in [0, last] {
            push(j, k, vec![(a, 1.0), (balance_row, -1.0)]);
        }
    }
    for j in [0, last] {
        for (b, &k) in dst.iter().enumerate() {
            push(j, k, vec![(ns + b, 1.0), (balance_row, 1.0)]);
        }
    }
    let supply: f64 = src.iter().map(|&j| ms.masses()[j]).sum();
    let demand: f64 = dst.iter().map(|&k| md.masses()[k]).sum();
    let rhs: Vec<f64> = src
        .iter()
        .map(|&j| ms.masses()[j])
        .chain(dst.iter().map(|&k| md.masses()[k]))
        .chain(std::iter::once(demand - supply))
        .collect();

    let mut lp = LpProblem::from_columns(costs, &columns, rhs, Sense::Equal)?;
    lp.set_starting_columns(starting_columns(&lp.rhs()[..ns], &lp.rhs()[ns..ns + nd], nd))?;
    let sol = solve_lp_default(&lp)?.into_optimal()?;
    for (&(j, k), &x) in vars.iter().zip(&sol.x) {
        if x > 0.0 {
            plan.set(j, k, x);
        }
    }
    Ok(FgSolution {
        value: root(sol.value, c.exponent()),
        boundary: boundary_masses(&plan),
        plan,
    })
}

/// North-west corner start for the constraint form, with the interior
/// excess routed through the last reservoir cell. Variable layout: for
/// each supply row `a`, `nd` interior entries then `(a, 0)` and
/// `(a, N − 1)`; afterwards `(0, k)` and `(N − 1, k)` for every column.
fn starting_columns(s: &[f64], d: &[f64], nd: usize) -> Vec<usize> {
    let ns = s.len();
    let row = nd + 2;
    let (total_s, total_d) = (s.iter().sum::<f64>(), d.iter().sum::<f64>());
    let mut s = s.to_vec();
    let mut d = d.to_vec();
    // Index `ns` / `nd` stands for the reservoir.
    if total_s > total_d {
        d.push(total_s - total_d);
    } else if total_d > total_s {
        s.push(total_d - total_s);
    }
    staircase(&s, &d)
        .into_iter()
        .map(|(a, b)| match (a == ns, b == nd) {
            (false, false) => a * row + b,
            (false, true) => a * row + nd + 1,
            (true, false) => ns * row + nd + b,
            (true, true) => unreachable!("only one side is extended"),
        })
        .collect()
}

/// Extended form: every row and column (boundary included) is an equality,
/// with four extra variables `M^s_0, M^s_{N−1}, M^d_0, M^d_{N−1}` priced by
/// `creation` absorbing the reservoir flows. Corner entries are priced at
/// [`BIG_FACTOR`] times the largest finite cost and must end up empty.
pub fn fg_distance_extended(
    ms: &DiscreteMeasure,
    md: &DiscreteMeasure,
    p: f64,
    creation: CreationCosts,
) -> Result<FgSolution> {
    check_same_grid(ms, md)?;
    ms.ensure_empty_boundary()?;
    md.ensure_empty_boundary()?;
    if creation.as_array().iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "creation costs must be finite and non-negative, got {creation:?}"
        )));
    }
    let c = cost_matrix(ms.grid(), p)?;
    let n = ms.len();
    let last = n - 1;
    let mut rows: Vec<usize> = vec![0];
    rows.extend(interior_support(ms));
    rows.push(last);
    let mut cols: Vec<usize> = vec![0];
    cols.extend(interior_support(md));
    cols.push(last);
    let (nr, nc) = (rows.len(), cols.len());

    let big = BIG_FACTOR * c.max().max(creation.as_array().into_iter().fold(0.0, f64::max));
    let is_corner = |j: usize, k: usize| (j == 0 || j == last) && (k == 0 || k == last);
    let mut costs = Vec::with_capacity(nr * nc + 4);
    let mut columns = Vec::with_capacity(nr * nc + 4);
    for (a, &j) in rows.iter().enumerate() {
        for (b, &k) in cols.iter().enumerate() {
            costs.push(if is_corner(j, k) { big } else { c.get(j, k) });
            columns.push(vec![(a, 1.0), (nr + b, 1.0)]);
        }
    }
    let [cs0, csn, cd0, cdn] = creation.as_array();
    costs.extend([cs0, csn, cd0, cdn]);
    columns.push(vec![(0, -1.0)]);
    columns.push(vec![(nr - 1, -1.0)]);
    columns.push(vec![(nr, -1.0)]);
    columns.push(vec![(nr + nc - 1, -1.0)]);
    let rhs: Vec<f64> = rows
        .iter()
        .map(|&j| ms.masses()[j])
        .chain(cols.iter().map(|&k| md.masses()[k]))
        .collect();

    let lp = LpProblem::from_columns(costs, &columns, rhs, Sense::Equal)?;
    let sol = solve_lp_default(&lp)?.into_optimal()?;
    let mut plan = TransportPlan::zeros(n);
    for (v, &x) in sol.x[..nr * nc].iter().enumerate() {
        let (j, k) = (rows[v / nc], cols[v % nc]);
        if is_corner(j, k) {
            if x > crate::lp::DEFAULT_FEAS_TOL {
                return Err(Error::BigCostActive { index: v, value: x });
            }
        } else if x > 0.0 {
            plan.set(j, k, x);
        }
    }
    let m = &sol.x[nr * nc..];
    let boundary = BoundaryMasses {
        supply_first: m[0],
        supply_last: m[1],
        demand_first: m[2],
        demand_last: m[3],
    };
    let transport = plan.cost(&c);
    let creation_cost = cs0 * m[0] + csn * m[1] + cd0 * m[2] + cdn * m[3];
    Ok(FgSolution {
        value: root(transport + creation_cost, p),
        plan,
        boundary,
    })
}
