//! Balanced 1-D Wasserstein distance: cumulative-mass formula, Hitchcock LP
//! and the monotone (north-west corner) plan.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{cost_matrix, CostMatrix, DiscreteMeasure, Grid1D};
use crate::lp::{solve_lp_default, LpProblem, Sense};

/// Dense `N × N` matrix of shipped masses, `gamma[j][k]` from cell `j` to
/// cell `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    n: usize,
    gamma: Vec<f64>,
}

impl TransportPlan {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            gamma: vec![0.0; n * n],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.gamma[j * self.n + k]
    }

    pub fn set(&mut self, j: usize, k: usize, mass: f64) {
        self.gamma[j * self.n + k] = mass;
    }

    pub fn add(&mut self, j: usize, k: usize, mass: f64) {
        self.gamma[j * self.n + k] += mass;
    }

    pub fn entries(&self) -> &[f64] {
        &self.gamma
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.gamma.chunks_exact(self.n).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.n];
        for row in self.gamma.chunks_exact(self.n) {
            for (a, g) in s.iter_mut().zip(row) {
                *a += g;
            }
        }
        s
    }

    pub fn total(&self) -> f64 {
        self.gamma.iter().sum()
    }

    /// `Σ c_jk γ_jk`.
    pub fn cost(&self, c: &CostMatrix) -> f64 {
        self.gamma.iter().zip(c.entries()).map(|(g, c)| g * c).sum()
    }

    /// Writes the non-zero entries as `j,k,x_j,x_k,mass` (0-based cells).
    pub fn write_csv<W: Write>(&self, grid: &Grid1D, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["j", "k", "x_j", "x_k", "mass"])?;
        for j in 0..self.n {
            for k in 0..self.n {
                let g = self.get(j, k);
                if g != 0.0 {
                    w.write_record(&[
                        j.to_string(),
                        k.to_string(),
                        grid.barycenter(j).to_string(),
                        grid.barycenter(k).to_string(),
                        g.to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, grid: &Grid1D, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(grid, std::fs::File::create(path)?)
    }
}

/// Default balance tolerance: `1e-9 · max(total masses)`.
pub fn default_balance_tol(ms: &DiscreteMeasure, md: &DiscreteMeasure) -> f64 {
    1e-9 * ms.total_mass().max(md.total_mass())
}

pub(crate) fn check_same_grid(ms: &DiscreteMeasure, md: &DiscreteMeasure) -> Result<()> {
    if ms.grid().matches(md.grid()) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

fn check_balanced(ms: &DiscreteMeasure, md: &DiscreteMeasure, tol: f64) -> Result<()> {
    check_same_grid(ms, md)?;
    let (s, d) = (ms.total_mass(), md.total_mass());
    if (s - d).abs() > tol {
        return Err(Error::Unbalanced {
            supply: s,
            demand: d,
        });
    }
    Ok(())
}

/// `dx · Σ_j |Σ_{i≤j} m^s_i − Σ_{i≤j} m^d_i|`.
pub fn w1_cdf(ms: &DiscreteMeasure, md: &DiscreteMeasure, balance_tol: f64) -> Result<f64> {
    check_balanced(ms, md, balance_tol)?;
    let mut cum = 0.0;
    let mut acc = 0.0;
    for (s, d) in ms.masses().iter().zip(md.masses()) {
        cum += s - d;
        acc += cum.abs();
    }
    Ok(ms.grid().dx() * acc)
}

/// Hitchcock LP restricted to the supports of both measures; zero-mass rows
/// and columns force zero plan entries, so the restriction is exact.
pub(crate) fn hitchcock(
    ms: &DiscreteMeasure,
    md: &DiscreteMeasure,
    c: &CostMatrix,
) -> Result<(f64, TransportPlan)> {
    let n = ms.len();
    let src = ms.support();
    let dst = md.support();
    let mut plan = TransportPlan::zeros(n);
    if src.is_empty() || dst.is_empty() {
        return Ok((0.0, plan));
    }
    let ns = src.len();
    let mut costs = Vec::with_capacity(ns * dst.len());
    let mut columns = Vec::with_capacity(ns * dst.len());
    for (a, &j) in src.iter().enumerate() {
        for (b, &k) in dst.iter().enumerate() {
            costs.push(c.get(j, k));
            columns.push(vec![(a, 1.0), (ns + b, 1.0)]);
        }
    }
    let rhs: Vec<f64> = src
        .iter()
        .map(|&j| ms.masses()[j])
        .chain(dst.iter().map(|&k| md.masses()[k]))
        .collect();
    let mut lp = LpProblem::from_columns(costs, &columns, rhs, Sense::Equal)?;
    let nd = dst.len();
    lp.set_starting_columns(
        staircase(&lp.rhs()[..ns], &lp.rhs()[ns..])
            .into_iter()
            .map(|(a, b)| a * nd + b)
            .collect(),
    )?;
    let sol = solve_lp_default(&lp)?.into_optimal()?;
    for (v, &x) in sol.x.iter().enumerate() {
        if x > 0.0 {
            plan.set(src[v / dst.len()], dst[v % dst.len()], x);
        }
    }
    Ok((sol.value, plan))
}

/// W1 through the Hitchcock transportation LP with `|x_j − x_k|` costs.
pub fn w1_lp(ms: &DiscreteMeasure, md: &DiscreteMeasure) -> Result<(f64, TransportPlan)> {
    let c = cost_matrix(ms.grid(), 1.0)?;
    wp_lp(ms, md, &c)
}

/// Transportation LP with an arbitrary cost matrix; the value is `Σ c γ*`
/// (no outer root).
pub fn wp_lp(ms: &DiscreteMeasure, md: &DiscreteMeasure, c: &CostMatrix) -> Result<(f64, TransportPlan)> {
    check_balanced(ms, md, default_balance_tol(ms, md))?;
    if c.len() != ms.len() {
        return Err(Error::GridMismatch);
    }
    hitchcock(ms, md, c)
}

/// Cells `(a, b)` visited by the north-west corner rule on the mass lists
/// `s` and `d` (assumed balanced). They form a spanning tree of the
/// bipartite graph, hence a feasible transportation basis.
pub(crate) fn staircase(s: &[f64], d: &[f64]) -> Vec<(usize, usize)> {
    if s.is_empty() || d.is_empty() {
        return Vec::new();
    }
    let (mut a, mut b) = (0, 0);
    let (mut rs, mut rd) = (s[0], d[0]);
    let mut cells = vec![(0, 0)];
    while a + 1 < s.len() || b + 1 < d.len() {
        if b + 1 == d.len() || (a + 1 < s.len() && rs <= rd) {
            rd -= rs;
            a += 1;
            rs = s[a];
        } else {
            rs -= rd;
            b += 1;
            rd = d[b];
        }
        cells.push((a, b));
    }
    cells
}

/// Greedy left-to-right matching of cumulative masses.
pub fn monotone_plan(ms: &DiscreteMeasure, md: &DiscreteMeasure) -> Result<TransportPlan> {
    check_balanced(ms, md, default_balance_tol(ms, md))?;
    let n = ms.len();
    let mut plan = TransportPlan::zeros(n);
    let (s, d) = (ms.masses(), md.masses());
    let (mut j, mut k) = (0, 0);
    let (mut rs, mut rd) = (s[0], d[0]);
    while j < n && k < n {
        let q = rs.min(rd);
        if q > 0.0 {
            plan.add(j, k, q);
        }
        rs -= q;
        rd -= q;
        if rs <= 0.0 {
            j += 1;
            if j < n {
                rs = s[j];
            }
        }
        if rd <= 0.0 {
            k += 1;
            if k < n {
                rd = d[k];
            }
        }
    }
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{discretize, indicator};

    fn grid() -> Grid1D {
        Grid1D::new(0.0, 5.0, 50).unwrap()
    }

    #[test]
    fn identical_measures_have_zero_distance_and_diagonal_plan() {
        let g = grid();
        let m = discretize(|x| (-(x - 2.5) * (x - 2.5)).exp(), &g).unwrap();
        assert_eq!(w1_cdf(&m, &m, 1e-12).unwrap(), 0.0);
        let (v, plan) = w1_lp(&m, &m).unwrap();
        assert!(v.abs() < 1e-12);
        for j in 0..g.len() {
            for k in 0..g.len() {
                if j != k {
                    assert!(plan.get(j, k).abs() < 1e-12);
                }
            }
        }
        let mono = monotone_plan(&m, &m).unwrap();
        for j in 0..g.len() {
            assert!((mono.get(j, j) - m.masses()[j]).abs() < 1e-15);
        }
    }

    #[test]
    fn two_deltas() {
        let g = grid();
        let ms = DiscreteMeasure::from_atoms(g, &[(1.05, 0.3)]).unwrap();
        let md = DiscreteMeasure::from_atoms(g, &[(3.55, 0.3)]).unwrap();
        let expected = 0.3 * 2.5;
        assert!((w1_cdf(&ms, &md, 1e-12).unwrap() - expected).abs() < 1e-12);
        assert!((w1_lp(&ms, &md).unwrap().0 - expected).abs() < 1e-12);
    }

    #[test]
    fn translation_oracle() {
        let g = Grid1D::new(-3.0, 3.0, 600).unwrap();
        let ms = discretize(indicator(-1.0, 0.0, 1.0), &g).unwrap();
        let md = discretize(|x| indicator(-1.0, 0.0, 1.0)(x - 1.0), &g).unwrap();
        let tol = default_balance_tol(&ms, &md) + g.dx();
        let w = w1_cdf(&ms, &md, tol).unwrap();
        assert!((w - ms.total_mass()).abs() < 2.0 * g.dx());
    }

    #[test]
    fn crossing_case_ships_both_to_centre() {
        let g = Grid1D::from_barycenters(0.0, 0.5, 3).unwrap();
        let ms = DiscreteMeasure::from_atoms(g, &[(0.0, 1.0), (1.0, 1.0)]).unwrap();
        let md = DiscreteMeasure::from_atoms(g, &[(0.5, 2.0)]).unwrap();
        let plan = monotone_plan(&ms, &md).unwrap();
        assert_eq!(plan.get(0, 1), 1.0);
        assert_eq!(plan.get(2, 1), 1.0);
        let c = cost_matrix(&g, 1.0).unwrap();
        assert!((plan.cost(&c) - 1.0).abs() < 1e-15);
        assert!((w1_lp(&ms, &md).unwrap().0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unbalanced_rejected() {
        let g = grid();
        let ms = DiscreteMeasure::from_atoms(g, &[(1.05, 0.3)]).unwrap();
        let md = DiscreteMeasure::from_atoms(g, &[(3.55, 0.2)]).unwrap();
        assert!(matches!(w1_cdf(&ms, &md, 1e-9), Err(Error::Unbalanced { .. })));
        assert!(w1_lp(&ms, &md).is_err());
        assert!(monotone_plan(&ms, &md).is_err());
    }

    #[test]
    fn grid_mismatch_rejected() {
        let ms = DiscreteMeasure::zero(grid());
        let md = DiscreteMeasure::zero(Grid1D::new(0.0, 5.0, 51).unwrap());
        assert!(matches!(w1_cdf(&ms, &md, 1.0), Err(Error::GridMismatch)));
    }

    #[test]
    fn plan_csv_lists_nonzero_entries() {
        let g = grid();
        let ms = DiscreteMeasure::from_atoms(g, &[(1.05, 0.3)]).unwrap();
        let md = DiscreteMeasure::from_atoms(g, &[(3.55, 0.3)]).unwrap();
        let plan = monotone_plan(&ms, &md).unwrap();
        let mut out = Vec::new();
        plan.write_csv(&g, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("j,k,x_j,x_k,mass"));
    }
}
