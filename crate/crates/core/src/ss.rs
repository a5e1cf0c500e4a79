//! Cone-lifted primal computation of the Gaussian Hellinger–Kantorovich
//! distance (with `a = b = 1`).
//!
//! Each atom is split into subdivisions with radii `r`; a weight vector `Γ`
//! over all (supply subdivision, demand subdivision) pairs, summing to one,
//! determines the radii through the homogeneous marginal constraints
//! `m_j = Σ_h r_jh R_jh` with `R_jh` the total weight of subdivision `(j, h)`.
//! The least-norm solution of that underdetermined system is
//! `r_jh = m_j R_jh / ‖R_j‖²`. The cost is
//!
//! ```text
//! S(Γ) = Σ γ_(jh,kl) (r_jh + s_kl − 2 √(r_jh s_kl) e^{−|x_j − x_k|²/2})
//! ```
//!
//! minimised either over a simplex grid (exhaustive) or by random search
//! followed by pairwise descent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::DiscreteMeasure;

/// Largest number of weights accepted by [`ss_exhaustive`].
pub const MAX_EXHAUSTIVE_DIM: usize = 16;

/// Rows of `Γ` with norm below this are treated as empty.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeAtom {
    pub x: f64,
    pub mass: f64,
    pub subdivisions: usize,
}

impl ConeAtom {
    pub fn new(x: f64, mass: f64, subdivisions: usize) -> Self {
        Self {
            x,
            mass,
            subdivisions,
        }
    }
}

/// Supply and demand atoms; zero-mass atoms are dropped on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeProblem {
    supply: Vec<ConeAtom>,
    demand: Vec<ConeAtom>,
    /// Flattened subdivision -> atom.
    supply_owner: Vec<usize>,
    demand_owner: Vec<usize>,
    /// `e^{−|x_j − x_k|²/2}` per (supply subdivision, demand subdivision).
    kernel: Vec<f64>,
}

impl ConeProblem {
    pub fn new(supply: &[ConeAtom], demand: &[ConeAtom]) -> Result<Self> {
        let keep = |atoms: &[ConeAtom]| -> Result<Vec<ConeAtom>> {
            let mut out = Vec::new();
            for a in atoms {
                if !(a.x.is_finite() && a.mass.is_finite() && a.mass >= 0.0) {
                    return Err(Error::InvalidMeasure(format!("bad atom {a:?}")));
                }
                if a.mass > 0.0 {
                    if a.subdivisions == 0 {
                        return Err(Error::InvalidParameter(format!(
                            "atom with mass {} needs at least one subdivision",
                            a.mass
                        )));
                    }
                    out.push(*a);
                }
            }
            Ok(out)
        };
        let supply = keep(supply)?;
        let demand = keep(demand)?;
        let owners = |atoms: &[ConeAtom]| -> Vec<usize> {
            atoms
                .iter()
                .enumerate()
                .flat_map(|(i, a)| std::iter::repeat_n(i, a.subdivisions))
                .collect()
        };
        let supply_owner = owners(&supply);
        let demand_owner = owners(&demand);
        let mut kernel = Vec::with_capacity(supply_owner.len() * demand_owner.len());
        for &j in &supply_owner {
            for &k in &demand_owner {
                let d = supply[j].x - demand[k].x;
                kernel.push((-0.5 * d * d).exp());
            }
        }
        Ok(Self {
            supply,
            demand,
            supply_owner,
            demand_owner,
            kernel,
        })
    }

    /// Atoms at the barycentres of the supported cells, each split into
    /// `subdivisions` pieces.
    pub fn from_measures(ms: &DiscreteMeasure, md: &DiscreteMeasure, subdivisions: usize) -> Result<Self> {
        let atoms = |m: &DiscreteMeasure| -> Vec<ConeAtom> {
            m.support()
                .into_iter()
                .map(|i| ConeAtom::new(m.grid().barycenter(i), m.masses()[i], subdivisions))
                .collect()
        };
        Self::new(&atoms(ms), &atoms(md))
    }

    pub fn supply(&self) -> &[ConeAtom] {
        &self.supply
    }

    pub fn demand(&self) -> &[ConeAtom] {
        &self.demand
    }

    /// Number of weights `d = (Σ n^s)(Σ n^d)`.
    pub fn dim(&self) -> usize {
        self.supply_owner.len() * self.demand_owner.len()
    }

    fn n_demand_subdivisions(&self) -> usize {
        self.demand_owner.len()
    }
}

/// Weights `γ_(jh,kl)`, row-major over (supply subdivision, demand
/// subdivision).
#[derive(Debug, Clone, PartialEq)]
pub struct ConeWeights(pub Vec<f64>);

/// Radii per atom and subdivision.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeDiscretization {
    pub supply: Vec<Vec<f64>>,
    pub demand: Vec<Vec<f64>>,
}

impl ConeDiscretization {
    fn flat(v: &[Vec<f64>]) -> Vec<f64> {
        v.iter().flatten().copied().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsConfig {
    /// Resolution of the weight grid (exhaustive) or range of the random
    /// integer draws (random search).
    pub q: u32,
    /// Initial descent step.
    pub epsilon: f64,
    pub n_random: usize,
    pub n_descent: usize,
    pub seed: u64,
    /// Refuse exhaustive enumerations with more grid points than this.
    pub budget: u128,
}

impl Default for SsConfig {
    fn default() -> Self {
        Self {
            q: 1000,
            epsilon: 0.05,
            n_random: 1000,
            n_descent: 1000,
            seed: 0,
            budget: 100_000_000,
        }
    }
}

impl SsConfig {
    fn validate(&self) -> Result<()> {
        if self.q < 2 {
            return Err(Error::InvalidParameter(format!("need Q >= 2, got {}", self.q)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need epsilon > 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SsResult {
    pub value: f64,
    pub weights: ConeWeights,
    pub radii: ConeDiscretization,
    /// Weight vectors whose radii system was solvable.
    pub feasible: u64,
    pub infeasible: u64,
    /// Best value of the random phase (random search only).
    pub random_best: f64,
    /// Whether the descent phase lowered the random-phase value.
    pub improved_by_descent: bool,
}

/// Least-norm radii for `Γ`, or `None` when some atom's subdivisions all
/// carry zero weight.
pub fn min_norm_radii(problem: &ConeProblem, weights: &ConeWeights) -> Option<ConeDiscretization> {
    let (rows, cols) = marginals(problem, &weights.0);
    Some(ConeDiscretization {
        supply: radii_for(&problem.supply, &rows)?,
        demand: radii_for(&problem.demand, &cols)?,
    })
}

fn marginals(problem: &ConeProblem, w: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let nd = problem.n_demand_subdivisions();
    let mut rows = vec![0.0; problem.supply_owner.len()];
    let mut cols = vec![0.0; nd];
    for (i, &g) in w.iter().enumerate() {
        rows[i / nd] += g;
        cols[i % nd] += g;
    }
    (rows, cols)
}

fn radii_for(atoms: &[ConeAtom], weight: &[f64]) -> Option<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(atoms.len());
    let mut start = 0;
    for a in atoms {
        let r = &weight[start..start + a.subdivisions];
        start += a.subdivisions;
        let norm2: f64 = r.iter().map(|v| v * v).sum();
        if norm2.sqrt() <= RANK_TOL {
            return None;
        }
        out.push(r.iter().map(|v| a.mass * v / norm2).collect());
    }
    Some(out)
}

/// `S(Γ)` for given radii.
pub fn ss_objective(problem: &ConeProblem, weights: &ConeWeights, radii: &ConeDiscretization) -> f64 {
    let r = ConeDiscretization::flat(&radii.supply);
    let s = ConeDiscretization::flat(&radii.demand);
    objective_flat(problem, &weights.0, &r, &s)
}

fn objective_flat(problem: &ConeProblem, w: &[f64], r: &[f64], s: &[f64]) -> f64 {
    let nd = s.len();
    w.iter()
        .enumerate()
        .filter(|(_, g)| **g > 0.0)
        .map(|(i, g)| {
            let (ri, si) = (r[i / nd], s[i % nd]);
            g * (ri + si - 2.0 * (ri * si).sqrt() * problem.kernel[i])
        })
        .sum()
}

/// `S(Γ)` with least-norm radii, or `None` if infeasible.
fn evaluate(problem: &ConeProblem, w: &[f64]) -> Option<f64> {
    let (rows, cols) = marginals(problem, w);
    let r = ConeDiscretization::flat(&radii_for(&problem.supply, &rows)?);
    let s = ConeDiscretization::flat(&radii_for(&problem.demand, &cols)?);
    Some(objective_flat(problem, w, &r, &s))
}

/// `C(n, k)`, saturating.
fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Number of weight vectors with entries in `{0, 1/Q, …, 1}` summing to one.
pub fn simplex_grid_size(q: u32, d: usize) -> u128 {
    if d == 0 {
        return 0;
    }
    binomial(q as u128 + d as u128 - 1, d as u128 - 1)
}

fn trivial(problem: &ConeProblem) -> Option<SsResult> {
    if problem.dim() > 0 {
        return None;
    }
    // One side empty: every atom on the other side is created or destroyed.
    let value = problem.supply.iter().chain(&problem.demand).map(|a| a.mass).sum();
    let radii = |atoms: &[ConeAtom]| atoms.iter().map(|a| vec![0.0; a.subdivisions]).collect();
    Some(SsResult {
        value,
        weights: ConeWeights(Vec::new()),
        radii: ConeDiscretization {
            supply: radii(&problem.supply),
            demand: radii(&problem.demand),
        },
        feasible: 0,
        infeasible: 0,
        random_best: value,
        improved_by_descent: false,
    })
}

fn finish(problem: &ConeProblem, best: Vec<f64>, value: f64, feasible: u64, infeasible: u64) -> SsResult {
    let weights = ConeWeights(best);
    let radii = min_norm_radii(problem, &weights).expect("best weights are feasible");
    SsResult {
        value,
        weights,
        radii,
        feasible,
        infeasible,
        random_best: value,
        improved_by_descent: false,
    }
}

/// Minimum of `S` over every `Γ` on the simplex grid with step `1/Q`.
pub fn ss_exhaustive(problem: &ConeProblem, cfg: &SsConfig) -> Result<SsResult> {
    cfg.validate()?;
    if let Some(r) = trivial(problem) {
        return Ok(r);
    }
    let d = problem.dim();
    if d > MAX_EXHAUSTIVE_DIM {
        return Err(Error::InvalidParameter(format!(
            "exhaustive search supports at most {MAX_EXHAUSTIVE_DIM} weights, got {d}"
        )));
    }
    let required = simplex_grid_size(cfg.q, d);
    if required > cfg.budget {
        return Err(Error::BudgetExceeded {
            required,
            budget: cfg.budget,
        });
    }

    let q = cfg.q;
    let scale = 1.0 / q as f64;
    let mut counts = vec![0u32; d];
    counts[d - 1] = q;
    let mut w = vec![0.0; d];
    let mut best = Vec::new();
    let mut best_value = f64::INFINITY;
    let (mut feasible, mut infeasible) = (0u64, 0u64);
    loop {
        for (wi, &c) in w.iter_mut().zip(&counts) {
            *wi = c as f64 * scale;
        }
        match evaluate(problem, &w) {
            Some(v) => {
                feasible += 1;
                if v < best_value {
                    best_value = v;
                    best.clone_from(&w);
                }
            }
            None => infeasible += 1,
        }
        if !next_composition(&mut counts) {
            break;
        }
    }
    if best.is_empty() {
        return Err(Error::InvalidParameter(
            "no grid point gives a solvable radii system".into(),
        ));
    }
    Ok(finish(problem, best, best_value, feasible, infeasible))
}

/// Advances `counts` to the next weak composition of its sum in
/// lexicographic order, starting from `[0, …, 0, Q]`. Returns false after
/// `[Q, 0, …, 0]`.
fn next_composition(counts: &mut [u32]) -> bool {
    let d = counts.len();
    // The rightmost position whose suffix still holds units.
    let Some(last) = (1..d).rev().find(|&i| counts[i] > 0) else {
        return false;
    };
    let i = last - 1;
    let rest: u32 = counts[i + 1..].iter().sum();
    counts[i] += 1;
    counts[i + 1..].iter_mut().for_each(|c| *c = 0);
    counts[d - 1] = rest - 1;
    true
}

/// Random search over `Γ = ω / Σω` with `ω_z` uniform in `{1, …, Q}`,
/// followed by pairwise descent moves of size `min(ε, Γ_i)` accepted only on
/// improvement, with `ε` halved every quarter of the descent.
pub fn ss_random_descent(problem: &ConeProblem, cfg: &SsConfig) -> Result<SsResult> {
    cfg.validate()?;
    if let Some(r) = trivial(problem) {
        return Ok(r);
    }
    let d = problem.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut w = vec![0.0; d];
    let mut best = vec![1.0 / d as f64; d];
    let mut best_value = evaluate(problem, &best).expect("uniform weights are feasible");
    let (mut feasible, mut infeasible) = (1u64, 0u64);
    for _ in 0..cfg.n_random {
        let mut total = 0.0;
        for wi in w.iter_mut() {
            *wi = rng.random_range(1..=cfg.q) as f64;
            total += *wi;
        }
        w.iter_mut().for_each(|wi| *wi /= total);
        // Every entry is positive, so the radii system is always solvable.
        let v = evaluate(problem, &w).expect("positive weights are feasible");
        feasible += 1;
        if v < best_value {
            best_value = v;
            best.clone_from(&w);
        }
    }
    let random_best = best_value;

    let mut eps = cfg.epsilon;
    let quarter = (cfg.n_descent / 4).max(1);
    let mut current = best;
    if d >= 2 {
        for it in 0..cfg.n_descent {
            if it > 0 && it % quarter == 0 {
                eps *= 0.5;
            }
            let i = rng.random_range(0..d);
            let mut j = rng.random_range(0..d - 1);
            if j >= i {
                j += 1;
            }
            let delta = eps.min(current[i]);
            if delta <= 0.0 {
                continue;
            }
            let (old_i, old_j) = (current[i], current[j]);
            current[i] = if delta == old_i { 0.0 } else { old_i - delta };
            current[j] = old_j + delta;
            match evaluate(problem, &current) {
                Some(v) => {
                    feasible += 1;
                    if v < best_value {
                        best_value = v;
                        continue;
                    }
                }
                None => infeasible += 1,
            }
            current[i] = old_i;
            current[j] = old_j;
        }
    }
    let mut result = finish(problem, current, best_value, feasible, infeasible);
    result.random_best = random_best;
    result.improved_by_descent = best_value < random_best;
    Ok(result)
}
