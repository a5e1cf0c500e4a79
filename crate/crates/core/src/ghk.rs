//! Gaussian Hellinger–Kantorovich distance through its concave dual
//!
//! ```text
//! maximize  F(φ, ψ) = a Σ_j m^s_j (1 − e^{−bφ_j/a}) + a Σ_k m^d_k (1 − e^{−bψ_k/a})
//! subject to φ_j + ψ_k ≤ c_jk = |x_j − x_k|²
//! ```
//!
//! The maximisation runs a feasible primal–dual interior-point method on the
//! potentials of supported cells. Multipliers `λ` of the pair constraints
//! define a plan `γ = λ / b`, whose entropy–transport cost
//!
//! ```text
//! P(γ) = b Σ c γ + a Σ_j m^s_j U(γ_j· / m^s_j) + a Σ_k m^d_k U(γ_·k / m^d_k),  U(σ) = σ ln σ − σ + 1
//! ```
//!
//! bounds the dual optimum from above, so every iterate carries a certified
//! bracket `F ≤ optimum ≤ P`. Potentials of empty cells are filled in
//! afterwards by c-transforms, which keeps every constraint satisfied.

use nalgebra::{DMatrix, DVector};

use crate::classic::check_same_grid;
use crate::error::{Error, Result};
use crate::grid::DiscreteMeasure;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_BUDGET: usize = 500;

const STEP_TO_BOUNDARY: f64 = 0.99;
const CENTERING: f64 = 0.1;
/// Largest change of `bφ/a` allowed in one step; keeps the exponentials
/// finite.
const MAX_EXPONENT_STEP: f64 = 5.0;
/// Potential given to supported cells facing an empty opposite measure.
const SATURATING_EXPONENT: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GhkParams {
    pub a: f64,
    pub b: f64,
}

impl GhkParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        let p = Self { a, b };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if self.a > 0.0 && self.a.is_finite() && self.b > 0.0 && self.b.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "a and b must be positive, got a = {}, b = {}",
                self.a, self.b
            )))
        }
    }
}

impl Default for GhkParams {
    fn default() -> Self {
        Self { a: 1.0, b: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualPotentials {
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

impl DualPotentials {
    /// `max_jk (φ_j + ψ_k − c_jk)`, non-positive for feasible potentials.
    pub fn max_violation(&self, positions: &[f64]) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for (j, &xj) in positions.iter().enumerate() {
            for (k, &xk) in positions.iter().enumerate() {
                let d = xj - xk;
                worst = worst.max(self.phi[j] + self.psi[k] - d * d);
            }
        }
        worst
    }
}

#[derive(Debug, Clone)]
pub struct GhkSolution {
    /// Dual objective at the returned potentials (a certified lower bound).
    pub value: f64,
    /// Entropy–transport cost of the recovered plan (an upper bound).
    pub upper_bound: f64,
    pub potentials: DualPotentials,
    pub iterations: usize,
}

impl GhkSolution {
    /// Square root of the dual optimum, the quantity satisfying the metric
    /// axioms.
    pub fn metric(&self) -> f64 {
        self.value.max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GhkOptions {
    /// Relative duality-gap target.
    pub tol: f64,
    /// Maximum number of interior-point iterations.
    pub budget: usize,
}

impl Default for GhkOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            budget: DEFAULT_BUDGET,
        }
    }
}

/// `F(φ, ψ)` over all cells.
pub fn ghk_objective(
    ms: &DiscreteMeasure,
    md: &DiscreteMeasure,
    params: GhkParams,
    z: &DualPotentials,
) -> f64 {
    let GhkParams { a, b } = params;
    let term = |m: &[f64], p: &[f64]| -> f64 {
        m.iter()
            .zip(p)
            .filter(|(m, _)| **m > 0.0)
            .map(|(m, p)| a * m * (-(-b * p / a).exp_m1()))
            .sum()
    };
    term(ms.masses(), &z.phi) + term(md.masses(), &z.psi)
}

pub fn ghk_value(
    ms: &DiscreteMeasure,
    md: &DiscreteMeasure,
    params: GhkParams,
    tol: f64,
) -> Result<(f64, DualPotentials)> {
    let s = ghk_solve(ms, md, params, GhkOptions { tol, ..Default::default() })?;
    Ok((s.value, s.potentials))
}

pub fn ghk_solve_dual(
    ms: &DiscreteMeasure,
    md: &DiscreteMeasure,
    params: GhkParams,
    budget: usize,
) -> Result<DualPotentials> {
    let s = ghk_solve(ms, md, params, GhkOptions { budget, ..Default::default() })?;
    Ok(s.potentials)
}

pub fn ghk_solve(
    ms: &DiscreteMeasure,
    md: &DiscreteMeasure,
    params: GhkParams,
    options: GhkOptions,
) -> Result<GhkSolution> {
    check_same_grid(ms, md)?;
    params.validate()?;
    if !(options.tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {}",
            options.tol
        )));
    }
    let x = ms.grid().barycenters();
    let n = x.len();
    let src = ms.support();
    let dst = md.support();
    let GhkParams { a, b } = params;

    let mut phi = vec![0.0; n];
    let mut psi = vec![0.0; n];
    let (value, upper, iterations) = match (src.is_empty(), dst.is_empty()) {
        (true, true) => (0.0, 0.0, 0),
        (false, true) | (true, false) => {
            // Sup is approached as the free potentials grow; F saturates at
            // a·(total mass).
            let (cells, pot, total) = if dst.is_empty() {
                (&src, &mut phi, ms.total_mass())
            } else {
                (&dst, &mut psi, md.total_mass())
            };
            for &j in cells.iter() {
                pot[j] = SATURATING_EXPONENT * a / b;
            }
            (a * total, a * total, 0)
        }
        (false, false) => {
            let xs: Vec<f64> = src.iter().map(|&j| x[j]).collect();
            let xd: Vec<f64> = dst.iter().map(|&k| x[k]).collect();
            let mss: Vec<f64> = src.iter().map(|&j| ms.masses()[j]).collect();
            let mdd: Vec<f64> = dst.iter().map(|&k| md.masses()[k]).collect();
            let ipm = Ipm::new(&xs, &xd, &mss, &mdd, params).run(options)?;
            for (i, &j) in src.iter().enumerate() {
                phi[j] = ipm.phi[i];
            }
            for (i, &k) in dst.iter().enumerate() {
                psi[k] = ipm.psi[i];
            }
            (ipm.lower, ipm.upper, ipm.iterations)
        }
    };

    // c-transforms for empty cells: first demand against supported supply,
    // then supply against every demand potential.
    let cost = |j: usize, k: usize| (x[j] - x[k]) * (x[j] - x[k]);
    let in_src = membership(n, &src);
    let in_dst = membership(n, &dst);
    let free_phi = SATURATING_EXPONENT * a / b;
    for k in (0..n).filter(|&k| !in_dst[k]) {
        psi[k] = if src.is_empty() {
            0.0
        } else {
            src.iter().map(|&j| cost(j, k) - phi[j]).fold(f64::INFINITY, f64::min)
        };
    }
    for j in (0..n).filter(|&j| !in_src[j]) {
        let bound = (0..n).map(|k| cost(j, k) - psi[k]).fold(f64::INFINITY, f64::min);
        phi[j] = bound.min(free_phi);
    }

    Ok(GhkSolution {
        value,
        upper_bound: upper,
        potentials: DualPotentials { phi, psi },
        iterations,
    })
}

fn membership(n: usize, idx: &[usize]) -> Vec<bool> {
    let mut v = vec![false; n];
    for &i in idx {
        v[i] = true;
    }
    v
}

/// `U(σ) = σ ln σ − σ + 1`, with `U(0) = 1`.
fn entropy(sigma: f64) -> f64 {
    if sigma <= 0.0 {
        1.0
    } else {
        sigma * sigma.ln() - sigma + 1.0
    }
}

struct Ipm<'a> {
    ms: &'a [f64],
    md: &'a [f64],
    a: f64,
    b: f64,
    /// Pair costs, row-major `ns × nd`.
    c: Vec<f64>,
    phi: Vec<f64>,
    psi: Vec<f64>,
    s: Vec<f64>,
    lambda: Vec<f64>,
}

struct IpmResult {
    phi: Vec<f64>,
    psi: Vec<f64>,
    lower: f64,
    upper: f64,
    iterations: usize,
}

impl<'a> Ipm<'a> {
    fn new(xs: &[f64], xd: &[f64], ms: &'a [f64], md: &'a [f64], params: GhkParams) -> Self {
        let (ns, nd) = (xs.len(), xd.len());
        let mut c = Vec::with_capacity(ns * nd);
        for &xj in xs {
            for &xk in xd {
                c.push((xj - xk) * (xj - xk));
            }
        }
        let phi = vec![-1.0; ns];
        let psi = vec![-1.0; nd];
        let s: Vec<f64> = c.iter().map(|c| c + 2.0).collect();
        let mut ipm = Self {
            ms,
            md,
            a: params.a,
            b: params.b,
            c,
            phi,
            psi,
            s,
            lambda: Vec::new(),
        };
        let gs = ipm.gradient(ms, &ipm.phi);
        let gd = ipm.gradient(md, &ipm.psi);
        ipm.lambda = (0..ns * nd)
            .map(|p| 0.5 * (gs[p / nd] / nd as f64 + gd[p % nd] / ns as f64))
            .collect();
        ipm
    }

    /// `∂F/∂φ_j = b m_j e^{−bφ_j/a}`.
    fn gradient(&self, m: &[f64], p: &[f64]) -> Vec<f64> {
        m.iter()
            .zip(p)
            .map(|(m, p)| self.b * m * (-self.b * p / self.a).exp())
            .collect()
    }

    fn dual(&self) -> f64 {
        let t = |m: &[f64], p: &[f64]| -> f64 {
            m.iter()
                .zip(p)
                .map(|(m, p)| self.a * m * (-(-self.b * p / self.a).exp_m1()))
                .sum()
        };
        t(self.ms, &self.phi) + t(self.md, &self.psi)
    }

    fn primal(&self) -> f64 {
        let nd = self.psi.len();
        let mut rows = vec![0.0; self.phi.len()];
        let mut cols = vec![0.0; nd];
        let mut transport = 0.0;
        for (p, &l) in self.lambda.iter().enumerate() {
            let g = l / self.b;
            rows[p / nd] += g;
            cols[p % nd] += g;
            transport += self.b * self.c[p] * g;
        }
        let ent = |m: &[f64], r: &[f64]| -> f64 {
            m.iter().zip(r).map(|(m, r)| self.a * m * entropy(r / m)).sum()
        };
        transport + ent(self.ms, &rows) + ent(self.md, &cols)
    }

    fn run(mut self, options: GhkOptions) -> Result<IpmResult> {
        let (ns, nd) = (self.phi.len(), self.psi.len());
        let pairs = (ns * nd) as f64;
        let (a, b) = (self.a, self.b);
        let mut lower = self.dual();
        let mut upper = self.primal();
        for it in 0..options.budget {
            if upper - lower <= options.tol * lower.abs().max(1.0) {
                return Ok(IpmResult {
                    phi: self.phi,
                    psi: self.psi,
                    lower,
                    upper,
                    iterations: it,
                });
            }
            let mu = self.s.iter().zip(&self.lambda).map(|(s, l)| s * l).sum::<f64>() / pairs;
            let target = CENTERING * mu;

            let gs = self.gradient(self.ms, &self.phi);
            let gd = self.gradient(self.md, &self.psi);
            // −F'' = (b/a) F'.
            let mut d1: Vec<f64> = gs.iter().map(|g| g * b / a).collect();
            let mut d2: Vec<f64> = gd.iter().map(|g| g * b / a).collect();
            let mut r1 = gs;
            let mut r2 = gd;
            let mut w = vec![0.0; ns * nd];
            for j in 0..ns {
                for k in 0..nd {
                    let p = j * nd + k;
                    let wjk = self.lambda[p] / self.s[p];
                    w[p] = wjk;
                    d1[j] += wjk;
                    d2[k] += wjk;
                    let inv = target / self.s[p];
                    r1[j] -= inv;
                    r2[k] -= inv;
                }
            }
            let (dphi, dpsi) = solve_arrow(&d1, &d2, &w, &r1, &r2);

            let mut alpha: f64 = 1.0;
            let mut ds = vec![0.0; ns * nd];
            let mut dl = vec![0.0; ns * nd];
            for j in 0..ns {
                for k in 0..nd {
                    let p = j * nd + k;
                    ds[p] = -(dphi[j] + dpsi[k]);
                    dl[p] = target / self.s[p] - self.lambda[p] - w[p] * ds[p];
                    if ds[p] < 0.0 {
                        alpha = alpha.min(-STEP_TO_BOUNDARY * self.s[p] / ds[p]);
                    }
                    if dl[p] < 0.0 {
                        alpha = alpha.min(-STEP_TO_BOUNDARY * self.lambda[p] / dl[p]);
                    }
                }
            }
            let largest = dphi.iter().chain(&dpsi).fold(0.0_f64, |m, d| m.max(d.abs()));
            if largest * b / a * alpha > MAX_EXPONENT_STEP {
                alpha = MAX_EXPONENT_STEP * a / (b * largest);
            }

            for (p, d) in self.phi.iter_mut().zip(&dphi) {
                *p += alpha * d;
            }
            for (p, d) in self.psi.iter_mut().zip(&dpsi) {
                *p += alpha * d;
            }
            for j in 0..ns {
                for k in 0..nd {
                    let p = j * nd + k;
                    // Recomputed rather than updated so that feasibility does
                    // not drift.
                    let s = self.c[p] - self.phi[j] - self.psi[k];
                    self.s[p] = if s > 0.0 { s } else { (self.s[p] + alpha * ds[p]).max(f64::MIN_POSITIVE) };
                    self.lambda[p] += alpha * dl[p];
                }
            }
            lower = self.dual();
            upper = self.primal();
        }
        if upper - lower <= options.tol * lower.abs().max(1.0) {
            return Ok(IpmResult {
                phi: self.phi,
                psi: self.psi,
                lower,
                upper,
                iterations: options.budget,
            });
        }
        Err(Error::NotConverged {
            iterations: options.budget,
            lower,
            upper,
        })
    }
}

/// Solves `[diag(d1) W; Wᵀ diag(d2)] (x1, x2) = (r1, r2)` through the Schur
/// complement on the smaller block.
fn solve_arrow(d1: &[f64], d2: &[f64], w: &[f64], r1: &[f64], r2: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (n1, n2) = (d1.len(), d2.len());
    if n1 < n2 {
        let mut wt = vec![0.0; n1 * n2];
        for j in 0..n1 {
            for k in 0..n2 {
                wt[k * n1 + j] = w[j * n2 + k];
            }
        }
        let (x2, x1) = solve_arrow(d2, d1, &wt, r2, r1);
        return (x1, x2);
    }
    // S = diag(d2) − Wᵀ diag(d1)⁻¹ W
    let mut s = DMatrix::<f64>::zeros(n2, n2);
    let mut rhs = DVector::<f64>::from_column_slice(r2);
    for j in 0..n1 {
        let row = &w[j * n2..(j + 1) * n2];
        let inv = 1.0 / d1[j];
        for k in 0..n2 {
            let f = row[k] * inv;
            if f == 0.0 {
                continue;
            }
            rhs[k] -= f * r1[j];
            for l in 0..=k {
                s[(k, l)] -= f * row[l];
            }
        }
    }
    for k in 0..n2 {
        s[(k, k)] += d2[k];
        for l in 0..k {
            s[(l, k)] = s[(k, l)];
        }
    }
    let x2: Vec<f64> = match s.clone().cholesky() {
        Some(ch) => ch.solve(&rhs).iter().copied().collect(),
        None => s
            .lu()
            .solve(&rhs)
            .map(|v| v.iter().copied().collect())
            .unwrap_or_else(|| vec![0.0; n2]),
    };
    let x1 = (0..n1)
        .map(|j| {
            let row = &w[j * n2..(j + 1) * n2];
            (r1[j] - row.iter().zip(&x2).map(|(a, b)| a * b).sum::<f64>()) / d1[j]
        })
        .collect();
    (x1, x2)
}

/// `m^s + m^d − 2√(m^s m^d) e^{−Δ²/2}`: the value for one atom on each side
/// when `a = b = 1`.
pub fn single_atom_value(ms: f64, md: f64, delta: f64) -> f64 {
    ms + md - 2.0 * (ms * md).sqrt() * (-0.5 * delta * delta).exp()
}
