//! Reference instances, the moving-indicator comparison and the three traffic
//! sensitivity experiments, with CSV output.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::classic::{wp_lp, TransportPlan};
use crate::error::{Error, Result};
use crate::fg::fg_distance;
use crate::ghk::{ghk_solve, single_atom_value, GhkOptions, GhkParams};
use crate::grid::{cost_matrix, discretize, indicator, DiscreteMeasure, Grid1D};
use crate::pr::{pr_distance, PrParams};
use crate::ss::{ss_exhaustive, ss_random_descent, ConeAtom, ConeProblem, SsConfig};
use crate::traffic::{
    godunov_flux, random_flux_series, run_simulation, ArzParams, BoundarySpec, Model, Signal,
    SimulationConfig, SimulationRun, TrafficLight, TrafficState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    W1,
    Fg,
    Pr,
    Ghk,
    Ss,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::W1, Method::Fg, Method::Pr, Method::Ghk, Method::Ss];

    pub fn name(&self) -> &'static str {
        match self {
            Method::W1 => "w1",
            Method::Fg => "fg",
            Method::Pr => "pr",
            Method::Ghk => "ghk",
            Method::Ss => "ss",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method `{s}` (w1, fg, pr, ghk, ss)")))
    }
}

/// Parses a comma-separated method list.
pub fn parse_methods(s: &str) -> Result<Vec<Method>> {
    s.split(',').map(|m| m.trim().parse()).collect()
}

/// Parameters shared by all methods; each method reads what it needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceParams {
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub ss: SsConfig,
    pub ss_subdivisions: usize,
}

impl Default for DistanceParams {
    fn default() -> Self {
        Self {
            a: 1.0,
            b: 1.0,
            p: 1.0,
            ss: SsConfig::default(),
            ss_subdivisions: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Distance {
    pub value: f64,
    pub plan: Option<TransportPlan>,
}

/// Distance between two measures on the same grid. `fg` requires empty
/// boundary cells; `w1` requires equal total masses; `ss` only accepts
/// `a = b = 1`.
pub fn compute_distance(
    method: Method,
    ms: &DiscreteMeasure,
    md: &DiscreteMeasure,
    params: &DistanceParams,
) -> Result<Distance> {
    match method {
        Method::W1 => {
            let c = cost_matrix(ms.grid(), params.p)?;
            let (v, plan) = wp_lp(ms, md, &c)?;
            let value = if params.p == 1.0 { v } else { v.max(0.0).powf(1.0 / params.p) };
            Ok(Distance {
                value,
                plan: Some(plan),
            })
        }
        Method::Fg => {
            let s = fg_distance(ms, md, params.p)?;
            Ok(Distance {
                value: s.value,
                plan: Some(s.plan),
            })
        }
        Method::Pr => {
            let s = pr_distance(ms, md, PrParams::new(params.a, params.b, params.p)?)?;
            Ok(Distance {
                value: s.value,
                plan: Some(s.plan),
            })
        }
        Method::Ghk => {
            let s = ghk_solve(ms, md, GhkParams::new(params.a, params.b)?, GhkOptions::default())?;
            Ok(Distance {
                value: s.value,
                plan: None,
            })
        }
        Method::Ss => {
            require_unit_weights(params.a, params.b)?;
            let problem = ConeProblem::from_measures(ms, md, params.ss_subdivisions)?;
            let r = ss_random_descent(&problem, &params.ss)?;
            Ok(Distance {
                value: r.value,
                plan: None,
            })
        }
    }
}

fn require_unit_weights(a: f64, b: f64) -> Result<()> {
    if a == 1.0 && b == 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "the cone formulation is only available for a = b = 1, got a = {a}, b = {b}"
        )))
    }
}

/// CSV table with `#` comment lines above the header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(comments: Vec<String>, header: &[&str]) -> Self {
        Self {
            comments,
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        for c in &self.comments {
            writeln!(writer, "# {c}")?;
        }
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut out = Vec::new();
        self.write_csv(&mut out)?;
        Ok(String::from_utf8(out).expect("csv output is UTF-8"))
    }

    /// Values of a numeric column.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        self.rows.iter().map(|r| r[i].parse().ok()).collect()
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn provenance(experiment: &str, params: &[(&str, String)]) -> Vec<String> {
    let mut c = vec![
        format!("experiment = {experiment}"),
        format!("generator = gwd-core {}", env!("CARGO_PKG_VERSION")),
    ];
    c.extend(params.iter().map(|(k, v)| format!("{k} = {v}")));
    c
}

// Reference instances.

/// Barycentres `0, 0.1, …, 5`, so that atoms and the reservoir cells sit at
/// the nominal positions of the two-atom test.
pub fn fg_test1_grid() -> Grid1D {
    Grid1D::from_barycenters(0.0, 0.1, 51).expect("valid grid")
}

/// Case 1 (`1`): interior transport only. Case 2 (`2`): both boundaries
/// are used.
pub fn fg_test1_measures(case: u8) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    let g = fg_test1_grid();
    let (supply, demand): (&[(f64, f64)], &[(f64, f64)]) = match case {
        1 => (&[(1.0, 0.1), (2.5, 0.1)], &[(3.0, 0.2)]),
        2 => (&[(0.5, 0.1), (2.5, 0.1)], &[(4.0, 0.2)]),
        _ => return Err(Error::InvalidParameter(format!("unknown case {case}"))),
    };
    Ok((
        DiscreteMeasure::from_atoms(g, supply)?,
        DiscreteMeasure::from_atoms(g, demand)?,
    ))
}

/// `e^{−x²}` against `e^{−(x−3)²}/4` on `[−5, 5]` with empty boundary cells.
pub fn fg_test2_measures(n_cells: usize) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    let g = Grid1D::new(-5.0, 5.0, n_cells)?;
    let ms = discretize(|x| (-x * x).exp(), &g)?.with_empty_boundary();
    let md = discretize(|x| (-(x - 3.0) * (x - 3.0)).exp() / 4.0, &g)?.with_empty_boundary();
    Ok((ms, md))
}

/// `χ_[−1,0]` against `χ_[ξ,1+ξ]` on `[−2, 5]`.
pub fn pr_test1_measures(xi: f64, n_cells: usize) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    let g = Grid1D::new(-2.0, 5.0, n_cells)?;
    Ok((
        discretize(indicator(-1.0, 0.0, 1.0), &g)?,
        discretize(indicator(xi, 1.0 + xi, 1.0), &g)?,
    ))
}

/// Closed form of the flat distance between the two unit indicators.
pub fn pr_test1_exact(xi: f64) -> f64 {
    if xi <= 2.0 {
        1.0 + xi - xi * xi / 4.0
    } else {
        2.0
    }
}

/// `e^{1−x}/5 · χ_[−2,0]` against `e^{−(x−1)²}` on `[−4, 4]`.
pub fn pr_test2_measures(n_cells: usize) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    let g = Grid1D::new(-4.0, 4.0, n_cells)?;
    Ok((
        discretize(
            |x| if (-2.0..=0.0).contains(&x) { (1.0 - x).exp() / 5.0 } else { 0.0 },
            &g,
        )?,
        discretize(|x| (-(x - 1.0) * (x - 1.0)).exp(), &g)?,
    ))
}

/// Two supply atoms `(0, 2)` split in 2 and `(1, 1)` unsplit against one
/// demand atom `(3, 4)` split in 4.
pub fn ss_test2_problem() -> ConeProblem {
    ConeProblem::new(
        &[ConeAtom::new(0.0, 2.0, 2), ConeAtom::new(1.0, 1.0, 1)],
        &[ConeAtom::new(3.0, 4.0, 4)],
    )
    .expect("valid atoms")
}

/// `α χ_[−t−η, −t+η]` and `β χ_[t−η, t+η]` on `[−T−η, T+η]`.
pub fn comparison_measures(
    cfg: &ComparisonConfig,
    t: f64,
) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    let half = cfg.t_max + cfg.eta;
    let g = Grid1D::new(-half, half, cfg.n_cells)?;
    Ok((
        discretize(indicator(-t - cfg.eta, -t + cfg.eta, cfg.alpha), &g)?,
        discretize(indicator(t - cfg.eta, t + cfg.eta, cfg.beta), &g)?,
    ))
}

// Paper tables.

pub fn fg_test1() -> Result<Table> {
    let mut t = Table::new(
        provenance("fg_test1", &[("grid", "51 cells of width 0.1 centred on 0, 0.1, ..., 5".into()), ("p", "1".into())]),
        &["case", "value", "boundary_supply", "boundary_demand"],
    );
    for case in [1, 2] {
        let (ms, md) = fg_test1_measures(case)?;
        let s = fg_distance(&ms, &md, 1.0)?;
        t.push(vec![
            format!("1.{case}"),
            num(s.value),
            num(s.boundary.supply()),
            num(s.boundary.demand()),
        ]);
    }
    Ok(t)
}

pub fn fg_test2(n_cells: usize) -> Result<Table> {
    let (ms, md) = fg_test2_measures(n_cells)?;
    let s = fg_distance(&ms, &md, 1.0)?;
    let mut t = Table::new(
        provenance("fg_test2", &[("domain", "[-5, 5]".into()), ("n_cells", n_cells.to_string()), ("p", "1".into())]),
        &["n_cells", "value", "boundary_supply", "boundary_demand"],
    );
    t.push(vec![
        n_cells.to_string(),
        num(s.value),
        num(s.boundary.supply()),
        num(s.boundary.demand()),
    ]);
    Ok(t)
}

pub fn pr_test1(n_cells: usize) -> Result<Table> {
    let mut t = Table::new(
        provenance("pr_test1", &[("domain", "[-2, 5]".into()), ("n_cells", n_cells.to_string()), ("a", "1".into()), ("b", "1".into()), ("p", "1".into())]),
        &["xi", "value", "exact"],
    );
    for i in 0..=12 {
        let xi = 0.25 * i as f64;
        let (ms, md) = pr_test1_measures(xi, n_cells)?;
        let s = pr_distance(&ms, &md, PrParams::default())?;
        t.push(vec![num(xi), num(s.value), num(pr_test1_exact(xi))]);
    }
    Ok(t)
}

pub fn pr_test2(n_cells: usize) -> Result<Table> {
    let (ms, md) = pr_test2_measures(n_cells)?;
    let s = pr_distance(&ms, &md, PrParams::default())?;
    let mut t = Table::new(
        provenance("pr_test2", &[("domain", "[-4, 4]".into()), ("n_cells", n_cells.to_string()), ("a", "1".into()), ("b", "1".into()), ("p", "1".into())]),
        &["value", "destroyed_or_created"],
    );
    t.push(vec![num(s.value), num(s.created_and_destroyed())]);
    Ok(t)
}

/// Single atoms: equal unit masses at growing distance (`panel = distance`)
/// and coincident atoms with growing mass difference (`panel = mass`).
pub fn ghk_test1(ss: &SsConfig) -> Result<Table> {
    let mut t = Table::new(
        provenance("ghk_test1", &[("a", "1".into()), ("b", "1".into()), ("ss_q", ss.q.to_string()), ("ss_seed", ss.seed.to_string())]),
        &["panel", "delta", "m_s", "m_d", "ghk", "ss_a", "ss_b", "exact"],
    );
    let exhaustive = SsConfig { q: 20, ..*ss };
    let g = Grid1D::from_barycenters(0.0, 0.25, 25).expect("valid grid");
    let mut cases = Vec::new();
    for i in 0..=24 {
        cases.push(("distance", 0.25 * i as f64, 1.0, 1.0));
    }
    for i in 0..=28 {
        let d = 0.25 * i as f64;
        cases.push(("mass", d, 1.0, 1.0 + d));
    }
    for (panel, delta, m_s, m_d) in cases {
        let shift = if panel == "distance" { delta } else { 0.0 };
        let ms = DiscreteMeasure::from_atoms(g, &[(0.0, m_s)])?;
        let md = DiscreteMeasure::from_atoms(g, &[(shift, m_d)])?;
        let ghk = ghk_solve(&ms, &md, GhkParams::default(), GhkOptions::default())?.value;
        let problem = ConeProblem::from_measures(&ms, &md, 2)?;
        let a = ss_exhaustive(&problem, &exhaustive)?.value;
        let b = ss_random_descent(&problem, ss)?.value;
        t.push(vec![
            panel.to_string(),
            num(delta),
            num(m_s),
            num(m_d),
            num(ghk),
            num(a),
            num(b),
            num(single_atom_value(m_s, m_d, shift)),
        ]);
    }
    Ok(t)
}

pub fn ss_test2(exhaustive_q: u32, ss: &SsConfig) -> Result<Table> {
    let problem = ss_test2_problem();
    let a = ss_exhaustive(&problem, &SsConfig { q: exhaustive_q, ..*ss })?;
    let b = ss_random_descent(&problem, ss)?;
    let mut t = Table::new(
        provenance(
            "ss_test2",
            &[
                ("supply", "(x=0, m=2, n=2), (x=1, m=1, n=1)".into()),
                ("demand", "(x=3, m=4, n=4)".into()),
                ("exhaustive_q", exhaustive_q.to_string()),
                ("random_q", ss.q.to_string()),
                ("epsilon", ss.epsilon.to_string()),
                ("n_random", ss.n_random.to_string()),
                ("n_descent", ss.n_descent.to_string()),
                ("seed", ss.seed.to_string()),
            ],
        ),
        &["algorithm", "value", "feasible", "infeasible", "random_phase_best"],
    );
    t.push(vec!["exhaustive".into(), num(a.value), a.feasible.to_string(), a.infeasible.to_string(), String::new()]);
    t.push(vec![
        "random_descent".into(),
        num(b.value),
        b.feasible.to_string(),
        b.infeasible.to_string(),
        num(b.random_best),
    ]);
    Ok(t)
}

// Moving indicators.

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonConfig {
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
    pub t_max: f64,
    pub n_samples: usize,
    pub n_cells: usize,
    pub methods: Vec<Method>,
    pub pr: PrParams,
    pub ghk: GhkParams,
    /// Cone formulation: atoms per distribution, subdivisions per atom,
    /// search settings and number of averaged runs.
    pub ss_atoms: usize,
    pub ss_subdivisions: usize,
    pub ss: SsConfig,
    pub ss_runs: usize,
}

impl ComparisonConfig {
    /// Methods default to `w1, fg, pr, ghk` when balanced and `fg, pr, ghk`
    /// otherwise.
    pub fn new(alpha: f64) -> Self {
        let balanced = alpha == 2.0;
        let mut methods = vec![Method::Fg, Method::Pr, Method::Ghk];
        if balanced {
            methods.insert(0, Method::W1);
        }
        Self {
            alpha,
            beta: 2.0,
            eta: 1.0,
            t_max: 4.0,
            n_samples: 41,
            n_cells: 100,
            methods,
            pr: PrParams::new(2.5, 1.0, 1.0).expect("valid"),
            ghk: GhkParams::default(),
            ss_atoms: 4,
            ss_subdivisions: 4,
            ss: SsConfig {
                q: 1000,
                epsilon: 0.001,
                n_random: 5000,
                n_descent: 40_000,
                ..SsConfig::default()
            },
            ss_runs: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.beta > 0.0 && self.eta > 0.0 && self.t_max > 0.0) {
            return Err(Error::InvalidParameter(
                "alpha, beta, eta and T must be positive".into(),
            ));
        }
        if self.n_samples < 2 {
            return Err(Error::InvalidParameter("need at least two time samples".into()));
        }
        if self.methods.contains(&Method::Ss) && (self.ss_atoms == 0 || self.ss_runs == 0) {
            return Err(Error::InvalidParameter("ss needs atoms and runs".into()));
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        let n = self.n_samples - 1;
        (0..=n).map(|i| self.t_max * i as f64 / n as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub t: f64,
    pub method: Method,
    pub value: f64,
}

/// Groups the support of `m` into `atoms` runs of consecutive cells, each
/// replaced by one atom at its centre of mass.
pub fn lump_atoms(m: &DiscreteMeasure, atoms: usize, subdivisions: usize) -> Vec<ConeAtom> {
    let support = m.support();
    if support.is_empty() {
        return Vec::new();
    }
    let k = atoms.min(support.len());
    (0..k)
        .map(|i| {
            let cells = &support[i * support.len() / k..(i + 1) * support.len() / k];
            let mass: f64 = cells.iter().map(|&c| m.masses()[c]).sum();
            let x = cells.iter().map(|&c| m.masses()[c] * m.grid().barycenter(c)).sum::<f64>() / mass;
            ConeAtom::new(x, mass, subdivisions)
        })
        .collect()
}

pub fn run_comparison(cfg: &ComparisonConfig) -> Result<Vec<ComparisonRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for t in cfg.times() {
        let (ms, md) = comparison_measures(cfg, t)?;
        for &method in &cfg.methods {
            let value = match method {
                Method::W1 => wp_lp(&ms, &md, &cost_matrix(ms.grid(), 1.0)?)?.0,
                Method::Fg => fg_distance(&ms.with_empty_boundary(), &md.with_empty_boundary(), 1.0)?.value,
                Method::Pr => pr_distance(&ms, &md, cfg.pr)?.value,
                Method::Ghk => ghk_solve(&ms, &md, cfg.ghk, GhkOptions::default())?.value,
                Method::Ss => {
                    let problem = ConeProblem::new(
                        &lump_atoms(&ms, cfg.ss_atoms, cfg.ss_subdivisions),
                        &lump_atoms(&md, cfg.ss_atoms, cfg.ss_subdivisions),
                    )?;
                    let mut total = 0.0;
                    for r in 0..cfg.ss_runs {
                        let run_cfg = SsConfig { seed: cfg.ss.seed.wrapping_add(r as u64), ..cfg.ss };
                        total += ss_random_descent(&problem, &run_cfg)?.value;
                    }
                    total / cfg.ss_runs as f64
                }
            };
            rows.push(ComparisonRow { t, method, value });
        }
    }
    Ok(rows)
}

pub fn comparison_table(cfg: &ComparisonConfig, rows: &[ComparisonRow]) -> Table {
    let methods: Vec<&str> = cfg.methods.iter().map(Method::name).collect();
    let mut t = Table::new(
        provenance(
            "comparison",
            &[
                ("alpha", num(cfg.alpha)),
                ("beta", num(cfg.beta)),
                ("eta", num(cfg.eta)),
                ("T", num(cfg.t_max)),
                ("n_cells", cfg.n_cells.to_string()),
                ("samples", cfg.n_samples.to_string()),
                ("methods", methods.join(",")),
                ("pr", format!("a = {}, b = {}", cfg.pr.a, cfg.pr.b)),
                ("ghk", format!("a = {}, b = {}", cfg.ghk.a, cfg.ghk.b)),
                ("fg", "boundary cells emptied".into()),
            ],
        ),
        &["t", "method", "value"],
    );
    for r in rows {
        t.push(vec![num(r.t), r.method.name().into(), num(r.value)]);
    }
    t
}

// Traffic experiments.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrafficExperiment {
    /// Measured random boundary fluxes against their forecast average.
    BoundaryForecast,
    /// Traffic-light cycles of 50 against 40 steps.
    LightCycle,
    /// First-order against second-order model.
    ModelOrder,
}

impl TrafficExperiment {
    pub fn id(&self) -> &'static str {
        match self {
            TrafficExperiment::BoundaryForecast => "traffic1",
            TrafficExperiment::LightCycle => "traffic2",
            TrafficExperiment::ModelOrder => "traffic3",
        }
    }

    /// Creation/destruction price for `pr`: 0.5 for the model-order test,
    /// 2.5 (as in the indicator comparison) otherwise.
    pub fn default_pr(&self) -> PrParams {
        let a = match self {
            TrafficExperiment::ModelOrder => 0.5,
            _ => 2.5,
        };
        PrParams::new(a, 1.0, 1.0).expect("valid")
    }

    /// Supply and demand scenarios.
    pub fn scenarios(&self, seed: u64, sample_every: usize) -> Result<(SimulationConfig, SimulationConfig)> {
        match self {
            TrafficExperiment::BoundaryForecast => {
                let grid = Grid1D::new(0.0, 40.0, 100)?;
                let (dt, t0, t_end): (f64, f64, f64) = (0.25, -10.0, 30.0);
                let steps = ((t_end - t0) / dt).round() as usize;
                let (fin, fout) = random_flux_series(seed, steps, 0.25, godunov_flux(0.2, 0.2)?);
                // Steps starting at t >= 0 use the forecast mean in the demand
                // scenario.
                let now = ((0.0 - t0) / dt).round() as usize;
                let mean = |s: &[f64]| s[now..].iter().sum::<f64>() / (steps - now) as f64;
                let forecast = |s: &[f64]| {
                    let m = mean(s);
                    s.iter().enumerate().map(|(n, &v)| if n < now { v } else { m }).collect()
                };
                let supply = SimulationConfig {
                    model: Model::Lwr,
                    grid,
                    dt,
                    t0,
                    t_end,
                    initial: vec![0.2; grid.len()],
                    initial_v: None,
                    boundary: BoundarySpec::flux(Signal::Series(fin.clone()), Signal::Series(fout.clone())),
                    lights: Vec::new(),
                    sample_every,
                };
                let demand = SimulationConfig {
                    boundary: BoundarySpec::flux(Signal::Series(forecast(&fin)), Signal::Series(forecast(&fout))),
                    ..supply.clone()
                };
                Ok((supply, demand))
            }
            TrafficExperiment::LightCycle => {
                let grid = Grid1D::new(0.0, 4.0, 100)?;
                let supply = SimulationConfig {
                    model: Model::Lwr,
                    grid,
                    dt: 0.025,
                    t0: 0.0,
                    t_end: 20.0,
                    initial: vec![0.0; grid.len()],
                    initial_v: None,
                    boundary: BoundarySpec::dirichlet(0.4, 0.0),
                    lights: vec![TrafficLight::new(50, 50, 50)?],
                    sample_every,
                };
                let demand = SimulationConfig {
                    lights: vec![TrafficLight::new(50, 40, 40)?],
                    ..supply.clone()
                };
                Ok((supply, demand))
            }
            TrafficExperiment::ModelOrder => {
                let grid = Grid1D::new(0.0, 4.0, 200)?;
                let initial = grid
                    .barycenters()
                    .into_iter()
                    .map(|x| if (1.6..=2.4).contains(&x) { 0.7 } else { 0.1 })
                    .collect();
                let supply = SimulationConfig {
                    model: Model::Lwr,
                    grid,
                    dt: 0.01,
                    t0: 0.0,
                    t_end: 3.0,
                    initial,
                    initial_v: None,
                    boundary: BoundarySpec::dirichlet(0.0, 0.0),
                    lights: Vec::new(),
                    sample_every,
                };
                let demand = SimulationConfig {
                    model: Model::Arz(ArzParams::new(0.05, 2.0, 1.0)?),
                    ..supply.clone()
                };
                Ok((supply, demand))
            }
        }
    }

    fn description(&self) -> Vec<(&'static str, String)> {
        match self {
            TrafficExperiment::BoundaryForecast => vec![
                ("model", "lwr (both)".into()),
                ("road", "[0, 40], 100 cells, dt = 0.25, t in [-10, 30]".into()),
                ("initial", "rho = 0.2".into()),
                ("supply", "F_in ~ U[0, 1/4], F_out ~ U[0, G(0.2, 0.2)] drawn per step".into()),
                ("demand", "same draws until t = 0, then their mean over t >= 0".into()),
            ],
            TrafficExperiment::LightCycle => vec![
                ("model", "lwr (both)".into()),
                ("road", "[0, 4], 100 cells, dt = 0.025, t in [0, 20]".into()),
                ("boundary", "rho_in = 0.4, rho_out = 0".into()),
                ("light", "interface 50, green first; supply 50/50 steps, demand 40/40 steps".into()),
            ],
            TrafficExperiment::ModelOrder => vec![
                ("road", "[0, 4], 200 cells, dt = 0.01, t in [0, 3]".into()),
                ("initial", "rho = 0.7 on [1.6, 2.4], 0.1 elsewhere; v = v_eq".into()),
                ("boundary", "rho_in = rho_out = 0".into()),
                ("supply", "lwr".into()),
                ("demand", "arz, tau = 0.05, gamma = 2, v_ref = 1".into()),
            ],
        }
    }
}

impl FromStr for TrafficExperiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "traffic1" => Ok(TrafficExperiment::BoundaryForecast),
            "traffic2" => Ok(TrafficExperiment::LightCycle),
            "traffic3" => Ok(TrafficExperiment::ModelOrder),
            _ => Err(Error::InvalidParameter(format!(
                "unknown traffic experiment `{s}` (traffic1, traffic2, traffic3)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficConfig {
    pub experiment: TrafficExperiment,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub sample_every: usize,
    pub pr: PrParams,
    pub ghk: GhkParams,
}

impl TrafficConfig {
    pub fn new(experiment: TrafficExperiment) -> Self {
        Self {
            experiment,
            methods: vec![Method::Fg, Method::Pr, Method::Ghk],
            seed: 1,
            sample_every: 10,
            pr: experiment.default_pr(),
            ghk: GhkParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficSample {
    pub t: f64,
    pub mass_s: f64,
    pub mass_d: f64,
    pub values: Vec<(Method, f64)>,
}

impl TrafficSample {
    pub fn value(&self, method: Method) -> Option<f64> {
        self.values.iter().find(|(m, _)| *m == method).map(|(_, v)| *v)
    }
}

#[derive(Debug, Clone)]
pub struct TrafficOutcome {
    pub samples: Vec<TrafficSample>,
    pub supply: SimulationRun,
    pub demand: SimulationRun,
}

fn state_measure(grid: &Grid1D, state: &TrafficState) -> Result<DiscreteMeasure> {
    let dx = grid.dx();
    DiscreteMeasure::new(*grid, state.rho.iter().map(|r| r * dx).collect())
}

pub fn run_traffic(cfg: &TrafficConfig) -> Result<TrafficOutcome> {
    if let Some(m) = cfg.methods.iter().find(|m| matches!(m, Method::Ss | Method::W1)) {
        return Err(Error::InvalidParameter(format!(
            "method `{m}` is not available for traffic experiments (fg, pr, ghk)"
        )));
    }
    let (supply_cfg, demand_cfg) = cfg.experiment.scenarios(cfg.seed, cfg.sample_every)?;
    let supply = run_simulation(&supply_cfg)?;
    let demand = run_simulation(&demand_cfg)?;
    let grid = supply_cfg.grid;
    let mut samples = Vec::with_capacity(supply.states.len());
    for (s, d) in supply.states.iter().zip(&demand.states) {
        let ms = state_measure(&grid, s)?;
        let md = state_measure(&grid, d)?;
        let mut values = Vec::with_capacity(cfg.methods.len());
        for &method in &cfg.methods {
            let v = match method {
                Method::Fg => fg_distance(&ms.with_empty_boundary(), &md.with_empty_boundary(), 1.0)?.value,
                Method::Pr => pr_distance(&ms, &md, cfg.pr)?.value,
                Method::Ghk => ghk_solve(&ms, &md, cfg.ghk, GhkOptions::default())?.value,
                Method::W1 | Method::Ss => unreachable!("rejected above"),
            };
            values.push((method, v));
        }
        samples.push(TrafficSample {
            t: s.t,
            mass_s: ms.total_mass(),
            mass_d: md.total_mass(),
            values,
        });
    }
    Ok(TrafficOutcome {
        samples,
        supply,
        demand,
    })
}

pub fn traffic_table(cfg: &TrafficConfig, outcome: &TrafficOutcome) -> Table {
    let mut params = cfg.experiment.description();
    params.push(("seed", cfg.seed.to_string()));
    params.push(("sample_every", format!("{} steps", cfg.sample_every)));
    params.push(("pr", format!("a = {}, b = {}", cfg.pr.a, cfg.pr.b)));
    params.push(("ghk", format!("a = {}, b = {}", cfg.ghk.a, cfg.ghk.b)));
    params.push(("fg", "boundary cells emptied".into()));
    let mut t = Table::new(provenance(cfg.experiment.id(), &params), &["t", "mass_s", "mass_d", "method", "value"]);
    for s in &outcome.samples {
        for (m, v) in &s.values {
            t.push(vec![num(s.t), num(s.mass_s), num(s.mass_d), m.name().into(), num(*v)]);
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn methods_parse() {
        assert_eq!(parse_methods("fg, pr,ghk").unwrap(), vec![Method::Fg, Method::Pr, Method::Ghk]);
        assert!(parse_methods("fg,sinkhorn").is_err());
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
    }

    #[test]
    fn ss_requires_unit_weights() {
        let (ms, md) = fg_test1_measures(1).unwrap();
        let p = DistanceParams { a: 2.0, ..Default::default() };
        assert!(compute_distance(Method::Ss, &ms, &md, &p).is_err());
    }

    #[test]
    fn comparison_masses_are_constant() {
        let cfg = ComparisonConfig::new(1.0);
        for t in cfg.times() {
            let (ms, md) = comparison_measures(&cfg, t).unwrap();
            assert!((ms.total_mass() - 2.0).abs() < 1e-9, "t = {t}");
            assert!((md.total_mass() - 4.0).abs() < 1e-9, "t = {t}");
        }
    }

    #[test]
    fn lumping_preserves_mass() {
        let (ms, _) = fg_test2_measures(50).unwrap();
        let atoms = lump_atoms(&ms, 4, 3);
        assert_eq!(atoms.len(), 4);
        let total: f64 = atoms.iter().map(|a| a.mass).sum();
        assert!((total - ms.total_mass()).abs() < 1e-12);
        assert!(atoms.windows(2).all(|w| w[0].x < w[1].x));
    }

    #[test]
    fn traffic_rejects_ss() {
        let mut cfg = TrafficConfig::new(TrafficExperiment::LightCycle);
        cfg.methods = vec![Method::Ss];
        assert!(run_traffic(&cfg).is_err());
    }

    #[test]
    fn table_csv_has_comments() {
        let t = fg_test1().unwrap();
        let text = t.to_csv_string().unwrap();
        assert!(text.starts_with("# experiment = fg_test1\n"));
        let v = t.column("value").unwrap();
        assert!((v[0] - 0.25).abs() < 1e-9 && (v[1] - 0.3).abs() < 1e-9);
    }
}
