use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    arz_step, check_cfl, lwr_step, ArzParams, BoundaryKind, BoundarySpec, KeyValueConfig, Signal,
    TrafficLight, TrafficState,
};
use crate::error::{Error, Result};
use crate::grid::Grid1D;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    Lwr,
    Arz(ArzParams),
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::Lwr => "lwr",
            Model::Arz(_) => "arz",
        }
    }

    fn max_speed(&self) -> f64 {
        match self {
            Model::Lwr => 1.0,
            Model::Arz(p) => p.max_speed(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub model: Model,
    pub grid: Grid1D,
    pub dt: f64,
    pub t0: f64,
    pub t_end: f64,
    pub initial: Vec<f64>,
    /// Initial velocities for ARZ; equilibrium when absent.
    pub initial_v: Option<Vec<f64>>,
    pub boundary: BoundarySpec,
    pub lights: Vec<TrafficLight>,
    /// Keep every `sample_every`-th state (the initial one included).
    pub sample_every: usize,
}

/// Per-step flux draws `(F_in, F_out)` with `F_in ~ U[0, max_in]` and
/// `F_out ~ U[0, max_out]`.
pub fn random_flux_series(seed: u64, steps: usize, max_in: f64, max_out: f64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fin = Vec::with_capacity(steps);
    let mut fout = Vec::with_capacity(steps);
    for _ in 0..steps {
        fin.push(rng.random::<f64>() * max_in);
        fout.push(rng.random::<f64>() * max_out);
    }
    (fin, fout)
}

const CONFIG_KEYS: &[&str] = &[
    "model",
    "x_min",
    "x_max",
    "n_cells",
    "dt",
    "t0",
    "T",
    "bc_kind",
    "bc_left",
    "bc_right",
    "flux_random",
    "seed",
    "tau",
    "gamma",
    "v_ref",
    "rho0",
    "rho0_block_lo",
    "rho0_block_hi",
    "rho0_block_value",
    "light_interface",
    "light_green",
    "light_red",
    "light_offset",
    "sample_every",
];

impl SimulationConfig {
    pub fn n_steps(&self) -> usize {
        ((self.t_end - self.t0) / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.grid.len();
        if self.initial.len() != n {
            return Err(Error::InvalidParameter(format!(
                "{} initial densities for {n} cells",
                self.initial.len()
            )));
        }
        if let Some(r) = self.initial.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::InvalidParameter(format!("initial density {r} outside [0, 1]")));
        }
        if let Some(v) = &self.initial_v {
            if v.len() != n || v.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("bad initial velocities".into()));
            }
        }
        if !(self.t_end > self.t0) {
            return Err(Error::InvalidParameter(format!(
                "need T > t0, got [{}, {}]",
                self.t0, self.t_end
            )));
        }
        if self.sample_every == 0 {
            return Err(Error::InvalidParameter("sample_every must be positive".into()));
        }
        if let Model::Arz(p) = &self.model {
            p.validate()?;
        }
        self.boundary.validate()?;
        for light in &self.lights {
            light.validate(n)?;
        }
        check_cfl(self.dt, self.model.max_speed(), self.grid.dx())
    }

    /// Builds a configuration from the flat key-value format.
    pub fn from_key_value(c: &KeyValueConfig) -> Result<Self> {
        c.reject_unknown(CONFIG_KEYS)?;
        let model = match c.get_str("model").unwrap_or("lwr") {
            "lwr" => Model::Lwr,
            "arz" => {
                let d = ArzParams::default();
                Model::Arz(ArzParams::new(
                    c.get_or("tau", d.tau)?,
                    c.get_or("gamma", d.gamma)?,
                    c.get_or("v_ref", d.v_ref)?,
                )?)
            }
            other => return Err(Error::Config(format!("unknown model `{other}`"))),
        };
        let grid = Grid1D::new(c.require("x_min")?, c.require("x_max")?, c.require("n_cells")?)?;
        let dt: f64 = c.require("dt")?;
        let t0: f64 = c.get_or("t0", 0.0)?;
        let t_end: f64 = c.require("T")?;
        let base: f64 = c.get_or("rho0", 0.0)?;
        let block = (
            c.get::<f64>("rho0_block_lo")?,
            c.get::<f64>("rho0_block_hi")?,
            c.get::<f64>("rho0_block_value")?,
        );
        let initial = grid
            .barycenters()
            .into_iter()
            .map(|x| match block {
                (Some(lo), Some(hi), Some(v)) if (lo..=hi).contains(&x) => v,
                _ => base,
            })
            .collect();
        let left: f64 = c.get_or("bc_left", 0.0)?;
        let right: f64 = c.get_or("bc_right", 0.0)?;
        let boundary = match c.get_str("bc_kind").unwrap_or("dirichlet") {
            "dirichlet" => BoundarySpec::dirichlet(left, right),
            "flux" => {
                if c.get_or("flux_random", false)? {
                    let steps = ((t_end - t0) / dt).round().max(1.0) as usize;
                    let (fin, fout) = random_flux_series(c.get_or("seed", 0)?, steps, left, right);
                    BoundarySpec::flux(Signal::Series(fin), Signal::Series(fout))
                } else {
                    BoundarySpec::flux(Signal::Constant(left), Signal::Constant(right))
                }
            }
            other => return Err(Error::Config(format!("unknown bc_kind `{other}`"))),
        };
        let mut lights = Vec::new();
        if let Some(interface) = c.get::<usize>("light_interface")? {
            let mut light =
                TrafficLight::new(interface, c.require("light_green")?, c.require("light_red")?)?;
            light.offset = c.get_or("light_offset", 0)?;
            lights.push(light);
        }
        let cfg = Self {
            model,
            grid,
            dt,
            t0,
            t_end,
            initial,
            initial_v: None,
            boundary,
            lights,
            sample_every: c.get_or("sample_every", 1)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone)]
pub struct SimulationRun {
    /// Sampled states, starting with the initial one.
    pub states: Vec<TrafficState>,
    /// Step index of each sampled state.
    pub steps: Vec<usize>,
    /// Boundary fluxes `(left, right)` actually used at every step.
    pub boundary_fluxes: Vec<(f64, f64)>,
    /// Largest `|Δ mass − dt (F_left − F_right)|` over all steps.
    pub max_conservation_error: f64,
    pub min_density: f64,
    pub max_density: f64,
}

pub fn run_simulation(cfg: &SimulationConfig) -> Result<SimulationRun> {
    cfg.validate()?;
    let dx = cfg.grid.dx();
    let n = cfg.grid.len();
    let mut state = match (&cfg.model, &cfg.initial_v) {
        (Model::Lwr, _) => TrafficState::first_order(cfg.t0, cfg.initial.clone()),
        (Model::Arz(_), Some(v)) => TrafficState {
            t: cfg.t0,
            rho: cfg.initial.clone(),
            v: Some(v.clone()),
        },
        (Model::Arz(_), None) => TrafficState::at_equilibrium(cfg.t0, cfg.initial.clone()),
    };
    let steps = cfg.n_steps();
    let mut run = SimulationRun {
        states: vec![state.clone()],
        steps: vec![0],
        boundary_fluxes: Vec::with_capacity(steps),
        max_conservation_error: 0.0,
        min_density: cfg.initial.iter().copied().fold(f64::INFINITY, f64::min),
        max_density: cfg.initial.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };
    for step in 0..steps {
        let out = match &cfg.model {
            Model::Lwr => lwr_step(&cfg.grid, &state, &cfg.boundary, cfg.dt, step, &cfg.lights)?,
            Model::Arz(p) => arz_step(&cfg.grid, &state, p, &cfg.boundary, cfg.dt, step, &cfg.lights)?,
        };
        let before = state.mass(dx);
        let mut next = out.state;
        next.t = cfg.t0 + (step + 1) as f64 * cfg.dt;
        let (fl, fr) = (out.fluxes[0], out.fluxes[n]);
        let err = (next.mass(dx) - before - cfg.dt * (fl - fr)).abs();
        run.max_conservation_error = run.max_conservation_error.max(err);
        for &r in &next.rho {
            run.min_density = run.min_density.min(r);
            run.max_density = run.max_density.max(r);
        }
        run.boundary_fluxes.push((fl, fr));
        state = next;
        if (step + 1) % cfg.sample_every == 0 {
            run.states.push(state.clone());
            run.steps.push(step + 1);
        }
    }
    Ok(run)
}

/// Writes `t,x,rho[,v]` rows, preceded by `# ` comment lines.
pub fn write_time_series<W: Write>(
    mut writer: W,
    grid: &Grid1D,
    states: &[TrafficState],
    comments: &[String],
) -> Result<()> {
    for c in comments {
        writeln!(writer, "# {c}")?;
    }
    let with_v = states.iter().any(|s| s.v.is_some());
    let mut w = csv::Writer::from_writer(writer);
    if with_v {
        w.write_record(["t", "x", "rho", "v"])?;
    } else {
        w.write_record(["t", "x", "rho"])?;
    }
    let xs = grid.barycenters();
    for s in states {
        for (i, x) in xs.iter().enumerate() {
            let mut rec = vec![s.t.to_string(), x.to_string(), s.rho[i].to_string()];
            if with_v {
                rec.push(s.v.as_ref().map_or(String::new(), |v| v[i].to_string()));
            }
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

impl BoundaryKind {
    pub fn name(&self) -> &'static str {
        match self {
            BoundaryKind::Dirichlet => "dirichlet",
            BoundaryKind::Flux => "flux",
        }
    }
}
