//! Macroscopic traffic on a single road: the first-order LWR model with the
//! Godunov scheme and the second-order ARZ model with Lax–Friedrichs plus
//! relaxation.
//!
//! Densities are normalised (`ρ_max = 1`) and the fundamental diagram is
//! `f(ρ) = ρ(1 − ρ)`. Interfaces are numbered `0..=N`; interface `i`
//! separates cells `i − 1` and `i`, so `0` and `N` are the road ends.

mod config;
mod sim;

pub use config::KeyValueConfig;
pub use sim::{random_flux_series, run_simulation, write_time_series, Model, SimulationConfig, SimulationRun};

use crate::error::{Error, Result};
use crate::grid::Grid1D;

/// Cells with less density than this are treated as empty by the ARZ scheme.
pub const VACUUM: f64 = 1e-12;

pub fn flux(rho: f64) -> f64 {
    rho * (1.0 - rho)
}

pub fn v_eq(rho: f64) -> f64 {
    1.0 - rho
}

/// Largest flux a cell of density `rho` can send downstream.
pub fn demand(rho: f64) -> f64 {
    if rho <= 0.5 {
        flux(rho)
    } else {
        0.25
    }
}

/// Largest flux a cell of density `rho` can receive from upstream.
pub fn supply(rho: f64) -> f64 {
    if rho >= 0.5 {
        flux(rho)
    } else {
        0.25
    }
}

fn check_density(rho: f64) -> Result<()> {
    if (0.0..=1.0).contains(&rho) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("density {rho} outside [0, 1]")))
    }
}

/// Godunov flux for the concave `f`: `min(D(ρ₋), S(ρ₊))`, which is the
/// minimum of `f` over `[ρ₋, ρ₊]` or its maximum over `[ρ₊, ρ₋]`.
pub fn godunov_flux(rho_minus: f64, rho_plus: f64) -> Result<f64> {
    check_density(rho_minus)?;
    check_density(rho_plus)?;
    Ok(godunov(rho_minus, rho_plus))
}

fn godunov(rho_minus: f64, rho_plus: f64) -> f64 {
    demand(rho_minus).min(supply(rho_plus))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficState {
    pub t: f64,
    pub rho: Vec<f64>,
    /// Velocities, present for second-order states.
    pub v: Option<Vec<f64>>,
}

impl TrafficState {
    pub fn first_order(t: f64, rho: Vec<f64>) -> Self {
        Self { t, rho, v: None }
    }

    /// Second-order state at equilibrium velocity.
    pub fn at_equilibrium(t: f64, rho: Vec<f64>) -> Self {
        let v = rho.iter().map(|&r| v_eq(r)).collect();
        Self { t, rho, v: Some(v) }
    }

    pub fn mass(&self, dx: f64) -> f64 {
        dx * self.rho.iter().sum::<f64>()
    }
}

/// Boundary datum indexed by time step; a series holds its last value.
#[derive(Debug, Clone, PartialEq)]
pub enum Signal {
    Constant(f64),
    Series(Vec<f64>),
}

impl Signal {
    pub fn at(&self, step: usize) -> f64 {
        match self {
            Signal::Constant(v) => *v,
            Signal::Series(s) => s[step.min(s.len() - 1)],
        }
    }

    fn values(&self) -> &[f64] {
        match self {
            Signal::Constant(v) => std::slice::from_ref(v),
            Signal::Series(s) => s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    /// Ghost-cell densities `ρ_in`, `ρ_out`.
    Dirichlet,
    /// Fluxes `F_in`, `F_out` injected at the road ends.
    Flux,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySpec {
    pub kind: BoundaryKind,
    pub left: Signal,
    pub right: Signal,
}

impl BoundarySpec {
    pub fn dirichlet(rho_in: f64, rho_out: f64) -> Self {
        Self {
            kind: BoundaryKind::Dirichlet,
            left: Signal::Constant(rho_in),
            right: Signal::Constant(rho_out),
        }
    }

    pub fn flux(left: Signal, right: Signal) -> Self {
        Self {
            kind: BoundaryKind::Flux,
            left,
            right,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (hi, what) = match self.kind {
            BoundaryKind::Dirichlet => (1.0, "density"),
            BoundaryKind::Flux => (0.25, "flux"),
        };
        for s in [&self.left, &self.right] {
            if s.values().is_empty() {
                return Err(Error::InvalidParameter(format!("empty boundary {what} series")));
            }
            if let Some(v) = s.values().iter().find(|v| !(0.0..=hi).contains(*v)) {
                return Err(Error::InvalidParameter(format!(
                    "boundary {what} {v} outside [0, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArzParams {
    pub tau: f64,
    pub gamma: f64,
    pub v_ref: f64,
}

impl ArzParams {
    pub fn new(tau: f64, gamma: f64, v_ref: f64) -> Result<Self> {
        let p = Self { tau, gamma, v_ref };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if [self.tau, self.gamma, self.v_ref].iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "tau, gamma and v_ref must be positive, got {self:?}"
            )))
        }
    }

    /// `P(ρ) = (v_ref/γ) ρ^γ`.
    pub fn pressure(&self, rho: f64) -> f64 {
        self.v_ref / self.gamma * rho.powf(self.gamma)
    }

    /// Bound on the characteristic speeds for `v ∈ [0, 1]`, `ρ ∈ [0, 1]`.
    pub fn max_speed(&self) -> f64 {
        self.v_ref.max(1.0)
    }
}

impl Default for ArzParams {
    fn default() -> Self {
        Self {
            tau: 0.05,
            gamma: 2.0,
            v_ref: 1.0,
        }
    }
}

/// Signal blocking one interface: green for `green` steps, then red for
/// `red` steps, repeating; `offset` shifts the cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrafficLight {
    pub interface: usize,
    pub green: usize,
    pub red: usize,
    pub offset: usize,
}

impl TrafficLight {
    pub fn new(interface: usize, green: usize, red: usize) -> Result<Self> {
        if green == 0 || red == 0 {
            return Err(Error::InvalidParameter(format!(
                "traffic light phases must last at least one step, got green {green}, red {red}"
            )));
        }
        Ok(Self {
            interface,
            green,
            red,
            offset: 0,
        })
    }

    pub fn is_red(&self, step: usize) -> bool {
        (step + self.offset) % (self.green + self.red) >= self.green
    }

    fn validate(&self, n_cells: usize) -> Result<()> {
        if self.interface == 0 || self.interface >= n_cells {
            return Err(Error::InvalidParameter(format!(
                "traffic light interface {} is not interior (1..{n_cells})",
                self.interface
            )));
        }
        if self.green == 0 || self.red == 0 {
            return Err(Error::InvalidParameter("traffic light phase of zero steps".into()));
        }
        Ok(())
    }
}

/// Zeroes the flux at the light's interface during red.
pub fn apply_traffic_light(fluxes: &mut [f64], light: &TrafficLight, step: usize) {
    if light.is_red(step) {
        fluxes[light.interface] = 0.0;
    }
}

/// New state plus the mass fluxes used at the `N + 1` interfaces.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub state: TrafficState,
    pub fluxes: Vec<f64>,
}

pub fn check_cfl(dt: f64, max_speed: f64, dx: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    let lhs = dt * max_speed;
    if lhs > dx * (1.0 + 1e-12) {
        return Err(Error::Cfl { lhs, dx });
    }
    Ok(())
}

/// One Godunov step. Injected boundary fluxes are limited by what the end
/// cells can receive or send, which keeps densities in `[0, 1]`.
pub fn lwr_step(
    grid: &Grid1D,
    state: &TrafficState,
    boundary: &BoundarySpec,
    dt: f64,
    step: usize,
    lights: &[TrafficLight],
) -> Result<StepOutput> {
    let n = state.rho.len();
    let rho = &state.rho;
    let mut fluxes = vec![0.0; n + 1];
    for i in 1..n {
        fluxes[i] = godunov(rho[i - 1], rho[i]);
    }
    let (left, right) = (boundary.left.at(step), boundary.right.at(step));
    match boundary.kind {
        BoundaryKind::Dirichlet => {
            fluxes[0] = godunov(left, rho[0]);
            fluxes[n] = godunov(rho[n - 1], right);
        }
        BoundaryKind::Flux => {
            fluxes[0] = left.min(supply(rho[0]));
            fluxes[n] = right.min(demand(rho[n - 1]));
        }
    }
    for light in lights {
        apply_traffic_light(&mut fluxes, light, step);
    }
    let ratio = dt / grid.dx();
    let t = state.t + dt;
    let mut next = Vec::with_capacity(n);
    for i in 0..n {
        let r = rho[i] - ratio * (fluxes[i + 1] - fluxes[i]);
        if !(-1e-12..=1.0 + 1e-12).contains(&r) {
            return Err(Error::DensityOutOfRange { cell: i, value: r, t });
        }
        next.push(r.clamp(0.0, 1.0));
    }
    Ok(StepOutput {
        state: TrafficState::first_order(t, next),
        fluxes,
    })
}

/// One Lax–Friedrichs step on `(ρ, y = ρw)` followed by explicit relaxation
/// of `v` towards `v_eq(ρ)`.
pub fn arz_step(
    grid: &Grid1D,
    state: &TrafficState,
    params: &ArzParams,
    boundary: &BoundarySpec,
    dt: f64,
    step: usize,
    lights: &[TrafficLight],
) -> Result<StepOutput> {
    let n = state.rho.len();
    let dx = grid.dx();
    let rho = &state.rho;
    let v: Vec<f64> = match &state.v {
        Some(v) => v.clone(),
        None => rho.iter().map(|&r| v_eq(r)).collect(),
    };
    let y: Vec<f64> = (0..n).map(|i| rho[i] * (v[i] + params.pressure(rho[i]))).collect();
    let phys = |r: f64, vel: f64, yy: f64| (r * vel, yy * vel);
    let lf = |ul: (f64, f64, f64), ur: (f64, f64, f64)| -> (f64, f64) {
        let (fl0, fl1) = phys(ul.0, ul.1, ul.2);
        let (fr0, fr1) = phys(ur.0, ur.1, ur.2);
        let visc = 0.5 * dx / dt;
        (
            0.5 * (fl0 + fr0) - visc * (ur.0 - ul.0),
            0.5 * (fl1 + fr1) - visc * (ur.2 - ul.2),
        )
    };
    let cell = |i: usize| (rho[i], v[i], y[i]);
    let ghost = |r: f64| {
        let vel = v_eq(r);
        (r, vel, r * (vel + params.pressure(r)))
    };

    let mut f0 = vec![0.0; n + 1];
    let mut f1 = vec![0.0; n + 1];
    for i in 1..n {
        (f0[i], f1[i]) = lf(cell(i - 1), cell(i));
    }
    let (left, right) = (boundary.left.at(step), boundary.right.at(step));
    match boundary.kind {
        BoundaryKind::Dirichlet => {
            (f0[0], f1[0]) = lf(ghost(left), cell(0));
            (f0[n], f1[n]) = lf(cell(n - 1), ghost(right));
        }
        BoundaryKind::Flux => {
            let w = |i: usize| if rho[i] > VACUUM { y[i] / rho[i] } else { v_eq(rho[i]) + params.pressure(rho[i]) };
            f0[0] = left.min(supply(rho[0]));
            f1[0] = f0[0] * w(0);
            f0[n] = right.min(demand(rho[n - 1]));
            f1[n] = f0[n] * w(n - 1);
        }
    }
    for light in lights {
        if light.is_red(step) {
            f0[light.interface] = 0.0;
            f1[light.interface] = 0.0;
        }
    }

    let ratio = dt / dx;
    let t = state.t + dt;
    let relax = dt / params.tau;
    let mut next_rho = Vec::with_capacity(n);
    let mut next_v = Vec::with_capacity(n);
    for i in 0..n {
        let r = rho[i] - ratio * (f0[i + 1] - f0[i]);
        let yy = y[i] - ratio * (f1[i + 1] - f1[i]);
        if !(r >= -1e-12 && r.is_finite()) {
            return Err(Error::DensityOutOfRange { cell: i, value: r, t });
        }
        let r = r.max(0.0);
        let vel = if r > VACUUM { yy / r - params.pressure(r) } else { v_eq(r) };
        next_v.push(vel + relax * (v_eq(r) - vel));
        next_rho.push(r);
    }
    Ok(StepOutput {
        state: TrafficState {
            t,
            rho: next_rho,
            v: Some(next_v),
        },
        fluxes: f0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fundamental_diagram() {
        assert_eq!(flux(0.0), 0.0);
        assert_eq!(flux(1.0), 0.0);
        assert_eq!(flux(0.5), 0.25);
        assert!((v_eq(0.3) * 0.3 - flux(0.3)).abs() < 1e-15);
    }

    #[test]
    fn godunov_examples() {
        assert!((godunov_flux(0.2, 0.2).unwrap() - 0.16).abs() < 1e-15);
        assert_eq!(godunov_flux(0.0, 1.0).unwrap(), 0.0);
        assert_eq!(godunov_flux(1.0, 0.0).unwrap(), 0.25);
        assert!(godunov_flux(-0.1, 0.5).is_err());
        assert!(godunov_flux(0.5, 1.5).is_err());
        // Rarefaction through the sonic point and a shock.
        assert_eq!(godunov_flux(0.8, 0.1).unwrap(), 0.25);
        assert!((godunov_flux(0.1, 0.8).unwrap() - flux(0.1).min(flux(0.8))).abs() < 1e-15);
    }

    #[test]
    fn constant_state_is_steady() {
        let g = Grid1D::new(0.0, 4.0, 40).unwrap();
        let s = TrafficState::first_order(0.0, vec![0.2; 40]);
        let bc = BoundarySpec::dirichlet(0.2, 0.2);
        let out = lwr_step(&g, &s, &bc, 0.05, 0, &[]).unwrap();
        assert!(out.state.rho.iter().all(|&r| (r - 0.2).abs() < 1e-15));
    }

    #[test]
    fn riemann_jam_blocks_flux() {
        let g = Grid1D::new(0.0, 1.0, 10).unwrap();
        let mut rho = vec![0.0; 10];
        rho[5..].iter_mut().for_each(|r| *r = 1.0);
        let s = TrafficState::first_order(0.0, rho);
        let out = lwr_step(&g, &s, &BoundarySpec::dirichlet(0.0, 1.0), 0.05, 0, &[]).unwrap();
        assert_eq!(out.fluxes[5], 0.0);
    }

    #[test]
    fn flux_boundaries_are_capped() {
        let g = Grid1D::new(0.0, 1.0, 10).unwrap();
        let s = TrafficState::first_order(0.0, vec![0.05; 10]);
        let bc = BoundarySpec::flux(Signal::Constant(0.2), Signal::Constant(0.2));
        let out = lwr_step(&g, &s, &bc, 0.1, 0, &[]).unwrap();
        assert_eq!(out.fluxes[0], 0.2);
        assert!((out.fluxes[10] - flux(0.05)).abs() < 1e-15);
    }

    #[test]
    fn red_light_zeroes_flux() {
        let light = TrafficLight::new(5, 2, 3).unwrap();
        let pattern: Vec<bool> = (0..7).map(|n| light.is_red(n)).collect();
        assert_eq!(pattern, [false, false, true, true, true, false, false]);
        let mut f = vec![0.1; 11];
        apply_traffic_light(&mut f, &light, 2);
        assert_eq!(f[5], 0.0);
        let mut f = vec![0.1; 11];
        apply_traffic_light(&mut f, &light, 0);
        assert_eq!(f[5], 0.1);
        assert!(TrafficLight::new(5, 0, 3).is_err());
    }

    #[test]
    fn arz_equilibrium_is_steady() {
        let g = Grid1D::new(0.0, 4.0, 40).unwrap();
        let s = TrafficState::at_equilibrium(0.0, vec![0.3; 40]);
        let bc = BoundarySpec::dirichlet(0.3, 0.3);
        let out = arz_step(&g, &s, &ArzParams::default(), &bc, 0.05, 0, &[]).unwrap();
        for (r, v) in out.state.rho.iter().zip(out.state.v.as_ref().unwrap()) {
            assert!((r - 0.3).abs() < 1e-14);
            assert!((v - 0.7).abs() < 1e-14);
        }
    }

    #[test]
    fn arz_params_validated() {
        assert!(ArzParams::new(0.0, 2.0, 1.0).is_err());
        assert!(ArzParams::new(0.1, 2.0, 1.0).is_ok());
        assert!((ArzParams::default().pressure(0.5) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn cfl_checked() {
        assert!(check_cfl(0.02, 1.0, 0.02).is_ok());
        assert!(matches!(check_cfl(0.03, 1.0, 0.02), Err(Error::Cfl { .. })));
    }

    #[test]
    fn boundary_ranges_checked() {
        assert!(BoundarySpec::dirichlet(1.2, 0.0).validate().is_err());
        assert!(BoundarySpec::flux(Signal::Constant(0.3), Signal::Constant(0.0)).validate().is_err());
        assert!(BoundarySpec::flux(Signal::Series(vec![]), Signal::Constant(0.0)).validate().is_err());
        assert_eq!(Signal::Series(vec![0.1, 0.2]).at(5), 0.2);
    }
}
