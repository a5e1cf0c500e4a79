use gwd_core::traffic::{demand, flux, supply, KeyValueConfig, Model, SimulationConfig};
use gwd_core::{
    arz_step, godunov_flux, lwr_step, run_simulation, ArzParams, BoundarySpec, Error, Grid1D,
    Signal, TrafficLight, TrafficState,
};
use proptest::prelude::*;

fn densities(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..=1.0, n)
}

fn boundary() -> impl Strategy<Value = BoundarySpec> {
    prop_oneof![
        (0.0f64..=1.0, 0.0f64..=1.0).prop_map(|(l, r)| BoundarySpec::dirichlet(l, r)),
        (0.0f64..=0.25, 0.0f64..=0.25)
            .prop_map(|(l, r)| BoundarySpec::flux(Signal::Constant(l), Signal::Constant(r))),
    ]
}

fn light() -> impl Strategy<Value = Option<TrafficLight>> {
    prop::option::of((1usize..10, 1usize..6, 1usize..6, 0usize..8).prop_map(|(i, g, r, o)| {
        let mut l = TrafficLight::new(i, g, r).unwrap();
        l.offset = o;
        l
    }))
}

/// Mass change of every step equals `dt` times the net boundary flux.
fn assert_conserves(
    grid: &Grid1D,
    steps: usize,
    mut state: TrafficState,
    dt: f64,
    mut step_fn: impl FnMut(&TrafficState, usize) -> gwd_core::Result<gwd_core::traffic::StepOutput>,
) -> Result<(), TestCaseError> {
    let dx = grid.dx();
    for s in 0..steps {
        let out = step_fn(&state, s).unwrap();
        let n = out.fluxes.len() - 1;
        let change = out.state.mass(dx) - state.mass(dx);
        let net = dt * (out.fluxes[0] - out.fluxes[n]);
        prop_assert!((change - net).abs() <= 1e-10, "step {s}: Δm {change} net {net}");
        state = out.state;
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn godunov_is_consistent_and_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0, h in 0.0f64..0.1) {
        prop_assert!((godunov_flux(a, a).unwrap() - flux(a)).abs() <= 1e-15);
        let g = godunov_flux(a, b).unwrap();
        prop_assert!((0.0..=0.25).contains(&g));
        prop_assert_eq!(g, demand(a).min(supply(b)));
        prop_assert!(godunov_flux((a + h).min(1.0), b).unwrap() >= g - 1e-15);
        prop_assert!(godunov_flux(a, (b + h).min(1.0)).unwrap() <= g + 1e-15);
    }

    #[test]
    fn lwr_conserves_mass_and_stays_in_range(rho in densities(12), bc in boundary(), l in light()) {
        let grid = Grid1D::new(0.0, 1.2, rho.len()).unwrap();
        let lights: Vec<_> = l.into_iter().collect();
        let dt = 0.09;
        let mut lo: f64 = 1.0;
        let mut hi: f64 = 0.0;
        assert_conserves(&grid, 60, TrafficState::first_order(0.0, rho), dt, |s, k| {
            let out = lwr_step(&grid, s, &bc, dt, k, &lights)?;
            for &r in &out.state.rho {
                lo = lo.min(r);
                hi = hi.max(r);
            }
            Ok(out)
        })?;
        prop_assert!(lo >= 0.0 && hi <= 1.0);
    }

    #[test]
    fn arz_conserves_mass(rho in densities(12), bc in boundary(), l in light(), tau in 0.05f64..1.0) {
        let grid = Grid1D::new(0.0, 1.2, rho.len()).unwrap();
        let lights: Vec<_> = l.into_iter().collect();
        let params = ArzParams::new(tau, 2.0, 1.0).unwrap();
        let dt = 0.09;
        assert_conserves(&grid, 60, TrafficState::at_equilibrium(0.0, rho), dt, |s, k| {
            let out = arz_step(&grid, s, &params, &bc, dt, k, &lights)?;
            assert!(out.state.rho.iter().all(|&r| r >= 0.0));
            Ok(out)
        })?;
    }

    /// With boundary data inside the initial range, Godunov never creates new
    /// extrema.
    #[test]
    fn lwr_maximum_principle(rho in densities(15), l in 0.0f64..=1.0, r in 0.0f64..=1.0) {
        let lo = rho.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = rho.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let bc = BoundarySpec::dirichlet(lo + l * (hi - lo), lo + r * (hi - lo));
        let grid = Grid1D::new(0.0, 1.5, rho.len()).unwrap();
        let mut state = TrafficState::first_order(0.0, rho);
        for k in 0..80 {
            state = lwr_step(&grid, &state, &bc, 0.1, k, &[]).unwrap().state;
            for &v in &state.rho {
                prop_assert!(v >= lo - 1e-14 && v <= hi + 1e-14);
            }
        }
    }

    #[test]
    fn light_is_green_first(green in 1usize..20, red in 1usize..20, offset in 0usize..40, step in 0usize..200) {
        let mut l = TrafficLight::new(3, green, red).unwrap();
        l.offset = offset;
        let phase = (step + offset) % (green + red);
        prop_assert_eq!(l.is_red(step), phase >= green);
    }
}

#[test]
fn arz_equilibrium_is_steady() {
    let grid = Grid1D::new(0.0, 2.0, 20).unwrap();
    let params = ArzParams::default();
    let bc = BoundarySpec::dirichlet(0.3, 0.3);
    let mut state = TrafficState::at_equilibrium(0.0, vec![0.3; 20]);
    for k in 0..50 {
        state = arz_step(&grid, &state, &params, &bc, 0.05, k, &[]).unwrap().state;
    }
    assert!(state.rho.iter().all(|r| (r - 0.3).abs() < 1e-13));
    let v = state.v.unwrap();
    assert!(v.iter().all(|v| (v - 0.7).abs() < 1e-13));
}

fn relaxation_gaps(gamma: f64, v_ref: f64, dt: f64) -> Vec<f64> {
    let grid = Grid1D::new(0.0, 4.0, 200).unwrap();
    let initial: Vec<f64> = grid
        .barycenters()
        .into_iter()
        .map(|x| if (1.6..=2.4).contains(&x) { 0.7 } else { 0.1 })
        .collect();
    let config = |model| SimulationConfig {
        model,
        grid,
        dt,
        t0: 0.0,
        t_end: 1.0,
        initial: initial.clone(),
        initial_v: None,
        boundary: BoundarySpec::dirichlet(0.0, 0.0),
        lights: Vec::new(),
        sample_every: 100,
    };
    let lwr = run_simulation(&config(Model::Lwr)).unwrap();
    let reference = &lwr.states.last().unwrap().rho;
    [0.4, 0.2, 0.1, 0.05]
        .into_iter()
        .map(|tau| {
            let run = run_simulation(&config(Model::Arz(ArzParams::new(tau, gamma, v_ref).unwrap()))).unwrap();
            let rho = &run.states.last().unwrap().rho;
            rho.iter().zip(reference).map(|(a, b)| (a - b).abs()).sum::<f64>() * grid.dx()
        })
        .collect()
}

/// Where the pressure is stiff enough for the equilibrium speed to lie
/// between the two ARZ characteristic speeds, shrinking the relaxation time
/// drives ARZ towards LWR.
#[test]
fn relaxation_limit() {
    let gaps = relaxation_gaps(1.0, 2.0, 0.005);
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "L1 gaps {gaps:?}");
}

/// With `γ = 2, v_ref = 1` that ordering fails for every `ρ < 1` and the gap
/// is no longer monotone in the relaxation time.
#[test]
fn relaxation_limit_needs_subcharacteristic_speeds() {
    let gaps = relaxation_gaps(2.0, 1.0, 0.01);
    println!("L1 gaps {gaps:?}");
    assert!(gaps.windows(2).any(|w| w[1] > w[0]), "L1 gaps {gaps:?}");
}

#[test]
fn red_light_blocks_the_interface() {
    let grid = Grid1D::new(0.0, 1.0, 10).unwrap();
    let light = TrafficLight::new(5, 1, 1000).unwrap();
    let bc = BoundarySpec::dirichlet(0.5, 0.0);
    let mut state = TrafficState::first_order(0.0, vec![0.0; 10]);
    for k in 0..200 {
        let out = lwr_step(&grid, &state, &bc, 0.05, k, &[light]).unwrap();
        if k >= 1 {
            assert_eq!(out.fluxes[5], 0.0);
        }
        state = out.state;
    }
    // One green step only lets the front reach cell 1, so cells past the
    // light stay empty.
    assert!(state.rho[5..].iter().all(|&r| r == 0.0));
    assert!(state.rho[4] > 0.9);
}

/// Inflow 0.4 against a 50/50 light: the queue behind the light grows while
/// it is red and drains as soon as it turns green, since the light then
/// passes 1/4 while the inflow stays below `f(0.4) = 0.24`.
#[test]
fn light_cycle_fills_and_drains_the_queue() {
    let grid = Grid1D::new(0.0, 4.0, 100).unwrap();
    let light = TrafficLight::new(50, 50, 50).unwrap();
    let bc = BoundarySpec::dirichlet(0.4, 0.0);
    let dx = grid.dx();
    let upstream = |s: &TrafficState| s.rho[..50].iter().sum::<f64>() * dx;
    let mut state = TrafficState::first_order(0.0, vec![0.0; 100]);
    let mut masses = vec![upstream(&state)];
    for k in 0..400 {
        state = lwr_step(&grid, &state, &bc, 0.025, k, &[light]).unwrap().state;
        masses.push(upstream(&state));
    }
    // masses[k] is the state before step k; red on steps 50..100, 150..200, …
    for cycle in 1..4 {
        let red = 100 * cycle - 50;
        let green = 100 * cycle;
        assert!((red + 1..=green).all(|k| masses[k] > masses[k - 1]), "cycle {cycle}: queue did not grow");
        assert!((green + 1..=green + 5).all(|k| masses[k] < masses[k - 1]), "cycle {cycle}: queue did not drain");
    }
}

#[test]
fn cfl_violation_is_reported() {
    let text = "model = lwr\nx_min = 0\nx_max = 1\nn_cells = 10\ndt = 0.2\nT = 1\n";
    let err = SimulationConfig::from_key_value(&KeyValueConfig::parse(text).unwrap()).unwrap_err();
    assert!(matches!(err, Error::Cfl { .. }), "{err}");
}

#[test]
fn key_value_configuration() {
    let text = "\
# model-order instance
model = arz
tau = 0.05
x_min = 0
x_max = 4
n_cells = 200
dt = 0.01
T = 3
rho0 = 0.1
rho0_block_lo = 1.6
rho0_block_hi = 2.4
rho0_block_value = 0.7
bc_kind = dirichlet
sample_every = 50
";
    let cfg = SimulationConfig::from_key_value(&KeyValueConfig::parse(text).unwrap()).unwrap();
    assert_eq!(cfg.n_steps(), 300);
    assert!(matches!(cfg.model, Model::Arz(p) if p.tau == 0.05 && p.gamma == 2.0));
    assert_eq!(cfg.initial.iter().filter(|&&r| r == 0.7).count(), 40);
    let run = run_simulation(&cfg).unwrap();
    assert_eq!(run.states.len(), 7);
    assert!(run.max_conservation_error < 1e-10);

    let bad = KeyValueConfig::parse("model = lwr\nspeed = 3\n").unwrap();
    assert!(SimulationConfig::from_key_value(&bad).is_err());
}
