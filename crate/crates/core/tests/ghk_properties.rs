use gwd_core::ghk::single_atom_value;
use gwd_core::{ghk_solve, DiscreteMeasure, GhkOptions, GhkParams, Grid1D};
use proptest::prelude::*;

fn grid() -> Grid1D {
    Grid1D::from_barycenters(0.0, 0.25, 9).unwrap()
}

/// Dual objective with `ψ` the c-transform of `φ` on the supported demand
/// cells; concave in `φ`.
fn reduced_dual(
    supply: &[(f64, f64)],
    demand: &[(f64, f64)],
    params: GhkParams,
    phi: &[f64],
) -> f64 {
    let GhkParams { a, b } = params;
    let gain = |m: f64, p: f64| a * m * (1.0 - (-b * p / a).exp());
    let mut f: f64 = supply.iter().zip(phi).map(|(&(_, m), &p)| gain(m, p)).sum();
    for &(y, m) in demand {
        let psi = supply
            .iter()
            .zip(phi)
            .map(|(&(x, _), &p)| (x - y) * (x - y) - p)
            .fold(f64::INFINITY, f64::min);
        f += gain(m, psi);
    }
    f
}

/// Grid search over `φ ∈ ℝ^ns` (ns ≤ 2) with repeated zooming on the best
/// node.
fn brute_force(supply: &[(f64, f64)], demand: &[(f64, f64)], params: GhkParams) -> f64 {
    const NODES: i32 = 40;
    let ns = supply.len();
    let mut centre = vec![0.0; ns];
    let mut half = 12.0;
    let mut best = f64::NEG_INFINITY;
    for _ in 0..40 {
        let h = 2.0 * half / NODES as f64;
        let mut arg = centre.clone();
        let mut idx = vec![0i32; ns];
        loop {
            let phi: Vec<f64> = (0..ns).map(|d| centre[d] - half + h * idx[d] as f64).collect();
            let v = reduced_dual(supply, demand, params, &phi);
            if v > best {
                best = v;
                arg = phi;
            }
            let mut d = 0;
            while d < ns {
                idx[d] += 1;
                if idx[d] <= NODES {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
            if d == ns {
                break;
            }
        }
        centre = arg;
        half = 3.0 * h;
    }
    best
}

fn atoms(max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::btree_map(0usize..9, 0.05f64..2.0, 1..=max)
        .prop_map(|m| m.into_iter().map(|(i, mass)| (0.25 * i as f64, mass)).collect())
}

fn measure(a: &[(f64, f64)]) -> DiscreteMeasure {
    DiscreteMeasure::from_atoms(grid(), a).unwrap()
}

fn solve(ms: &DiscreteMeasure, md: &DiscreteMeasure, params: GhkParams) -> gwd_core::GhkSolution {
    ghk_solve(ms, md, params, GhkOptions { tol: 1e-10, ..Default::default() }).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn matches_brute_force_dual(
        s in atoms(2),
        d in atoms(3),
        a in 0.5f64..2.0,
        b in 0.5f64..2.0,
    ) {
        let params = GhkParams::new(a, b).unwrap();
        let v = solve(&measure(&s), &measure(&d), params).value;
        let oracle = brute_force(&s, &d, params);
        prop_assert!((v - oracle).abs() <= 1e-6 * (1.0 + oracle.abs()), "ipm {v} grid {oracle}");
    }

    #[test]
    fn certified_and_feasible(s in atoms(4), d in atoms(4), a in 0.5f64..2.0, b in 0.5f64..2.0) {
        let (ms, md) = (measure(&s), measure(&d));
        let sol = solve(&ms, &md, GhkParams::new(a, b).unwrap());
        prop_assert!(sol.upper_bound - sol.value <= 1e-10 * sol.value.abs().max(1.0) + 1e-12);
        prop_assert!(sol.value >= -1e-12);
        prop_assert!(sol.value <= a * (ms.total_mass() + md.total_mass()) + 1e-9);
        prop_assert!(sol.potentials.max_violation(&grid().barycenters()) <= 1e-9);
    }

    #[test]
    fn symmetric(s in atoms(4), d in atoms(4)) {
        let (ms, md) = (measure(&s), measure(&d));
        let ab = solve(&ms, &md, GhkParams::default()).value;
        let ba = solve(&md, &ms, GhkParams::default()).value;
        prop_assert!((ab - ba).abs() <= 1e-8 * (1.0 + ab));
    }

    #[test]
    fn homogeneous_in_mass(s in atoms(3), d in atoms(3), k in 0.2f64..5.0) {
        let (ms, md) = (measure(&s), measure(&d));
        let base = solve(&ms, &md, GhkParams::default()).value;
        let scaled = solve(&ms.scaled(k).unwrap(), &md.scaled(k).unwrap(), GhkParams::default()).value;
        prop_assert!((scaled - k * base).abs() <= 1e-8 * (1.0 + k * base));
    }

    #[test]
    fn single_atoms_follow_the_closed_form(i in 0usize..9, j in 0usize..9, m1 in 0.05f64..5.0, m2 in 0.05f64..5.0) {
        let (x, y) = (0.25 * i as f64, 0.25 * j as f64);
        let v = solve(&measure(&[(x, m1)]), &measure(&[(y, m2)]), GhkParams::default()).value;
        prop_assert!((v - single_atom_value(m1, m2, x - y)).abs() <= 1e-8);
    }
}

#[test]
fn identical_measures_have_zero_value() {
    let m = measure(&[(0.5, 1.0), (1.0, 0.3), (1.75, 2.0)]);
    assert!(solve(&m, &m, GhkParams::default()).value.abs() < 1e-9);
}

#[test]
fn one_empty_side_saturates() {
    let m = measure(&[(0.5, 1.0), (1.0, 0.3)]);
    let empty = DiscreteMeasure::zero(grid());
    let v = solve(&m, &empty, GhkParams::new(2.0, 1.0).unwrap()).value;
    assert!((v - 2.0 * 1.3).abs() < 1e-9, "{v}");
}
