use gwd_core::ss::simplex_grid_size;
use gwd_core::{
    ghk_solve, min_norm_radii, ss_exhaustive, ss_objective, ss_random_descent, ConeAtom,
    ConeProblem, ConeWeights, DiscreteMeasure, GhkOptions, GhkParams, Grid1D, SsConfig,
};
use proptest::prelude::*;

fn grid() -> Grid1D {
    Grid1D::from_barycenters(0.0, 0.5, 7).unwrap()
}

/// One or two atoms per side with up to two subdivisions each.
fn problem() -> impl Strategy<Value = (Vec<(f64, f64)>, Vec<(f64, f64)>, usize)> {
    let side = prop::collection::btree_map(0usize..7, 0.1f64..3.0, 1..=2)
        .prop_map(|m| m.into_iter().map(|(i, mass)| (0.5 * i as f64, mass)).collect::<Vec<_>>());
    (side.clone(), side, 1usize..=2)
}

fn cone(s: &[(f64, f64)], d: &[(f64, f64)], n: usize) -> ConeProblem {
    let atoms = |v: &[(f64, f64)]| v.iter().map(|&(x, m)| ConeAtom::new(x, m, n)).collect::<Vec<_>>();
    ConeProblem::new(&atoms(s), &atoms(d)).unwrap()
}

fn quick() -> SsConfig {
    SsConfig {
        q: 200,
        n_random: 300,
        n_descent: 300,
        ..SsConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ss_is_an_upper_bound_of_ghk((s, d, n) in problem(), seed in 0u64..100) {
        let ms = DiscreteMeasure::from_atoms(grid(), &s).unwrap();
        let md = DiscreteMeasure::from_atoms(grid(), &d).unwrap();
        let ghk = ghk_solve(&ms, &md, GhkParams::default(), GhkOptions::default()).unwrap().value;
        let p = cone(&s, &d, n);
        let random = ss_random_descent(&p, &SsConfig { seed, ..quick() }).unwrap().value;
        let grid_search = ss_exhaustive(&p, &SsConfig { q: 8, ..quick() }).unwrap().value;
        prop_assert!(random >= 0.0 && grid_search >= 0.0);
        prop_assert!(ghk <= random + 1e-6, "ghk {ghk} ss-b {random}");
        prop_assert!(ghk <= grid_search + 1e-6, "ghk {ghk} ss-a {grid_search}");
    }

    /// The weight grid at resolution `2Q` contains the one at `Q`.
    #[test]
    fn finer_weight_grid_never_worse((s, d, n) in problem()) {
        let p = cone(&s, &d, n);
        let coarse = ss_exhaustive(&p, &SsConfig { q: 4, ..quick() }).unwrap();
        let fine = ss_exhaustive(&p, &SsConfig { q: 8, ..quick() }).unwrap();
        prop_assert!(fine.value <= coarse.value + 1e-12);
        prop_assert_eq!(
            (coarse.feasible + coarse.infeasible) as u128,
            simplex_grid_size(4, p.dim())
        );
    }

    #[test]
    fn random_search_is_reproducible((s, d, n) in problem(), seed in 0u64..1000) {
        let p = cone(&s, &d, n);
        let cfg = SsConfig { seed, ..quick() };
        let a = ss_random_descent(&p, &cfg).unwrap();
        let b = ss_random_descent(&p, &cfg).unwrap();
        prop_assert_eq!(a.value.to_bits(), b.value.to_bits());
        prop_assert_eq!(a.weights, b.weights);
        prop_assert!(a.value <= a.random_best + 1e-15);
    }

    /// Least-norm radii satisfy `Σ_h r_jh R_jh = m_j` on both sides, with
    /// `R` the marginal weights of each subdivision.
    #[test]
    fn radii_rebuild_the_masses((s, d, n) in problem(), raw in prop::collection::vec(0.01f64..1.0, 16)) {
        let p = cone(&s, &d, n);
        let w: Vec<f64> = raw[..p.dim()].to_vec();
        let total: f64 = w.iter().sum();
        let weights = ConeWeights(w.iter().map(|v| v / total).collect());
        let nd: usize = p.demand().iter().map(|a| a.subdivisions).sum();
        let ns = p.dim() / nd;
        let rows: Vec<f64> = (0..ns).map(|i| weights.0[i * nd..(i + 1) * nd].iter().sum()).collect();
        let cols: Vec<f64> = (0..nd).map(|k| (0..ns).map(|i| weights.0[i * nd + k]).sum()).collect();
        let r = min_norm_radii(&p, &weights).expect("all weights positive");
        let check = |atoms: &[ConeAtom], radii: &[Vec<f64>], marg: &[f64]| {
            let mut start = 0;
            for (atom, r) in atoms.iter().zip(radii) {
                let m: f64 = r.iter().zip(&marg[start..]).map(|(r, g)| r * g).sum();
                start += atom.subdivisions;
                assert!((m - atom.mass).abs() <= 1e-9 * atom.mass.max(1.0), "{m} vs {}", atom.mass);
            }
        };
        check(p.supply(), &r.supply, &rows);
        check(p.demand(), &r.demand, &cols);
        prop_assert!(ss_objective(&p, &weights, &r) >= -1e-12);
    }
}

#[test]
fn exhaustive_budget_is_enforced() {
    let p = cone(&[(0.0, 1.0), (1.0, 1.0)], &[(2.0, 1.0)], 2);
    let cfg = SsConfig {
        q: 50,
        budget: 10,
        ..SsConfig::default()
    };
    assert!(ss_exhaustive(&p, &cfg).is_err());
}

#[test]
fn zero_subdivisions_rejected() {
    assert!(ConeProblem::new(&[ConeAtom::new(0.0, 1.0, 0)], &[ConeAtom::new(1.0, 1.0, 1)]).is_err());
}
