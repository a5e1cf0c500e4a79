//! Inputs shared by the benchmarks.

use gwd_core::experiments;
use gwd_core::{DiscreteMeasure, Grid1D, TrafficState};

/// The gaussian pair of the reservoir test on `n` cells.
pub fn gaussians(n: usize) -> (DiscreteMeasure, DiscreteMeasure) {
    experiments::fg_test2_measures(n).expect("valid fixture")
}

/// The same pair rescaled to equal masses, for the classical distance.
pub fn balanced_gaussians(n: usize) -> (DiscreteMeasure, DiscreteMeasure) {
    let (ms, md) = gaussians(n);
    let md = md.scaled(ms.total_mass() / md.total_mass()).expect("positive masses");
    (ms, md)
}

/// Block of dense traffic on a light background.
pub fn block(n: usize) -> (Grid1D, TrafficState) {
    let grid = Grid1D::new(0.0, 4.0, n).expect("valid grid");
    let rho = grid
        .barycenters()
        .into_iter()
        .map(|x| if (1.6..=2.4).contains(&x) { 0.7 } else { 0.1 })
        .collect();
    (grid, TrafficState::at_equilibrium(0.0, rho))
}
