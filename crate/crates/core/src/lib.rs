//! Classical and generalized Wasserstein distances between measures on a 1-D
//! grid, together with the macroscopic traffic models they are used to
//! compare.
//!
//! ```
//! use gwd_core::{fg_distance, pr_distance, DiscreteMeasure, Grid1D, PrParams};
//!
//! let grid = Grid1D::from_barycenters(0.0, 0.1, 51)?;
//! let supply = DiscreteMeasure::from_atoms(grid, &[(1.0, 0.1), (2.5, 0.1)])?;
//! let demand = DiscreteMeasure::from_atoms(grid, &[(3.0, 0.2)])?;
//!
//! let fg = fg_distance(&supply, &demand, 1.0)?;
//! assert!((fg.value - 0.25).abs() < 1e-9);
//! let pr = pr_distance(&supply, &demand, PrParams::default())?;
//! assert!(pr.value <= fg.value + 0.2);
//! # Ok::<(), gwd_core::Error>(())
//! ```

pub mod classic;
pub mod error;
pub mod experiments;
pub mod fg;
pub mod ghk;
pub mod grid;
pub mod lp;
pub mod pr;
pub mod ss;
pub mod traffic;

pub use error::{Error, Result};
pub use grid::{cost_matrix, discretize, indicator, total_mass, CostMatrix, DiscreteMeasure, Grid1D};
pub use lp::{solve_lp, solve_lp_default, LpProblem, LpSolution, LpStatus, Sense};
pub use classic::{monotone_plan, w1_cdf, w1_lp, TransportPlan};
pub use fg::{fg_distance, fg_distance_extended, BoundaryMasses, CreationCosts, FgSolution};
pub use pr::{pr_distance, PrParams, PrSolution};
pub use ghk::{ghk_solve, ghk_solve_dual, ghk_value, DualPotentials, GhkOptions, GhkParams, GhkSolution};
pub use ss::{min_norm_radii, ss_exhaustive, ss_objective, ss_random_descent, ConeAtom, ConeDiscretization, ConeProblem, ConeWeights, SsConfig, SsResult};
pub use traffic::{apply_traffic_light, arz_step, godunov_flux, lwr_step, run_simulation, ArzParams, BoundaryKind, BoundarySpec, Signal, TrafficLight, TrafficState};
