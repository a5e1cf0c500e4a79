//! Uniform 1-D grids, atomic measures on their barycentres and transport cost
//! matrices.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Relative tolerance (in units of `dx`) used when matching positions to
/// barycentres.
pub const POSITION_TOL: f64 = 1e-9;

/// Uniform partition of `[x_min, x_max]` into `n_cells` cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n_cells: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n_cells: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(Error::InvalidGrid(format!(
                "need finite x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        if n_cells < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 cells, got {n_cells}"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            n_cells,
        })
    }

    /// Grid whose first barycentre is `first` and whose cells have width `dx`.
    pub fn from_barycenters(first: f64, dx: f64, n_cells: usize) -> Result<Self> {
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::InvalidGrid(format!("cell width must be positive, got {dx}")));
        }
        let x_min = first - 0.5 * dx;
        Self::new(x_min, x_min + dx * n_cells as f64, n_cells)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n_cells
    }

    pub fn is_empty(&self) -> bool {
        self.n_cells == 0
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_cells as f64
    }

    /// Barycentre of cell `i` (0-based).
    pub fn barycenter(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx()
    }

    pub fn barycenters(&self) -> Vec<f64> {
        (0..self.n_cells).map(|i| self.barycenter(i)).collect()
    }

    /// Index of the cell whose barycentre is `x`, if any (within
    /// [`POSITION_TOL`]`·dx`).
    pub fn cell_at(&self, x: f64) -> Option<usize> {
        let dx = self.dx();
        let s = (x - self.x_min) / dx - 0.5;
        let i = s.round();
        if i < 0.0 || i >= self.n_cells as f64 {
            return None;
        }
        let i = i as usize;
        ((self.barycenter(i) - x).abs() <= POSITION_TOL * dx).then_some(i)
    }

    /// Same number of cells and end points within tolerance.
    pub fn matches(&self, other: &Grid1D) -> bool {
        let tol = POSITION_TOL * self.dx();
        self.n_cells == other.n_cells
            && (self.x_min - other.x_min).abs() <= tol
            && (self.x_max - other.x_max).abs() <= tol
    }
}

/// Non-negative masses attached to the barycentres of a [`Grid1D`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    grid: Grid1D,
    masses: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(grid: Grid1D, masses: Vec<f64>) -> Result<Self> {
        if masses.len() != grid.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} masses for {} cells",
                masses.len(),
                grid.len()
            )));
        }
        if let Some((i, m)) = masses
            .iter()
            .enumerate()
            .find(|(_, m)| !(m.is_finite() && **m >= 0.0))
        {
            return Err(Error::InvalidMeasure(format!("mass {m} in cell {i}")));
        }
        Ok(Self { grid, masses })
    }

    pub fn zero(grid: Grid1D) -> Self {
        Self {
            grid,
            masses: vec![0.0; grid.len()],
        }
    }

    /// Measure made of point masses `(position, mass)`; each position must be
    /// a barycentre of `grid`. Repeated positions accumulate.
    pub fn from_atoms(grid: Grid1D, atoms: &[(f64, f64)]) -> Result<Self> {
        let mut masses = vec![0.0; grid.len()];
        for &(x, m) in atoms {
            let i = grid.cell_at(x).ok_or_else(|| {
                Error::InvalidMeasure(format!("atom position {x} is not a barycentre"))
            })?;
            masses[i] += m;
        }
        Self::new(grid, masses)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        Self::new(self.grid, self.masses.iter().map(|m| alpha * m).collect())
    }

    /// True when the first and last cells carry no mass.
    pub fn has_empty_boundary(&self) -> bool {
        self.masses[0] == 0.0 && self.masses[self.masses.len() - 1] == 0.0
    }

    pub fn ensure_empty_boundary(&self) -> Result<()> {
        if self.has_empty_boundary() {
            Ok(())
        } else {
            Err(Error::InvalidMeasure(format!(
                "boundary cells must be empty, got {} and {}",
                self.masses[0],
                self.masses[self.masses.len() - 1]
            )))
        }
    }

    /// Copy with the first and last cells emptied.
    pub fn with_empty_boundary(&self) -> Self {
        let mut masses = self.masses.clone();
        let n = masses.len();
        masses[0] = 0.0;
        masses[n - 1] = 0.0;
        Self {
            grid: self.grid,
            masses,
        }
    }

    /// Indices of cells carrying positive mass.
    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.masses[i] > 0.0).collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x", "mass"])?;
        for (i, m) in self.masses.iter().enumerate() {
            w.write_record([format!("{}", self.grid.barycenter(i)), format!("{m}")])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Reads the `x,mass` format. The grid is inferred from the positions,
    /// which must be uniformly spaced.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        let names: Vec<&str> = headers.iter().map(str::trim).collect();
        if names != ["x", "mass"] {
            return Err(Error::InvalidMeasure(format!(
                "expected header `x,mass`, got `{}`",
                names.join(",")
            )));
        }
        let mut xs = Vec::new();
        let mut masses = Vec::new();
        for (line, record) in r.records().enumerate() {
            let record = record?;
            let parse = |k: usize| -> Result<f64> {
                record
                    .get(k)
                    .map(str::trim)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| {
                        Error::InvalidMeasure(format!("row {}: bad number", line + 1))
                    })
            };
            xs.push(parse(0)?);
            masses.push(parse(1)?);
        }
        if xs.len() < 3 {
            return Err(Error::InvalidMeasure(format!(
                "need at least 3 rows, got {}",
                xs.len()
            )));
        }
        let n = xs.len();
        let dx = (xs[n - 1] - xs[0]) / (n - 1) as f64;
        let grid = Grid1D::from_barycenters(xs[0], dx, n)?;
        for (i, &x) in xs.iter().enumerate() {
            if (grid.barycenter(i) - x).abs() > POSITION_TOL * dx {
                return Err(Error::InvalidMeasure(format!(
                    "row {}: position {x} is off the uniform grid",
                    i + 1
                )));
            }
        }
        Self::new(grid, masses)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Samples `density` at the barycentres (mid-point rule): `m_i = ρ(x_i)·dx`.
pub fn discretize<F: Fn(f64) -> f64>(density: F, grid: &Grid1D) -> Result<DiscreteMeasure> {
    let dx = grid.dx();
    let mut masses = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let x = grid.barycenter(i);
        let rho = density(x);
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(Error::InvalidMeasure(format!("density {rho} at x = {x}")));
        }
        masses.push(rho * dx);
    }
    DiscreteMeasure::new(*grid, masses)
}

pub fn total_mass(m: &DiscreteMeasure) -> f64 {
    m.total_mass()
}

/// Indicator function of the closed interval `[lo, hi]` scaled by `height`.
pub fn indicator(lo: f64, hi: f64, height: f64) -> impl Fn(f64) -> f64 {
    move |x| if (lo..=hi).contains(&x) { height } else { 0.0 }
}

/// Dense row-major matrix `c_jk = |x_k − x_j|^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    p: f64,
    entries: Vec<f64>,
}

impl CostMatrix {
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.entries[j * self.n + k]
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn exponent(&self) -> f64 {
        self.p
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn max(&self) -> f64 {
        self.entries.iter().copied().fold(0.0, f64::max)
    }
}

pub fn cost_matrix(grid: &Grid1D, p: f64) -> Result<CostMatrix> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("exponent p must be >= 1, got {p}")));
    }
    let xs = grid.barycenters();
    let n = xs.len();
    let mut entries = Vec::with_capacity(n * n);
    for &xj in &xs {
        for &xk in &xs {
            let d = (xk - xj).abs();
            entries.push(if p == 1.0 { d } else { d.powf(p) });
        }
    }
    Ok(CostMatrix { n, p, entries })
}
