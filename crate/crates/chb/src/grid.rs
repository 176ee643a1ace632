//! Uniform cell-centered grid description.

use crate::error::{ChbError, Result};

/// How the domain boundary is treated.
///
/// `NeumannNoslip` is the physical mode: zero chemical-potential flux and
/// no-slip velocity on the boundary, convolutions restricted to the domain.
/// `PeriodicTest` wraps convolutions around; it exists for spectral
/// verification of the nonlocal operators and is rejected by the time
/// integrator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryMode {
    NeumannNoslip,
    PeriodicTest,
}

/// Uniform rectangular grid with `nx * ny` cells on `[0, Lx] x [0, Ly]`.
///
/// Scalars live at cell centers `((i+1/2) hx, (j+1/2) hy)`; velocity
/// components live on cell faces (MAC layout).
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub boundary_mode: BoundaryMode,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64, boundary_mode: BoundaryMode) -> Result<Self> {
        if nx < 4 || ny < 4 {
            return Err(ChbError::config("grid.nx/ny", "cell counts must be >= 4"));
        }
        if !(lx > 0.0) || !(ly > 0.0) {
            return Err(ChbError::config("grid.Lx/Ly", "domain lengths must be positive"));
        }
        Ok(GridSpec { nx, ny, lx, ly, boundary_mode })
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    /// Cell area, the quadrature weight of every cell-centered value.
    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    /// Center coordinates of cell `(i, j)`.
    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.hx(), (j as f64 + 0.5) * self.hy())
    }

    /// Row-major index of cell `(i, j)`.
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn same_layout(&self, other: &GridSpec) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && self.lx == other.lx
            && self.ly == other.ly
            && self.boundary_mode == other.boundary_mode
    }

    pub fn check_same(&self, other: &GridSpec, what: &str) -> Result<()> {
        if self.same_layout(other) {
            Ok(())
        } else {
            Err(ChbError::GridMismatch(format!(
                "{what}: {}x{} vs {}x{}",
                self.nx, self.ny, other.nx, other.ny
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_tiny_grids() {
        assert!(GridSpec::new(3, 8, 1.0, 1.0, BoundaryMode::NeumannNoslip).is_err());
        assert!(GridSpec::new(8, 8, 0.0, 1.0, BoundaryMode::NeumannNoslip).is_err());
    }

    #[test]
    fn cell_geometry() {
        let g = GridSpec::new(8, 4, 2.0, 1.0, BoundaryMode::NeumannNoslip).unwrap();
        assert_eq!(g.hx(), 0.25);
        assert_eq!(g.hy(), 0.25);
        assert_eq!(g.cell_center(0, 0), (0.125, 0.125));
        assert_eq!(g.idx(7, 3), 31);
    }
}
