//! Cell-centered scalar fields and MAC staggered velocity fields.

use crate::error::{ChbError, Result};
use crate::grid::{BoundaryMode, GridSpec};

/// Cell-centered scalar unknown (phase field, chemical potential, pressure,
/// adjoint scalar, tracking targets). Row-major, `nx * ny` values.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &GridSpec) -> Self {
        ScalarField { grid: grid.clone(), values: vec![0.0; grid.n_cells()] }
    }

    pub fn constant(grid: &GridSpec, c: f64) -> Self {
        ScalarField { grid: grid.clone(), values: vec![c; grid.n_cells()] }
    }

    pub fn from_fn(grid: &GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.n_cells());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (x, y) = grid.cell_center(i, j);
                values.push(f(x, y));
            }
        }
        ScalarField { grid: grid.clone(), values }
    }

    pub fn from_values(grid: &GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(ChbError::GridMismatch(format!(
                "scalar field length {} does not match {}x{} grid",
                values.len(),
                grid.nx,
                grid.ny
            )));
        }
        Ok(ScalarField { grid: grid.clone(), values })
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let k = self.grid.idx(i, j);
        &mut self.values[k]
    }

    pub fn assert_finite(&self, what: &str) -> Result<()> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(ChbError::FormatError(format!("{what} contains non-finite values")))
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Domain integral of the field (midpoint quadrature).
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn subtract_mean(&mut self) {
        let m = self.mean();
        for v in &mut self.values {
            *v -= m;
        }
    }

    /// Weighted L2 inner product `sum a_i b_i hx hy`.
    pub fn dot(&self, other: &ScalarField) -> f64 {
        debug_assert!(self.grid.same_layout(&other.grid));
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        s * self.grid.cell_area()
    }

    pub fn norm_l2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.values {
            *v *= s;
        }
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &ScalarField) {
        debug_assert!(self.grid.same_layout(&other.grid));
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += s * b;
        }
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// MAC staggered velocity field: the x component lives on vertical faces
/// (`(nx+1) * ny` values), the y component on horizontal faces
/// (`nx * (ny+1)` values). In no-slip mode the boundary normal faces are
/// pinned to zero and never treated as unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    pub grid: GridSpec,
    pub ux: Vec<f64>,
    pub uy: Vec<f64>,
}

impl VelocityField {
    pub fn zeros(grid: &GridSpec) -> Self {
        VelocityField {
            grid: grid.clone(),
            ux: vec![0.0; (grid.nx + 1) * grid.ny],
            uy: vec![0.0; grid.nx * (grid.ny + 1)],
        }
    }

    /// Sample analytic component functions at face centers. Boundary normal
    /// faces keep whatever the function returns; call `enforce_noslip` for a
    /// no-slip field.
    pub fn from_fn(
        grid: &GridSpec,
        fx: impl Fn(f64, f64) -> f64,
        fy: impl Fn(f64, f64) -> f64,
    ) -> Self {
        let mut v = VelocityField::zeros(grid);
        let (hx, hy) = (grid.hx(), grid.hy());
        for j in 0..grid.ny {
            for i in 0..=grid.nx {
                v.ux[j * (grid.nx + 1) + i] = fx(i as f64 * hx, (j as f64 + 0.5) * hy);
            }
        }
        for j in 0..=grid.ny {
            for i in 0..grid.nx {
                v.uy[j * grid.nx + i] = fy((i as f64 + 0.5) * hx, j as f64 * hy);
            }
        }
        v
    }

    #[inline]
    pub fn ux_at(&self, i: usize, j: usize) -> f64 {
        self.ux[j * (self.grid.nx + 1) + i]
    }

    #[inline]
    pub fn uy_at(&self, i: usize, j: usize) -> f64 {
        self.uy[j * self.grid.nx + i]
    }

    #[inline]
    pub fn ux_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let k = j * (self.grid.nx + 1) + i;
        &mut self.ux[k]
    }

    #[inline]
    pub fn uy_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let k = j * self.grid.nx + i;
        &mut self.uy[k]
    }

    /// Zero the boundary normal faces.
    pub fn enforce_noslip(&mut self) {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        for j in 0..ny {
            self.ux[j * (nx + 1)] = 0.0;
            self.ux[j * (nx + 1) + nx] = 0.0;
        }
        for i in 0..nx {
            self.uy[i] = 0.0;
            self.uy[ny * nx + i] = 0.0;
        }
    }

    pub fn is_noslip(&self) -> bool {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        (0..ny).all(|j| self.ux[j * (nx + 1)] == 0.0 && self.ux[j * (nx + 1) + nx] == 0.0)
            && (0..nx).all(|i| self.uy[i] == 0.0 && self.uy[ny * nx + i] == 0.0)
    }

    pub fn assert_finite(&self, what: &str) -> Result<()> {
        if self.ux.iter().chain(&self.uy).all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(ChbError::FormatError(format!("{what} contains non-finite values")))
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.ux.iter().chain(&self.uy).fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Weighted L2 inner product over all faces, `sum (ax bx + ay by) hx hy`.
    pub fn dot(&self, other: &VelocityField) -> f64 {
        debug_assert!(self.grid.same_layout(&other.grid));
        let sx: f64 = self.ux.iter().zip(&other.ux).map(|(a, b)| a * b).sum();
        let sy: f64 = self.uy.iter().zip(&other.uy).map(|(a, b)| a * b).sum();
        (sx + sy) * self.grid.cell_area()
    }

    pub fn norm_l2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        for v in self.ux.iter_mut().chain(self.uy.iter_mut()) {
            *v *= s;
        }
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &VelocityField) {
        debug_assert!(self.grid.same_layout(&other.grid));
        for (a, b) in self.ux.iter_mut().zip(&other.ux) {
            *a += s * b;
        }
        for (a, b) in self.uy.iter_mut().zip(&other.uy) {
            *a += s * b;
        }
    }

    pub fn sub(&self, other: &VelocityField) -> VelocityField {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Squared discrete H1 seminorm `||grad_h u||^2`, the Green-identity
    /// counterpart of the −Laplacian with no-slip ghost reflection:
    /// interior differences plus `2 u^2` wall terms per tangential boundary.
    pub fn grad_norm_sq(&self) -> f64 {
        debug_assert_eq!(self.grid.boundary_mode, BoundaryMode::NeumannNoslip);
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let (hx, hy) = (self.grid.hx(), self.grid.hy());
        let area = self.grid.cell_area();
        let mut s = 0.0;
        // x component: Dirichlet ends in x (boundary faces are exact zeros),
        // ghost reflection across the walls in y.
        for j in 0..ny {
            for i in 0..nx {
                let d = (self.ux_at(i + 1, j) - self.ux_at(i, j)) / hx;
                s += d * d;
            }
        }
        for i in 1..nx {
            for j in 0..ny.saturating_sub(1) {
                let d = (self.ux_at(i, j + 1) - self.ux_at(i, j)) / hy;
                s += d * d;
            }
            let lo = self.ux_at(i, 0);
            let hi = self.ux_at(i, ny - 1);
            s += 2.0 * (lo * lo + hi * hi) / (hy * hy);
        }
        // y component, mirrored roles.
        for i in 0..nx {
            for j in 0..ny {
                let d = (self.uy_at(i, j + 1) - self.uy_at(i, j)) / hy;
                s += d * d;
            }
        }
        for j in 1..ny {
            for i in 0..nx.saturating_sub(1) {
                let d = (self.uy_at(i + 1, j) - self.uy_at(i, j)) / hx;
                s += d * d;
            }
            let lo = self.uy_at(0, j);
            let hi = self.uy_at(nx - 1, j);
            s += 2.0 * (lo * lo + hi * hi) / (hx * hx);
        }
        s * area
    }
}
