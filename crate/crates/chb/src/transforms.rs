//! Direct solvers for the constant-coefficient Helmholtz problems, by
//! diagonalization with orthonormal cosine/sine bases.
//!
//! Cell-centered fields with Neumann boundary diagonalize under the
//! half-offset cosine basis; MAC velocity components diagonalize under a
//! whole-sample sine basis in the wall-normal direction (Dirichlet at the
//! pinned boundary faces) and a half-offset sine basis in the tangential
//! direction (ghost reflection `u_ghost = -u_in`). The bases are stored as
//! explicit orthonormal matrices, so every solve is a fixed sequence of
//! matrix products: deterministic, machine-accurate, and symmetric as a
//! linear map. That exactness is what lets the discrete adjoint pass
//! transpose dot tests near round-off.

use crate::field::{ScalarField, VelocityField};
use crate::grid::GridSpec;

/// Orthonormal transform basis: `rows x cols` matrix applied as `out = B in`.
#[derive(Debug, Clone)]
struct Basis {
    n: usize,
    /// `mat[k * n + i]` = weight of sample `i` in mode `k`.
    mat: Vec<f64>,
}

impl Basis {
    /// Half-offset cosine modes `c_k cos(k pi (i+1/2)/n)`; Neumann eigenbasis.
    fn cosine_half(n: usize) -> Basis {
        let mut mat = vec![0.0; n * n];
        for k in 0..n {
            let c = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
            for i in 0..n {
                mat[k * n + i] = c * (k as f64 * std::f64::consts::PI * (i as f64 + 0.5)
                    / n as f64)
                    .cos();
            }
        }
        Basis { n, mat }
    }

    /// Whole-sample sine modes `sqrt(2/n) sin((k+1) pi (i+1)/n)` on the n-1
    /// interior points of a Dirichlet chain of n intervals.
    fn sine_interior(n: usize) -> Basis {
        let m = n - 1;
        let mut mat = vec![0.0; m * m];
        for k in 0..m {
            let c = (2.0 / n as f64).sqrt();
            for i in 0..m {
                mat[k * m + i] = c * ((k as f64 + 1.0) * std::f64::consts::PI
                    * (i as f64 + 1.0)
                    / n as f64)
                    .sin();
            }
        }
        Basis { n: m, mat }
    }

    /// Half-offset sine modes `c_k sin((k+1) pi (i+1/2)/n)`; eigenbasis of the
    /// ghost-reflection (tangential no-slip) second difference.
    fn sine_half(n: usize) -> Basis {
        let mut mat = vec![0.0; n * n];
        for k in 0..n {
            let c = if k + 1 == n { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
            for i in 0..n {
                mat[k * n + i] = c * ((k as f64 + 1.0) * std::f64::consts::PI
                    * (i as f64 + 0.5)
                    / n as f64)
                    .sin();
            }
        }
        Basis { n, mat }
    }
}

/// `out[j*n + k] = sum_i B[k,i] data[j*n + i]` for each of the `rows` rows,
/// transposed application if `transpose` (synthesis instead of analysis).
fn apply_x(b: &Basis, data: &[f64], out: &mut [f64], rows: usize, transpose: bool) {
    let n = b.n;
    for j in 0..rows {
        let src = &data[j * n..(j + 1) * n];
        let dst = &mut out[j * n..(j + 1) * n];
        for (k, d) in dst.iter_mut().enumerate() {
            let mut s = 0.0;
            if transpose {
                for (i, &v) in src.iter().enumerate() {
                    s += b.mat[i * n + k] * v;
                }
            } else {
                for (&w, &v) in b.mat[k * n..(k + 1) * n].iter().zip(src) {
                    s += w * v;
                }
            }
            *d = s;
        }
    }
}

/// Column transform: `out[l*cols + i] = sum_j B[l,j] data[j*cols + i]`.
fn apply_y(b: &Basis, data: &[f64], out: &mut [f64], cols: usize, transpose: bool) {
    let n = b.n;
    for l in 0..n {
        for i in 0..cols {
            out[l * cols + i] = 0.0;
        }
    }
    for j in 0..n {
        for l in 0..n {
            let w = if transpose { b.mat[j * n + l] } else { b.mat[l * n + j] };
            if w == 0.0 {
                continue;
            }
            let src = &data[j * cols..(j + 1) * cols];
            let dst = &mut out[l * cols..(l + 1) * cols];
            for i in 0..cols {
                dst[i] += w * src[i];
            }
        }
    }
}

fn eig_neumann(n: usize, h: f64) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let s = (k as f64 * std::f64::consts::PI / (2.0 * n as f64)).sin();
            4.0 * s * s / (h * h)
        })
        .collect()
}

fn eig_dirichlet_interior(n: usize, h: f64) -> Vec<f64> {
    (0..n - 1)
        .map(|k| {
            let s = ((k as f64 + 1.0) * std::f64::consts::PI / (2.0 * n as f64)).sin();
            4.0 * s * s / (h * h)
        })
        .collect()
}

fn eig_dirichlet_half(n: usize, h: f64) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let s = ((k as f64 + 1.0) * std::f64::consts::PI / (2.0 * n as f64)).sin();
            4.0 * s * s / (h * h)
        })
        .collect()
}

/// Direct solver for `(alpha I - beta Lap_N) x = rhs` on cell-centered data
/// with homogeneous Neumann boundary. With `alpha = 0` the constant mode is
/// gauged to zero (mean-zero solution of the pure Neumann Poisson problem).
#[derive(Debug, Clone)]
pub struct NeumannSolver {
    grid: GridSpec,
    bx: Basis,
    by: Basis,
    lamx: Vec<f64>,
    lamy: Vec<f64>,
}

impl NeumannSolver {
    pub fn new(grid: &GridSpec) -> Self {
        NeumannSolver {
            grid: grid.clone(),
            bx: Basis::cosine_half(grid.nx),
            by: Basis::cosine_half(grid.ny),
            lamx: eig_neumann(grid.nx, grid.hx()),
            lamy: eig_neumann(grid.ny, grid.hy()),
        }
    }

    pub fn solve(&self, rhs: &ScalarField, alpha: f64, beta: f64) -> ScalarField {
        debug_assert!(rhs.grid.same_layout(&self.grid));
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let mut a = vec![0.0; nx * ny];
        let mut b = vec![0.0; nx * ny];
        apply_x(&self.bx, &rhs.values, &mut a, ny, false);
        apply_y(&self.by, &a, &mut b, nx, false);
        for l in 0..ny {
            for k in 0..nx {
                let den = alpha + beta * (self.lamx[k] + self.lamy[l]);
                let v = &mut b[l * nx + k];
                if den.abs() < 1e-300 {
                    *v = 0.0;
                } else {
                    *v /= den;
                }
            }
        }
        apply_y(&self.by, &b, &mut a, nx, true);
        let mut out = vec![0.0; nx * ny];
        apply_x(&self.bx, &a, &mut out, ny, true);
        ScalarField { grid: self.grid.clone(), values: out }
    }
}

/// Direct solver for the velocity Helmholtz problem `(I - nu Lap) u = f` on
/// MAC faces with no-slip boundary, per component.
#[derive(Debug, Clone)]
pub struct VelocityHelmholtzSolver {
    grid: GridSpec,
    nu: f64,
    // x component: sine-interior in x, sine-half in y
    bxn: Basis,
    bxt: Basis,
    lam_xn: Vec<f64>,
    lam_xt: Vec<f64>,
    // y component: sine-half in x, sine-interior in y
    byt: Basis,
    byn: Basis,
    lam_yt: Vec<f64>,
    lam_yn: Vec<f64>,
}

impl VelocityHelmholtzSolver {
    pub fn new(grid: &GridSpec, nu: f64) -> Self {
        VelocityHelmholtzSolver {
            grid: grid.clone(),
            nu,
            bxn: Basis::sine_interior(grid.nx),
            bxt: Basis::sine_half(grid.ny),
            lam_xn: eig_dirichlet_interior(grid.nx, grid.hx()),
            lam_xt: eig_dirichlet_half(grid.ny, grid.hy()),
            byt: Basis::sine_half(grid.nx),
            byn: Basis::sine_interior(grid.ny),
            lam_yt: eig_dirichlet_half(grid.nx, grid.hx()),
            lam_yn: eig_dirichlet_interior(grid.ny, grid.hy()),
        }
    }

    pub fn solve(&self, f: &VelocityField) -> VelocityField {
        debug_assert!(f.grid.same_layout(&self.grid));
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let mut out = VelocityField::zeros(&self.grid);

        // x component on interior vertical faces, (nx-1) x ny values.
        {
            let m = nx - 1;
            let mut data = vec![0.0; m * ny];
            for j in 0..ny {
                for i in 0..m {
                    data[j * m + i] = f.ux_at(i + 1, j);
                }
            }
            let mut a = vec![0.0; m * ny];
            let mut b = vec![0.0; m * ny];
            apply_x(&self.bxn, &data, &mut a, ny, false);
            apply_y(&self.bxt, &a, &mut b, m, false);
            for l in 0..ny {
                for k in 0..m {
                    b[l * m + k] /= 1.0 + self.nu * (self.lam_xn[k] + self.lam_xt[l]);
                }
            }
            apply_y(&self.bxt, &b, &mut a, m, true);
            apply_x(&self.bxn, &a, &mut b, ny, true);
            for j in 0..ny {
                for i in 0..m {
                    *out.ux_mut(i + 1, j) = b[j * m + i];
                }
            }
        }

        // y component on interior horizontal faces, nx x (ny-1) values.
        {
            let m = ny - 1;
            let mut data = vec![0.0; nx * m];
            for j in 0..m {
                for i in 0..nx {
                    data[j * nx + i] = f.uy_at(i, j + 1);
                }
            }
            let mut a = vec![0.0; nx * m];
            let mut b = vec![0.0; nx * m];
            apply_x(&self.byt, &data, &mut a, m, false);
            apply_y(&self.byn, &a, &mut b, nx, false);
            for l in 0..m {
                for k in 0..nx {
                    b[l * nx + k] /= 1.0 + self.nu * (self.lam_yt[k] + self.lam_yn[l]);
                }
            }
            apply_y(&self.byn, &b, &mut a, nx, true);
            apply_x(&self.byt, &a, &mut b, m, true);
            for j in 0..m {
                for i in 0..nx {
                    *out.uy_mut(i, j + 1) = b[j * nx + i];
                }
            }
        }
        out
    }
}

/// Apply `(I - nu Lap)` to a no-slip velocity field: the exact operator the
/// solver inverts (ghost reflection tangentially, pinned zeros normally).
/// Output boundary faces are zero.
pub fn velocity_helmholtz_apply(u: &VelocityField, nu: f64) -> VelocityField {
    let g = &u.grid;
    let (nx, ny) = (g.nx, g.ny);
    let (ihx2, ihy2) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
    let mut out = VelocityField::zeros(g);
    for j in 0..ny {
        for i in 1..nx {
            let c = u.ux_at(i, j);
            let mut lap = (u.ux_at(i - 1, j) - 2.0 * c + u.ux_at(i + 1, j)) * ihx2;
            let below = if j == 0 { -c } else { u.ux_at(i, j - 1) };
            let above = if j + 1 == ny { -c } else { u.ux_at(i, j + 1) };
            lap += (below - 2.0 * c + above) * ihy2;
            *out.ux_mut(i, j) = c - nu * lap;
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let c = u.uy_at(i, j);
            let mut lap = (u.uy_at(i, j - 1) - 2.0 * c + u.uy_at(i, j + 1)) * ihy2;
            let left = if i == 0 { -c } else { u.uy_at(i - 1, j) };
            let right = if i + 1 == nx { -c } else { u.uy_at(i + 1, j) };
            lap += (left - 2.0 * c + right) * ihx2;
            *out.uy_mut(i, j) = c - nu * lap;
        }
    }
    out
}
