//! Domain-restricted convolution operators for the nonlocal coupling:
//! `J * phi`, `(grad J) * phi`, the boundary-aware coefficient `a(x)`, and
//! the nonlocal interaction energy.
//!
//! Both execution modes compute the same object,
//! `(J*phi)(x_i) = sum_{y_j in Omega} J(x_i - y_j) phi(y_j) hx hy`:
//! the direct mode walks the truncated stencil, the fft mode zero-pads to
//! twice the grid so the circular transform realizes the same linear
//! convolution. In periodic mode the lattice wraps instead.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{ChbError, Result};
use crate::field::ScalarField;
use crate::grid::{BoundaryMode, GridSpec};
use crate::kernel::{Kernel, StencilTable};
use crate::potential::Potential;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvMode {
    Direct,
    FftPadded,
}

struct FftEngine {
    px: usize,
    py: usize,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
    /// Transforms of the kernel images for J, dJ/dx, dJ/dy.
    khat: [Vec<Complex<f64>>; 3],
}

/// Precomputed plan for applying the kernel and its gradient to fields on
/// one grid. Immutable after construction; `convolve` is re-entrant.
pub struct ConvolutionPlan {
    pub grid: GridSpec,
    pub kernel: Kernel,
    pub mode: ConvMode,
    stencil_j: StencilTable,
    stencil_gx: StencilTable,
    stencil_gy: StencilTable,
    a_field: ScalarField,
    fft: Option<FftEngine>,
}

impl ConvolutionPlan {
    pub fn new(grid: &GridSpec, kernel: &Kernel, mode: ConvMode) -> Result<Self> {
        // Offsets beyond the grid can never pair two cells of the domain, so
        // the stencil radius is capped there; the periodic image folding
        // below uses the raw truncation radius.
        let rc = kernel.truncation;
        let stencil_j = StencilTable::build(grid, rc, |x, y| kernel.value(x, y));
        let stencil_gx = StencilTable::build(grid, rc, |x, y| kernel.gradient(x, y).0);
        let stencil_gy = StencilTable::build(grid, rc, |x, y| kernel.gradient(x, y).1);

        let fft = match mode {
            ConvMode::Direct => None,
            ConvMode::FftPadded => Some(Self::build_fft(grid, &[&stencil_j, &stencil_gx, &stencil_gy])),
        };

        let mut plan = ConvolutionPlan {
            grid: grid.clone(),
            kernel: kernel.clone(),
            mode,
            stencil_j,
            stencil_gx,
            stencil_gy,
            a_field: ScalarField::zeros(grid),
            fft,
        };
        // a(x) = (J * 1)(x); computed with the direct path at build time so
        // it is exact for both modes.
        plan.a_field = plan.convolve_stencil_direct(&ScalarField::constant(grid, 1.0), 0);
        Ok(plan)
    }

    fn build_fft(grid: &GridSpec, stencils: &[&StencilTable; 3]) -> FftEngine {
        let (px, py) = match grid.boundary_mode {
            // Padding to 2nx x 2ny (>= (2nx-1) x (2ny-1)) kills circular
            // aliasing of the restricted convolution.
            BoundaryMode::NeumannNoslip => (2 * grid.nx, 2 * grid.ny),
            BoundaryMode::PeriodicTest => (grid.nx, grid.ny),
        };
        let mut planner = FftPlanner::new();
        let fwd_x = planner.plan_fft_forward(px);
        let inv_x = planner.plan_fft_inverse(px);
        let fwd_y = planner.plan_fft_forward(py);
        let inv_y = planner.plan_fft_inverse(py);

        let restricted = grid.boundary_mode == BoundaryMode::NeumannNoslip;
        let khat = [0, 1, 2].map(|s| {
            let st = stencils[s];
            let mut img = vec![Complex::new(0.0, 0.0); px * py];
            for dj in -(st.ry as isize)..=(st.ry as isize) {
                for di in -(st.rx as isize)..=(st.rx as isize) {
                    // Offsets wider than the grid cannot pair two domain
                    // cells; keeping them would alias on the padded torus.
                    if restricted
                        && (di.unsigned_abs() >= grid.nx || dj.unsigned_abs() >= grid.ny)
                    {
                        continue;
                    }
                    let v = st.at(di, dj);
                    if v != 0.0 {
                        let ii = di.rem_euclid(px as isize) as usize;
                        let jj = dj.rem_euclid(py as isize) as usize;
                        // In periodic mode wide stencils fold onto the torus.
                        img[jj * px + ii] += Complex::new(v, 0.0);
                    }
                }
            }
            fft2(&mut img, px, py, &fwd_x, &fwd_y);
            img
        });

        FftEngine { px, py, fwd_x, inv_x, fwd_y, inv_y, khat }
    }

    pub fn a(&self) -> &ScalarField {
        &self.a_field
    }

    fn stencil(&self, which: usize) -> &StencilTable {
        match which {
            0 => &self.stencil_j,
            1 => &self.stencil_gx,
            _ => &self.stencil_gy,
        }
    }

    fn check_grid(&self, f: &ScalarField) -> Result<()> {
        self.grid.check_same(&f.grid, "convolution input")
    }

    fn convolve_stencil_direct(&self, f: &ScalarField, which: usize) -> ScalarField {
        let st = self.stencil(which);
        let g = &self.grid;
        let (nx, ny) = (g.nx as isize, g.ny as isize);
        let (rx, ry) = (st.rx as isize, st.ry as isize);
        let periodic = g.boundary_mode == BoundaryMode::PeriodicTest;
        let mut out = vec![0.0; f.values.len()];
        out.par_chunks_mut(g.nx)
            .enumerate()
            .for_each(|(j, row)| {
                let j = j as isize;
                for i in 0..nx {
                    let mut s = 0.0;
                    for dj in -ry..=ry {
                        let jj = j - dj;
                        let jj = if periodic {
                            jj.rem_euclid(ny)
                        } else if (0..ny).contains(&jj) {
                            jj
                        } else {
                            continue;
                        };
                        for di in -rx..=rx {
                            let ii = i - di;
                            let ii = if periodic {
                                ii.rem_euclid(nx)
                            } else if (0..nx).contains(&ii) {
                                ii
                            } else {
                                continue;
                            };
                            s += st.at(di, dj) * f.values[(jj * nx + ii) as usize];
                        }
                    }
                    row[i as usize] = s;
                }
            });
        ScalarField { grid: g.clone(), values: out }
    }

    fn convolve_stencil_fft(&self, f: &ScalarField, which: usize) -> ScalarField {
        let e = self.fft.as_ref().expect("fft engine present in fft mode");
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let (px, py) = (e.px, e.py);
        let mut buf = vec![Complex::new(0.0, 0.0); px * py];
        for j in 0..ny {
            for i in 0..nx {
                buf[j * px + i] = Complex::new(f.values[j * nx + i], 0.0);
            }
        }
        fft2(&mut buf, px, py, &e.fwd_x, &e.fwd_y);
        let khat = &e.khat[which];
        for (b, k) in buf.iter_mut().zip(khat) {
            *b *= *k;
        }
        fft2(&mut buf, px, py, &e.inv_x, &e.inv_y);
        let scale = 1.0 / (px * py) as f64;
        let mut out = vec![0.0; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                out[j * nx + i] = buf[j * px + i].re * scale;
            }
        }
        ScalarField { grid: self.grid.clone(), values: out }
    }

    fn convolve_stencil(&self, f: &ScalarField, which: usize) -> ScalarField {
        match self.mode {
            ConvMode::Direct => self.convolve_stencil_direct(f, which),
            ConvMode::FftPadded => self.convolve_stencil_fft(f, which),
        }
    }

    /// `J * phi` restricted to the domain.
    pub fn convolve(&self, f: &ScalarField) -> Result<ScalarField> {
        self.check_grid(f)?;
        Ok(self.convolve_stencil(f, 0))
    }

    /// Both components of `(grad J) * phi`, from the analytic gradient
    /// stencils.
    pub fn grad_kernel_convolve(&self, f: &ScalarField) -> Result<(ScalarField, ScalarField)> {
        self.check_grid(f)?;
        Ok((self.convolve_stencil(f, 1), self.convolve_stencil(f, 2)))
    }

    /// Kernel stencil as CSV rows `di,dj,value` for debugging.
    pub fn stencil_csv(&self) -> String {
        self.stencil_j.to_csv()
    }
}

fn fft2(
    buf: &mut [Complex<f64>],
    px: usize,
    py: usize,
    fft_x: &Arc<dyn Fft<f64>>,
    fft_y: &Arc<dyn Fft<f64>>,
) {
    for row in buf.chunks_mut(px) {
        fft_x.process(row);
    }
    let mut col = vec![Complex::new(0.0, 0.0); py];
    for i in 0..px {
        for j in 0..py {
            col[j] = buf[j * px + i];
        }
        fft_y.process(&mut col);
        for j in 0..py {
            buf[j * px + i] = col[j];
        }
    }
}

/// `a(x) = (J * 1)(x)`, the domain-restricted kernel mass seen from each
/// cell.
pub fn precompute_a(plan: &ConvolutionPlan) -> ScalarField {
    plan.a().clone()
}

/// Interaction energy
/// `E = 1/4 iint J(x-y) (phi(x)-phi(y))^2 + int F(phi)`, computed through
/// the algebraic identity `1/4 iint J (phi(x)-phi(y))^2 =
/// 1/2 <a phi, phi> - 1/2 <phi, J*phi>`.
pub fn nonlocal_energy(plan: &ConvolutionPlan, phi: &ScalarField, pot: &Potential) -> Result<f64> {
    plan.grid.check_same(&phi.grid, "energy input")?;
    let jphi = plan.convolve(phi)?;
    let a = plan.a();
    let area = plan.grid.cell_area();
    let mut pair = 0.0;
    let mut bulk = 0.0;
    for ((&p, &jp), &av) in phi.values.iter().zip(&jphi.values).zip(&a.values) {
        pair += 0.5 * (av * p * p - p * jp);
        bulk += pot.eval(0, p);
    }
    Ok((pair + bulk) * area)
}

/// Error type helper for grid mismatches raised by plan users.
pub fn grid_mismatch(what: &str) -> ChbError {
    ChbError::GridMismatch(what.to_string())
}
