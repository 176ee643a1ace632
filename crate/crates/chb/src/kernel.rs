//! Interaction kernels and their precomputed grid stencils.

use crate::error::{ChbError, Result};
use crate::grid::GridSpec;

/// Shape of the even, nonnegative interaction kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelKind {
    /// `J(x) = k exp(-|x|^2 / (2 delta^2)) / (2 pi delta^2)`
    Gaussian,
    /// Compactly supported bump `J(x) = k c exp(-1 / (1 - |x/delta|^2))` for
    /// `|x| < delta`, normalized so its integral is `k`.
    Bump,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub kind: KernelKind,
    /// Interaction width `delta > 0`.
    pub delta: f64,
    /// Amplitude `k > 0`, the total kernel mass before truncation.
    pub amplitude: f64,
    /// Truncation radius; offsets beyond it are dropped from the stencil.
    pub truncation: f64,
}

/// Normalization constant of the unit bump on the unit disk:
/// `1 / (2 pi int_0^1 r exp(-1/(1-r^2)) dr)`, computed once by quadrature.
fn bump_norm_2d() -> f64 {
    static NORM: std::sync::OnceLock<f64> = std::sync::OnceLock::new();
    *NORM.get_or_init(|| {
        let n = 20_000;
        let mut s = 0.0;
        for k in 0..n {
            let r = (k as f64 + 0.5) / n as f64;
            let t = 1.0 - r * r;
            s += r * (-1.0 / t).exp();
        }
        let integral = 2.0 * std::f64::consts::PI * s / n as f64;
        1.0 / integral
    })
}

impl Kernel {
    pub fn new(kind: KernelKind, delta: f64, amplitude: f64, truncation: Option<f64>) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(ChbError::config("kernel.delta", "width must be positive"));
        }
        // Zero amplitude is allowed at construction; it fails the
        // coercivity check H3 downstream with a clearer diagnosis.
        if !(amplitude >= 0.0) {
            return Err(ChbError::config("kernel.amplitude", "amplitude must be nonnegative"));
        }
        let truncation = truncation.unwrap_or(4.0 * delta);
        if !(truncation > 0.0) {
            return Err(ChbError::config("kernel.truncation", "radius must be positive"));
        }
        Ok(Kernel { kind, delta, amplitude, truncation })
    }

    /// Kernel value at squared radius `r2`.
    pub fn value_r2(&self, r2: f64) -> f64 {
        let d2 = self.delta * self.delta;
        match self.kind {
            KernelKind::Gaussian => {
                self.amplitude * (-r2 / (2.0 * d2)).exp() / (2.0 * std::f64::consts::PI * d2)
            }
            KernelKind::Bump => {
                let t = 1.0 - r2 / d2;
                if t <= 0.0 {
                    0.0
                } else {
                    self.amplitude * bump_norm_2d() / d2 * (-1.0 / t).exp()
                }
            }
        }
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        self.value_r2(x * x + y * y)
    }

    /// Analytic gradient of `J` at `(x, y)`.
    pub fn gradient(&self, x: f64, y: f64) -> (f64, f64) {
        let r2 = x * x + y * y;
        let d2 = self.delta * self.delta;
        match self.kind {
            KernelKind::Gaussian => {
                let j = self.value_r2(r2);
                (-x / d2 * j, -y / d2 * j)
            }
            KernelKind::Bump => {
                let t = 1.0 - r2 / d2;
                if t <= 0.0 {
                    (0.0, 0.0)
                } else {
                    // d/dr2 exp(-1/t) = exp(-1/t) * (-1/t^2) * (1/d2)
                    let j = self.amplitude * bump_norm_2d() / d2 * (-1.0 / t).exp();
                    let dj_dr2 = -j / (t * t * d2);
                    (2.0 * x * dj_dr2, 2.0 * y * dj_dr2)
                }
            }
        }
    }
}

/// Kernel values tabulated on grid offsets within the truncation radius.
///
/// `values[(dj + ry) * (2 rx + 1) + (di + rx)]` is `J(di hx, dj hy)`, already
/// scaled by the quadrature weight `hx hy`. Offsets with `|offset| > r_c`
/// carry exact zeros.
#[derive(Debug, Clone)]
pub struct StencilTable {
    pub rx: usize,
    pub ry: usize,
    pub values: Vec<f64>,
}

impl StencilTable {
    pub fn build(grid: &GridSpec, rc: f64, f: impl Fn(f64, f64) -> f64) -> Self {
        let (hx, hy) = (grid.hx(), grid.hy());
        let rx = (rc / hx).floor() as usize;
        let ry = (rc / hy).floor() as usize;
        let w = 2 * rx + 1;
        let mut values = vec![0.0; w * (2 * ry + 1)];
        let rc2 = rc * rc;
        for dj in -(ry as isize)..=(ry as isize) {
            for di in -(rx as isize)..=(rx as isize) {
                let x = di as f64 * hx;
                let y = dj as f64 * hy;
                if x * x + y * y <= rc2 {
                    let k = (dj + ry as isize) as usize * w + (di + rx as isize) as usize;
                    values[k] = f(x, y) * hx * hy;
                }
            }
        }
        StencilTable { rx, ry, values }
    }

    #[inline]
    pub fn at(&self, di: isize, dj: isize) -> f64 {
        let w = 2 * self.rx + 1;
        self.values[(dj + self.ry as isize) as usize * w + (di + self.rx as isize) as usize]
    }

    /// Sum of all stencil entries (an `L1` mass approximation, the weights
    /// already include `hx hy`).
    pub fn mass(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Exported rows `di,dj,value` for debugging.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("di,dj,value\n");
        for dj in -(self.ry as isize)..=(self.ry as isize) {
            for di in -(self.rx as isize)..=(self.rx as isize) {
                out.push_str(&format!("{di},{dj},{:.17e}\n", self.at(di, dj)));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoundaryMode;

    fn grid() -> GridSpec {
        GridSpec::new(16, 16, 1.0, 1.0, BoundaryMode::NeumannNoslip).unwrap()
    }

    #[test]
    fn stencil_symmetry_is_bit_exact() {
        for kind in [KernelKind::Gaussian, KernelKind::Bump] {
            let k = Kernel::new(kind, 0.1, 3.0, None).unwrap();
            let st = StencilTable::build(&grid(), k.truncation, |x, y| k.value(x, y));
            for dj in -(st.ry as isize)..=(st.ry as isize) {
                for di in -(st.rx as isize)..=(st.rx as isize) {
                    assert_eq!(st.at(di, dj).to_bits(), st.at(-di, -dj).to_bits());
                }
            }
        }
    }

    #[test]
    fn kernel_nonnegative_and_mass_close_to_amplitude() {
        // delta must be grid-resolved (a few cells wide) for midpoint
        // quadrature of the mass to be trustworthy; the bump concentrates
        // its mass in roughly half its support radius.
        let g = grid();
        for (kind, delta) in [(KernelKind::Gaussian, 0.15), (KernelKind::Bump, 0.35)] {
            let k = Kernel::new(kind, delta, 5.0, None).unwrap();
            let st = StencilTable::build(&g, k.truncation, |x, y| k.value(x, y));
            assert!(st.values.iter().all(|&v| v >= 0.0));
            // Midpoint quadrature of the (truncated) kernel mass.
            assert!(
                (st.mass() - 5.0).abs() < 0.05,
                "mass {} should be close to the amplitude",
                st.mass()
            );
        }
    }

    #[test]
    fn gaussian_gradient_matches_finite_differences() {
        let k = Kernel::new(KernelKind::Gaussian, 0.1, 2.0, None).unwrap();
        let h = 1e-6;
        for (x, y) in [(0.03, -0.02), (0.1, 0.05), (-0.07, 0.11)] {
            let (gx, gy) = k.gradient(x, y);
            let fx = (k.value(x + h, y) - k.value(x - h, y)) / (2.0 * h);
            let fy = (k.value(x, y + h) - k.value(x, y - h)) / (2.0 * h);
            assert!((gx - fx).abs() < 1e-5);
            assert!((gy - fy).abs() < 1e-5);
        }
    }

    #[test]
    fn bump_gradient_matches_finite_differences_inside_support() {
        let k = Kernel::new(KernelKind::Bump, 0.2, 2.0, None).unwrap();
        let h = 1e-7;
        for (x, y) in [(0.05, -0.02), (0.1, 0.05)] {
            let (gx, gy) = k.gradient(x, y);
            let fx = (k.value(x + h, y) - k.value(x - h, y)) / (2.0 * h);
            let fy = (k.value(x, y + h) - k.value(x, y - h)) / (2.0 * h);
            assert!((gx - fx).abs() < 1e-4, "gx={gx} fd={fx}");
            assert!((gy - fy).abs() < 1e-4);
        }
    }
}
