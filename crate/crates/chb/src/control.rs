//! Time-indexed control fields, box bounds, projection, and the KKT
//! residual of the projected-gradient fixed point.

use crate::error::{ChbError, Result};
use crate::field::VelocityField;
use crate::grid::GridSpec;

/// Sequence of face-centered control samples `U^0 .. U^{N-1}`, one per time
/// step, sampled at the left endpoints.
#[derive(Debug, Clone)]
pub struct ControlTrajectory {
    pub grid: GridSpec,
    pub dt: f64,
    pub samples: Vec<VelocityField>,
}

impl ControlTrajectory {
    pub fn zeros(grid: &GridSpec, dt: f64, n_steps: usize) -> Self {
        ControlTrajectory {
            grid: grid.clone(),
            dt,
            samples: vec![VelocityField::zeros(grid); n_steps],
        }
    }

    pub fn n_steps(&self) -> usize {
        self.samples.len()
    }

    pub fn check_shape(&self, other: &ControlTrajectory) -> Result<()> {
        if self.samples.len() != other.samples.len() {
            return Err(ChbError::TrajectoryMismatch(format!(
                "control sample counts differ: {} vs {}",
                self.samples.len(),
                other.samples.len()
            )));
        }
        self.grid.check_same(&other.grid, "control trajectory")
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &ControlTrajectory) {
        debug_assert_eq!(self.samples.len(), other.samples.len());
        for (a, b) in self.samples.iter_mut().zip(&other.samples) {
            a.axpy(s, b);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in &mut self.samples {
            a.scale(s);
        }
    }

    /// Time-weighted inner product `sum_n dt <U^n, V^n>`.
    pub fn dot(&self, other: &ControlTrajectory) -> f64 {
        debug_assert_eq!(self.samples.len(), other.samples.len());
        self.samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a.dot(b))
            .sum::<f64>()
            * self.dt
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn sub(&self, other: &ControlTrajectory) -> ControlTrajectory {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.max_abs()))
    }
}

/// Box constraints `U1 <= U <= U2`, either constant per component or given
/// as per-step field sequences.
#[derive(Debug, Clone)]
pub enum BoxBounds {
    Constant { lo: [f64; 2], hi: [f64; 2] },
    Fields { lo: Vec<VelocityField>, hi: Vec<VelocityField> },
}

impl BoxBounds {
    pub fn symmetric(r: f64) -> Self {
        BoxBounds::Constant { lo: [-r, -r], hi: [r, r] }
    }

    pub fn validate(&self, grid: &GridSpec, n_steps: usize) -> Result<()> {
        match self {
            BoxBounds::Constant { lo, hi } => {
                for c in 0..2 {
                    if !(lo[c] <= hi[c]) {
                        return Err(ChbError::BoundsInverted(format!(
                            "component {c}: lo = {} > hi = {}",
                            lo[c], hi[c]
                        )));
                    }
                }
                Ok(())
            }
            BoxBounds::Fields { lo, hi } => {
                if lo.len() != n_steps || hi.len() != n_steps {
                    return Err(ChbError::TrajectoryMismatch(format!(
                        "bound sequences have {}/{} entries, expected {n_steps}",
                        lo.len(),
                        hi.len()
                    )));
                }
                for (l, h) in lo.iter().zip(hi) {
                    grid.check_same(&l.grid, "lower bound")?;
                    grid.check_same(&h.grid, "upper bound")?;
                    let ok = l.ux.iter().zip(&h.ux).all(|(a, b)| a <= b)
                        && l.uy.iter().zip(&h.uy).all(|(a, b)| a <= b);
                    if !ok {
                        return Err(ChbError::BoundsInverted(
                            "bound fields cross somewhere".to_string(),
                        ));
                    }
                }
                Ok(())
            }
        }
    }
}

/// Componentwise clamp of the control into the box; idempotent and
/// non-expansive.
pub fn project_box(u: &ControlTrajectory, bounds: &BoxBounds) -> Result<ControlTrajectory> {
    bounds.validate(&u.grid, u.n_steps())?;
    let mut out = u.clone();
    match bounds {
        BoxBounds::Constant { lo, hi } => {
            for s in &mut out.samples {
                for v in &mut s.ux {
                    *v = v.clamp(lo[0], hi[0]);
                }
                for v in &mut s.uy {
                    *v = v.clamp(lo[1], hi[1]);
                }
            }
        }
        BoxBounds::Fields { lo, hi } => {
            for ((s, l), h) in out.samples.iter_mut().zip(lo).zip(hi) {
                for ((v, a), b) in s.ux.iter_mut().zip(&l.ux).zip(&h.ux) {
                    *v = v.clamp(*a, *b);
                }
                for ((v, a), b) in s.uy.iter_mut().zip(&l.uy).zip(&h.uy) {
                    *v = v.clamp(*a, *b);
                }
            }
        }
    }
    Ok(out)
}

/// Fixed-point residual `||U - P(U - alpha g)|| / alpha` of the projected
/// gradient map; zero exactly at points satisfying the discrete variational
/// inequality.
pub fn kkt_residual(
    u: &ControlTrajectory,
    g: &ControlTrajectory,
    bounds: &BoxBounds,
    alpha_ref: f64,
) -> Result<f64> {
    assert!(alpha_ref > 0.0, "reference step must be positive");
    let mut trial = u.clone();
    trial.axpy(-alpha_ref, g);
    let projected = project_box(&trial, bounds)?;
    Ok(u.sub(&projected).norm() / alpha_ref)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoundaryMode;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> GridSpec {
        GridSpec::new(6, 5, 1.0, 1.0, BoundaryMode::NeumannNoslip).unwrap()
    }

    fn random_control(seed: u64, scale: f64) -> ControlTrajectory {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = ControlTrajectory::zeros(&g, 0.1, 3);
        for s in &mut u.samples {
            for v in s.ux.iter_mut().chain(s.uy.iter_mut()) {
                *v = rng.gen_range(-scale..scale);
            }
        }
        u
    }

    #[test]
    fn in_bounds_control_is_unchanged_bit_exact() {
        let u = random_control(1, 0.5);
        let p = project_box(&u, &BoxBounds::symmetric(1.0)).unwrap();
        for (a, b) in u.samples.iter().zip(&p.samples) {
            assert_eq!(a.ux, b.ux);
            assert_eq!(a.uy, b.uy);
        }
    }

    #[test]
    fn clamp_hits_the_bounds() {
        let mut u = random_control(2, 0.1);
        *u.samples[0].ux_mut(2, 1) = 2.0;
        *u.samples[1].uy_mut(3, 2) = -7.0;
        let p = project_box(&u, &BoxBounds::symmetric(1.0)).unwrap();
        assert_eq!(p.samples[0].ux_at(2, 1), 1.0);
        assert_eq!(p.samples[1].uy_at(3, 2), -1.0);
    }

    #[test]
    fn inverted_bounds_are_rejected() {
        let u = random_control(3, 0.1);
        let b = BoxBounds::Constant { lo: [1.0, -1.0], hi: [-1.0, 1.0] };
        assert!(matches!(project_box(&u, &b), Err(ChbError::BoundsInverted(_))));
    }

    #[test]
    fn kkt_zero_gradient() {
        let u = random_control(4, 0.5);
        let g = ControlTrajectory::zeros(&u.grid, u.dt, u.n_steps());
        let r = kkt_residual(&u, &g, &BoxBounds::symmetric(1.0), 1.0).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn kkt_equals_gradient_norm_in_the_interior() {
        let u = random_control(5, 0.2);
        let g = random_control(6, 0.1);
        let r = kkt_residual(&u, &g, &BoxBounds::symmetric(10.0), 1.0).unwrap();
        assert!((r - g.norm()).abs() < 1e-13);
    }

    #[test]
    fn kkt_vanishes_on_active_set_pushing_outward() {
        // U pinned at the upper bound with negative gradient there.
        let g = grid();
        let mut u = ControlTrajectory::zeros(&g, 0.1, 2);
        for s in &mut u.samples {
            for v in s.ux.iter_mut().chain(s.uy.iter_mut()) {
                *v = 1.0;
            }
        }
        let mut gr = ControlTrajectory::zeros(&g, 0.1, 2);
        for s in &mut gr.samples {
            for v in s.ux.iter_mut().chain(s.uy.iter_mut()) {
                *v = -0.3;
            }
        }
        let r = kkt_residual(&u, &gr, &BoxBounds::symmetric(1.0), 1.0).unwrap();
        assert_eq!(r, 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn projection_idempotent_and_nonexpansive(seed_a in 0u64..500, seed_b in 500u64..1000) {
            let b = BoxBounds::symmetric(0.4);
            let ua = random_control(seed_a, 1.0);
            let ub = random_control(seed_b, 1.0);
            let pa = project_box(&ua, &b).unwrap();
            let ppa = project_box(&pa, &b).unwrap();
            for (x, y) in pa.samples.iter().zip(&ppa.samples) {
                prop_assert_eq!(&x.ux, &y.ux);
                prop_assert_eq!(&x.uy, &y.uy);
            }
            let pb = project_box(&ub, &b).unwrap();
            prop_assert!(pa.sub(&pb).norm() <= ua.sub(&ub).norm() + 1e-12);
        }
    }
}
