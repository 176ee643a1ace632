//! Shipped test problems: initial phase fields and tracking targets.
//!
//! Three initial data are provided. `constant` is the fixed-point check.
//! `stripe` is a tanh band, briefly relaxed under the model itself so runs
//! start from a well-prepared state (an unrelaxed profile carries an
//! initial layer whose energy-law residual does not refine in dt at desk
//! scales). `spinodal` is a seeded band-limited perturbation of a mixed
//! state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::control::ControlTrajectory;
use crate::error::Result;
use crate::field::{ScalarField, VelocityField};
use crate::forward::{ForwardModel, State};
use crate::grid::GridSpec;

/// Relaxation horizon baked into the stripe preset.
pub const STRIPE_BURN_IN: f64 = 5e-3;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    Constant { value: f64 },
    Stripe,
    Spinodal { mean: f64, amplitude: f64, seed: u64 },
}

impl InitialData {
    pub fn parse(name: &str, seed: u64) -> Option<InitialData> {
        match name {
            "constant" => Some(InitialData::Constant { value: 0.3 }),
            "stripe" => Some(InitialData::Stripe),
            "spinodal" => Some(InitialData::Spinodal { mean: 0.0, amplitude: 0.05, seed }),
            _ => None,
        }
    }
}

/// Raw tanh band: +1 phase of half-width `0.15 Ly` centered at mid-height
/// in a -1 background, interface width `0.1 Ly`.
pub fn stripe_profile(grid: &GridSpec) -> ScalarField {
    let ly = grid.ly;
    ScalarField::from_fn(grid, |_, y| (((0.15 * ly) - (y - 0.5 * ly).abs()) / (0.1 * ly)).tanh())
}

/// Band-limited random perturbation: cosine modes up to wavenumber 4 with
/// seeded coefficients. Smooth enough to be resolved on every desk grid.
pub fn spinodal_profile(grid: &GridSpec, mean: f64, amplitude: f64, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs: Vec<(f64, f64, f64)> = Vec::new();
    for kx in 0..=4usize {
        for ky in 0..=4usize {
            if kx + ky == 0 {
                continue;
            }
            coeffs.push((kx as f64, ky as f64, rng.gen_range(-1.0..1.0)));
        }
    }
    let norm: f64 = coeffs.iter().map(|c| c.2.abs()).sum();
    let (lx, ly) = (grid.lx, grid.ly);
    ScalarField::from_fn(grid, |x, y| {
        let s: f64 = coeffs
            .iter()
            .map(|(kx, ky, c)| {
                c * (kx * std::f64::consts::PI * x / lx).cos()
                    * (ky * std::f64::consts::PI * y / ly).cos()
            })
            .sum();
        mean + amplitude * s / norm * coeffs.len() as f64 / 8.0
    })
}

/// Materialize an initial phase field for a model. The stripe preset is
/// relaxed for `STRIPE_BURN_IN` time units with zero forcing.
pub fn initial_phi(model: &ForwardModel, init: &InitialData) -> Result<ScalarField> {
    let grid = &model.config.grid;
    match init {
        InitialData::Constant { value } => Ok(ScalarField::constant(grid, *value)),
        InitialData::Spinodal { mean, amplitude, seed } => {
            Ok(spinodal_profile(grid, *mean, *amplitude, *seed))
        }
        InitialData::Stripe => {
            let mut phi = stripe_profile(grid);
            let dt = model.config.dt;
            let n_burn = (STRIPE_BURN_IN / dt).round().max(1.0) as usize;
            let h = VelocityField::zeros(grid);
            let mut t = 0.0;
            for _ in 0..n_burn {
                let out = model.step(
                    &State {
                        t,
                        phi: phi.clone(),
                        mu: ScalarField::zeros(grid),
                        u: VelocityField::zeros(grid),
                        pressure: ScalarField::zeros(grid),
                    },
                    &h,
                )?;
                phi = out.phi_next;
                t += dt;
            }
            Ok(phi)
        }
    }
}

/// Seeded white-noise control, no-slip masked.
pub fn random_control(
    grid: &GridSpec,
    dt: f64,
    n_steps: usize,
    seed: u64,
    amplitude: f64,
) -> ControlTrajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = ControlTrajectory::zeros(grid, dt, n_steps);
    for s in &mut u.samples {
        for v in s.ux.iter_mut().chain(s.uy.iter_mut()) {
            *v = rng.gen_range(-amplitude..amplitude);
        }
        s.enforce_noslip();
    }
    u
}

/// Seeded band-limited control: a few low-wavenumber cosine modes per
/// component and step. White noise is almost annihilated by the momentum
/// operator at desk viscosities, so perturbation studies use this instead.
pub fn smooth_random_control(
    grid: &GridSpec,
    dt: f64,
    n_steps: usize,
    seed: u64,
    amplitude: f64,
) -> ControlTrajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = ControlTrajectory::zeros(grid, dt, n_steps);
    let (lx, ly) = (grid.lx, grid.ly);
    for s in &mut u.samples {
        let mut modes = |n: usize| -> Vec<(f64, f64, f64)> {
            (0..n)
                .map(|_| {
                    (
                        rng.gen_range(0..4u32) as f64,
                        rng.gen_range(0..4u32) as f64,
                        rng.gen_range(-1.0..1.0),
                    )
                })
                .collect()
        };
        let mx = modes(3);
        let my = modes(3);
        let eval = |m: &[(f64, f64, f64)], x: f64, y: f64| -> f64 {
            m.iter()
                .map(|(kx, ky, c)| {
                    c * (kx * std::f64::consts::PI * x / lx).cos()
                        * (ky * std::f64::consts::PI * y / ly).cos()
                })
                .sum::<f64>()
        };
        let field = VelocityField::from_fn(
            grid,
            |x, y| amplitude * eval(&mx, x, y),
            |x, y| amplitude * eval(&my, x, y),
        );
        *s = field;
        s.enforce_noslip();
    }
    u
}
