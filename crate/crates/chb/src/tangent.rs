//! Linearized (tangent) system: the exact Jacobian of the discrete forward
//! step, integrated along a recorded trajectory. Its output is the
//! directional derivative of the control-to-state map.
//!
//! One tangent step around the level-n fields `(phi, mu, u)`:
//!   `mu_t = a psi - J*psi + F''(phi) psi`
//!   `w = B[avg(mu_t) grad(phi) + avg(mu) grad(psi) + V]`
//!   `psi' = H^{-1}[psi - dt div(w avg(phi) + u avg(psi))
//!                  + dt Lap(mu_t - kappa psi)]`
//! with `B` the Brinkman solve, `H` the implicit phase operator. The
//! adjoint sweep is the literal transpose of these maps.

use crate::control::ControlTrajectory;
use crate::error::{ChbError, Result};
use crate::field::{ScalarField, VelocityField};
use crate::forward::{ForwardModel, State, Trajectory};
use crate::operators::{
    face_average, face_gradient, face_mul, laplacian_neumann, transport_divergence,
};

/// Tangent fields at one level. As in the forward trajectory, the terminal
/// entry carries only the phase component.
#[derive(Debug, Clone)]
pub struct TangentState {
    pub psi: ScalarField,
    pub mu_tilde: ScalarField,
    pub w: VelocityField,
    pub pressure: ScalarField,
}

#[derive(Debug, Clone)]
pub struct TangentTrajectory {
    pub dt: f64,
    pub states: Vec<TangentState>,
}

impl TangentTrajectory {
    pub fn n_steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn terminal_psi(&self) -> &ScalarField {
        &self.states[self.states.len() - 1].psi
    }
}

/// Linearized chemical potential `a psi - J*psi + F''(phi) psi`.
pub(crate) fn linearized_potential(
    model: &ForwardModel,
    phi: &ScalarField,
    psi: &ScalarField,
) -> Result<ScalarField> {
    let jpsi = model.plan.convolve(psi)?;
    let a = model.plan.a();
    let pot = &model.config.potential;
    let values = psi
        .values
        .iter()
        .zip(&jpsi.values)
        .zip(&a.values)
        .zip(&phi.values)
        .map(|(((&ps, &jp), &av), &ph)| av * ps - jp + pot.eval(2, ph) * ps)
        .collect();
    Ok(ScalarField { grid: psi.grid.clone(), values })
}

/// One exact-Jacobian step: `(psi, v_dir) -> (psi_next, w)`, with the
/// tangent velocity and pressure returned for recording.
pub(crate) fn tangent_step(
    model: &ForwardModel,
    frozen: &State,
    psi: &ScalarField,
    v_dir: &VelocityField,
) -> Result<(ScalarField, VelocityField, ScalarField, ScalarField)> {
    let dt = model.config.dt;
    let kappa = model.kappa();
    let mu_tilde = linearized_potential(model, &frozen.phi, psi)?;

    let mut f = face_mul(&face_average(&mu_tilde), &face_gradient(&frozen.phi));
    f.axpy(1.0, &face_mul(&face_average(&frozen.mu), &face_gradient(psi)));
    f.axpy(1.0, v_dir);
    let (w, pressure) = model.brinkman_velocity(&f)?;

    let mut mu_expl = mu_tilde.clone();
    mu_expl.axpy(-kappa, psi);
    let mut rhs = psi.clone();
    rhs.axpy(-dt, &transport_divergence(&w, &frozen.phi));
    rhs.axpy(-dt, &transport_divergence(&frozen.u, psi));
    rhs.axpy(dt, &laplacian_neumann(&mu_expl));
    let psi_next = model.implicit_solve(&rhs);
    Ok((psi_next, w, pressure, mu_tilde))
}

/// Integrate the tangent system along `traj` with control direction
/// `direction` and zero initial tangent phase.
pub fn solve_tangent(
    model: &ForwardModel,
    traj: &Trajectory,
    direction: &ControlTrajectory,
) -> Result<TangentTrajectory> {
    let n = traj.n_steps();
    if n != model.config.n_steps() {
        return Err(ChbError::TrajectoryMismatch(format!(
            "trajectory has {n} steps, model expects {}",
            model.config.n_steps()
        )));
    }
    if direction.n_steps() != n {
        return Err(ChbError::TrajectoryMismatch(format!(
            "direction has {} samples, trajectory has {n}",
            direction.n_steps()
        )));
    }
    model.config.grid.check_same(&direction.grid, "tangent direction")?;

    let grid = &model.config.grid;
    let mut psi = ScalarField::zeros(grid);
    let mut states = Vec::with_capacity(n + 1);
    for step in 0..n {
        let frozen = &traj.states[step];
        let (psi_next, w, pressure, mu_tilde) =
            tangent_step(model, frozen, &psi, &direction.samples[step])?;
        states.push(TangentState { psi: psi.clone(), mu_tilde, w, pressure });
        psi = psi_next;
    }
    states.push(TangentState {
        psi,
        mu_tilde: ScalarField::zeros(grid),
        w: VelocityField::zeros(grid),
        pressure: ScalarField::zeros(grid),
    });
    Ok(TangentTrajectory { dt: model.config.dt, states })
}
