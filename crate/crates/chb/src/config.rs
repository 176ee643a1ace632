//! Model configuration and tracking data.

use crate::conv::ConvMode;
use crate::error::{ChbError, Result};
use crate::field::{ScalarField, VelocityField};
use crate::grid::GridSpec;
use crate::kernel::Kernel;
use crate::potential::Potential;

/// Weights of the tracking cost terms. The running and terminal integrands
/// are squared norms; gradients therefore carry factors of two.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostWeights {
    pub beta_phi: f64,
    pub beta_u: f64,
    pub beta_t: f64,
    pub beta_ctrl: f64,
}

impl CostWeights {
    pub fn validate(&self) -> Result<()> {
        for (k, v) in [
            ("cost.beta_phi", self.beta_phi),
            ("cost.beta_u", self.beta_u),
            ("cost.beta_T", self.beta_t),
            ("cost.beta_U", self.beta_ctrl),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(ChbError::config(k, "weights must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

/// Full model description: geometry, kernel, potential, flow and stepping
/// parameters, solver tolerances. `c0_estimate` is stamped by
/// `validate_assumptions`.
#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub grid: GridSpec,
    pub kernel: Kernel,
    pub potential: Potential,
    pub nu: f64,
    pub horizon: f64,
    pub dt: f64,
    pub dt_max: Option<f64>,
    pub weights: CostWeights,
    pub div_tol: f64,
    pub cg_tol: f64,
    pub conv_mode: ConvMode,
    pub max_outer: usize,
    pub c0_estimate: Option<f64>,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0) {
            return Err(ChbError::config("model.nu", "viscosity must be positive"));
        }
        if !(self.horizon > 0.0) {
            return Err(ChbError::config("model.T", "horizon must be positive"));
        }
        if !(self.dt > 0.0) {
            return Err(ChbError::config("model.dt", "time.dt must be positive"));
        }
        if self.dt >= self.horizon + 1e-12 {
            return Err(ChbError::config("model.dt", "dt must be smaller than T"));
        }
        if let Some(m) = self.dt_max {
            if self.dt > m {
                return Err(ChbError::config("model.dt", format!("dt exceeds dt_max = {m}")));
            }
        }
        self.weights.validate()?;
        if !(self.div_tol > 0.0) || !(self.cg_tol > 0.0) {
            return Err(ChbError::config("solver.tol", "tolerances must be positive"));
        }
        // The horizon must be an integer number of steps; no fractional
        // final step.
        let n = self.horizon / self.dt;
        if (n - n.round()).abs() > 1e-9 * n.max(1.0) {
            return Err(ChbError::config(
                "model.T",
                format!("T = {} is not an integer multiple of dt = {}", self.horizon, self.dt),
            ));
        }
        Ok(())
    }

    /// Number of time steps `N = T / dt`.
    pub fn n_steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

/// Targets of the tracking cost: running phase and velocity targets at the
/// left endpoints `t_0 .. t_{N-1}` and a terminal phase target at `T`.
#[derive(Debug, Clone)]
pub struct TrackingData {
    pub phi_d: Vec<ScalarField>,
    pub u_d: Vec<VelocityField>,
    pub phi_terminal: ScalarField,
}

impl TrackingData {
    /// Constant-in-time targets from single snapshots.
    pub fn stationary(
        phi_d: ScalarField,
        u_d: VelocityField,
        phi_terminal: ScalarField,
        n_steps: usize,
    ) -> Self {
        TrackingData {
            phi_d: vec![phi_d; n_steps],
            u_d: vec![u_d; n_steps],
            phi_terminal,
        }
    }

    pub fn check(&self, grid: &GridSpec, n_steps: usize) -> Result<()> {
        if self.phi_d.len() != n_steps || self.u_d.len() != n_steps {
            return Err(ChbError::TrajectoryMismatch(format!(
                "tracking data has {} phi / {} u snapshots, expected {}",
                self.phi_d.len(),
                self.u_d.len(),
                n_steps
            )));
        }
        for f in &self.phi_d {
            grid.check_same(&f.grid, "phi_d")?;
        }
        for f in &self.u_d {
            grid.check_same(&f.grid, "u_d")?;
        }
        grid.check_same(&self.phi_terminal.grid, "phi_Omega")?;
        Ok(())
    }
}
