//! Tracking cost, the optimal-control problem bundle, and projected
//! gradient descent with Armijo backtracking.

use crate::adjoint::solve_adjoint_discrete;
use crate::config::{CostWeights, TrackingData};
use crate::control::{kkt_residual, project_box, BoxBounds, ControlTrajectory};
use crate::error::{ChbError, Result};
use crate::field::ScalarField;
use crate::forward::{ForwardModel, Trajectory};

/// Tracking cost with left-endpoint quadrature matching the scheme's
/// sampling:
///
/// ```text
/// sum_n dt [beta_phi ||phi^n - phi_d^n||^2 + beta_u ||u^n - u_d^n||^2]
///   + beta_T ||phi^N - phi_Omega||^2 + beta_U sum_n dt ||U^n||^2
/// ```
pub fn cost(
    traj: &Trajectory,
    u: &ControlTrajectory,
    data: &TrackingData,
    weights: &CostWeights,
) -> Result<f64> {
    let n = traj.n_steps();
    if u.n_steps() != n {
        return Err(ChbError::TrajectoryMismatch(format!(
            "control has {} samples, trajectory has {n}",
            u.n_steps()
        )));
    }
    data.check(&traj.states[0].phi.grid, n)?;
    let dt = traj.dt;
    let mut total = 0.0;
    for k in 0..n {
        let dphi = traj.states[k].phi.sub(&data.phi_d[k]);
        let du = traj.states[k].u.sub(&data.u_d[k]);
        let duu = u.samples[k].dot(&u.samples[k]);
        total += dt
            * (weights.beta_phi * dphi.dot(&dphi)
                + weights.beta_u * du.dot(&du)
                + weights.beta_ctrl * duu);
    }
    let dterm = traj.terminal_phi().sub(&data.phi_terminal);
    total += weights.beta_t * dterm.dot(&dterm);
    Ok(total)
}

/// One optimal-control problem instance: model, initial phase, targets and
/// admissible box.
pub struct Ocp<'a> {
    pub model: &'a ForwardModel,
    pub phi0: ScalarField,
    pub data: TrackingData,
    pub bounds: BoxBounds,
}

impl<'a> Ocp<'a> {
    pub fn reduced_cost(&self, u: &ControlTrajectory) -> Result<f64> {
        let (traj, _) = self.model.simulate(&self.phi0, u)?;
        cost(&traj, u, &self.data, &self.model.config.weights)
    }

    pub fn cost_and_gradient(&self, u: &ControlTrajectory) -> Result<(f64, ControlTrajectory)> {
        let (traj, _) = self.model.simulate(&self.phi0, u)?;
        let j = cost(&traj, u, &self.data, &self.model.config.weights)?;
        let (_, grad) = solve_adjoint_discrete(self.model, &traj, &self.data)?;
        Ok((j, grad.g))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PgOptions {
    pub max_iters: usize,
    /// Stop when the KKT residual falls below `tol_kkt * (||U_0|| + 1)`.
    pub tol_kkt: f64,
    pub alpha0: f64,
    pub armijo_sigma: f64,
    pub max_backtracks: usize,
}

impl Default for PgOptions {
    fn default() -> Self {
        PgOptions {
            max_iters: 50,
            tol_kkt: 1e-6,
            alpha0: 1.0,
            armijo_sigma: 1e-4,
            max_backtracks: 40,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IterRow {
    pub iter: usize,
    pub cost: f64,
    pub kkt: f64,
    pub alpha: f64,
    pub backtracks: usize,
}

#[derive(Debug, Clone)]
pub struct OptimizeReport {
    pub rows: Vec<IterRow>,
    pub control: ControlTrajectory,
    pub converged: bool,
}

impl OptimizeReport {
    pub fn final_cost(&self) -> f64 {
        self.rows.last().map(|r| r.cost).unwrap_or(f64::NAN)
    }

    pub fn final_kkt(&self) -> f64 {
        self.rows.last().map(|r| r.kkt).unwrap_or(f64::NAN)
    }
}

/// Projected gradient descent `U <- P(U - alpha g)` with Armijo
/// backtracking on the true reduced cost and Barzilai-Borwein step
/// initialization, stopping on the KKT fixed-point residual. Every iterate
/// is feasible.
pub fn projected_gradient(
    ocp: &Ocp,
    u0: &ControlTrajectory,
    opts: &PgOptions,
) -> Result<OptimizeReport> {
    if !(ocp.model.config.weights.beta_ctrl > 0.0) {
        return Err(ChbError::config(
            "cost.beta_U",
            "optimization requires a positive control weight",
        ));
    }
    let mut u = project_box(u0, &ocp.bounds)?;
    let kkt_scale = u0.norm() + 1.0;
    let (mut j, mut g) = ocp.cost_and_gradient(&u)?;
    let mut kkt = kkt_residual(&u, &g, &ocp.bounds, 1.0)?;
    let mut rows = vec![IterRow { iter: 0, cost: j, kkt, alpha: 0.0, backtracks: 0 }];

    let mut u_prev: Option<(ControlTrajectory, ControlTrajectory)> = None;
    let mut converged = kkt <= opts.tol_kkt * kkt_scale;

    for iter in 1..=opts.max_iters {
        if converged {
            break;
        }
        // Barzilai-Borwein step from the last accepted pair, safeguarded.
        let mut alpha = match &u_prev {
            Some((du, dg)) => {
                let num = du.dot(du);
                let den = du.dot(dg);
                if den > 0.0 {
                    (num / den).clamp(1e-6, 1e2)
                } else {
                    opts.alpha0
                }
            }
            None => opts.alpha0,
        };

        let mut backtracks = 0;
        let mut stalled_at_noise = false;
        let (u_next, j_next) = loop {
            let mut trial = u.clone();
            trial.axpy(-alpha, &g);
            let trial = project_box(&trial, &ocp.bounds)?;
            let j_trial = ocp.reduced_cost(&trial)?;
            let decrease = g.dot(&trial.sub(&u));
            if j_trial <= j + opts.armijo_sigma * decrease {
                break (trial, j_trial);
            }
            // A predicted decrease below round-off means the iterate is
            // numerically stationary along the projection arc; that is
            // termination, not a gradient defect.
            if opts.armijo_sigma * decrease.abs() <= 8.0 * f64::EPSILON * (j.abs() + 1.0) {
                stalled_at_noise = true;
                break (u.clone(), j);
            }
            backtracks += 1;
            if backtracks > opts.max_backtracks {
                return Err(ChbError::LineSearchStalled(opts.max_backtracks));
            }
            alpha *= 0.5;
        };
        if stalled_at_noise {
            break;
        }

        let (_, g_next) = ocp.cost_and_gradient(&u_next)?;
        let du = u_next.sub(&u);
        let dg = g_next.sub(&g);
        u_prev = Some((du, dg));
        u = u_next;
        j = j_next;
        g = g_next;
        kkt = kkt_residual(&u, &g, &ocp.bounds, 1.0)?;
        rows.push(IterRow { iter, cost: j, kkt, alpha, backtracks });
        converged = kkt <= opts.tol_kkt * kkt_scale;
    }

    Ok(OptimizeReport { rows, control: u, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModelConfig;
    use crate::conv::ConvMode;
    use crate::field::VelocityField;
    use crate::grid::{BoundaryMode, GridSpec};
    use crate::kernel::{Kernel, KernelKind};
    use crate::potential::Potential;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(n: usize, horizon: f64, weights: CostWeights) -> ForwardModel {
        let grid = GridSpec::new(n, n, 1.0, 1.0, BoundaryMode::NeumannNoslip).unwrap();
        let kernel = Kernel::new(KernelKind::Gaussian, 0.1, 20.0, None).unwrap();
        let cfg = ModelConfig {
            grid,
            kernel,
            potential: Potential::quartic(2.0).unwrap(),
            nu: 0.1,
            horizon,
            dt: 1e-3,
            dt_max: None,
            weights,
            div_tol: 1e-10,
            cg_tol: 1e-12,
            conv_mode: ConvMode::FftPadded,
            max_outer: 500,
            c0_estimate: None,
        };
        ForwardModel::new(cfg).unwrap()
    }

    fn stripe(grid: &GridSpec) -> ScalarField {
        ScalarField::from_fn(grid, |_, y| ((0.15 - (y - 0.5).abs()) / 0.1).tanh())
    }

    #[test]
    fn cost_zero_on_matched_data_and_quadratic_scaling() {
        let w = CostWeights { beta_phi: 1.0, beta_u: 1.0, beta_t: 1.0, beta_ctrl: 1.0 };
        let m = model(12, 0.004, w);
        let g = m.config.grid.clone();
        let phi0 = stripe(&g);
        let u = ControlTrajectory::zeros(&g, m.config.dt, m.config.n_steps());
        let (traj, _) = m.simulate(&phi0, &u).unwrap();
        let data = TrackingData {
            phi_d: (0..traj.n_steps()).map(|k| traj.states[k].phi.clone()).collect(),
            u_d: (0..traj.n_steps()).map(|k| traj.states[k].u.clone()).collect(),
            phi_terminal: traj.terminal_phi().clone(),
        };
        assert_eq!(cost(&traj, &u, &data, &w).unwrap(), 0.0);

        // Doubling the phi mismatch with everything else matched scales the
        // cost by 4.
        let mut data2 = data.clone();
        for (k, f) in data2.phi_d.iter_mut().enumerate() {
            let mut shift = traj.states[k].phi.clone();
            shift.axpy(-1.0, f); // zero
            let _ = shift;
            for v in f.values.iter_mut() {
                *v += 0.01;
            }
        }
        let c1 = cost(&traj, &u, &data2, &w).unwrap();
        let mut data4 = data.clone();
        for f in data4.phi_d.iter_mut() {
            for v in f.values.iter_mut() {
                *v += 0.02;
            }
        }
        let c2 = cost(&traj, &u, &data4, &w).unwrap();
        assert!((c2 / c1 - 4.0).abs() < 1e-10);
    }

    #[test]
    fn cost_matches_bruteforce_quadrature() {
        let w = CostWeights { beta_phi: 0.8, beta_u: 0.6, beta_t: 1.2, beta_ctrl: 0.4 };
        let m = model(8, 0.003, w);
        let g = m.config.grid.clone();
        let phi0 = stripe(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut u = ControlTrajectory::zeros(&g, m.config.dt, m.config.n_steps());
        for s in &mut u.samples {
            for v in s.ux.iter_mut().chain(s.uy.iter_mut()) {
                *v = rng.gen_range(-0.3..0.3);
            }
        }
        let (traj, _) = m.simulate(&phi0, &u).unwrap();
        let data = TrackingData::stationary(
            ScalarField::from_fn(&g, |x, _| 0.1 * x),
            VelocityField::zeros(&g),
            ScalarField::zeros(&g),
            m.config.n_steps(),
        );
        let got = cost(&traj, &u, &data, &w).unwrap();

        // Independent quadrature loop.
        let area = g.cell_area();
        let dt = m.config.dt;
        let mut want = 0.0;
        for k in 0..traj.n_steps() {
            let mut sp = 0.0;
            for (a, b) in traj.states[k].phi.values.iter().zip(&data.phi_d[k].values) {
                sp += (a - b) * (a - b);
            }
            let mut su = 0.0;
            for (a, b) in traj.states[k].u.ux.iter().zip(&data.u_d[k].ux) {
                su += (a - b) * (a - b);
            }
            for (a, b) in traj.states[k].u.uy.iter().zip(&data.u_d[k].uy) {
                su += (a - b) * (a - b);
            }
            let mut sc = 0.0;
            for v in u.samples[k].ux.iter().chain(&u.samples[k].uy) {
                sc += v * v;
            }
            want += dt * area * (w.beta_phi * sp + w.beta_u * su + w.beta_ctrl * sc);
        }
        let mut st = 0.0;
        for (a, b) in traj.terminal_phi().values.iter().zip(&data.phi_terminal.values) {
            st += (a - b) * (a - b);
        }
        want += w.beta_t * area * st;
        assert!((got - want).abs() < 1e-12 * (1.0 + want.abs()));
    }

    #[test]
    fn zero_gradient_returns_immediately() {
        let w = CostWeights { beta_phi: 1.0, beta_u: 1.0, beta_t: 1.0, beta_ctrl: 0.5 };
        let m = model(12, 0.004, w);
        let g = m.config.grid.clone();
        let phi0 = stripe(&g);
        let u0 = ControlTrajectory::zeros(&g, m.config.dt, m.config.n_steps());
        let (traj, _) = m.simulate(&phi0, &u0).unwrap();
        let data = TrackingData {
            phi_d: (0..traj.n_steps()).map(|k| traj.states[k].phi.clone()).collect(),
            u_d: (0..traj.n_steps()).map(|k| traj.states[k].u.clone()).collect(),
            phi_terminal: traj.terminal_phi().clone(),
        };
        let ocp = Ocp { model: &m, phi0, data, bounds: BoxBounds::symmetric(1.0) };
        let report = projected_gradient(&ocp, &u0, &PgOptions::default()).unwrap();
        assert!(report.converged);
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.rows[0].kkt, 0.0);
    }

    #[test]
    fn pure_control_cost_converges_to_zero_control() {
        // With only the control term the unique minimizer in [-1,1] is 0.
        let w = CostWeights { beta_phi: 0.0, beta_u: 0.0, beta_t: 0.0, beta_ctrl: 1.0 };
        let m = model(8, 0.003, w);
        let g = m.config.grid.clone();
        let phi0 = stripe(&g);
        let n = m.config.n_steps();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut u0 = ControlTrajectory::zeros(&g, m.config.dt, n);
        for s in &mut u0.samples {
            for v in s.ux.iter_mut().chain(s.uy.iter_mut()) {
                *v = rng.gen_range(-0.9..0.9);
            }
        }
        let (traj, _) = m.simulate(&phi0, &u0).unwrap();
        let data = TrackingData {
            phi_d: (0..n).map(|k| traj.states[k].phi.clone()).collect(),
            u_d: (0..n).map(|k| traj.states[k].u.clone()).collect(),
            phi_terminal: traj.terminal_phi().clone(),
        };
        let ocp = Ocp { model: &m, phi0, data, bounds: BoxBounds::symmetric(1.0) };
        let report = projected_gradient(&ocp, &u0, &PgOptions::default()).unwrap();
        assert!(report.converged, "kkt history: {:?}", report.rows);
        assert!(report.control.max_abs() < 1e-5);
        // Accepted costs strictly decrease.
        for w2 in report.rows.windows(2) {
            assert!(w2[1].cost < w2[0].cost);
        }
    }
}
