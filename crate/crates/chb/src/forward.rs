//! Time integration of the coupled Cahn-Hilliard-Brinkman system with
//! mass-conservative transport, stabilized semi-implicit phase stepping,
//! and energy-law diagnostics.
//!
//! One step advances `phi^n -> phi^{n+1}`:
//!   1. `mu^n = a phi^n - J*phi^n + F'(phi^n)`
//!   2. `u^n` from the Brinkman solve with right side
//!      `avg(mu^n) grad(phi^n) + h^n`
//!   3. `(phi^{n+1} - phi^n)/dt + div(u^n avg(phi^n)) =
//!      Lap[(a_bar + S) phi^{n+1} + (mu^n - (a_bar + S) phi^n)]`
//!
//! with `a_bar = mean a(x)` and stabilization `S = max|F''|/2` over the
//! clamp interval. The implicit part is a constant-coefficient Neumann
//! Helmholtz solve, done by cosine-transform diagonalization, so the step
//! conserves the mean of `phi` to round-off.

use crate::assumptions::{validate_assumptions, AssumptionReport};
use crate::brinkman::{assemble_capillary_force, BrinkmanSolver};
use crate::config::ModelConfig;
use crate::control::ControlTrajectory;
use crate::conv::ConvolutionPlan;
use crate::error::{ChbError, Result};
use crate::field::{ScalarField, VelocityField};
use crate::grid::BoundaryMode;
use crate::operators::{cell_grad_norm_sq, laplacian_neumann, transport_divergence};
use crate::potential::Potential;
use crate::transforms::NeumannSolver;

/// Fully stamped state at one time level: the chemical potential and
/// velocity are the ones the scheme uses at that level. The terminal state
/// of a trajectory is never advanced, so its velocity is zero.
#[derive(Debug, Clone)]
pub struct State {
    pub t: f64,
    pub phi: ScalarField,
    pub mu: ScalarField,
    pub u: VelocityField,
    pub pressure: ScalarField,
}

/// Recorded forward run: states at `t_0 .. t_N` plus the control samples
/// that produced them, consumed by the tangent and adjoint sweeps.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<State>,
    pub control: Vec<VelocityField>,
}

impl Trajectory {
    pub fn n_steps(&self) -> usize {
        self.control.len()
    }

    pub fn terminal_phi(&self) -> &ScalarField {
        &self.states[self.states.len() - 1].phi
    }
}

/// Per-step energy bookkeeping. `residual` is the defect of the discrete
/// energy law
/// `(E^{n+1}-E^n)/dt + ||grad mu||^2 + nu ||grad u||^2 + ||u||^2 - <h, u>`.
#[derive(Debug, Clone, Copy)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub grad_mu_sq: f64,
    pub nu_grad_u_sq: f64,
    pub u_sq: f64,
    pub work: f64,
    pub residual: f64,
}

/// `mu = a phi - J*phi + F'(phi)` pointwise.
pub fn chemical_potential(
    phi: &ScalarField,
    plan: &ConvolutionPlan,
    pot: &Potential,
) -> Result<ScalarField> {
    plan.grid.check_same(&phi.grid, "chemical potential input")?;
    let jphi = plan.convolve(phi)?;
    Ok(mu_from_parts(phi, &jphi, plan.a(), pot))
}

fn mu_from_parts(
    phi: &ScalarField,
    jphi: &ScalarField,
    a: &ScalarField,
    pot: &Potential,
) -> ScalarField {
    let values = phi
        .values
        .iter()
        .zip(&jphi.values)
        .zip(&a.values)
        .map(|((&p, &jp), &av)| av * p - jp + pot.eval(1, p))
        .collect();
    ScalarField { grid: phi.grid.clone(), values }
}

pub struct StepOutput {
    /// The input level with `mu`, `u`, `pressure` stamped.
    pub completed: State,
    pub phi_next: ScalarField,
    pub brinkman_iterations: usize,
}

/// Precomputed machinery for one model configuration.
pub struct ForwardModel {
    pub config: ModelConfig,
    pub plan: ConvolutionPlan,
    pub report: AssumptionReport,
    /// Mean of `a(x)` (implicit-coefficient part).
    pub a_bar: f64,
    /// Stabilization constant `max|F''|/2` over the clamp interval.
    pub stab: f64,
    pub(crate) brinkman: BrinkmanSolver,
    pub(crate) ch: NeumannSolver,
}

impl ForwardModel {
    pub fn new(mut config: ModelConfig) -> Result<Self> {
        config.validate()?;
        if config.grid.boundary_mode != BoundaryMode::NeumannNoslip {
            return Err(ChbError::config(
                "grid.boundary_mode",
                "time integration requires neumann_noslip; periodic_test is for \
                 convolution verification only",
            ));
        }
        let plan = ConvolutionPlan::new(&config.grid, &config.kernel, config.conv_mode)?;
        let report = validate_assumptions(&mut config, plan.a())?;
        let a_bar = plan.a().mean();
        let stab = 0.5 * config.potential.max_abs_f2();
        let brinkman = BrinkmanSolver::new(
            &config.grid,
            config.nu,
            config.div_tol,
            config.cg_tol,
            config.max_outer,
        )?;
        let ch = NeumannSolver::new(&config.grid);
        Ok(ForwardModel { config, plan, report, a_bar, stab, brinkman, ch })
    }

    pub fn a(&self) -> &ScalarField {
        self.plan.a()
    }

    /// Implicit diffusion coefficient of the phase update.
    pub fn kappa(&self) -> f64 {
        self.a_bar + self.stab
    }

    pub fn chemical_potential(&self, phi: &ScalarField) -> Result<ScalarField> {
        chemical_potential(phi, &self.plan, &self.config.potential)
    }

    /// Implicit phase solve `(I + dt kappa (-Lap))^{-1}`; also the exact
    /// transpose of itself, which the adjoint sweep relies on.
    pub(crate) fn implicit_solve(&self, rhs: &ScalarField) -> ScalarField {
        self.ch.solve(rhs, 1.0, self.config.dt * self.kappa())
    }

    /// Velocity part of the Brinkman solve, shared by forward, tangent and
    /// adjoint sweeps (the solve operator is symmetric).
    pub(crate) fn brinkman_velocity(
        &self,
        f: &VelocityField,
    ) -> Result<(VelocityField, ScalarField)> {
        let sol = self.brinkman.solve(f)?;
        Ok((sol.u, sol.pressure))
    }

    /// Velocity from the momentum balance at one level, given the phase
    /// field and the control sample.
    pub fn velocity_at(
        &self,
        phi: &ScalarField,
        mu: &ScalarField,
        h: &VelocityField,
    ) -> Result<(VelocityField, ScalarField, usize)> {
        let mut f = assemble_capillary_force(mu, phi, &self.config.grid)?;
        f.axpy(1.0, h);
        let sol = self.brinkman.solve(&f)?;
        Ok((sol.u, sol.pressure, sol.iterations))
    }

    /// Implicit phase update given the level-n fields.
    fn phase_update(
        &self,
        phi: &ScalarField,
        mu: &ScalarField,
        u: &VelocityField,
    ) -> Result<ScalarField> {
        let dt = self.config.dt;
        let kappa = self.kappa();
        // Explicit remainder mu - kappa phi keeps the implicit operator
        // constant-coefficient.
        let mut mu_expl = mu.clone();
        mu_expl.axpy(-kappa, phi);
        let mut rhs = phi.clone();
        rhs.axpy(-dt, &transport_divergence(u, phi));
        rhs.axpy(dt, &laplacian_neumann(&mu_expl));
        let phi_next = self.implicit_solve(&rhs);
        let limit = 10.0 * self.config.potential.m_phi;
        let max_abs = phi_next.max_abs();
        if !max_abs.is_finite() || max_abs > limit {
            return Err(ChbError::BlowUp { max_abs, limit });
        }
        Ok(phi_next)
    }

    /// One time advance from a state carrying `phi^n`; the returned
    /// `completed` state has the level-n potential and velocity stamped.
    pub fn step(&self, state: &State, h: &VelocityField) -> Result<StepOutput> {
        self.config.grid.check_same(&state.phi.grid, "state")?;
        let jphi = self.plan.convolve(&state.phi)?;
        let mu = mu_from_parts(&state.phi, &jphi, self.plan.a(), &self.config.potential);
        let (u, pressure, brinkman_iterations) = self.velocity_at(&state.phi, &mu, h)?;
        let phi_next = self.phase_update(&state.phi, &mu, &u)?;
        Ok(StepOutput {
            completed: State { t: state.t, phi: state.phi.clone(), mu, u, pressure },
            phi_next,
            brinkman_iterations,
        })
    }

    /// Interaction energy of a phase field (identity form).
    pub fn energy(&self, phi: &ScalarField, jphi: &ScalarField) -> f64 {
        let a = self.plan.a();
        let pot = &self.config.potential;
        let area = self.config.grid.cell_area();
        let mut s = 0.0;
        for ((&p, &jp), &av) in phi.values.iter().zip(&jphi.values).zip(&a.values) {
            s += 0.5 * (av * p * p - p * jp) + pot.eval(0, p);
        }
        s * area
    }

    /// Run `N = T/dt` steps from `phi0` under the given control, recording
    /// every state and the energy-law diagnostics.
    pub fn simulate(
        &self,
        phi0: &ScalarField,
        control: &ControlTrajectory,
    ) -> Result<(Trajectory, Vec<DiagnosticsRow>)> {
        let n = self.config.n_steps();
        self.config.grid.check_same(&phi0.grid, "phi0")?;
        phi0.assert_finite("phi0")?;
        if control.n_steps() != n {
            return Err(ChbError::TrajectoryMismatch(format!(
                "control has {} samples, run needs {n}",
                control.n_steps()
            )));
        }
        if (control.dt - self.config.dt).abs() > 1e-12 * self.config.dt {
            return Err(ChbError::TrajectoryMismatch(
                "control sample spacing differs from the model dt".to_string(),
            ));
        }
        self.config.grid.check_same(&control.grid, "control")?;

        let dt = self.config.dt;
        let nu = self.config.nu;
        let mut states = Vec::with_capacity(n + 1);
        let mut rows = Vec::with_capacity(n + 1);
        let mut phi = phi0.clone();
        let mut t = 0.0;
        let mut energy = {
            let jphi = self.plan.convolve(&phi)?;
            self.energy(&phi, &jphi)
        };

        for h in &control.samples {
            let out = self.step(&State {
                t,
                phi: phi.clone(),
                mu: ScalarField::zeros(&self.config.grid),
                u: VelocityField::zeros(&self.config.grid),
                pressure: ScalarField::zeros(&self.config.grid),
            }, h)?;
            let jphi_next = self.plan.convolve(&out.phi_next)?;
            let energy_next = self.energy(&out.phi_next, &jphi_next);

            let grad_mu_sq = cell_grad_norm_sq(&out.completed.mu);
            let nu_grad_u_sq = nu * out.completed.u.grad_norm_sq();
            let u_sq = out.completed.u.dot(&out.completed.u);
            let work = h.dot(&out.completed.u);
            let residual = (energy_next - energy) / dt + grad_mu_sq + nu_grad_u_sq + u_sq - work;
            rows.push(DiagnosticsRow {
                t,
                mass: out.completed.phi.integral(),
                energy,
                grad_mu_sq,
                nu_grad_u_sq,
                u_sq,
                work,
                residual,
            });
            states.push(out.completed);
            phi = out.phi_next;
            energy = energy_next;
            t += dt;
        }

        // Terminal state: potential stamped, no velocity solve (there is no
        // control sample at T).
        let mu_n = self.chemical_potential(&phi)?;
        rows.push(DiagnosticsRow {
            t,
            mass: phi.integral(),
            energy,
            grad_mu_sq: 0.0,
            nu_grad_u_sq: 0.0,
            u_sq: 0.0,
            work: 0.0,
            residual: 0.0,
        });
        states.push(State {
            t,
            phi,
            mu: mu_n,
            u: VelocityField::zeros(&self.config.grid),
            pressure: ScalarField::zeros(&self.config.grid),
        });

        Ok((
            Trajectory { dt, states, control: control.samples.clone() },
            rows,
        ))
    }
}

/// Max energy-law defect over the step rows (the terminal row carries no
/// residual).
pub fn energy_residual(rows: &[DiagnosticsRow]) -> f64 {
    rows.iter()
        .take(rows.len().saturating_sub(1))
        .fold(0.0, |m, r| m.max(r.residual.abs()))
}

#[derive(Debug, Clone, Copy)]
pub struct LipschitzEntry {
    pub eps: f64,
    /// `sup_n ||phi_eps^n - phi^n||`
    pub sup_phi: f64,
    /// `sum_n dt ||grad(u_eps^n - u^n)||^2`
    pub u_grad_sq_integral: f64,
}

#[derive(Debug, Clone)]
pub struct LipschitzReport {
    pub entries: Vec<LipschitzEntry>,
    /// Log-log slope of `sup_phi` against eps.
    pub slope_phi: f64,
    /// Log-log slope of the square root of the velocity integral.
    pub slope_u: f64,
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(pairs: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|&(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

impl ForwardModel {
    /// Continuous-dependence probe: run the model with controls `h` and
    /// `h + eps dh` for `eps in {1, 1/2, 1/4, 1/8}` and report how the
    /// state differences scale.
    pub fn lipschitz_probe(
        &self,
        phi0: &ScalarField,
        h: &ControlTrajectory,
        dh: &ControlTrajectory,
    ) -> Result<LipschitzReport> {
        h.check_shape(dh)?;
        let (base, _) = self.simulate(phi0, h)?;
        let mut entries = Vec::new();
        for k in 0..4 {
            let eps = 0.5f64.powi(k);
            let mut pert = h.clone();
            pert.axpy(eps, dh);
            let (run, _) = self.simulate(phi0, &pert)?;
            let mut sup_phi = 0.0f64;
            let mut u_int = 0.0;
            for (sa, sb) in base.states.iter().zip(&run.states) {
                sup_phi = sup_phi.max(sb.phi.sub(&sa.phi).norm_l2());
            }
            for n in 0..base.n_steps() {
                let du = run.states[n].u.sub(&base.states[n].u);
                u_int += du.grad_norm_sq() * self.config.dt;
            }
            entries.push(LipschitzEntry { eps, sup_phi, u_grad_sq_integral: u_int });
        }
        let slope_phi = loglog_slope(
            &entries.iter().map(|e| (e.eps, e.sup_phi)).collect::<Vec<_>>(),
        );
        let slope_u = loglog_slope(
            &entries
                .iter()
                .map(|e| (e.eps, e.u_grad_sq_integral.sqrt()))
                .collect::<Vec<_>>(),
        );
        Ok(LipschitzReport { entries, slope_phi, slope_u })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::CostWeights;
    use crate::conv::ConvMode;
    use crate::grid::GridSpec;
    use crate::kernel::{Kernel, KernelKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn test_config(n: usize, horizon: f64, dt: f64) -> ModelConfig {
        let grid = GridSpec::new(n, n, 1.0, 1.0, BoundaryMode::NeumannNoslip).unwrap();
        let kernel = Kernel::new(KernelKind::Gaussian, 0.1, 25.0, None).unwrap();
        ModelConfig {
            grid,
            kernel,
            potential: Potential::quartic(2.0).unwrap(),
            nu: 0.1,
            horizon,
            dt,
            dt_max: None,
            weights: CostWeights { beta_phi: 1.0, beta_u: 1.0, beta_t: 1.0, beta_ctrl: 1.0 },
            div_tol: 1e-10,
            cg_tol: 1e-12,
            conv_mode: ConvMode::FftPadded,
            max_outer: 500,
            c0_estimate: None,
        }
    }

    fn stripe(grid: &GridSpec) -> ScalarField {
        ScalarField::from_fn(grid, |_, y| ((0.15 - (y - 0.5).abs()) / 0.06).tanh())
    }

    fn smooth_random(grid: &GridSpec, seed: u64, amp: f64) -> ScalarField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let modes: Vec<(f64, f64, f64)> = (0..6)
            .map(|_| {
                (
                    rng.gen_range(1.0..3.0f64).round(),
                    rng.gen_range(1.0..3.0f64).round(),
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect();
        ScalarField::from_fn(grid, |x, y| {
            amp * modes
                .iter()
                .map(|(kx, ky, c)| {
                    c * (kx * std::f64::consts::PI * x).cos()
                        * (ky * std::f64::consts::PI * y).cos()
                })
                .sum::<f64>()
        })
    }

    #[test]
    fn chemical_potential_trivial_cases() {
        let cfg = test_config(16, 0.01, 1e-3);
        let model = ForwardModel::new(cfg).unwrap();
        let g = &model.config.grid;
        // phi = 1: a - J*1 = 0 and F'(1) = 0.
        let mu = model.chemical_potential(&ScalarField::constant(g, 1.0)).unwrap();
        assert!(mu.max_abs() < 1e-12);
        let mu0 = model.chemical_potential(&ScalarField::zeros(g)).unwrap();
        assert!(mu0.max_abs() < 1e-14);
    }

    #[test]
    fn chemical_potential_matches_bruteforce() {
        let cfg = test_config(16, 0.01, 1e-3);
        let model = ForwardModel::new(cfg).unwrap();
        let g = model.config.grid.clone();
        let phi = smooth_random(&g, 3, 0.8);
        let mu = model.chemical_potential(&phi).unwrap();
        // Direct-sum composition per cell.
        let direct =
            ConvolutionPlan::new(&g, &model.config.kernel, ConvMode::Direct).unwrap();
        let jphi = direct.convolve(&phi).unwrap();
        for k in 0..g.n_cells() {
            let want = direct.a().values[k] * phi.values[k] - jphi.values[k]
                + model.config.potential.eval(1, phi.values[k]);
            assert!((mu.values[k] - want).abs() < 1e-11);
        }
    }

    #[test]
    fn constant_state_is_a_fixed_point() {
        let cfg = test_config(16, 0.01, 1e-3);
        let model = ForwardModel::new(cfg).unwrap();
        let g = model.config.grid.clone();
        let c = 0.3;
        let phi0 = ScalarField::constant(&g, c);
        let control = ControlTrajectory::zeros(&g, 1e-3, model.config.n_steps());
        let (traj, rows) = model.simulate(&phi0, &control).unwrap();
        for s in &traj.states {
            assert!(s.phi.sub(&phi0).max_abs() < 1e-12);
            assert!(s.u.max_abs() < 1e-12);
        }
        // mu is spatially constant: F'(c) plus the boundary deficit of a.
        let fpc = model.config.potential.eval(1, c);
        let interior_mu = traj.states[0].mu.at(8, 8);
        assert!((interior_mu - fpc).abs() < 1e-6);
        for r in &rows {
            assert!(r.residual.abs() < 1e-9);
        }
    }

    #[test]
    fn mass_is_conserved_to_roundoff() {
        let cfg = test_config(24, 0.05, 1e-3);
        let model = ForwardModel::new(cfg).unwrap();
        let g = model.config.grid.clone();
        let phi0 = stripe(&g);
        let mut control = ControlTrajectory::zeros(&g, 1e-3, model.config.n_steps());
        // Nonzero forcing too.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for s in &mut control.samples {
            for v in s.ux.iter_mut().chain(s.uy.iter_mut()) {
                *v = rng.gen_range(-0.2..0.2);
            }
            s.enforce_noslip();
        }
        let (_, rows) = model.simulate(&phi0, &control).unwrap();
        let m0 = rows[0].mass;
        for r in &rows {
            assert!((r.mass - m0).abs() <= 1e-10, "mass drift {:.3e}", (r.mass - m0).abs());
        }
    }

    #[test]
    fn energy_decays_without_forcing() {
        let cfg = test_config(24, 0.1, 1e-3);
        let model = ForwardModel::new(cfg).unwrap();
        let g = model.config.grid.clone();
        let phi0 = smooth_random(&g, 11, 0.5);
        let control = ControlTrajectory::zeros(&g, 1e-3, model.config.n_steps());
        let (_, rows) = model.simulate(&phi0, &control).unwrap();
        for w in rows.windows(2) {
            assert!(
                w[1].energy <= w[0].energy + 1e-8,
                "energy rose by {:.3e} at t = {}",
                w[1].energy - w[0].energy,
                w[0].t
            );
        }
    }

    #[test]
    fn energy_residual_shrinks_under_dt_refinement() {
        // Needs a well-prepared start: the stripe preset includes a short
        // relaxation, otherwise the initial layer hides the O(dt) order.
        let run = |dt: f64| {
            let cfg = test_config(24, 0.02, dt);
            let model = ForwardModel::new(cfg).unwrap();
            let phi0 =
                crate::presets::initial_phi(&model, &crate::presets::InitialData::Stripe).unwrap();
            let control = ControlTrajectory::zeros(&model.config.grid, dt, model.config.n_steps());
            let (_, rows) = model.simulate(&phi0, &control).unwrap();
            energy_residual(&rows)
        };
        let r1 = run(1e-3);
        let r2 = run(5e-4);
        let order = (r1 / r2).log2();
        assert!(order >= 0.8, "energy-law order {order:.2} (r1={r1:.3e}, r2={r2:.3e})");
    }

    #[test]
    fn trajectories_are_bit_identical_across_runs() {
        let cfg = test_config(16, 0.01, 1e-3);
        let model = ForwardModel::new(cfg.clone()).unwrap();
        let model2 = ForwardModel::new(cfg).unwrap();
        let g = model.config.grid.clone();
        let phi0 = stripe(&g);
        let control = ControlTrajectory::zeros(&g, 1e-3, model.config.n_steps());
        let (a, _) = model.simulate(&phi0, &control).unwrap();
        let (b, _) = model2.simulate(&phi0, &control).unwrap();
        for (sa, sb) in a.states.iter().zip(&b.states) {
            assert_eq!(sa.phi.values, sb.phi.values);
            assert_eq!(sa.u.ux, sb.u.ux);
        }
    }

    #[test]
    fn lipschitz_scaling_is_linear() {
        let cfg = test_config(16, 0.02, 1e-3);
        let model = ForwardModel::new(cfg).unwrap();
        let g = model.config.grid.clone();
        let phi0 = stripe(&g);
        let n = model.config.n_steps();
        let h = ControlTrajectory::zeros(&g, 1e-3, n);
        let mut dh = ControlTrajectory::zeros(&g, 1e-3, n);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for s in &mut dh.samples {
            for v in s.ux.iter_mut().chain(s.uy.iter_mut()) {
                *v = rng.gen_range(-0.1..0.1);
            }
            s.enforce_noslip();
        }
        let report = model.lipschitz_probe(&phi0, &h, &dh).unwrap();
        assert!((report.slope_phi - 1.0).abs() <= 0.15, "phi slope {}", report.slope_phi);
        assert!((report.slope_u - 1.0).abs() <= 0.15, "u slope {}", report.slope_u);
        // Zero perturbation: all differences vanish.
        let zero = ControlTrajectory::zeros(&g, 1e-3, n);
        let r0 = model.lipschitz_probe(&phi0, &h, &zero).unwrap();
        for e in &r0.entries {
            assert_eq!(e.sup_phi, 0.0);
            assert_eq!(e.u_grad_sq_integral, 0.0);
        }
    }

    #[test]
    fn lipschitz_constant_is_stable_across_perturbations() {
        // sup_t ||dphi|| / ||dh|| at eps = 1 stays within a moderate band
        // over several random directions.
        let cfg = test_config(16, 0.01, 1e-3);
        let model = ForwardModel::new(cfg).unwrap();
        let g = model.config.grid.clone();
        let phi0 = stripe(&g);
        let n = model.config.n_steps();
        let h = ControlTrajectory::zeros(&g, 1e-3, n);
        let mut ratios = Vec::new();
        for seed in [31, 32, 33] {
            let dh = crate::presets::smooth_random_control(&g, 1e-3, n, seed, 0.1);
            let report = model.lipschitz_probe(&phi0, &h, &dh).unwrap();
            ratios.push(report.entries[0].sup_phi / dh.norm());
        }
        let (lo, hi) = ratios
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(l, u), &r| (l.min(r), u.max(r)));
        assert!(hi / lo < 5.0, "Lipschitz ratios vary too much: {ratios:?}");
    }

    #[test]
    fn bump_kernel_runs_the_full_pipeline() {
        let mut cfg = test_config(16, 0.01, 1e-3);
        cfg.kernel = Kernel::new(KernelKind::Bump, 0.3, 24.0, None).unwrap();
        let model = ForwardModel::new(cfg).unwrap();
        assert!(model.config.c0_estimate.unwrap() > 0.0);
        let g = model.config.grid.clone();
        let phi0 = ScalarField::constant(&g, 0.2);
        let control = ControlTrajectory::zeros(&g, 1e-3, model.config.n_steps());
        let (traj, rows) = model.simulate(&phi0, &control).unwrap();
        for s in &traj.states {
            assert!(s.phi.sub(&phi0).max_abs() < 1e-12);
        }
        let m0 = rows[0].mass;
        for r in &rows {
            assert!((r.mass - m0).abs() < 1e-11);
        }
    }

    #[test]
    fn periodic_grids_are_rejected_by_the_integrator() {
        let mut cfg = test_config(16, 0.01, 1e-3);
        cfg.grid = GridSpec::new(16, 16, 1.0, 1.0, BoundaryMode::PeriodicTest).unwrap();
        match ForwardModel::new(cfg) {
            Err(ChbError::ConfigError { key, .. }) => assert_eq!(key, "grid.boundary_mode"),
            other => panic!("expected ConfigError, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn long_run_stays_bounded() {
        // Stripe preset at default dt over a unit horizon never trips the
        // blow-up guard.
        let cfg = test_config(24, 1.0, 1e-3);
        let model = ForwardModel::new(cfg).unwrap();
        let phi0 =
            crate::presets::initial_phi(&model, &crate::presets::InitialData::Stripe).unwrap();
        let control = ControlTrajectory::zeros(&model.config.grid, 1e-3, model.config.n_steps());
        let (traj, rows) = model.simulate(&phi0, &control).unwrap();
        assert!(traj.terminal_phi().max_abs() < 1.5);
        for w in rows.windows(2) {
            assert!(w[1].energy <= w[0].energy + 1e-8);
        }
    }

    #[test]
    fn blowup_is_reported() {
        let mut cfg = test_config(16, 0.01, 1e-3);
        cfg.potential = Potential::quartic(0.05).unwrap(); // absurd clamp
        let model = ForwardModel::new(cfg).unwrap();
        let g = model.config.grid.clone();
        let phi0 = ScalarField::constant(&g, 0.9);
        let control = ControlTrajectory::zeros(&g, 1e-3, model.config.n_steps());
        match model.simulate(&phi0, &control) {
            Err(ChbError::BlowUp { .. }) => {}
            other => panic!("expected BlowUp, got {:?}", other.map(|_| ())),
        }
    }
}
