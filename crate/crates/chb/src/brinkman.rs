//! Steady Brinkman solver `-nu Lap u + u + grad pi = f, div u = 0` with
//! no-slip boundary on the MAC staggered grid.
//!
//! The velocity Helmholtz operator is inverted exactly by sine-transform
//! diagonalization; an outer conjugate gradient iterates on the pressure
//! Schur complement `G^T A^{-1} G`, preconditioned by the Cahouet-Chabard
//! operator `nu I + (-Lap_N)^{-1}`. The resulting solve operator
//! `f -> u` is symmetric and annihilates discrete gradients, two properties
//! the tangent/adjoint machinery relies on.

use crate::error::{ChbError, Result};
use crate::field::{ScalarField, VelocityField};
use crate::grid::{BoundaryMode, GridSpec};
use crate::operators::{divergence, face_average, face_gradient, face_mul};
use crate::transforms::{velocity_helmholtz_apply, NeumannSolver, VelocityHelmholtzSolver};

#[derive(Debug, Clone)]
pub struct BrinkmanSolution {
    pub u: VelocityField,
    /// Cell-centered pressure, mean zero.
    pub pressure: ScalarField,
    pub iterations: usize,
    /// Final Schur residual in the max norm (equals the divergence of `u`).
    pub residual: f64,
}

/// Reusable solver state for one grid and viscosity.
pub struct BrinkmanSolver {
    pub grid: GridSpec,
    pub nu: f64,
    pub div_tol: f64,
    pub cg_tol: f64,
    pub max_outer: usize,
    velocity: VelocityHelmholtzSolver,
    neumann: NeumannSolver,
}

impl BrinkmanSolver {
    pub fn new(grid: &GridSpec, nu: f64, div_tol: f64, cg_tol: f64, max_outer: usize) -> Result<Self> {
        if grid.boundary_mode != BoundaryMode::NeumannNoslip {
            return Err(ChbError::config(
                "grid.boundary_mode",
                "the Brinkman solver requires neumann_noslip",
            ));
        }
        if !(nu > 0.0) {
            return Err(ChbError::config("model.nu", "viscosity must be positive"));
        }
        Ok(BrinkmanSolver {
            grid: grid.clone(),
            nu,
            div_tol,
            cg_tol,
            max_outer,
            velocity: VelocityHelmholtzSolver::new(grid, nu),
            neumann: NeumannSolver::new(grid),
        })
    }

    /// Schur complement application `p -> -div(A^{-1} grad p)`.
    fn schur_apply(&self, p: &ScalarField) -> ScalarField {
        let gp = face_gradient(p);
        let w = self.velocity.solve(&gp);
        let mut out = divergence(&w);
        out.scale(-1.0);
        out
    }

    /// Cahouet-Chabard preconditioner `r -> nu r + (-Lap_N)^{-1} r`, mean
    /// zero in, mean zero out.
    fn precondition(&self, r: &ScalarField) -> ScalarField {
        let mut z = self.neumann.solve(r, 0.0, 1.0);
        z.axpy(self.nu, r);
        z.subtract_mean();
        z
    }

    pub fn solve(&self, f: &VelocityField) -> Result<BrinkmanSolution> {
        self.solve_from(f, None)
    }

    /// Solve with an optional initial pressure iterate (used to verify that
    /// the solution does not depend on the starting point).
    pub fn solve_from(&self, f: &VelocityField, p0: Option<&ScalarField>) -> Result<BrinkmanSolution> {
        self.grid.check_same(&f.grid, "brinkman right side")?;
        f.assert_finite("brinkman right side")?;

        // Boundary normal faces are not unknowns; mask them out of the data.
        let mut f = f.clone();
        f.enforce_noslip();

        let w0 = self.velocity.solve(&f);
        let mut b = divergence(&w0);
        b.scale(-1.0);
        b.subtract_mean();
        let b_norm = b.norm_l2();

        let mut p = match p0 {
            Some(p0) => {
                self.grid.check_same(&p0.grid, "initial pressure")?;
                let mut p = p0.clone();
                p.subtract_mean();
                p
            }
            None => ScalarField::zeros(&self.grid),
        };

        // Preconditioned CG on the pressure Schur complement. The target is
        // twofold: divergence below div_tol in the max norm, and relative
        // residual near round-off so the solve operator stays symmetric for
        // the adjoint dot tests.
        let rel_target = self.cg_tol.min(1e-13) * b_norm;
        let abs_target = 0.5 * self.div_tol;

        let mut r = b.sub(&self.schur_apply(&p));
        let mut z = self.precondition(&r);
        let mut d = z.clone();
        let mut rz = r.dot(&z);
        let mut iterations = 0;
        let mut res_inf = r.max_abs();
        let mut best_res = res_inf;
        let mut stagnant = 0usize;

        while !(res_inf <= abs_target && r.norm_l2() <= rel_target) {
            if iterations >= self.max_outer || stagnant > 12 {
                if res_inf <= self.div_tol {
                    break; // divergence criterion met, accept
                }
                return Err(ChbError::SolverDiverged(format!(
                    "pressure Schur CG stalled at residual {res_inf:.3e} after \
                     {iterations} iterations (target {abs_target:.3e})"
                )));
            }
            let sd = self.schur_apply(&d);
            let dsd = d.dot(&sd);
            if !(dsd > 0.0) {
                return Err(ChbError::SolverDiverged(
                    "pressure Schur complement lost positive definiteness".to_string(),
                ));
            }
            let alpha = rz / dsd;
            p.axpy(alpha, &d);
            r.axpy(-alpha, &sd);
            // Gauge the iterate each sweep.
            p.subtract_mean();
            z = self.precondition(&r);
            let rz_new = r.dot(&z);
            let beta = rz_new / rz;
            rz = rz_new;
            let mut d_new = z.clone();
            d_new.axpy(beta, &d);
            d = d_new;
            iterations += 1;
            res_inf = r.max_abs();
            if res_inf < 0.9 * best_res {
                best_res = res_inf;
                stagnant = 0;
            } else {
                stagnant += 1;
            }
        }

        let mut rhs_u = f.clone();
        rhs_u.axpy(-1.0, &face_gradient(&p));
        let u = self.velocity.solve(&rhs_u);
        let residual = divergence(&u).max_abs();

        Ok(BrinkmanSolution { u, pressure: p, iterations, residual })
    }

    /// Momentum residual `max |A u + grad p - f|` of a solution, for
    /// verification.
    pub fn momentum_residual(&self, sol: &BrinkmanSolution, f: &VelocityField) -> f64 {
        let mut r = velocity_helmholtz_apply(&sol.u, self.nu);
        r.axpy(1.0, &face_gradient(&sol.pressure));
        let mut fm = f.clone();
        fm.enforce_noslip();
        r.axpy(-1.0, &fm);
        r.max_abs()
    }
}

/// Face-centered capillary force `avg(mu) grad(phi)`; exactly zero for
/// constant `phi`.
pub fn assemble_capillary_force(
    mu: &ScalarField,
    phi: &ScalarField,
    grid: &GridSpec,
) -> Result<VelocityField> {
    grid.check_same(&mu.grid, "capillary mu")?;
    grid.check_same(&phi.grid, "capillary phi")?;
    Ok(face_mul(&face_average(mu), &face_gradient(phi)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(n, n, 1.0, 1.0, BoundaryMode::NeumannNoslip).unwrap()
    }

    fn solver(g: &GridSpec, nu: f64) -> BrinkmanSolver {
        BrinkmanSolver::new(g, nu, 1e-10, 1e-12, 500).unwrap()
    }

    fn random_force(g: &GridSpec, seed: u64) -> VelocityField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = VelocityField::zeros(g);
        for w in f.ux.iter_mut().chain(f.uy.iter_mut()) {
            *w = rng.gen_range(-1.0..1.0);
        }
        f.enforce_noslip();
        f
    }

    #[test]
    fn zero_force_gives_zero_solution() {
        let g = grid(16);
        let s = solver(&g, 0.1);
        let sol = s.solve(&VelocityField::zeros(&g)).unwrap();
        assert_eq!(sol.u.max_abs(), 0.0);
        assert_eq!(sol.pressure.max_abs(), 0.0);
    }

    #[test]
    fn gradient_forces_are_absorbed_by_pressure() {
        let g = grid(24);
        let s = solver(&g, 0.05);
        let gfun = ScalarField::from_fn(&g, |x, y| (2.0 * PI * x).cos() * (PI * y).sin() + x * y);
        let f = face_gradient(&gfun);
        let sol = s.solve(&f).unwrap();
        assert!(sol.u.max_abs() < 10.0 * s.cg_tol, "max|u| = {:.3e}", sol.u.max_abs());
        let mut want = gfun.clone();
        want.subtract_mean();
        assert!(sol.pressure.sub(&want).max_abs() < 1e-8);
    }

    #[test]
    fn invariants_hold_on_random_force() {
        let g = grid(20);
        let s = solver(&g, 0.2);
        let f = random_force(&g, 1);
        let sol = s.solve(&f).unwrap();
        assert!(sol.residual <= 1e-10, "div residual {:.3e}", sol.residual);
        assert!(sol.u.is_noslip());
        assert!(sol.pressure.mean().abs() < 1e-13);
        let mres = s.momentum_residual(&sol, &f);
        assert!(mres <= 1e-12 * (1.0 + f.max_abs()), "momentum residual {mres:.3e}");
    }

    #[test]
    fn solve_map_is_symmetric() {
        let g = grid(16);
        let s = solver(&g, 0.15);
        let f1 = random_force(&g, 2);
        let f2 = random_force(&g, 3);
        let u1 = s.solve(&f1).unwrap().u;
        let u2 = s.solve(&f2).unwrap().u;
        let lhs = u1.dot(&f2);
        let rhs = f1.dot(&u2);
        assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
    }

    #[test]
    fn solution_is_independent_of_initial_iterate() {
        let g = grid(16);
        let s = solver(&g, 0.1);
        let f = random_force(&g, 4);
        let a = s.solve_from(&f, None).unwrap();
        let mut p0 = ScalarField::from_fn(&g, |x, y| (x - y) * (x + 2.0 * y));
        p0.subtract_mean();
        let b = s.solve_from(&f, Some(&p0)).unwrap();
        let tol = 10.0 * s.cg_tol.max(1e-13);
        assert!(a.u.sub(&b.u).max_abs() < tol * (1.0 + a.u.max_abs()) * 10.0);
    }

    /// Manufactured solution: u = curl psi with
    /// psi = sin^2(pi x) sin^2(pi y), p = cos(pi x) cos(pi y).
    fn mms_error(n: usize, nu: f64) -> f64 {
        let g = grid(n);
        let s = solver(&g, nu);
        let a = PI;
        let b = PI;
        let ux = move |x: f64, y: f64| (a * x).sin().powi(2) * b * (2.0 * b * y).sin();
        let uy = move |x: f64, y: f64| -a * (2.0 * a * x).sin() * (b * y).sin().powi(2);
        let lap_ux = move |x: f64, y: f64| {
            b * (2.0 * a * a * (2.0 * a * x).cos() * (2.0 * b * y).sin()
                - 4.0 * b * b * (a * x).sin().powi(2) * (2.0 * b * y).sin())
        };
        let lap_uy = move |x: f64, y: f64| {
            -a * (-4.0 * a * a * (2.0 * a * x).sin() * (b * y).sin().powi(2)
                + 2.0 * b * b * (2.0 * a * x).sin() * (2.0 * b * y).cos())
        };
        let px = move |x: f64, y: f64| -a * (a * x).sin() * (b * y).cos();
        let py = move |x: f64, y: f64| -b * (a * x).cos() * (b * y).sin();
        let f = VelocityField::from_fn(
            &g,
            |x, y| -nu * lap_ux(x, y) + ux(x, y) + px(x, y),
            |x, y| -nu * lap_uy(x, y) + uy(x, y) + py(x, y),
        );
        let sol = s.solve(&f).unwrap();
        let exact = VelocityField::from_fn(&g, ux, uy);
        sol.u.sub(&exact).norm_l2()
    }

    #[test]
    fn manufactured_solution_converges_at_second_order() {
        let nu = 0.7;
        let e16 = mms_error(16, nu);
        let e32 = mms_error(32, nu);
        let e64 = mms_error(64, nu);
        let o1 = (e16 / e32).log2();
        let o2 = (e32 / e64).log2();
        assert!(o1 >= 1.9, "order 16->32 = {o1:.3} (e16={e16:.3e}, e32={e32:.3e})");
        assert!(o2 >= 1.9, "order 32->64 = {o2:.3} (e32={e32:.3e}, e64={e64:.3e})");
    }

    #[test]
    fn capillary_force_of_constant_phi_is_zero() {
        let g = grid(12);
        let mu = ScalarField::from_fn(&g, |x, y| x * x + y);
        let phi = ScalarField::constant(&g, 0.4);
        let f = assemble_capillary_force(&mu, &phi, &g).unwrap();
        assert_eq!(f.max_abs(), 0.0);
    }

    #[test]
    fn capillary_force_matches_scalar_loop() {
        let g = GridSpec::new(8, 8, 1.0, 1.0, BoundaryMode::NeumannNoslip).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mu = ScalarField::from_values(
            &g,
            (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let phi = ScalarField::from_values(
            &g,
            (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let f = assemble_capillary_force(&mu, &phi, &g).unwrap();
        // Independent index-by-index assembly.
        for j in 0..8 {
            for i in 1..8 {
                let want = 0.5 * (mu.at(i, j) + mu.at(i - 1, j))
                    * (phi.at(i, j) - phi.at(i - 1, j))
                    / g.hx();
                assert!((f.ux_at(i, j) - want).abs() < 1e-14);
            }
        }
        for j in 1..8 {
            for i in 0..8 {
                let want = 0.5 * (mu.at(i, j) + mu.at(i, j - 1))
                    * (phi.at(i, j) - phi.at(i, j - 1))
                    / g.hy();
                assert!((f.uy_at(i, j) - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn capillary_pairs_to_zero_with_divergence_free_fields() {
        // <m grad(phi), u> = 0 for constant m and any discrete
        // divergence-free no-slip u.
        let g = grid(16);
        let s = solver(&g, 0.1);
        let phi = ScalarField::from_fn(&g, |x, y| (3.0 * x).sin() + y * y);
        let m = ScalarField::constant(&g, 2.5);
        let force = assemble_capillary_force(&m, &phi, &g).unwrap();
        let u = s.solve(&random_force(&g, 7)).unwrap().u;
        assert!(force.dot(&u).abs() < 1e-9, "pairing {:.3e}", force.dot(&u));
    }
}
