//! Command-line front end: simulate, optimize, gradcheck, energycheck.
//!
//! Outputs land in the `--out` directory: a manifest (written before any
//! compute output), CHBF1 snapshots, CSV logs, and a PGM of the final
//! phase field. Exit codes: 0 success, 2 validation failure, 3 solver
//! divergence.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::adjoint::fd_gradient_check;
use crate::config::TrackingData;
use crate::configfile::{
    BoundSpec, ControlInit, InitSpec, RunSetup, ScalarTarget, VelocityTarget,
};
use crate::control::{BoxBounds, ControlTrajectory};
use crate::error::Result;
use crate::field::{ScalarField, VelocityField};
use crate::forward::{energy_residual, ForwardModel};
use crate::manifest::{hash_file, RunManifest};
use crate::optimize::{projected_gradient, Ocp};
use crate::pgm::emit_pgm;
use crate::presets::{initial_phi, random_control, stripe_profile};
use crate::snapshot::{read_scalar, read_velocity, write_scalar, write_velocity};

#[derive(Parser)]
#[command(name = "chb", version, about = "Nonlocal Cahn-Hilliard-Brinkman solver and optimal control")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the forward model and record snapshots and diagnostics.
    Simulate(RunArgs),
    /// Projected-gradient descent on the tracking cost.
    Optimize(RunArgs),
    /// Verify the adjoint gradient against central finite differences.
    Gradcheck(RunArgs),
    /// Forward run with zero forcing, reporting the energy-law residual.
    Energycheck(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Seed for preset randomness; recorded in the manifest.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Snapshot cadence in steps; overrides the config's output.every.
    #[arg(long)]
    every: Option<usize>,
}

pub fn run() -> i32 {
    let cli = Cli::parse();
    init_threads();
    let (name, args) = match &cli.cmd {
        Command::Simulate(a) => ("simulate", a),
        Command::Optimize(a) => ("optimize", a),
        Command::Gradcheck(a) => ("gradcheck", a),
        Command::Energycheck(a) => ("energycheck", a),
    };
    match dispatch(name, args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("chb {name}: {e}");
            e.exit_code()
        }
    }
}

/// Cap data parallelism with CHB_THREADS.
fn init_threads() {
    if let Ok(v) = std::env::var("CHB_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
    }
}

fn dispatch(name: &str, args: &RunArgs) -> Result<()> {
    let prep = prepare(name, args)?;
    match name {
        "simulate" => run_simulate(&prep),
        "energycheck" => run_energycheck(&prep),
        "gradcheck" => run_gradcheck(&prep),
        "optimize" => run_optimize(&prep),
        _ => unreachable!(),
    }
}

struct Prepared {
    model: ForwardModel,
    setup: RunSetup,
    out: PathBuf,
    seed: u64,
    every: usize,
    phi0: ScalarField,
    control0: ControlTrajectory,
    data: TrackingData,
    bounds: BoxBounds,
}

fn prepare(name: &str, args: &RunArgs) -> Result<Prepared> {
    let (model, setup) = crate::configfile::load(&args.config, args.seed)?;
    let every = args.every.unwrap_or(setup.every).max(1);

    std::fs::create_dir_all(&args.out)?;
    let mut input_hashes = vec![(
        args.config.display().to_string(),
        hash_file(&args.config)?,
    )];
    for p in &setup.referenced_files {
        input_hashes.push((p.display().to_string(), hash_file(p)?));
    }
    let manifest = RunManifest {
        command: format!("chb {name}"),
        config_path: args.config.display().to_string(),
        out_dir: args.out.display().to_string(),
        seed: args.seed,
        every,
        input_hashes,
    };
    manifest.write(&model.config, &args.out.join("manifest.txt"))?;

    let grid = model.config.grid.clone();
    let n = model.config.n_steps();
    let dt = model.config.dt;

    let phi0 = match &setup.init {
        InitSpec::Preset(p) => initial_phi(&model, p)?,
        InitSpec::File(path) => read_scalar(&grid, path)?.0,
    };

    let control0 = match &setup.control_init {
        ControlInit::Zero => ControlTrajectory::zeros(&grid, dt, n),
        ControlInit::Random { amplitude } => random_control(&grid, dt, n, args.seed, *amplitude),
        ControlInit::File(path) => {
            let (v, _) = read_velocity(&grid, path)?;
            ControlTrajectory { grid: grid.clone(), dt, samples: vec![v; n] }
        }
    };

    let scalar_target = |spec: &ScalarTarget| -> Result<ScalarField> {
        Ok(match spec {
            ScalarTarget::HoldInitial => phi0.clone(),
            ScalarTarget::Zero => ScalarField::zeros(&grid),
            ScalarTarget::Stripe => stripe_profile(&grid),
            ScalarTarget::File(p) => read_scalar(&grid, p)?.0,
        })
    };
    let phi_d = scalar_target(&setup.phi_d)?;
    let phi_omega = scalar_target(&setup.phi_omega)?;
    let u_d = match &setup.u_d {
        VelocityTarget::Zero => VelocityField::zeros(&grid),
        VelocityTarget::File(p) => read_velocity(&grid, p)?.0,
    };
    let data = TrackingData::stationary(phi_d, u_d, phi_omega, n);

    let bounds = match (&setup.bound_lo, &setup.bound_hi) {
        (BoundSpec::Constant(lo), BoundSpec::Constant(hi)) => {
            BoxBounds::Constant { lo: [*lo, *lo], hi: [*hi, *hi] }
        }
        (lo, hi) => {
            let field_of = |spec: &BoundSpec, c_default: f64| -> Result<Vec<VelocityField>> {
                Ok(match spec {
                    BoundSpec::Constant(c) => {
                        let mut v = VelocityField::zeros(&grid);
                        for w in v.ux.iter_mut().chain(v.uy.iter_mut()) {
                            *w = *c;
                        }
                        let _ = c_default;
                        vec![v; n]
                    }
                    BoundSpec::File(p) => vec![read_velocity(&grid, p)?.0; n],
                })
            };
            BoxBounds::Fields { lo: field_of(lo, -1.0)?, hi: field_of(hi, 1.0)? }
        }
    };
    bounds.validate(&grid, n)?;

    Ok(Prepared {
        model,
        setup,
        out: args.out.clone(),
        seed: args.seed,
        every,
        phi0,
        control0,
        data,
        bounds,
    })
}

fn write_diagnostics_csv(rows: &[crate::forward::DiagnosticsRow], path: &Path) -> Result<()> {
    let mut s = String::from("t,mass,energy,grad_mu_sq,nu_grad_u_sq,u_sq,work,residual\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            r.t, r.mass, r.energy, r.grad_mu_sq, r.nu_grad_u_sq, r.u_sq, r.work, r.residual
        );
    }
    std::fs::write(path, s)?;
    Ok(())
}

fn run_forward_and_record(prep: &Prepared, control: &ControlTrajectory) -> Result<f64> {
    let (traj, rows) = prep.model.simulate(&prep.phi0, control)?;
    let n = traj.n_steps();
    for k in (0..=n).step_by(prep.every) {
        let s = &traj.states[k];
        write_scalar(&s.phi, s.t, &prep.out.join(format!("phi_{k:06}.chb")))?;
        if k < n {
            write_velocity(&s.u, s.t, &prep.out.join(format!("u_{k:06}.chb")))?;
        }
    }
    let last = &traj.states[n];
    write_scalar(&last.phi, last.t, &prep.out.join(format!("phi_{n:06}.chb")))?;
    emit_pgm(&last.phi, &prep.out.join("phi_final.pgm"), -1.0, 1.0)?;
    write_diagnostics_csv(&rows, &prep.out.join("diagnostics.csv"))?;
    Ok(energy_residual(&rows))
}

fn run_simulate(prep: &Prepared) -> Result<()> {
    let res = run_forward_and_record(prep, &prep.control0)?;
    println!("simulate: {} steps, max energy-law residual {res:.6e}", prep.model.config.n_steps());
    Ok(())
}

fn run_energycheck(prep: &Prepared) -> Result<()> {
    let zero = ControlTrajectory::zeros(
        &prep.model.config.grid,
        prep.model.config.dt,
        prep.model.config.n_steps(),
    );
    let res = run_forward_and_record(prep, &zero)?;
    println!("energycheck: max energy-law residual {res:.6e}");
    Ok(())
}

fn run_gradcheck(prep: &Prepared) -> Result<()> {
    let eps_list = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5];
    let mut best = f64::INFINITY;
    for d in 0..prep.setup.gradcheck_directions {
        let dir = random_control(
            &prep.model.config.grid,
            prep.model.config.dt,
            prep.model.config.n_steps(),
            prep.seed.wrapping_add(1000 + d as u64),
            1.0,
        );
        let rows = fd_gradient_check(
            &prep.model,
            &prep.phi0,
            &prep.control0,
            &dir,
            &prep.data,
            &eps_list,
        )?;
        let mut s = String::from("eps,fd_value,adjoint_value,rel_error\n");
        for r in &rows {
            let _ = writeln!(
                s,
                "{:.3e},{:.17e},{:.17e},{:.6e}",
                r.eps, r.fd_value, r.adjoint_value, r.rel_error
            );
            best = best.min(r.rel_error);
        }
        std::fs::write(prep.out.join(format!("gradcheck_{d:03}.csv")), s)?;
    }
    println!("gradcheck: min relative error {best:.6e}");
    Ok(())
}

fn run_optimize(prep: &Prepared) -> Result<()> {
    let ocp = Ocp {
        model: &prep.model,
        phi0: prep.phi0.clone(),
        data: prep.data.clone(),
        bounds: prep.bounds.clone(),
    };
    let report = projected_gradient(&ocp, &prep.control0, &prep.setup.pg)?;

    let mut s = String::from("iter,cost,kkt,alpha,backtracks\n");
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{},{:.17e},{:.17e},{:.6e},{}",
            r.iter, r.cost, r.kkt, r.alpha, r.backtracks
        );
    }
    std::fs::write(prep.out.join("optimize.csv"), s)?;

    for (k, u) in report.control.samples.iter().enumerate() {
        let t = k as f64 * prep.model.config.dt;
        write_velocity(u, t, &prep.out.join(format!("control_{k:06}.chb")))?;
    }
    // Final controlled state for inspection.
    let (traj, rows) = prep.model.simulate(&prep.phi0, &report.control)?;
    let n = traj.n_steps();
    write_scalar(
        &traj.states[n].phi,
        traj.states[n].t,
        &prep.out.join(format!("phi_{n:06}.chb")),
    )?;
    emit_pgm(&traj.states[n].phi, &prep.out.join("phi_final.pgm"), -1.0, 1.0)?;
    write_diagnostics_csv(&rows, &prep.out.join("diagnostics.csv"))?;

    println!(
        "optimize: {} iterations, cost {:.6e}, kkt {:.6e}, converged = {}",
        report.rows.len() - 1,
        report.final_cost(),
        report.final_kkt(),
        report.converged
    );
    Ok(())
}
