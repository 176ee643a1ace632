//! Run manifest: resolved configuration, input hashes, command line and
//! tool version, written into the output directory before any compute
//! output. Re-running with an identical manifest reproduces outputs
//! bit-identically.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::config::ModelConfig;
use crate::conv::ConvMode;
use crate::error::Result;
use crate::grid::BoundaryMode;
use crate::kernel::KernelKind;
use crate::potential::PotentialKind;

pub struct RunManifest {
    pub command: String,
    pub config_path: String,
    pub out_dir: String,
    pub seed: u64,
    pub every: usize,
    pub input_hashes: Vec<(String, String)>,
}

pub fn hash_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let mut h = Sha256::new();
    h.update(&bytes);
    Ok(format!("{:x}", h.finalize()))
}

impl RunManifest {
    pub fn render(&self, config: &ModelConfig) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[run]");
        let _ = writeln!(s, "tool = chb {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "command = {}", self.command);
        let _ = writeln!(s, "config = {}", self.config_path);
        let _ = writeln!(s, "out = {}", self.out_dir);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "every = {}", self.every);
        let _ = writeln!(s, "\n[inputs]");
        for (p, h) in &self.input_hashes {
            let _ = writeln!(s, "sha256 {h}  {p}");
        }
        let _ = writeln!(s, "\n[resolved]");
        let g = &config.grid;
        let _ = writeln!(s, "grid = {}x{} on {}x{}", g.nx, g.ny, g.lx, g.ly);
        let _ = writeln!(
            s,
            "boundary_mode = {}",
            match g.boundary_mode {
                BoundaryMode::NeumannNoslip => "neumann_noslip",
                BoundaryMode::PeriodicTest => "periodic_test",
            }
        );
        let _ = writeln!(
            s,
            "kernel = {} delta={} amplitude={} truncation={}",
            match config.kernel.kind {
                KernelKind::Gaussian => "gaussian",
                KernelKind::Bump => "bump",
            },
            config.kernel.delta,
            config.kernel.amplitude,
            config.kernel.truncation
        );
        let _ = writeln!(
            s,
            "potential = {} m_phi={}",
            match &config.potential.kind {
                PotentialKind::Quartic => "quartic".to_string(),
                PotentialKind::CustomPolynomial(c) => format!("custom{c:?}"),
            },
            config.potential.m_phi
        );
        let _ = writeln!(s, "nu = {}", config.nu);
        let _ = writeln!(s, "T = {}", config.horizon);
        let _ = writeln!(s, "dt = {}", config.dt);
        let w = config.weights;
        let _ = writeln!(
            s,
            "weights = beta_phi={} beta_u={} beta_T={} beta_U={}",
            w.beta_phi, w.beta_u, w.beta_t, w.beta_ctrl
        );
        let _ = writeln!(s, "div_tol = {:e}", config.div_tol);
        let _ = writeln!(s, "cg_tol = {:e}", config.cg_tol);
        let _ = writeln!(
            s,
            "conv_mode = {}",
            match config.conv_mode {
                ConvMode::FftPadded => "fft",
                ConvMode::Direct => "direct",
            }
        );
        if let Some(c0) = config.c0_estimate {
            let _ = writeln!(s, "c0_estimate = {c0:.12e}");
        }
        s
    }

    pub fn write(&self, config: &ModelConfig, path: &Path) -> Result<()> {
        std::fs::write(path, self.render(config))?;
        Ok(())
    }
}
