//! Flat structured-text configuration files: `[section]` headers and
//! `key = value` lines, `#` comments. Unknown sections or keys are errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::config::{CostWeights, ModelConfig};
use crate::control::BoxBounds;
use crate::conv::ConvMode;
use crate::error::{ChbError, Result};
use crate::grid::{BoundaryMode, GridSpec};
use crate::kernel::{Kernel, KernelKind};
use crate::optimize::PgOptions;
use crate::potential::{Potential, PotentialKind};
use crate::presets::InitialData;

/// Where the initial phase field comes from.
#[derive(Debug, Clone)]
pub enum InitSpec {
    Preset(InitialData),
    File(PathBuf),
}

/// Control used as forcing by `simulate` and as the starting iterate by
/// `optimize`.
#[derive(Debug, Clone)]
pub enum ControlInit {
    Zero,
    Random { amplitude: f64 },
    File(PathBuf),
}

/// Scalar tracking-target source.
#[derive(Debug, Clone)]
pub enum ScalarTarget {
    HoldInitial,
    Zero,
    Stripe,
    File(PathBuf),
}

#[derive(Debug, Clone)]
pub enum VelocityTarget {
    Zero,
    File(PathBuf),
}

/// Bound source: a constant per component or a velocity snapshot.
#[derive(Debug, Clone)]
pub enum BoundSpec {
    Constant(f64),
    File(PathBuf),
}

#[derive(Debug, Clone)]
pub struct RunSetup {
    pub init: InitSpec,
    pub control_init: ControlInit,
    pub phi_d: ScalarTarget,
    pub u_d: VelocityTarget,
    pub phi_omega: ScalarTarget,
    pub bound_lo: BoundSpec,
    pub bound_hi: BoundSpec,
    pub pg: PgOptions,
    pub every: usize,
    pub gradcheck_directions: usize,
    /// Paths referenced by the config, for manifest hashing.
    pub referenced_files: Vec<PathBuf>,
}

impl RunSetup {
    /// Constant bounds when both sides are constants; per-step fields are
    /// materialized by the CLI once the step count is known.
    pub fn constant_bounds(&self) -> Option<BoxBounds> {
        match (&self.bound_lo, &self.bound_hi) {
            (BoundSpec::Constant(lo), BoundSpec::Constant(hi)) => {
                Some(BoxBounds::Constant { lo: [*lo, *lo], hi: [*hi, *hi] })
            }
            _ => None,
        }
    }
}

struct RawConfig {
    // section -> key -> (value, consumed)
    sections: BTreeMap<String, BTreeMap<String, (String, bool)>>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, BTreeMap<String, (String, bool)>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let name = name.trim().to_string();
                sections.entry(name.clone()).or_default();
                current = Some(name);
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ChbError::config(
                    format!("line {}", lineno + 1),
                    format!("expected `key = value`, got `{line}`"),
                ));
            };
            let section = current.as_ref().ok_or_else(|| {
                ChbError::config(format!("line {}", lineno + 1), "key before any [section]")
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            let entry = sections.get_mut(section).unwrap();
            if entry.insert(key.clone(), (value, false)).is_some() {
                return Err(ChbError::config(
                    format!("{section}.{key}"),
                    "duplicate key",
                ));
            }
        }
        Ok(RawConfig { sections })
    }

    fn take(&mut self, section: &str, key: &str) -> Option<String> {
        self.sections
            .get_mut(section)
            .and_then(|s| s.get_mut(key))
            .map(|(v, used)| {
                *used = true;
                v.clone()
            })
    }

    fn take_parsed<T: std::str::FromStr>(&mut self, section: &str, key: &str) -> Result<Option<T>> {
        match self.take(section, key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|_| {
                ChbError::config(format!("{section}.{key}"), format!("unreadable value `{v}`"))
            }),
        }
    }

    fn require<T: std::str::FromStr>(&mut self, section: &str, key: &str) -> Result<T> {
        self.take_parsed(section, key)?
            .ok_or_else(|| ChbError::config(format!("{section}.{key}"), "missing required key"))
    }

    fn reject_unknown(&self, known_sections: &[&str]) -> Result<()> {
        for (section, keys) in &self.sections {
            if !known_sections.contains(&section.as_str()) {
                return Err(ChbError::config(section.clone(), "unknown section"));
            }
            for (key, (_, used)) in keys {
                if !used {
                    return Err(ChbError::config(
                        format!("{section}.{key}"),
                        "unknown key",
                    ));
                }
            }
        }
        Ok(())
    }
}

const SECTIONS: &[&str] = &[
    "grid", "kernel", "potential", "model", "cost", "solver", "control", "targets", "init",
    "output", "optimize", "gradcheck",
];

/// Parse a config file and build the fully validated model, hypothesis
/// checks included.
pub fn load(path: &Path, seed: u64) -> Result<(crate::forward::ForwardModel, RunSetup)> {
    let (config, setup) = parse_config(path, seed)?;
    Ok((crate::forward::ForwardModel::new(config)?, setup))
}

/// Parse and validate a config file. The model's assumption checks run when
/// the forward model is built from the returned config (see `load`).
pub fn parse_config(path: &Path, seed: u64) -> Result<(ModelConfig, RunSetup)> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        ChbError::config(path.display().to_string(), format!("cannot read config: {e}"))
    })?;
    parse_config_text(&text, path.parent().unwrap_or(Path::new(".")), seed)
}

pub fn parse_config_text(text: &str, base: &Path, seed: u64) -> Result<(ModelConfig, RunSetup)> {
    let mut raw = RawConfig::parse(text)?;
    let mut referenced: Vec<PathBuf> = Vec::new();

    // [grid]
    let nx: usize = raw.require("grid", "nx")?;
    let ny: usize = raw.require("grid", "ny")?;
    let lx: f64 = raw.take_parsed("grid", "Lx")?.unwrap_or(1.0);
    let ly: f64 = raw.take_parsed("grid", "Ly")?.unwrap_or(1.0);
    let boundary_mode = match raw.take("grid", "boundary_mode").as_deref() {
        None | Some("neumann_noslip") => BoundaryMode::NeumannNoslip,
        Some("periodic_test") => BoundaryMode::PeriodicTest,
        Some(v) => {
            return Err(ChbError::config("grid.boundary_mode", format!("unknown mode `{v}`")))
        }
    };
    let grid = GridSpec::new(nx, ny, lx, ly, boundary_mode)?;

    // [kernel]
    let kind = match raw.take("kernel", "kind").as_deref() {
        None | Some("gaussian") => KernelKind::Gaussian,
        Some("bump") => KernelKind::Bump,
        Some(v) => return Err(ChbError::config("kernel.kind", format!("unknown kind `{v}`"))),
    };
    let delta: f64 = raw.require("kernel", "delta")?;
    let amplitude: f64 = raw.require("kernel", "amplitude")?;
    let truncation: Option<f64> = raw.take_parsed("kernel", "truncation")?;
    let kernel = Kernel::new(kind, delta, amplitude, truncation)?;

    // [init] resolved early: the clamp bound depends on the raw profile.
    let init_name = raw.take("init", "phi0").unwrap_or_else(|| "stripe".to_string());
    let const_value: f64 = raw.take_parsed("init", "value")?.unwrap_or(0.3);
    let spin_mean: f64 = raw.take_parsed("init", "mean")?.unwrap_or(0.0);
    let spin_amp: f64 = raw.take_parsed("init", "amplitude")?.unwrap_or(0.05);
    let init = match init_name.as_str() {
        "constant" => InitSpec::Preset(InitialData::Constant { value: const_value }),
        "stripe" => InitSpec::Preset(InitialData::Stripe),
        "spinodal" => InitSpec::Preset(InitialData::Spinodal {
            mean: spin_mean,
            amplitude: spin_amp,
            seed,
        }),
        other => {
            let p = base.join(other);
            referenced.push(p.clone());
            InitSpec::File(p)
        }
    };
    let raw_profile_max = match &init {
        InitSpec::Preset(InitialData::Constant { value }) => value.abs(),
        InitSpec::Preset(InitialData::Stripe) => 1.0,
        InitSpec::Preset(InitialData::Spinodal { mean, amplitude, .. }) => {
            mean.abs() + amplitude.abs()
        }
        InitSpec::File(p) => crate::snapshot::read_scalar(&grid, p)?.0.max_abs(),
    };

    // [potential]
    let m_phi_default = (1.5 * raw_profile_max).max(2.0);
    let m_phi: f64 = raw.take_parsed("potential", "m_phi")?.unwrap_or(m_phi_default);
    let potential = match raw.take("potential", "kind").as_deref() {
        None | Some("quartic") => Potential::quartic(m_phi)?,
        Some("custom_polynomial") => {
            let coeffs = raw
                .take("potential", "coefficients")
                .ok_or_else(|| {
                    ChbError::config("potential.coefficients", "required for custom_polynomial")
                })?
                .split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|_| {
                        ChbError::config("potential.coefficients", format!("bad entry `{s}`"))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            Potential::new(PotentialKind::CustomPolynomial(coeffs), m_phi)?
        }
        Some(v) => return Err(ChbError::config("potential.kind", format!("unknown kind `{v}`"))),
    };

    // [model]
    let nu: f64 = raw.require("model", "nu")?;
    let horizon: f64 = raw.require("model", "T")?;
    let dt: f64 = raw.require("model", "dt")?;
    let dt_max: Option<f64> = raw.take_parsed("model", "dt_max")?;

    // [cost]
    let weights = CostWeights {
        beta_phi: raw.take_parsed("cost", "beta_phi")?.unwrap_or(1.0),
        beta_u: raw.take_parsed("cost", "beta_u")?.unwrap_or(1.0),
        beta_t: raw.take_parsed("cost", "beta_T")?.unwrap_or(1.0),
        beta_ctrl: raw.take_parsed("cost", "beta_U")?.unwrap_or(1.0),
    };

    // [solver]
    let div_tol: f64 = raw.take_parsed("solver", "div_tol")?.unwrap_or(1e-10);
    let cg_tol: f64 = raw.take_parsed("solver", "cg_tol")?.unwrap_or(1e-12);
    let max_outer: usize = raw.take_parsed("solver", "max_outer")?.unwrap_or(500);
    let conv_mode = match raw.take("solver", "conv_mode").as_deref() {
        None | Some("fft") => ConvMode::FftPadded,
        Some("direct") => ConvMode::Direct,
        Some(v) => return Err(ChbError::config("solver.conv_mode", format!("unknown mode `{v}`"))),
    };

    // [control]
    let parse_bound = |raw: &mut RawConfig, key: &str, default: f64, referenced: &mut Vec<PathBuf>| -> Result<BoundSpec> {
        match raw.take("control", key) {
            None => Ok(BoundSpec::Constant(default)),
            Some(v) => match v.parse::<f64>() {
                Ok(c) => Ok(BoundSpec::Constant(c)),
                Err(_) => {
                    let p = base.join(&v);
                    referenced.push(p.clone());
                    Ok(BoundSpec::File(p))
                }
            },
        }
    };
    let bound_lo = parse_bound(&mut raw, "lo", -1.0, &mut referenced)?;
    let bound_hi = parse_bound(&mut raw, "hi", 1.0, &mut referenced)?;
    let control_init = match raw.take("control", "init").as_deref() {
        None | Some("zero") => ControlInit::Zero,
        Some("random") => ControlInit::Random {
            amplitude: raw.take_parsed("control", "init_amplitude")?.unwrap_or(0.1),
        },
        Some(p) => {
            let p = base.join(p);
            referenced.push(p.clone());
            ControlInit::File(p)
        }
    };

    // [targets]
    let phi_d = match raw.take("targets", "phi_d").as_deref() {
        None | Some("hold_initial") => ScalarTarget::HoldInitial,
        Some("zero") => ScalarTarget::Zero,
        Some("stripe") => ScalarTarget::Stripe,
        Some(p) => {
            let p = base.join(p);
            referenced.push(p.clone());
            ScalarTarget::File(p)
        }
    };
    let u_d = match raw.take("targets", "u_d").as_deref() {
        None | Some("zero") => VelocityTarget::Zero,
        Some(p) => {
            let p = base.join(p);
            referenced.push(p.clone());
            VelocityTarget::File(p)
        }
    };
    let phi_omega = match raw.take("targets", "phi_Omega").as_deref() {
        None | Some("initial") => ScalarTarget::HoldInitial,
        Some("zero") => ScalarTarget::Zero,
        Some("stripe") => ScalarTarget::Stripe,
        Some(p) => {
            let p = base.join(p);
            referenced.push(p.clone());
            ScalarTarget::File(p)
        }
    };

    // [output] / [optimize] / [gradcheck]
    let every: usize = raw.take_parsed("output", "every")?.unwrap_or(10);
    let pg = PgOptions {
        max_iters: raw.take_parsed("optimize", "max_iters")?.unwrap_or(50),
        tol_kkt: raw.take_parsed("optimize", "tol_kkt")?.unwrap_or(1e-6),
        alpha0: raw.take_parsed("optimize", "alpha0")?.unwrap_or(1.0),
        ..PgOptions::default()
    };
    let gradcheck_directions: usize = raw.take_parsed("gradcheck", "directions")?.unwrap_or(5);

    raw.reject_unknown(SECTIONS)?;

    let config = ModelConfig {
        grid,
        kernel,
        potential,
        nu,
        horizon,
        dt,
        dt_max,
        weights,
        div_tol,
        cg_tol,
        conv_mode,
        max_outer,
        c0_estimate: None,
    };
    config.validate()?;

    Ok((
        config,
        RunSetup {
            init,
            control_init,
            phi_d,
            u_d,
            phi_omega,
            bound_lo,
            bound_hi,
            pg,
            every: every.max(1),
            gradcheck_directions,
            referenced_files: referenced,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "
[grid]
nx = 16
ny = 16

[kernel]
delta = 0.1
amplitude = 20.0

[model]
nu = 0.1
T = 0.01
dt = 1e-3
";

    #[test]
    fn minimal_config_fills_defaults() {
        let (cfg, setup) = parse_config_text(MINIMAL, Path::new("."), 0).unwrap();
        assert_eq!(cfg.grid.nx, 16);
        assert_eq!(cfg.potential.m_phi, 2.0);
        assert_eq!(cfg.weights.beta_phi, 1.0);
        assert!(matches!(setup.init, InitSpec::Preset(InitialData::Stripe)));
        assert!(matches!(setup.control_init, ControlInit::Zero));
        assert!(setup.constant_bounds().is_some());
    }

    #[test]
    fn zero_dt_is_rejected_with_key_path() {
        let text = MINIMAL.replace("dt = 1e-3", "dt = 0");
        match parse_config_text(&text, Path::new("."), 0) {
            Err(ChbError::ConfigError { key, reason }) => {
                assert_eq!(key, "model.dt");
                assert!(reason.contains("positive"));
            }
            other => panic!("expected ConfigError, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}\n[model]\n");
        // Re-opening a section is fine; an unknown key is not.
        let bad = format!("{text}\nwarp_speed = 9\n");
        match parse_config_text(&bad, Path::new("."), 0) {
            Err(ChbError::ConfigError { key, .. }) => assert_eq!(key, "model.warp_speed"),
            other => panic!("expected ConfigError, got {other:?}"),
        }
        let bad2 = format!("{MINIMAL}\n[engine]\nx = 1\n");
        assert!(parse_config_text(&bad2, Path::new("."), 0).is_err());
    }

    #[test]
    fn misaligned_horizon_is_rejected() {
        let text = MINIMAL.replace("T = 0.01", "T = 0.0105");
        assert!(parse_config_text(&text, Path::new("."), 0).is_err());
    }

    #[test]
    fn dt_above_dt_max_is_rejected() {
        let text = format!("{MINIMAL}\ndt_max = 1e-4\n");
        match parse_config_text(&text, Path::new("."), 0) {
            Err(ChbError::ConfigError { key, reason }) => {
                assert_eq!(key, "model.dt");
                assert!(reason.contains("dt_max"));
            }
            other => panic!("expected ConfigError, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_passes_assumption_checks() {
        let (cfg, _) = parse_config_text(MINIMAL, Path::new("."), 0).unwrap();
        let model = crate::forward::ForwardModel::new(cfg).unwrap();
        assert!(model.config.c0_estimate.unwrap() > 0.0);
    }

    #[test]
    fn zero_amplitude_parses_and_fails_h3_downstream() {
        let text = MINIMAL.replace("amplitude = 20.0", "amplitude = 0.0");
        let (cfg, _) = parse_config_text(&text, Path::new("."), 0).unwrap();
        match crate::forward::ForwardModel::new(cfg) {
            Err(ChbError::AssumptionViolation { hypothesis, .. }) => {
                assert_eq!(hypothesis, crate::error::Hypothesis::H3);
            }
            other => panic!("expected H3 violation, got {:?}", other.map(|_| ())),
        }
    }
}
