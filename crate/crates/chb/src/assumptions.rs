//! Numerical validation of the model hypotheses.
//!
//! The coercivity condition `F''(s) + a(x) >= c_0 > 0` is the load-bearing
//! one: it controls the chemical-potential monotonicity and every stability
//! constant downstream. It is checked on the clamp interval
//! `[-m_phi, m_phi]` (the phase field stays uniformly bounded) by dense
//! sampling against the minimum of the precomputed `a(x)`.

use crate::config::ModelConfig;
use crate::error::{ChbError, Hypothesis, Result};
use crate::field::ScalarField;
use crate::potential::PotentialKind;

/// Outcome of the hypothesis checks, with the sampled constants.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    /// Minimum of `F''` over the clamp interval.
    pub f2_min: f64,
    /// Minimum of `a(x)` over the grid.
    pub a_min: f64,
    /// `min F'' + min a`; must be positive (H3).
    pub c0_estimate: f64,
    /// Growth constants `(c1, c2)` with `F''(s) + a >= c1 s^2 - c2` (H4,
    /// q = 1).
    pub h4_c1: f64,
    pub h4_c2: f64,
    /// Growth constant `c3` with `|F'(s)|^p <= c3 (|F(s)| + 1)` for
    /// `p = 4/3` (H5).
    pub h5_c3: f64,
    pub warnings: Vec<String>,
}

/// Check H3/H4/H5 numerically and stamp `c0_estimate` into the config.
///
/// `a_field` must come from `precompute_a` on the model grid. Fails with
/// `AssumptionViolation(H3)` when the kernel amplitude is too small for the
/// chosen potential.
pub fn validate_assumptions(
    config: &mut ModelConfig,
    a_field: &ScalarField,
) -> Result<AssumptionReport> {
    config.grid.check_same(&a_field.grid, "a(x)")?;
    let pot = &config.potential;
    let m = pot.m_phi;
    let a_min = a_field.values.iter().cloned().fold(f64::INFINITY, f64::min);
    if a_min < 0.0 {
        return Err(ChbError::AssumptionViolation {
            hypothesis: Hypothesis::H2,
            detail: format!("a(x) has negative values (min {a_min:.3e})"),
        });
    }

    // Dense scan of F'' on [-m, m] with step 1e-3.
    let step = 1e-3;
    let n = (2.0 * m / step).ceil() as usize;
    let mut f2_min = f64::INFINITY;
    let mut h4_c1: f64 = f64::INFINITY;
    let mut h5_c3: f64 = 0.0;
    let p = 4.0 / 3.0;
    // c2 chosen so the H4 numerator stays positive on the scan.
    let mut scan_min = f64::INFINITY;
    let mut samples = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let s = (-m + k as f64 * step).min(m);
        let f2 = pot.eval(2, s);
        f2_min = f2_min.min(f2);
        scan_min = scan_min.min(f2 + a_min);
        samples.push((s, f2));
        let fp = pot.eval(1, s).abs().powf(p);
        let denom = pot.eval(0, s).abs() + 1.0;
        h5_c3 = h5_c3.max(fp / denom);
    }
    let h4_c2 = (-scan_min).max(0.0) + 1.0;
    for (s, f2) in &samples {
        if s.abs() > 1e-6 {
            h4_c1 = h4_c1.min((f2 + a_min + h4_c2) / (s * s));
        }
    }

    let c0_estimate = f2_min + a_min;
    let mut warnings = Vec::new();
    if let PotentialKind::CustomPolynomial(_) = pot.kind {
        warnings.push(
            "custom potential: H4/H5 growth constants are sampled on the clamp \
             interval only, not proved"
                .to_string(),
        );
    }
    if h4_c1 <= 0.0 {
        warnings.push(format!("H4 sampled growth constant c1 = {h4_c1:.3e} is not positive"));
    }

    if c0_estimate <= 0.0 {
        return Err(ChbError::AssumptionViolation {
            hypothesis: Hypothesis::H3,
            detail: format!(
                "min F'' + min a = {c0_estimate:.6} <= 0; kernel amplitude too small \
                 for the chosen potential"
            ),
        });
    }

    config.c0_estimate = Some(c0_estimate);
    Ok(AssumptionReport {
        f2_min,
        a_min,
        c0_estimate,
        h4_c1,
        h4_c2,
        h5_c3,
        warnings,
    })
}
