//! Double-well potential and its derivatives up to fourth order.

use crate::error::{ChbError, Result};

/// Regular double-well potential driving separation into the pure phases.
///
/// The shipped `Quartic` kind is `F(s) = (s^2 - 1)^2`. A custom polynomial
/// (ascending coefficients) is accepted for experimentation; its hypothesis
/// checks are sampled, not proved.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    Quartic,
    CustomPolynomial(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    pub kind: PotentialKind,
    /// Clamp bound for the assumption sampler and the blow-up guard.
    pub m_phi: f64,
}

impl Potential {
    pub fn quartic(m_phi: f64) -> Result<Self> {
        Self::new(PotentialKind::Quartic, m_phi)
    }

    pub fn new(kind: PotentialKind, m_phi: f64) -> Result<Self> {
        if !(m_phi > 0.0) {
            return Err(ChbError::config("potential.m_phi", "clamp bound must be positive"));
        }
        if let PotentialKind::CustomPolynomial(c) = &kind {
            if c.is_empty() || c.iter().any(|v| !v.is_finite()) {
                return Err(ChbError::config(
                    "potential.coefficients",
                    "need at least one finite coefficient",
                ));
            }
        }
        Ok(Potential { kind, m_phi })
    }

    /// Evaluate `F`, `F'`, `F''`, `F'''` or `F''''` at `s`.
    pub fn eval(&self, order: usize, s: f64) -> f64 {
        assert!(order <= 4, "derivative order must be in 0..=4");
        match &self.kind {
            PotentialKind::Quartic => match order {
                0 => {
                    let t = s * s - 1.0;
                    t * t
                }
                1 => 4.0 * s * s * s - 4.0 * s,
                2 => 12.0 * s * s - 4.0,
                3 => 24.0 * s,
                _ => 24.0,
            },
            PotentialKind::CustomPolynomial(c) => {
                // Differentiate the coefficient list `order` times, then Horner.
                let mut coeffs: Vec<f64> = c.clone();
                for _ in 0..order {
                    coeffs = coeffs
                        .iter()
                        .enumerate()
                        .skip(1)
                        .map(|(k, v)| k as f64 * v)
                        .collect();
                    if coeffs.is_empty() {
                        return 0.0;
                    }
                }
                coeffs.iter().rev().fold(0.0, |acc, &v| acc * s + v)
            }
        }
    }

    /// Max of `|F''|` over `[-m_phi, m_phi]` by dense sampling; used for the
    /// stabilization constant of the semi-implicit scheme.
    pub fn max_abs_f2(&self) -> f64 {
        sample_extremum(self.m_phi, |s| self.eval(2, s).abs()).1
    }

    /// Min of `F''` over `[-m_phi, m_phi]` by dense sampling.
    pub fn min_f2(&self) -> f64 {
        -sample_extremum(self.m_phi, |s| -self.eval(2, s)).1
    }
}

/// Dense scan with step 1e-3 over `[-m, m]`; returns (argmax, max).
fn sample_extremum(m: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let step = 1e-3;
    let n = (2.0 * m / step).ceil() as usize;
    let mut best = (-m, f(-m));
    for k in 1..=n {
        let s = (-m + k as f64 * step).min(m);
        let v = f(s);
        if v > best.1 {
            best = (s, v);
        }
    }
    best
}
