//! Discrete MAC-grid calculus: Neumann Laplacian on cells, face gradients,
//! divergence, face averaging, and their transposes.
//!
//! The pairing conventions are exact: with zero boundary faces,
//! `<div F, s> = -<F, grad_f s>` holds to round-off, and the centered face
//! average satisfies the product rule `avg(a) grad(b) + avg(b) grad(a) =
//! grad(a b)` identically. The tangent/adjoint consistency of the whole
//! solver rests on these identities.

use crate::field::{ScalarField, VelocityField};

/// 5-point Laplacian with homogeneous Neumann boundary (mirror ghosts).
pub fn laplacian_neumann(f: &ScalarField) -> ScalarField {
    let g = &f.grid;
    let (nx, ny) = (g.nx, g.ny);
    let (ihx2, ihy2) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
    let mut out = ScalarField::zeros(g);
    for j in 0..ny {
        for i in 0..nx {
            let c = f.at(i, j);
            let mut s = 0.0;
            if i > 0 {
                s += (f.at(i - 1, j) - c) * ihx2;
            }
            if i + 1 < nx {
                s += (f.at(i + 1, j) - c) * ihx2;
            }
            if j > 0 {
                s += (f.at(i, j - 1) - c) * ihy2;
            }
            if j + 1 < ny {
                s += (f.at(i, j + 1) - c) * ihy2;
            }
            *out.at_mut(i, j) = s;
        }
    }
    out
}

/// Face gradient of a cell field; boundary faces carry zero (they pair only
/// with pinned zero velocity unknowns).
pub fn face_gradient(f: &ScalarField) -> VelocityField {
    let g = &f.grid;
    let (nx, ny) = (g.nx, g.ny);
    let (ihx, ihy) = (1.0 / g.hx(), 1.0 / g.hy());
    let mut out = VelocityField::zeros(g);
    for j in 0..ny {
        for i in 1..nx {
            *out.ux_mut(i, j) = (f.at(i, j) - f.at(i - 1, j)) * ihx;
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            *out.uy_mut(i, j) = (f.at(i, j) - f.at(i, j - 1)) * ihy;
        }
    }
    out
}

/// Discrete divergence of a face field into cells.
pub fn divergence(v: &VelocityField) -> ScalarField {
    let g = &v.grid;
    let (nx, ny) = (g.nx, g.ny);
    let (ihx, ihy) = (1.0 / g.hx(), 1.0 / g.hy());
    let mut out = ScalarField::zeros(g);
    for j in 0..ny {
        for i in 0..nx {
            *out.at_mut(i, j) = (v.ux_at(i + 1, j) - v.ux_at(i, j)) * ihx
                + (v.uy_at(i, j + 1) - v.uy_at(i, j)) * ihy;
        }
    }
    out
}

/// Centered average of a cell field onto faces; boundary faces carry zero.
pub fn face_average(f: &ScalarField) -> VelocityField {
    let g = &f.grid;
    let (nx, ny) = (g.nx, g.ny);
    let mut out = VelocityField::zeros(g);
    for j in 0..ny {
        for i in 1..nx {
            *out.ux_mut(i, j) = 0.5 * (f.at(i, j) + f.at(i - 1, j));
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            *out.uy_mut(i, j) = 0.5 * (f.at(i, j) + f.at(i, j - 1));
        }
    }
    out
}

/// Transpose of `face_average`: scatter a face field back to cells with the
/// same 1/2 weights (only interior faces contribute).
pub fn face_average_transpose(v: &VelocityField) -> ScalarField {
    let g = &v.grid;
    let (nx, ny) = (g.nx, g.ny);
    let mut out = ScalarField::zeros(g);
    for j in 0..ny {
        for i in 1..nx {
            let w = 0.5 * v.ux_at(i, j);
            *out.at_mut(i - 1, j) += w;
            *out.at_mut(i, j) += w;
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let w = 0.5 * v.uy_at(i, j);
            *out.at_mut(i, j - 1) += w;
            *out.at_mut(i, j) += w;
        }
    }
    out
}

/// Pointwise product of two face fields, component by component.
pub fn face_mul(a: &VelocityField, b: &VelocityField) -> VelocityField {
    let mut out = a.clone();
    for (o, w) in out.ux.iter_mut().zip(&b.ux) {
        *o *= w;
    }
    for (o, w) in out.uy.iter_mut().zip(&b.uy) {
        *o *= w;
    }
    out
}

/// Conservative transport divergence `div(u avg(phi))`.
pub fn transport_divergence(u: &VelocityField, phi: &ScalarField) -> ScalarField {
    divergence(&face_mul(u, &face_average(phi)))
}

/// Squared H1 seminorm of a cell field under the Neumann pairing: the sum of
/// squared interior face differences times the cell area. Matches
/// `-<laplacian_neumann f, f>` exactly.
pub fn cell_grad_norm_sq(f: &ScalarField) -> f64 {
    let g = face_gradient(f);
    g.dot(&g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{BoundaryMode, GridSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> GridSpec {
        GridSpec::new(9, 7, 1.3, 0.8, BoundaryMode::NeumannNoslip).unwrap()
    }

    fn random_scalar(g: &GridSpec, seed: u64) -> ScalarField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ScalarField::from_values(g, (0..g.n_cells()).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap()
    }

    fn random_noslip(g: &GridSpec, seed: u64) -> VelocityField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = VelocityField::zeros(g);
        for w in v.ux.iter_mut().chain(v.uy.iter_mut()) {
            *w = rng.gen_range(-1.0..1.0);
        }
        v.enforce_noslip();
        v
    }

    #[test]
    fn div_grad_duality_is_exact() {
        let g = grid();
        let s = random_scalar(&g, 1);
        let v = random_noslip(&g, 2);
        let lhs = divergence(&v).dot(&s);
        let rhs = -v.dot(&face_gradient(&s));
        assert!((lhs - rhs).abs() < 1e-13 * (1.0 + lhs.abs()));
    }

    #[test]
    fn laplacian_green_identity() {
        let g = grid();
        let s = random_scalar(&g, 3);
        let lhs = -laplacian_neumann(&s).dot(&s);
        let rhs = cell_grad_norm_sq(&s);
        assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn laplacian_is_self_adjoint_and_mean_free() {
        let g = grid();
        let a = random_scalar(&g, 4);
        let b = random_scalar(&g, 5);
        let lhs = laplacian_neumann(&a).dot(&b);
        let rhs = a.dot(&laplacian_neumann(&b));
        assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
        assert!(laplacian_neumann(&a).integral().abs() < 1e-12);
    }

    #[test]
    fn face_average_transpose_consistency() {
        let g = grid();
        let s = random_scalar(&g, 6);
        let v = random_noslip(&g, 7);
        let lhs = face_average(&s).dot(&v);
        let rhs = s.dot(&face_average_transpose(&v));
        assert!((lhs - rhs).abs() < 1e-13 * (1.0 + lhs.abs()));
    }

    #[test]
    fn face_product_rule_is_exact() {
        // avg(a) grad(b) + avg(b) grad(a) = grad(a b) on interior faces.
        let g = grid();
        let a = random_scalar(&g, 8);
        let b = random_scalar(&g, 9);
        let ab = ScalarField::from_values(
            &g,
            a.values.iter().zip(&b.values).map(|(x, y)| x * y).collect(),
        )
        .unwrap();
        let mut lhs = face_mul(&face_average(&a), &face_gradient(&b));
        lhs.axpy(1.0, &face_mul(&face_average(&b), &face_gradient(&a)));
        let rhs = face_gradient(&ab);
        let diff = lhs.sub(&rhs);
        assert!(diff.max_abs() < 1e-12);
    }

    #[test]
    fn transport_conserves_mass() {
        let g = grid();
        let phi = random_scalar(&g, 10);
        let u = random_noslip(&g, 11);
        assert!(transport_divergence(&u, &phi).integral().abs() < 1e-13);
    }
}
