//! Independent reference computations for quantities the library derives.

use nalgebra::{DMatrix, SymmetricEigen};
use pxwell::energy::{find_lambda_star, integrals, nehari_projection, Model, LAMBDA_TOL};
use pxwell::exponent::ExponentField;
use pxwell::grid::{px_flux_divergence, Grid, GridFunction};
use pxwell::norms::{embedding_quotient, estimate_embedding, luxemburg_norm, modular, EmbeddingKind, NORM_TOL};
use pxwell::witness::{cosine_field, trial_rng};

/// Face graph Laplacian scaled by `1/h²` per axis: `uᵀLu = Σ_faces (Δu/h)²`,
/// which is `∫|∇u|²/h^N` for the cell-averaged gradient used by the library.
fn neumann_laplacian(g: &Grid) -> DMatrix<f64> {
    let n = g.len();
    let mut l = DMatrix::zeros(n, n);
    let mut link = |a: usize, b: usize, w: f64| {
        l[(a, a)] += w;
        l[(b, b)] += w;
        l[(a, b)] -= w;
        l[(b, a)] -= w;
    };
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            if i + 1 < g.nx() {
                link(g.index(i, j), g.index(i + 1, j), g.spacing(0).powi(-2));
            }
            if g.dim() == 2 && j + 1 < g.ny() {
                link(g.index(i, j), g.index(i, j + 1), g.spacing(1).powi(-2));
            }
        }
    }
    l
}

/// Smallest nonzero eigenvalue and its eigenvector.
fn first_eigenpair(g: &Grid) -> (f64, GridFunction) {
    let eig = SymmetricEigen::new(neumann_laplacian(g));
    let mut order: Vec<usize> = (0..g.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let k = order[1];
    let v = eig.eigenvectors.column(k).iter().copied().collect();
    (eig.eigenvalues[k], GridFunction::new(*g, v).unwrap())
}

fn closed_form_mu1(g: &Grid) -> f64 {
    let axis = |a: usize, n: usize| 4.0 / g.spacing(a).powi(2) * (std::f64::consts::PI / (2.0 * n as f64)).sin().powi(2);
    let mut mu = axis(0, g.nx());
    if g.dim() == 2 {
        mu = mu.min(axis(1, g.ny()));
    }
    mu
}

#[test]
fn quadratic_embedding_constant_matches_eigenvalue() {
    for g in [
        Grid::new_1d(16, 1.0).unwrap(),
        Grid::new_2d(12, 8, 1.5, 1.0).unwrap(),
        Grid::new_2d(10, 10, 1.0, 1.0).unwrap(),
    ] {
        let (mu, v) = first_eigenpair(&g);
        assert!((mu - closed_form_mu1(&g)).abs() <= 1e-10 * mu, "{mu} vs {}", closed_form_mu1(&g));
        let b0 = mu.powf(-0.5);
        let p = ExponentField::constant(&g, "p", 2.0).unwrap();
        let q = embedding_quotient(&v, &p, EmbeddingKind::B0, None, 0.0).unwrap().unwrap();
        assert!((q - b0).abs() <= 1e-9 * b0, "eigenvector quotient {q} vs {b0}");

        let est = estimate_embedding(&p, EmbeddingKind::B0, None, 16, 11).unwrap();
        assert!(est.constant <= b0 * (1.0 + 1e-9), "sampled {} exceeds the exact {b0}", est.constant);
        assert!(est.constant >= 0.9 * b0, "sampled {} far below the exact {b0}", est.constant);
    }
}

#[test]
fn constant_exponent_norm_is_root_of_modular() {
    let g = Grid::new_2d(9, 7, 1.0, 2.0).unwrap();
    for (t, q) in [1.1, 1.5, 2.0, 3.7, 8.0].into_iter().enumerate() {
        let f = cosine_field(&g, &mut trial_rng(3, t as u64)).scaled(10f64.powi(t as i32 - 2));
        let qf = ExponentField::constant(&g, "q", q).unwrap();
        // ρ computed by hand, independent of the library modular
        let rho: f64 = g.cell_volume() * f.values.iter().map(|v| v.abs().powf(q)).sum::<f64>();
        assert!((modular(&f, &qf) - rho).abs() <= 1e-13 * rho);
        let n = luxemburg_norm(&f, &qf, NORM_TOL).unwrap().value;
        assert!((n - rho.powf(1.0 / q)).abs() <= 1e-10 * n);
    }
}

#[test]
fn quadratic_flux_is_five_point_laplacian() {
    let g = Grid::new_2d(9, 6, 1.0, 0.75).unwrap();
    let u = g.sample(|x, y| (3.0 * x).sin() * y * y + x * y);
    let p = ExponentField::constant(&g, "p", 2.0).unwrap();
    let div = px_flux_divergence(&u, &p, 0.0);
    let (hx, hy) = (g.spacing(0), g.spacing(1));
    let at = |i: usize, j: usize| u.values[g.index(i, j)];
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            // mirror ghosts: zero flux through the boundary
            let l = if i > 0 { at(i - 1, j) } else { at(i, j) };
            let r = if i + 1 < g.nx() { at(i + 1, j) } else { at(i, j) };
            let b = if j > 0 { at(i, j - 1) } else { at(i, j) };
            let t = if j + 1 < g.ny() { at(i, j + 1) } else { at(i, j) };
            let c = at(i, j);
            let lap = (l - 2.0 * c + r) / (hx * hx) + (b - 2.0 * c + t) / (hy * hy);
            let got = div.values[g.index(i, j)];
            assert!((got - lap).abs() <= 1e-12 * (1.0 + lap.abs()), "({i},{j}): {got} vs {lap}");
        }
    }
}

#[test]
fn nehari_scaling_matches_power_law() {
    // constant exponents: J(λw) = λ^p a/p − λ^r b/r peaks at λ* = (a/b)^{1/(r−p)}
    let g = Grid::new_2d(10, 10, 1.0, 1.0).unwrap();
    for (p, r) in [(1.8, 4.0), (2.0, 3.0), (2.5, 5.0)] {
        let model = Model::new(
            ExponentField::constant(&g, "p", p).unwrap(),
            ExponentField::constant(&g, "r", r).unwrap(),
            0.0,
        )
        .unwrap();
        let w = cosine_field(&g, &mut trial_rng(21, 0));
        let k = integrals(&w, &model);
        let (a, b) = (k.grad_modular, k.source_modular);
        let ls = (a / b).powf(1.0 / (r - p));
        let got = find_lambda_star(&w, &model, LAMBDA_TOL).unwrap();
        assert!((got - ls).abs() <= 1e-9 * ls, "{got} vs {ls}");
        let (_, j) = nehari_projection(&w, &model).unwrap();
        let jstar = (1.0 / p - 1.0 / r) * ls.powf(p) * a;
        assert!((j - jstar).abs() <= 1e-9 * jstar);
    }
}
