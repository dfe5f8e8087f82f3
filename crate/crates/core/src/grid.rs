//! Uniform cell-centered grids on intervals and rectangles, with the discrete
//! calculus used by every functional and by the time stepper.
//!
//! Values live at cell centers, gradients live on faces. Outer faces always
//! carry zero gradient (mirror ghost cell), which is the discrete form of the
//! homogeneous Neumann condition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::ExponentField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    cells: [usize; 2],
    lengths: [f64; 2],
}

impl Grid {
    pub fn new_1d(n: usize, length: f64) -> Result<Self> {
        Self::new(1, [n, 1], [length, 1.0])
    }

    pub fn new_2d(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        Self::new(2, [nx, ny], [lx, ly])
    }

    fn new(dim: usize, cells: [usize; 2], lengths: [f64; 2]) -> Result<Self> {
        for axis in 0..dim {
            if cells[axis] < 2 {
                return Err(Error::Grid(format!(
                    "axis {axis} has {} cells, need at least 2",
                    cells[axis]
                )));
            }
            if !(lengths[axis] > 0.0 && lengths[axis].is_finite()) {
                return Err(Error::Grid(format!(
                    "axis {axis} has length {}",
                    lengths[axis]
                )));
            }
        }
        Ok(Self {
            dim,
            cells,
            lengths,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nx(&self) -> usize {
        self.cells[0]
    }

    /// Rows along y; 1 for interval grids.
    pub fn ny(&self) -> usize {
        self.cells[1]
    }

    pub fn len(&self) -> usize {
        self.cells[0] * self.cells[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lengths(&self) -> [f64; 2] {
        self.lengths
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.cells[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).product()
    }

    /// |Ω|.
    pub fn volume(&self) -> f64 {
        self.lengths[..self.dim].iter().product()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.cells[0] + i
    }

    pub fn center(&self, idx: usize) -> [f64; 2] {
        let i = idx % self.cells[0];
        let j = idx / self.cells[0];
        let x = (i as f64 + 0.5) * self.spacing(0);
        let y = if self.dim == 2 {
            (j as f64 + 0.5) * self.spacing(1)
        } else {
            0.0
        };
        [x, y]
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let (pa, pb) = (self.center(a), self.center(b));
        ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt()
    }

    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> GridFunction {
        let values = (0..self.len())
            .map(|k| {
                let [x, y] = self.center(k);
                f(x, y)
            })
            .collect();
        GridFunction {
            grid: *self,
            values,
        }
    }

    pub fn zeros(&self) -> GridFunction {
        GridFunction {
            grid: *self,
            values: vec![0.0; self.len()],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Grid(format!(
                "{} values for a grid of {} cells",
                values.len(),
                grid.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("grid function cell {k}")));
        }
        Ok(Self { grid, values })
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn axpy(&self, a: f64, other: &GridFunction) -> Self {
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(u, v)| u + a * v)
                .collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        integrate(self) / self.grid.volume()
    }

    pub fn l2_sq(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn l2(&self) -> f64 {
        self.l2_sq().sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }
}

/// Face-centered gradient components. `x` has `(nx+1)·ny` entries indexed
/// `j·(nx+1) + i` (face left of cell `i`); `y` has `nx·(ny+1)` entries indexed
/// `j·nx + i` (face below cell row `j`) and is empty on interval grids.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceField {
    pub grid: Grid,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl FaceField {
    pub fn x_face(&self, i: usize, j: usize) -> f64 {
        self.x[j * (self.grid.nx() + 1) + i]
    }

    pub fn y_face(&self, i: usize, j: usize) -> f64 {
        self.y[j * self.grid.nx() + i]
    }

    /// Cell-wise squared gradient magnitude: per axis, the mean of the squares
    /// of the two bounding faces.
    pub fn cell_magnitude_sq(&self) -> Vec<f64> {
        let g = self.grid;
        let (nx, ny) = (g.nx(), g.ny());
        let mut out = vec![0.0; g.len()];
        for j in 0..ny {
            for i in 0..nx {
                let (l, r) = (self.x_face(i, j), self.x_face(i + 1, j));
                let mut s = 0.5 * (l * l + r * r);
                if g.dim() == 2 {
                    let (b, t) = (self.y_face(i, j), self.y_face(i, j + 1));
                    s += 0.5 * (b * b + t * t);
                }
                out[g.index(i, j)] = s;
            }
        }
        out
    }
}

pub fn integrate(f: &GridFunction) -> f64 {
    f.grid.cell_volume() * f.values.iter().sum::<f64>()
}

pub fn gradient(u: &GridFunction) -> FaceField {
    let g = u.grid;
    let (nx, ny) = (g.nx(), g.ny());
    let hx = g.spacing(0);
    let mut x = vec![0.0; (nx + 1) * ny];
    for j in 0..ny {
        for i in 1..nx {
            x[j * (nx + 1) + i] = (u.values[g.index(i, j)] - u.values[g.index(i - 1, j)]) / hx;
        }
    }
    let mut y = Vec::new();
    if g.dim() == 2 {
        let hy = g.spacing(1);
        y = vec![0.0; nx * (ny + 1)];
        for j in 1..ny {
            for i in 0..nx {
                y[j * nx + i] = (u.values[g.index(i, j)] - u.values[g.index(i, j - 1)]) / hy;
            }
        }
    }
    FaceField { grid: g, x, y }
}

/// Cell diffusion coefficients `(|∇u|²_c + δ²)^{(p_c−2)/2}`.
///
/// A cell with `|∇u|² + δ² = 0` gets `+∞` for `p < 2`; callers only multiply
/// it by face gradients that are then zero.
pub(crate) fn cell_coefficients(grad_sq: &[f64], p: &ExponentField, delta: f64) -> Vec<f64> {
    grad_sq
        .iter()
        .zip(p.values())
        .map(|(s, pc)| (s + delta * delta).powf(0.5 * (pc - 2.0)))
        .collect()
}

/// `div(|∇u|^{p(x)-2}∇u)` on cell centers.
///
/// The face flux is the face gradient times the mean of the two adjacent cell
/// coefficients, so the result is exactly minus the gradient (in the
/// cell-volume inner product) of the discrete energy
/// `Σ_c h^N [(|∇u|²_c + δ²)^{p_c/2} − δ^{p_c}] / p_c`.
pub fn px_flux_divergence(u: &GridFunction, p: &ExponentField, delta: f64) -> GridFunction {
    let grad = gradient(u);
    let coef = cell_coefficients(&grad.cell_magnitude_sq(), p, delta);
    divergence_with(&grad, &coef)
}

pub(crate) fn divergence_with(grad: &FaceField, coef: &[f64]) -> GridFunction {
    let g = grad.grid;
    let (nx, ny) = (g.nx(), g.ny());
    let face_flux = |gf: f64, a: f64, b: f64| if gf == 0.0 { 0.0 } else { 0.5 * (a + b) * gf };

    let hx = g.spacing(0);
    let mut out = vec![0.0; g.len()];
    for j in 0..ny {
        // flux through the left face of cell i; the outer faces carry none
        let mut left = 0.0;
        for i in 0..nx {
            let right = if i + 1 < nx {
                face_flux(
                    grad.x_face(i + 1, j),
                    coef[g.index(i, j)],
                    coef[g.index(i + 1, j)],
                )
            } else {
                0.0
            };
            out[g.index(i, j)] = (right - left) / hx;
            left = right;
        }
    }
    if g.dim() == 2 {
        let hy = g.spacing(1);
        for i in 0..nx {
            let mut below = 0.0;
            for j in 0..ny {
                let above = if j + 1 < ny {
                    face_flux(
                        grad.y_face(i, j + 1),
                        coef[g.index(i, j)],
                        coef[g.index(i, j + 1)],
                    )
                } else {
                    0.0
                };
                out[g.index(i, j)] += (above - below) / hy;
                below = above;
            }
        }
    }
    GridFunction {
        grid: g,
        values: out,
    }
}

pub fn project_mean_zero(u: &GridFunction) -> GridFunction {
    let m = u.mean();
    GridFunction {
        grid: u.grid,
        values: u.values.iter().map(|v| v - m).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn const_p(grid: &Grid, v: f64) -> ExponentField {
        ExponentField::constant(grid, "p", v).unwrap()
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(Grid::new_1d(1, 1.0).is_err());
        assert!(Grid::new_2d(4, 1, 1.0, 1.0).is_err());
        assert!(Grid::new_1d(8, 0.0).is_err());
    }

    #[test]
    fn integrate_constants_and_affine() {
        let sq = Grid::new_2d(5, 7, 1.0, 1.0).unwrap();
        assert!((integrate(&sq.sample(|_, _| 1.0)) - 1.0).abs() < 1e-15);
        let line = Grid::new_1d(8, 1.0).unwrap();
        assert!((integrate(&line.sample(|_, _| 2.0)) - 2.0).abs() < 1e-15);
        for n in [2, 3, 17, 64] {
            let g = Grid::new_1d(n, 1.0).unwrap();
            assert!((integrate(&g.sample(|x, _| x)) - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn gradient_of_affine_fields() {
        let g = Grid::new_1d(10, 1.0).unwrap();
        let grad = gradient(&g.sample(|x, _| x));
        assert_eq!(grad.x[0], 0.0);
        assert_eq!(grad.x[10], 0.0);
        for f in &grad.x[1..10] {
            assert!((f - 1.0).abs() < 1e-12);
        }
        let g2 = Grid::new_2d(6, 5, 1.0, 2.0).unwrap();
        let grad = gradient(&g2.sample(|_, y| y));
        assert!(grad.x.iter().all(|v| v.abs() < 1e-14));
        for j in 0..=5 {
            for i in 0..6 {
                let want = if j == 0 || j == 5 { 0.0 } else { 1.0 };
                assert!((grad.y_face(i, j) - want).abs() < 1e-12);
            }
        }
        assert!(gradient(&g2.sample(|_, _| 3.5)).y.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn flux_of_constant_is_zero() {
        let g = Grid::new_2d(6, 6, 1.0, 1.0).unwrap();
        let p = ExponentField::from_fn(&g, "p", |x, y| 1.5 + x + y).unwrap();
        let d = px_flux_divergence(&g.sample(|_, _| 4.0), &p, 1e-8);
        assert!(d.values.iter().all(|v| *v == 0.0));
        // δ = 0 with p < 2: coefficient is infinite but never used
        let d = px_flux_divergence(&g.sample(|_, _| 4.0), &const_p(&g, 1.5), 0.0);
        assert!(d.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn p2_flux_matches_second_difference() {
        let n = 64;
        let g = Grid::new_1d(n, 1.0).unwrap();
        let u = g.sample(|x, _| x * (1.0 - x));
        let d = px_flux_divergence(&u, &const_p(&g, 2.0), 1e-8);
        let h = g.spacing(0);
        for i in 1..n - 1 {
            // the discrete second difference of a quadratic is exact
            assert!((d.values[i] + 2.0).abs() < 1e-9, "cell {i}: {}", d.values[i]);
            let fd = (u.values[i + 1] - 2.0 * u.values[i] + u.values[i - 1]) / (h * h);
            assert!((d.values[i] - fd).abs() < 1e-9);
        }
        // boundary cells see a one-sided stencil
        assert!((d.values[0] + 2.0).abs() > 1.0);
    }

    #[test]
    fn divergence_integrates_to_zero() {
        let g = Grid::new_2d(9, 7, 1.3, 0.7).unwrap();
        let u = g.sample(|x, y| (3.0 * x).sin() * (5.0 * y).cos() + x * x * y);
        let p = ExponentField::from_fn(&g, "p", |x, y| 1.6 + 0.8 * x * y).unwrap();
        let d = px_flux_divergence(&u, &p, 1e-8);
        let scale: f64 = d.values.iter().map(|v| v.abs()).sum::<f64>() * g.cell_volume();
        assert!(integrate(&d).abs() <= 1e-12 * scale);
    }

    #[test]
    fn linearity_only_for_p2() {
        let g = Grid::new_1d(16, 1.0).unwrap();
        let u = g.sample(|x, _| (2.0 * x).sin());
        let v = g.sample(|x, _| x * x * x);
        let sum = u.axpy(1.0, &v);
        for (pv, linear) in [(2.0, true), (3.0, false)] {
            let p = const_p(&g, pv);
            let lhs = px_flux_divergence(&sum, &p, 0.0);
            let du = px_flux_divergence(&u, &p, 0.0);
            let dv = px_flux_divergence(&v, &p, 0.0);
            let err = lhs
                .values
                .iter()
                .zip(du.values.iter().zip(&dv.values))
                .map(|(a, (b, c))| (a - b - c).abs())
                .fold(0.0, f64::max);
            assert_eq!(err < 1e-9, linear, "p = {pv}: err {err}");
        }
    }

    #[test]
    fn mean_zero_projection() {
        let g = Grid::new_1d(20, 1.0).unwrap();
        let z = project_mean_zero(&g.sample(|_, _| 5.0));
        assert!(z.values.iter().all(|v| v.abs() < 1e-14));

        let u = project_mean_zero(&g.sample(|x, _| x));
        for (k, v) in u.values.iter().enumerate() {
            assert!((v - (g.center(k)[0] - 0.5)).abs() < 1e-14);
        }
        let s = g.sample(|x, _| (2.0 * std::f64::consts::PI * x).sin());
        let ps = project_mean_zero(&s);
        let residual = s.mean();
        for (a, b) in s.values.iter().zip(&ps.values) {
            assert!((a - b - residual).abs() < 1e-15);
        }
        let twice = project_mean_zero(&u);
        for (a, b) in u.values.iter().zip(&twice.values) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
