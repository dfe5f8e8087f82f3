//! Seeded random test functions: band-limited Neumann cosine fields.

use std::f64::consts::PI;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{project_mean_zero, Grid, GridFunction};

/// Highest cosine mode index used per axis.
pub const MAX_MODE: usize = 6;

/// Independent generator for trial `trial` under `seed`. Trials never share
/// state, so results for the first `n` trials do not depend on how many more
/// are drawn.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

pub fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// Mean-zero sum of cosine modes `cos(kπx/Lx)·cos(lπy/Ly)` with random
/// coefficients decaying like `1/(k+l)`, scaled to unit sup norm.
///
/// Every such mode (other than the constant) is an exact eigenvector of the
/// discrete Neumann Laplacian on cell centers.
pub fn cosine_field(grid: &Grid, rng: &mut ChaCha8Rng) -> GridFunction {
    cosine_sum(grid, rng, 1.0)
}

/// Largest spectral decay exponent drawn by [`smooth_field`].
pub const MAX_DECAY: f64 = 8.0;

/// Like [`cosine_field`] with coefficients decaying like `1/(k+l)^γ`, `γ`
/// log-uniform in `[1, MAX_DECAY]`; large `γ` leaves little beyond the
/// lowest modes.
pub fn smooth_field(grid: &Grid, rng: &mut ChaCha8Rng) -> GridFunction {
    let decay = log_uniform(rng, 1.0, MAX_DECAY);
    cosine_sum(grid, rng, decay)
}

fn cosine_sum(grid: &Grid, rng: &mut ChaCha8Rng, decay: f64) -> GridFunction {
    let kx = MAX_MODE.min(grid.nx() - 1);
    let ky = if grid.dim() == 2 { MAX_MODE.min(grid.ny() - 1) } else { 0 };
    let [lx, ly] = grid.lengths();
    let mut coeffs = Vec::new();
    for l in 0..=ky {
        for k in 0..=kx {
            if k + l == 0 {
                continue;
            }
            let c: f64 = rng.random_range(-1.0..1.0);
            coeffs.push((k as f64, l as f64, c / ((k + l) as f64).powf(decay)));
        }
    }
    let f = grid.sample(|x, y| {
        coeffs
            .iter()
            .map(|&(k, l, c)| c * (k * PI * x / lx).cos() * (l * PI * y / ly).cos())
            .sum()
    });
    let f = project_mean_zero(&f);
    let s = f.sup_norm();
    if s > 0.0 {
        f.scaled(1.0 / s)
    } else {
        f
    }
}

/// Single cosine mode along the first axis, unit amplitude.
pub fn first_mode(grid: &Grid) -> GridFunction {
    let lx = grid.lengths()[0];
    grid.sample(|x, _| (PI * x / lx).cos())
}
