//! Energy `J`, Nehari functional `I`, rays `λ ↦ λu`, and sampled estimates
//! of the potential-well depth and of the level-set radii.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::grid::{gradient, project_mean_zero, GridFunction};
use crate::solver::velocity;
use crate::norms::{embedding_quotient, gn_theta, EmbeddingEstimate, EmbeddingKind};
use crate::witness::{cosine_field, log_uniform, trial_rng};

pub const DEFAULT_DELTA: f64 = 1e-8;

/// Exponents and flux regularization of one problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    p: ExponentField,
    r: ExponentField,
    delta: f64,
    source: bool,
    /// `δ^{p_c}` per cell, subtracted so the gradient modular vanishes at 0.
    delta_pow: Vec<f64>,
}

impl Model {
    pub fn new(p: ExponentField, r: ExponentField, delta: f64) -> Result<Self> {
        if p.grid() != r.grid() {
            return Err(Error::GridMismatch);
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::Hypothesis(format!("regularization {delta} must be finite and ≥ 0")));
        }
        let delta_pow = p.values().iter().map(|pc| (delta * delta).powf(0.5 * pc)).collect();
        Ok(Self {
            p,
            r,
            delta,
            source: true,
            delta_pow,
        })
    }

    /// The pure p(x)-Laplacian flow: reaction term switched off.
    pub fn without_source(mut self) -> Self {
        self.source = false;
        self
    }

    pub fn p(&self) -> &ExponentField {
        &self.p
    }

    pub fn r(&self) -> &ExponentField {
        &self.r
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn has_source(&self) -> bool {
        self.source
    }

    pub fn grid(&self) -> &crate::grid::Grid {
        self.p.grid()
    }

    /// `(r⁻ − p⁺)/(p⁺r⁻)`, the Nehari lower-bound factor.
    pub fn nehari_factor(&self) -> f64 {
        let (pp, rm) = (self.p.plus(), self.r.minus());
        (rm - pp) / (pp * rm)
    }
}

/// The four integrals every energy quantity is built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integrals {
    /// `Σ h^N [(|∇u|²+δ²)^{p/2} − δ^p]`
    pub grad_modular: f64,
    /// same with each cell weighted by `1/p`
    pub grad_energy: f64,
    /// `Σ h^N |u|^r`
    pub source_modular: f64,
    /// same with each cell weighted by `1/r`
    pub source_energy: f64,
}

impl Integrals {
    pub fn j(&self) -> f64 {
        self.grad_energy - self.source_energy
    }

    pub fn i(&self) -> f64 {
        self.grad_modular - self.source_modular
    }
}

pub fn integrals(u: &GridFunction, model: &Model) -> Integrals {
    let vol = u.grid.cell_volume();
    let d2 = model.delta * model.delta;
    let s = gradient(u).cell_magnitude_sq();
    let (mut gm, mut ge, mut sm, mut se) = (0.0, 0.0, 0.0, 0.0);
    let cells = s.iter().zip(model.p.values()).zip(model.r.values()).zip(&u.values);
    for ((((sc, &pc), &rc), &uc), &dp) in cells.zip(&model.delta_pow) {
        let g = (sc + d2).powf(0.5 * pc) - dp;
        gm += g;
        ge += g / pc;
        if model.source {
            let w = uc.abs().powf(rc);
            sm += w;
            se += w / rc;
        }
    }
    Integrals {
        grad_modular: vol * gm,
        grad_energy: vol * ge,
        source_modular: vol * sm,
        source_energy: vol * se,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySnapshot {
    pub t: f64,
    pub j: f64,
    pub i: f64,
    pub grad_modular: f64,
    pub source_modular: f64,
    /// `source_modular / grad_modular`; `None` when the gradient vanishes.
    pub delta0: Option<f64>,
    pub l2sq: f64,
    pub linf: f64,
    pub mean: f64,
}

pub fn snapshot(u: &GridFunction, model: &Model, t: f64) -> EnergySnapshot {
    let k = integrals(u, model);
    EnergySnapshot {
        t,
        j: k.j(),
        i: k.i(),
        grad_modular: k.grad_modular,
        source_modular: k.source_modular,
        delta0: (k.grad_modular > 0.0).then(|| k.source_modular / k.grad_modular),
        l2sq: u.l2_sq(),
        linf: u.sup_norm(),
        mean: u.mean(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayPoint {
    pub lambda: f64,
    pub i: f64,
    pub j: f64,
}

/// `I(λu)` and `J(λu)` by full quadrature at every `λ`; with variable
/// exponents neither is a power law in `λ`.
pub fn ray_profile(u: &GridFunction, model: &Model, lambdas: &[f64]) -> Vec<RayPoint> {
    lambdas
        .iter()
        .map(|&lambda| {
            let k = integrals(&u.scaled(lambda), model);
            RayPoint {
                lambda,
                i: k.i(),
                j: k.j(),
            }
        })
        .collect()
}

const BRACKET_EXPANSIONS: usize = 200;

/// The scale `λ*` with `I(λ*u) = 0`.
///
/// The bracket comes from the power bounds `λ^{p⁺}a − λ^{r⁻}b ≤ I(λu)` for
/// `λ < 1` and `I(λu) ≤ λ^{p⁺}a − λ^{r⁻}b` for `λ ≥ 1`, where `a`, `b` are
/// the gradient and source modulars of `u`; it is then checked and widened.
/// The root is polished by the Illinois variant of regula falsi in `ln λ`
/// until `|I| ≤ tol·∫|∇(λu)|^p`.
pub fn find_lambda_star(u: &GridFunction, model: &Model, tol: f64) -> Result<f64> {
    let k0 = integrals(u, model);
    let (a, b) = (k0.grad_modular, k0.source_modular);
    if !(a > 0.0 && b > 0.0) || !model.source {
        return Err(Error::NoNehariCrossing(0));
    }
    let (pp, rm) = (model.p.plus(), model.r.minus());
    let at = |log_l: f64| integrals(&u.scaled(log_l.exp()), model);

    let (mut lo, mut hi) = if rm > pp {
        let root = (a / b).ln() / (rm - pp);
        (root.min(0.0) - 0.5, root.max(0.0) + 0.5)
    } else {
        (-1.0, 1.0)
    };
    let mut f_lo = at(lo).i();
    let mut f_hi = at(hi).i();
    let mut n = 0;
    while f_lo <= 0.0 {
        lo -= 1.0;
        f_lo = at(lo).i();
        n += 1;
        if n > BRACKET_EXPANSIONS {
            return Err(Error::NoNehariCrossing(n));
        }
    }
    while f_hi >= 0.0 {
        hi += 1.0;
        f_hi = at(hi).i();
        n += 1;
        if n > BRACKET_EXPANSIONS {
            return Err(Error::NoNehariCrossing(n));
        }
    }

    let mut side = 0i8;
    for _ in 0..300 {
        let x = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        let x = if x > lo && x < hi { x } else { 0.5 * (lo + hi) };
        let k = at(x);
        let fx = k.i();
        if fx.abs() <= tol * k.grad_modular || hi - lo <= 1e-15 * x.abs().max(1.0) {
            return Ok(x.exp());
        }
        if fx > 0.0 {
            lo = x;
            f_lo = fx;
            if side == 1 {
                f_hi *= 0.5;
            }
            side = 1;
        } else {
            hi = x;
            f_hi = fx;
            if side == -1 {
                f_lo *= 0.5;
            }
            side = -1;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

pub const LAMBDA_TOL: f64 = 1e-12;

/// `λ*u` together with its energy.
pub fn nehari_projection(u: &GridFunction, model: &Model) -> Result<(GridFunction, f64)> {
    let l = find_lambda_star(u, model, LAMBDA_TOL)?;
    let v = u.scaled(l);
    let j = integrals(&v, model).j();
    Ok((v, j))
}

/// `(r⁻−p⁺)/(p⁺r⁻)·min{B^{r⁺p⁻/(p⁻−r⁺)}, B^{r⁻p⁺/(p⁺−r⁻)}}`.
pub fn depth_lower_formula(b: f64, p: &ExponentField, r: &ExponentField) -> f64 {
    let (pm, pp, rm, rp) = (p.minus(), p.plus(), r.minus(), r.plus());
    let factor = (rm - pp) / (pp * rm);
    factor * b.powf(rp * pm / (pm - rp)).min(b.powf(rm * pp / (pp - rm)))
}

/// `min{B^{r⁺p⁻/(p⁻−r⁺)}, B^{r⁻p⁺/(p⁺−r⁻)}}`: the gap between `0` and the
/// Nehari manifold in gradient-modular units.
pub fn nehari_gap(b: f64, p: &ExponentField, r: &ExponentField) -> f64 {
    let (pm, pp, rm, rp) = (p.minus(), p.plus(), r.minus(), r.plus());
    b.powf(rp * pm / (pm - rp)).min(b.powf(rm * pp / (pp - rm)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthEstimate {
    pub id: String,
    /// Lowest `J` found on the Nehari manifold.
    pub upper: f64,
    /// The analytic lower bound evaluated at a sampled (uncertified) `B`.
    pub lower_formula: f64,
    pub witnesses: usize,
    pub seed: u64,
    pub b_used: String,
    /// Lowest Nehari energy reached by each trial, in trial order; `null` for a degenerate trial.
    #[serde(with = "crate::io::nan_as_null")]
    pub per_trial: Vec<f64>,
    /// Set when the estimate was lowered by a specific datum's own ray.
    pub tightened_by: Option<String>,
    /// Nehari points passed on the way down, thinned to levels at least
    /// `PATH_RATIO` apart; reused as low-level samples for the radii.
    #[serde(skip)]
    pub path: Vec<NehariPoint>,
}

/// A point `λ*w` on the Nehari manifold with its energy.
#[derive(Debug, Clone, PartialEq)]
pub struct NehariPoint {
    pub u: GridFunction,
    pub j: f64,
}

const PATH_RATIO: f64 = 1.1;

impl DepthEstimate {
    /// Lowers `upper` to `J(λ*u)` when that is smaller; still an upper
    /// estimate of the depth since `λ*u` lies on the manifold.
    pub fn tighten_with(&mut self, u: &GridFunction, model: &Model, label: &str) {
        if let Ok((_, j)) = nehari_projection(u, model) {
            if j < self.upper {
                self.upper = j;
                self.tightened_by = Some(label.to_string());
            }
        }
    }
}

/// Gradient steps per depth trial.
pub const DESCENT_STEPS: usize = 500;
/// A trial stops after `STALL_RUN` consecutive steps each lowering the
/// Nehari level by less than `DESCENT_STALL` relative.
const DESCENT_STALL: f64 = 1e-7;
const STALL_RUN: usize = 5;

/// Lowest Nehari level reached from `w` by descent on
/// `Φ(w) = max_λ J(λw)`. At the Nehari point `v = λ*w` the derivative in `λ`
/// vanishes, so `−∇J(v)` is a descent direction for `Φ`; directions are
/// combined Polak–Ribière style and step lengths found by backtracking.
fn nehari_descent(w: &GridFunction, model: &Model, path: &mut Vec<NehariPoint>) -> Option<f64> {
    let (mut v, mut best) = nehari_projection(w, model).ok()?;
    let mut record = |u: &GridFunction, j: f64, last: bool| {
        if last || path.last().is_none_or(|p| p.j >= PATH_RATIO * j) {
            path.push(NehariPoint { u: u.clone(), j });
        }
    };
    record(&v, best, false);
    let mut g = velocity(&v, model);
    let mut dir = g.clone();
    let mut eta = 0.1;
    let mut stalled = 0;
    for _ in 0..DESCENT_STEPS {
        let dn = dir.l2();
        if dn == 0.0 || !dn.is_finite() {
            break;
        }
        let unit = v.l2() / dn;
        let mut step = None;
        while eta > 1e-10 {
            let cand = project_mean_zero(&v.axpy(eta * unit, &dir));
            if let Ok((nv, j)) = nehari_projection(&cand, model) {
                if j < best {
                    step = Some((nv, j));
                    break;
                }
            }
            eta *= 0.5;
        }
        let Some((nv, j)) = step else {
            if dir == g {
                break;
            }
            // conjugate direction failed: restart along the gradient
            dir = g.clone();
            eta = 0.1;
            continue;
        };
        let gain = (best - j) / best.abs().max(f64::MIN_POSITIVE);
        v = nv;
        best = j;
        record(&v, best, false);
        eta = (eta * 2.0).min(1.0);
        stalled = if gain < DESCENT_STALL { stalled + 1 } else { 0 };
        if stalled == STALL_RUN {
            break;
        }
        let ng = velocity(&v, model);
        let dot = |a: &GridFunction, b: &GridFunction| a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum::<f64>();
        let beta = (dot(&ng, &ng) - dot(&ng, &g)) / dot(&g, &g);
        dir = ng.axpy(beta.max(0.0), &dir);
        g = ng;
    }
    record(&v, best, true);
    Some(best)
}

/// Upper estimate of `d = inf_N J`: each trial projects a random witness to
/// the Nehari manifold and descends along it. Every trial uses its own
/// stream, so more trials never raise `upper`.
pub fn estimate_depth(model: &Model, trials: usize, seed: u64, b_est: &EmbeddingEstimate) -> Result<DepthEstimate> {
    if model.r.minus() <= model.p.plus() {
        return Err(Error::Hypothesis("depth estimation needs r- > p+".into()));
    }
    let grid = *model.p.grid();
    let mut path = Vec::new();
    let per_trial: Vec<f64> = (0..trials)
        .map(|t| {
            let w = cosine_field(&grid, &mut trial_rng(seed, t as u64));
            let mut trail = Vec::new();
            let best = nehari_descent(&w, model, &mut trail).unwrap_or(f64::NAN);
            path.append(&mut trail);
            best
        })
        .collect();
    let upper = per_trial
        .iter()
        .copied()
        .filter(|j| j.is_finite())
        .fold(f64::INFINITY, f64::min);
    if !upper.is_finite() {
        return Err(Error::NoWitness("no witness reached the Nehari manifold".into()));
    }
    Ok(DepthEstimate {
        id: format!("depth:seed{seed}:trials{trials}"),
        upper,
        lower_formula: depth_lower_formula(b_est.constant, &model.p, &model.r),
        witnesses: per_trial.iter().filter(|j| j.is_finite()).count(),
        seed,
        b_used: b_est.id.clone(),
        per_trial,
        tightened_by: None,
        path,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRadii {
    pub s: f64,
    /// Smallest sampled `‖u‖₂` over the Nehari points with `J ≤ s`.
    pub lambda_s: f64,
    /// Largest sampled `‖u‖₂` over the same points.
    pub big_lambda_s: f64,
    /// The `s`-independent lower bound on `lambda_s`, when its exponent
    /// window `2 ≤ r⁺ ≤ (1+2/N)p⁻` holds.
    pub m_bound: Option<f64>,
    pub ctilde_used: Option<f64>,
    pub depth_used: Option<f64>,
    pub kept: usize,
    /// How many of the kept points came from descent paths.
    pub from_path: usize,
    pub sampled: usize,
    pub seed: u64,
}

/// Samples `witness → λ*·witness` on the Nehari manifold, keeps points with
/// `J ≤ s` (together with any supplied points at or below `s`), and records
/// the extreme `L²` norms.
///
/// The bound `M` is evaluated with the largest interpolation quotient seen
/// (input estimate or any kept point) and the smallest depth (input or any
/// kept energy), so it is consistent with the sample it is compared against.
pub fn estimate_level_radii(
    s: f64,
    model: &Model,
    samples: usize,
    seed: u64,
    ctilde: Option<&EmbeddingEstimate>,
    depth: f64,
    extra: &[NehariPoint],
) -> Result<LevelRadii> {
    let grid = *model.p.grid();
    let mut kept: Vec<(GridFunction, f64)> = extra.iter().filter(|p| p.j <= s).map(|p| (p.u.clone(), p.j)).collect();
    let from_path = kept.len();
    for t in 0..samples {
        let mut rng = trial_rng(seed, t as u64);
        let w = cosine_field(&grid, &mut rng);
        // sharpen some witnesses to reach higher Nehari energies
        let sharp = log_uniform(&mut rng, 1.0, 4.0);
        let w = project_mean_zero(&GridFunction {
            grid,
            values: w.values.iter().map(|v| v.signum() * v.abs().powf(1.0 / sharp)).collect(),
        });
        if let Ok((v, j)) = nehari_projection(&w, model) {
            if j <= s {
                kept.push((v, j));
            }
        }
    }
    if kept.is_empty() {
        return Err(Error::NoWitness(format!(
            "no sampled Nehari point has J ≤ {s}; raise the level or the sample count"
        )));
    }
    let norms: Vec<f64> = kept.iter().map(|(v, _)| v.l2()).collect();
    let lambda_s = norms.iter().copied().fold(f64::INFINITY, f64::min);
    let big_lambda_s = norms.iter().copied().fold(0.0, f64::max);

    let (pm, pp, rm, rp) = (model.p.minus(), model.p.plus(), model.r.minus(), model.r.plus());
    let n = grid.dim() as f64;
    let window = 2.0 <= rp && rp <= (1.0 + 2.0 / n) * pm;
    let mut m_bound = None;
    let mut ctilde_used = None;
    let mut depth_used = None;
    if let (true, Ok(theta)) = (window, gn_theta(pm, rp, grid.dim())) {
        let mut c = ctilde.map_or(0.0, |e| e.constant);
        for (v, _) in &kept {
            if let Some(q) = embedding_quotient(v, &model.p, EmbeddingKind::Ctilde, Some(&model.r), theta)? {
                c = c.max(q);
            }
        }
        let d = kept.iter().map(|(_, j)| *j).fold(depth, f64::min);
        let big_d = pm * rp * d / (rp - pm);
        let branch = |e: f64| (big_d.powf(e) / c).powf(1.0 / (1.0 - theta));
        m_bound = Some(branch(1.0 / rp - theta / pm).min(branch(1.0 / rm - theta / pp)));
        ctilde_used = Some(c);
        depth_used = Some(d);
    }

    Ok(LevelRadii {
        s,
        lambda_s,
        big_lambda_s,
        m_bound,
        ctilde_used,
        depth_used,
        kept: kept.len(),
        from_path,
        sampled: samples,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SublevelReport {
    pub s: f64,
    pub cap: f64,
    pub checked: usize,
    pub max_grad_modular: f64,
    pub pass: bool,
}

/// On `J^s ∩ N₊` the gradient modular stays below `s·p⁺r⁻/(r⁻−p⁺)`. Points
/// are drawn on rays `μλ*φ` with `μ ∈ (0,1)`, where `I > 0`.
pub fn check_sublevel_bound(s: f64, model: &Model, samples: usize, seed: u64) -> Result<SublevelReport> {
    let grid = *model.p.grid();
    let cap = s / model.nehari_factor();
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    let mut pass = true;
    for t in 0..samples {
        let mut rng = trial_rng(seed, t as u64);
        let w = cosine_field(&grid, &mut rng);
        let Ok(l) = find_lambda_star(&w, model, LAMBDA_TOL) else {
            continue;
        };
        let mu: f64 = log_uniform(&mut rng, 1e-3, 1.0);
        let k = integrals(&w.scaled(mu * l), model);
        if k.i() > 0.0 && k.j() <= s {
            checked += 1;
            worst = worst.max(k.grad_modular);
            pass &= k.grad_modular < cap;
        }
    }
    Ok(SublevelReport {
        s,
        cap,
        checked,
        max_grad_modular: worst,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn model(grid: &Grid, p: f64, r: f64) -> Model {
        Model::new(
            ExponentField::constant(grid, "p", p).unwrap(),
            ExponentField::constant(grid, "r", r).unwrap(),
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn zero_field_has_zero_energy() {
        let g = Grid::new_2d(4, 4, 1.0, 1.0).unwrap();
        let snap = snapshot(&g.zeros(), &model(&g, 2.0, 4.0), 0.0);
        assert_eq!((snap.j, snap.i), (0.0, 0.0));
        assert_eq!(snap.delta0, None);
    }

    #[test]
    fn quadratic_quartic_direct_sum() {
        let g = Grid::new_1d(5, 1.0).unwrap();
        let u = GridFunction::new(g, vec![0.3, -0.1, 0.4, -0.2, -0.4]).unwrap();
        let h = 0.2;
        let faces = [-0.4 / h, 0.5 / h, -0.6 / h, -0.2 / h];
        let grad: f64 = faces.iter().map(|f| f * f).sum::<f64>() * h;
        let quart: f64 = u.values.iter().map(|v| v.powi(4)).sum::<f64>() * h;
        let snap = snapshot(&u, &model(&g, 2.0, 4.0), 0.0);
        assert!((snap.j - (0.5 * grad - 0.25 * quart)).abs() < 1e-12);
        assert!((snap.i - (grad - quart)).abs() < 1e-12);
    }

    #[test]
    fn lambda_star_closed_forms() {
        // a = 2b on a constant-exponent problem gives λ* = √2
        let g = Grid::new_1d(16, 1.0).unwrap();
        let m = model(&g, 2.0, 4.0);
        let u = crate::witness::first_mode(&g);
        let k = integrals(&u, &m);
        let v = u.scaled((k.grad_modular / (2.0 * k.source_modular)).sqrt());
        let k = integrals(&v, &m);
        assert!((k.grad_modular / k.source_modular - 2.0).abs() < 1e-12);
        let l = find_lambda_star(&v, &m, LAMBDA_TOL).unwrap();
        assert!((l - 2f64.sqrt()).abs() < 1e-10, "{l}");

        let w = v.scaled(l);
        assert!((find_lambda_star(&w, &m, LAMBDA_TOL).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn ray_matches_power_law_for_constant_exponents() {
        let g = Grid::new_2d(6, 6, 1.0, 1.0).unwrap();
        let m = model(&g, 2.5, 4.0);
        let u = cosine_field(&g, &mut trial_rng(2, 0));
        let k = integrals(&u, &m);
        for pt in ray_profile(&u, &m, &[0.0, 0.3, 1.0, 2.7]) {
            let expect = pt.lambda.powf(2.5) * k.grad_modular - pt.lambda.powi(4) * k.source_modular;
            assert!((pt.i - expect).abs() < 1e-10 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn variable_ray_respects_power_bounds() {
        let g = Grid::new_2d(8, 8, 1.0, 1.0).unwrap();
        let m = Model::new(
            ExponentField::from_fn(&g, "p", |x, y| 1.8 + 0.35 * (x + y)).unwrap(),
            ExponentField::from_fn(&g, "r", |x, _| 4.0 + 0.5 * x).unwrap(),
            0.0,
        )
        .unwrap();
        let u = cosine_field(&g, &mut trial_rng(4, 1));
        let k = integrals(&u, &m);
        let (pp, rm) = (m.p.plus(), m.r.minus());
        for pt in ray_profile(&u, &m, &[0.05, 0.4, 0.9, 1.0, 1.5, 6.0]) {
            let bound = pt.lambda.powf(pp) * k.grad_modular - pt.lambda.powf(rm) * k.source_modular;
            if pt.lambda < 1.0 {
                assert!(pt.i >= bound - 1e-12);
            } else {
                assert!(pt.i <= bound + 1e-12);
            }
        }
    }

    #[test]
    fn nehari_energy_dominates_gradient_fraction() {
        let g = Grid::new_2d(8, 8, 1.0, 1.0).unwrap();
        let m = Model::new(
            ExponentField::from_fn(&g, "p", |x, y| 1.8 + 0.35 * (x + y)).unwrap(),
            ExponentField::constant(&g, "r", 4.0).unwrap(),
            DEFAULT_DELTA,
        )
        .unwrap();
        for t in 0..8 {
            let u = cosine_field(&g, &mut trial_rng(11, t));
            let (v, j) = nehari_projection(&u, &m).unwrap();
            let k = integrals(&v, &m);
            assert!(k.i().abs() <= 1e-10 * k.grad_modular);
            assert!(j > 0.0);
            assert!(j >= m.nehari_factor() * k.grad_modular * (1.0 - 1e-9));
        }
    }

    #[test]
    fn depth_lower_formula_at_unit_constant() {
        let g = Grid::new_1d(4, 1.0).unwrap();
        let p = ExponentField::constant(&g, "p", 2.0).unwrap();
        let r = ExponentField::constant(&g, "r", 4.0).unwrap();
        assert!((depth_lower_formula(1.0, &p, &r) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn depth_upper_is_positive_and_monotone_in_trials() {
        let g = Grid::new_2d(8, 8, 1.0, 1.0).unwrap();
        let m = model(&g, 2.0, 4.0);
        let b = EmbeddingEstimate::fixed(EmbeddingKind::B, 1.0);
        let few = estimate_depth(&m, 3, 7, &b).unwrap();
        let more = estimate_depth(&m, 6, 7, &b).unwrap();
        assert!(few.upper > 0.0);
        assert!(more.upper <= few.upper);
        assert_eq!(few.per_trial[..], more.per_trial[..3]);
    }

    #[test]
    fn level_radii_nest_in_s() {
        let g = Grid::new_2d(8, 8, 1.0, 1.0).unwrap();
        let m = model(&g, 2.0, 3.0);
        let b = EmbeddingEstimate::fixed(EmbeddingKind::B, 1.0);
        let est = estimate_depth(&m, 4, 1, &b).unwrap();
        let d = est.upper;
        assert!(est.path.iter().all(|p| p.j >= d));
        let lo = estimate_level_radii(3.0 * d, &m, 24, 5, None, d, &est.path).unwrap();
        let hi = estimate_level_radii(30.0 * d, &m, 24, 5, None, d, &est.path).unwrap();
        assert!(lo.from_path > 0);
        assert!(lo.lambda_s <= lo.big_lambda_s);
        assert!(hi.lambda_s <= lo.lambda_s);
        assert!(hi.big_lambda_s >= lo.big_lambda_s);
        let mb = hi.m_bound.expect("window 2 ≤ 3 ≤ 2·2 holds");
        assert!(hi.lambda_s >= mb * (1.0 - 1e-9), "{} < {mb}", hi.lambda_s);
    }

    #[test]
    fn sublevel_gradient_cap_holds() {
        let g = Grid::new_2d(8, 8, 1.0, 1.0).unwrap();
        let m = Model::new(
            ExponentField::from_fn(&g, "p", |x, y| 1.8 + 0.35 * (x + y)).unwrap(),
            ExponentField::constant(&g, "r", 4.0).unwrap(),
            DEFAULT_DELTA,
        )
        .unwrap();
        let rep = check_sublevel_bound(0.5, &m, 40, 3).unwrap();
        assert!(rep.checked > 0);
        assert!(rep.pass);
    }
}
