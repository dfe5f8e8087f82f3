//! Modulars and Luxemburg norms on variable-exponent Lebesgue spaces, the
//! modular/norm relations, the factor-2 Hölder inequality, and sampled
//! estimates of the embedding constants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::grid::{gradient, GridFunction};
use crate::witness::{log_uniform, smooth_field, trial_rng};

pub const NORM_TOL: f64 = 1e-12;

const MAX_DOUBLINGS: usize = 200;

/// `∫ |f|^{q(x)}` by the cell-centered rule.
pub fn modular(f: &GridFunction, q: &ExponentField) -> f64 {
    debug_assert_eq!(&f.grid, q.grid());
    f.grid.cell_volume()
        * f.values
            .iter()
            .zip(q.values())
            .map(|(v, e)| v.abs().powf(*e))
            .sum::<f64>()
}

/// `ρ(f/λ)` evaluated in log space so very small or large `λ` stay finite.
fn scaled_modular(f: &GridFunction, q: &ExponentField, log_lambda: f64) -> f64 {
    f.grid.cell_volume()
        * f.values
            .iter()
            .zip(q.values())
            .filter(|(v, _)| **v != 0.0)
            .map(|(v, e)| (e * (v.abs().ln() - log_lambda)).exp())
            .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormResult {
    pub value: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// `inf{λ > 0 : ρ(f/λ) ≤ 1}` by bisection in `ln λ`.
///
/// The starting bracket comes from the modular/norm power relations and is
/// widened geometrically if rounding puts the root outside it.
pub fn luxemburg_norm(f: &GridFunction, q: &ExponentField, tol: f64) -> Result<NormResult> {
    if f.is_zero() {
        return Ok(NormResult {
            value: 0.0,
            iterations: 0,
            residual: 0.0,
        });
    }
    let rho = modular(f, q);
    let (mut lo, mut hi) = if rho.is_normal() && rho.is_finite() {
        let lr = rho.ln();
        let (a, b) = (lr / q.minus(), lr / q.plus());
        (a.min(b) - 1e-9, a.max(b) + 1e-9)
    } else {
        // modular under- or overflowed: ρ(f/sup|f|) lies in [h^N, |Ω|]
        let ls = f.sup_norm().ln();
        let grid = f.grid;
        (
            ls + grid.cell_volume().ln().min(0.0) / q.minus() - 1.0,
            ls + grid.volume().ln().max(0.0) / q.minus() + 1.0,
        )
    };

    let mut widen = 0;
    while scaled_modular(f, q, lo) <= 1.0 {
        lo -= std::f64::consts::LN_2;
        widen += 1;
        if widen > MAX_DOUBLINGS {
            return Err(Error::NormBracket(MAX_DOUBLINGS));
        }
    }
    while scaled_modular(f, q, hi) > 1.0 {
        hi += std::f64::consts::LN_2;
        widen += 1;
        if widen > MAX_DOUBLINGS {
            return Err(Error::NormBracket(MAX_DOUBLINGS));
        }
    }

    let mut iterations = 0;
    let (mut mid, mut residual);
    loop {
        iterations += 1;
        mid = 0.5 * (lo + hi);
        let m = scaled_modular(f, q, mid);
        residual = (m - 1.0).abs();
        if residual <= tol || hi - lo <= 4.0 * f64::EPSILON * mid.abs().max(1.0) || iterations > 400 {
            break;
        }
        if m > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let value = mid.exp();
    if !value.is_finite() {
        return Err(Error::NonFinite("luxemburg norm".into()));
    }
    Ok(NormResult {
        value,
        iterations,
        residual,
    })
}

/// Cell-wise gradient magnitude, the scalar field whose norm is `‖∇u‖`.
pub fn grad_magnitude(u: &GridFunction) -> GridFunction {
    let values = gradient(u)
        .cell_magnitude_sq()
        .into_iter()
        .map(f64::sqrt)
        .collect();
    GridFunction {
        grid: u.grid,
        values,
    }
}

pub fn grad_norm(u: &GridFunction, p: &ExponentField) -> Result<f64> {
    Ok(luxemburg_norm(&grad_magnitude(u), p, NORM_TOL)?.value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitBallReport {
    pub norm: f64,
    pub modular: f64,
    /// Largest relative violation over the clauses that apply.
    pub violation: f64,
    pub pass: bool,
}

/// The modular/norm relations: `‖f‖ = 1 ⇔ ρ = 1`, `‖f‖ > 1 ⇔ ρ > 1`, and
/// the power sandwiches on either side of the unit sphere.
pub fn check_unit_ball_relations(f: &GridFunction, q: &ExponentField, tol: f64) -> Result<UnitBallReport> {
    let norm = luxemburg_norm(f, q, NORM_TOL)?.value;
    let rho = modular(f, q);
    let rel = |lhs: f64, rhs: f64| ((lhs - rhs) / rhs.abs().max(f64::MIN_POSITIVE)).max(0.0);

    let mut violation: f64 = 0.0;
    if norm > 0.0 {
        // sandwich ‖f‖^{q-} vs ‖f‖^{q+}; which one is smaller flips at 1
        let (a, b) = (norm.powf(q.minus()), norm.powf(q.plus()));
        let (lo, hi) = (a.min(b), a.max(b));
        violation = violation.max(rel(lo, rho)).max(rel(rho, hi));
        if norm > 1.0 + tol && rho <= 1.0 {
            violation = violation.max(rel(1.0, rho));
        }
        if norm < 1.0 - tol && rho >= 1.0 {
            violation = violation.max(rel(rho, 1.0));
        }
        if (norm - 1.0).abs() <= tol {
            violation = violation.max((rho - 1.0).abs() - q.plus() * tol);
        }
    }
    Ok(UnitBallReport {
        norm,
        modular: rho,
        violation,
        pass: violation <= tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
}

/// `|∫uv| ≤ 2‖u‖_{q}‖v‖_{q'}` with the conjugate exponent taken per cell.
pub fn check_holder(u: &GridFunction, v: &GridFunction, q: &ExponentField, tol: f64) -> Result<HolderReport> {
    let lhs = (u.grid.cell_volume() * u.values.iter().zip(&v.values).map(|(a, b)| a * b).sum::<f64>()).abs();
    let nu = luxemburg_norm(u, q, NORM_TOL)?.value;
    let nv = luxemburg_norm(v, &q.conjugate(), NORM_TOL)?.value;
    let rhs = 2.0 * nu * nv;
    Ok(HolderReport {
        lhs,
        rhs,
        slack: rhs - lhs,
        pass: lhs <= rhs * (1.0 + tol) + tol * f64::MIN_POSITIVE,
    })
}

/// `θ` from `(1/2 + 1/N − 1/p⁻)θ = 1/2 − 1/r⁺`; an error unless `θ ∈ (0,1)`.
pub fn gn_theta(p_minus: f64, r_plus: f64, dim: usize) -> Result<f64> {
    let den = 0.5 + 1.0 / dim as f64 - 1.0 / p_minus;
    if den == 0.0 {
        return Err(Error::Hypothesis("interpolation exponent balance is degenerate".into()));
    }
    let theta = (0.5 - 1.0 / r_plus) / den;
    if theta > 0.0 && theta < 1.0 {
        Ok(theta)
    } else {
        Err(Error::Hypothesis(format!("interpolation exponent {theta} outside (0,1)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EmbeddingKind {
    B,
    B0,
    Ctilde,
}

/// A sampled lower bound on an embedding constant. Never certified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingEstimate {
    pub id: String,
    pub kind: EmbeddingKind,
    pub constant: f64,
    pub theta: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    pub best_trial: Option<usize>,
    /// Best quotient found by each trial, in trial order; `null` for a degenerate trial.
    #[serde(with = "crate::io::nan_as_null")]
    pub per_trial: Vec<f64>,
    pub lower_bound_only: bool,
}

impl EmbeddingEstimate {
    /// An externally supplied constant, for configs that pin it.
    pub fn fixed(kind: EmbeddingKind, constant: f64) -> Self {
        Self {
            id: format!("{kind:?}:fixed"),
            kind,
            constant,
            theta: None,
            trials: 0,
            seed: 0,
            best_trial: None,
            per_trial: Vec::new(),
            lower_bound_only: false,
        }
    }
}

/// Quotient maximized by [`estimate_embedding`] for one witness; `None` when
/// the witness has no gradient.
pub fn embedding_quotient(
    w: &GridFunction,
    p: &ExponentField,
    kind: EmbeddingKind,
    r: Option<&ExponentField>,
    theta: f64,
) -> Result<Option<f64>> {
    let g = grad_norm(w, p)?;
    if g == 0.0 {
        return Ok(None);
    }
    let q = match kind {
        EmbeddingKind::B0 => w.l2() / g,
        EmbeddingKind::B => {
            let r = r.expect("target exponent required");
            luxemburg_norm(w, r, NORM_TOL)?.value / g
        }
        EmbeddingKind::Ctilde => {
            let r = r.expect("target exponent required");
            let r_plus = ExponentField::constant(&w.grid, "r+", r.plus())?;
            let lhs = luxemburg_norm(w, r, NORM_TOL)?
                .value
                .max((w.grid.volume() + 1.0) * luxemburg_norm(w, &r_plus, NORM_TOL)?.value);
            lhs / (g.powf(theta) * w.l2().powf(1.0 - theta))
        }
    };
    Ok(Some(q))
}

/// Number of perturbation ascent steps per trial.
pub const ASCENT_STEPS: usize = 60;

/// Sampled lower bound on an embedding constant: every trial draws one
/// witness of random smoothness at a log-uniform amplitude on its own stream
/// and improves it by shrinking-radius random perturbation ascent. The estimate is the maximum
/// over trials, so adding trials never lowers it.
pub fn estimate_embedding(
    p: &ExponentField,
    kind: EmbeddingKind,
    r: Option<&ExponentField>,
    trials: usize,
    seed: u64,
) -> Result<EmbeddingEstimate> {
    let grid = *p.grid();
    let theta = match kind {
        EmbeddingKind::Ctilde => {
            let r = r.ok_or_else(|| Error::Hypothesis("C̃ needs a target exponent".into()))?;
            Some(gn_theta(p.minus(), r.plus(), grid.dim())?)
        }
        EmbeddingKind::B if r.is_none() => {
            return Err(Error::Hypothesis("B needs a target exponent".into()))
        }
        _ => None,
    };
    let th = theta.unwrap_or(0.0);

    let mut per_trial = Vec::with_capacity(trials);
    for t in 0..trials {
        let mut rng = trial_rng(seed, t as u64);
        let amp = log_uniform(&mut rng, 1e-2, 1e2);
        let mut w = smooth_field(&grid, &mut rng).scaled(amp);
        let Some(mut best) = embedding_quotient(&w, p, kind, r, th)? else {
            per_trial.push(f64::NAN);
            continue;
        };
        let mut radius = 0.5;
        for _ in 0..ASCENT_STEPS {
            let dir = smooth_field(&grid, &mut rng);
            let scale = log_uniform(&mut rng, 0.5, 2.0);
            let trial = w.axpy(radius * w.sup_norm(), &dir).scaled(scale);
            match embedding_quotient(&trial, p, kind, r, th)? {
                Some(q) if q > best => {
                    best = q;
                    w = trial;
                }
                _ => radius *= 0.7,
            }
        }
        per_trial.push(best);
    }

    let (best_trial, constant) = per_trial
        .iter()
        .enumerate()
        .filter(|(_, q)| q.is_finite())
        .fold((None, 0.0), |(bi, bq), (i, &q)| if q > bq { (Some(i), q) } else { (bi, bq) });
    if best_trial.is_none() {
        return Err(Error::NoWitness("every embedding witness was degenerate".into()));
    }
    Ok(EmbeddingEstimate {
        id: format!("{kind:?}:seed{seed}:trials{trials}"),
        kind,
        constant,
        theta,
        trials,
        seed,
        best_trial,
        per_trial,
        lower_bound_only: true,
    })
}
