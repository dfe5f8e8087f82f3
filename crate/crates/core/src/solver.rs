//! Time integration of the nonlocal Neumann problem by explicit Euler with
//! energy-residual step control, plus trajectory audits.
//!
//! The discrete flux is minus the gradient of the discrete energy, so the
//! scheme is a discrete gradient flow and the energy identity
//! `J(u⁺) − J(u) + dt‖(u⁺−u)/dt‖² ≈ 0` measures the local error of a step.

use serde::{Deserialize, Serialize};

use crate::energy::{integrals, snapshot, EnergySnapshot, Integrals, Model};
use crate::error::{Error, Result};
use crate::grid::{cell_coefficients, divergence_with, gradient, project_mean_zero, GridFunction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub t_end: f64,
    /// Per-step cap on `|ΔJ + dt‖u_t‖²| / (1+|J|)`.
    pub energy_tol: f64,
    pub blowup_threshold: f64,
    pub record_every: usize,
    pub max_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt_init: 1e-6,
            dt_min: 1e-16,
            dt_max: 1e-2,
            t_end: 1.0,
            energy_tol: 1e-6,
            blowup_threshold: 1e6,
            record_every: 10,
            max_steps: 20_000_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.dt_min > 0.0
            && self.dt_min <= self.dt_init
            && self.dt_init <= self.dt_max
            && self.t_end > 0.0
            && self.energy_tol > 0.0
            && self.blowup_threshold > 0.0
            && self.record_every > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Hypothesis(format!("inconsistent solver settings {self:?}")))
        }
    }
}

/// Growth factor after a run of accepted steps.
const GROW: f64 = 1.25;
const ACCEPTS_BEFORE_GROWTH: usize = 5;
/// Fraction of the explicit stability limit used as a hard cap.
const STABILITY_FRACTION: f64 = 0.9;
/// Cap on `dt` times the local reaction rate `(r−1)|u|^{r−2}`.
const REACTION_FRACTION: f64 = 0.1;

struct Rhs {
    value: GridFunction,
    /// Gershgorin-type bound on the diffusion Jacobian.
    stiffness: f64,
    /// Largest `(r−1)|u|^{r−2}`.
    reaction_rate: f64,
}

fn rhs(u: &GridFunction, model: &Model) -> Rhs {
    let grid = u.grid;
    let grad = gradient(u);
    let coef = cell_coefficients(&grad.cell_magnitude_sq(), model.p(), model.delta());
    let mut value = divergence_with(&grad, &coef);

    let inv_h2: f64 = (0..grid.dim()).map(|a| grid.spacing(a).powi(-2)).sum();
    let stiffness = 4.0
        * inv_h2
        * coef
            .iter()
            .zip(model.p().values())
            .filter(|(c, _)| c.is_finite())
            .map(|(c, p)| c * (p - 1.0).max(1.0))
            .fold(0.0, f64::max);

    let mut reaction_rate: f64 = 0.0;
    if model.has_source() {
        let src: Vec<f64> = u
            .values
            .iter()
            .zip(model.r().values())
            .map(|(v, r)| {
                let a = v.abs();
                if a == 0.0 {
                    return 0.0;
                }
                let m = a.powf(r - 2.0);
                reaction_rate = reaction_rate.max((r - 1.0) * m);
                m * v
            })
            .collect();
        let mean = src.iter().sum::<f64>() / src.len() as f64;
        for (o, s) in value.values.iter_mut().zip(&src) {
            *o += s - mean;
        }
    }
    Rhs {
        value,
        stiffness,
        reaction_rate,
    }
}

/// Right-hand side of the flow, which is `−∇J` in the cell-weighted `L²`
/// inner product restricted to mean-zero fields.
pub fn velocity(u: &GridFunction, model: &Model) -> GridFunction {
    rhs(u, model).value
}

/// One explicit Euler step, projected back to mean zero.
pub fn step(u: &GridFunction, model: &Model, dt: f64) -> Result<GridFunction> {
    let f = rhs(u, model);
    finish_step(u, &f.value, dt)
}

fn finish_step(u: &GridFunction, f: &GridFunction, dt: f64) -> Result<GridFunction> {
    let next = project_mean_zero(&u.axpy(dt, f));
    if next.values.iter().all(|v| v.is_finite()) {
        Ok(next)
    } else {
        Err(Error::NonFinite("explicit step".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Outcome {
    GlobalUntilTend,
    BlowupDetected { t_b: f64 },
    StalledDt { t: f64 },
    StepLimit { t: f64 },
}

impl Outcome {
    pub fn is_blowup(&self) -> bool {
        matches!(self, Outcome::BlowupDetected { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub snapshots: Vec<EnergySnapshot>,
    /// Step size that produced each snapshot (the first is 0).
    pub dts: Vec<f64>,
    /// `Σ |ΔJ + dt‖u_t‖²|` accumulated up to each snapshot.
    pub residual_cum: Vec<f64>,
    pub outcome: Outcome,
    pub step_count: usize,
    pub rejections: usize,
    /// `Σ dt‖(u⁺−u)/dt‖²` over accepted steps.
    pub energy_budget_used: f64,
    /// Largest accepted `|ΔJ + dt‖u_t‖²| / (1+|J|)`.
    pub max_step_residual: f64,
    /// `Σ |ΔJ + dt‖u_t‖²|` over accepted steps.
    pub residual_sum: f64,
    /// Largest `|mean(u)| / (1+‖u‖₂)` over accepted steps.
    pub max_mean_drift: f64,
    #[serde(skip)]
    pub final_state: Option<GridFunction>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }
}

/// Adaptive explicit integration from `u0` (projected to mean zero first).
///
/// A step is accepted when its energy residual is within `energy_tol`;
/// otherwise `dt` halves. After five accepted steps in a row `dt` grows by
/// 1.25. `dt` is also capped by an explicit stability bound for the
/// diffusion and by a resolution bound for the reaction.
pub fn simulate(u0: &GridFunction, model: &Model, cfg: &SolverConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let mut u = project_mean_zero(u0);
    let mut t = 0.0;
    let mut dt = cfg.dt_init;
    let mut k: Integrals = integrals(&u, model);
    let mut traj = Trajectory {
        snapshots: vec![snapshot(&u, model, 0.0)],
        dts: vec![0.0],
        residual_cum: vec![0.0],
        outcome: Outcome::GlobalUntilTend,
        step_count: 0,
        rejections: 0,
        energy_budget_used: 0.0,
        max_step_residual: 0.0,
        residual_sum: 0.0,
        max_mean_drift: 0.0,
        final_state: None,
    };
    let vol = u.grid.cell_volume();
    let mut streak = 0;
    let mut since_record = 0;
    let mut sup_history = vec![u.sup_norm()];

    if u.is_zero() {
        let mut last = traj.snapshots[0].clone();
        last.t = cfg.t_end;
        traj.snapshots.push(last);
        traj.dts.push(cfg.t_end);
        traj.residual_cum.push(0.0);
        traj.final_state = Some(u);
        return Ok(traj);
    }

    let outcome = loop {
        if t >= cfg.t_end {
            break Outcome::GlobalUntilTend;
        }
        if traj.step_count >= cfg.max_steps {
            break Outcome::StepLimit { t };
        }
        let f = rhs(&u, model);
        let mut cap = cfg.dt_max.min(cfg.t_end - t);
        if f.stiffness > 0.0 {
            cap = cap.min(STABILITY_FRACTION * 2.0 / f.stiffness);
        }
        if f.reaction_rate > 0.0 {
            cap = cap.min(REACTION_FRACTION / f.reaction_rate);
        }
        dt = dt.min(cap);
        if dt < cfg.dt_min {
            let n = sup_history.len();
            let growing = n >= 2 && sup_history[n - 1] > sup_history[n.saturating_sub(50)];
            break if growing && model.has_source() {
                Outcome::BlowupDetected { t_b: t }
            } else {
                Outcome::StalledDt { t }
            };
        }

        let next = match finish_step(&u, &f.value, dt) {
            Ok(n) => n,
            Err(_) => {
                traj.rejections += 1;
                dt *= 0.5;
                streak = 0;
                continue;
            }
        };
        let k_next = integrals(&next, model);
        let rate_sq = vol
            * next
                .values
                .iter()
                .zip(&u.values)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
            / (dt * dt);
        let residual = (k_next.j() - k.j() + dt * rate_sq).abs();
        let scale = 1.0 + k.j().abs();
        // a NaN residual is rejected too
        if residual.is_nan() || residual > cfg.energy_tol * scale {
            traj.rejections += 1;
            dt *= 0.5;
            streak = 0;
            continue;
        }

        t += dt;
        u = next;
        k = k_next;
        traj.step_count += 1;
        traj.energy_budget_used += dt * rate_sq;
        traj.residual_sum += residual;
        traj.max_step_residual = traj.max_step_residual.max(residual / scale);
        traj.max_mean_drift = traj.max_mean_drift.max(u.mean().abs() / (1.0 + u.l2()));
        let sup = u.sup_norm();
        sup_history.push(sup);
        if sup_history.len() > 64 {
            sup_history.remove(0);
        }

        since_record += 1;
        let blown = sup >= cfg.blowup_threshold;
        if since_record >= cfg.record_every || t >= cfg.t_end || blown {
            traj.snapshots.push(snapshot(&u, model, t));
            traj.dts.push(dt);
            traj.residual_cum.push(traj.residual_sum);
            since_record = 0;
        }
        if blown {
            break Outcome::BlowupDetected { t_b: t };
        }

        streak += 1;
        if streak >= ACCEPTS_BEFORE_GROWTH {
            dt *= GROW;
            streak = 0;
        }
    };
    if traj.snapshots.last().is_some_and(|s| s.t < t) {
        traj.snapshots.push(snapshot(&u, model, t));
        traj.dts.push(dt);
        traj.residual_cum.push(traj.residual_sum);
    }
    traj.outcome = outcome;
    traj.final_state = Some(u);
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    /// Largest increase of `J` between consecutive snapshots beyond the
    /// residual budget accumulated between them.
    pub max_energy_increase: f64,
    pub energy_monotone: bool,
    /// Largest relative gap between the central-difference rate of `‖u‖₂²`
    /// and `−2I`.
    pub l2_rate_max_rel_err: f64,
    pub l2_rate_checked: usize,
    /// Whether `I` kept the sign of `I(u₀)`; `None` when not applicable.
    pub sign_persistent: Option<bool>,
    pub max_mean_drift: f64,
    pub max_step_residual: f64,
}

/// Snapshots whose `|I|` is below this fraction of the largest `|I|` seen are
/// excluded from the rate check, where relative errors are meaningless.
const RATE_FLOOR: f64 = 1e-9;

/// Energy monotonicity, the `‖u‖₂²` rate identity, sign persistence of `I`
/// below the depth estimate, and mean drift.
pub fn audit_trajectory(traj: &Trajectory, depth_upper: Option<f64>) -> AuditReport {
    let s = &traj.snapshots;
    let mut max_inc: f64 = 0.0;
    for (w, c) in s.windows(2).zip(traj.residual_cum.windows(2)) {
        // J may rise only by the step residuals accepted in between
        let allowance = (c[1] - c[0]) * (1.0 + 1e-12) + 1e-15 * (1.0 + w[0].j.abs());
        max_inc = max_inc.max(w[1].j - w[0].j - allowance);
    }

    let i_scale = s.iter().map(|x| x.i.abs()).fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for k in 1..s.len().saturating_sub(1) {
        let (a, b, c) = (&s[k - 1], &s[k], &s[k + 1]);
        let (h1, h2) = (b.t - a.t, c.t - b.t);
        if h1 <= 0.0 || h2 <= 0.0 || b.i.abs() <= RATE_FLOOR * i_scale {
            continue;
        }
        // three-point derivative on a non-uniform stencil
        let d = -h2 / (h1 * (h1 + h2)) * a.l2sq + (h2 - h1) / (h1 * h2) * b.l2sq + h1 / (h2 * (h1 + h2)) * c.l2sq;
        worst = worst.max((d + 2.0 * b.i).abs() / (2.0 * b.i.abs()));
        checked += 1;
    }

    let sign_persistent = match (s.first(), depth_upper) {
        (Some(first), Some(d)) if first.j < d && first.i != 0.0 => Some(
            s.iter()
                .all(|x| x.l2sq < 1e-20 || x.i * first.i.signum() > 0.0),
        ),
        _ => None,
    };

    AuditReport {
        max_energy_increase: max_inc,
        energy_monotone: max_inc <= 0.0,
        l2_rate_max_rel_err: worst,
        l2_rate_checked: checked,
        sign_persistent,
        max_mean_drift: traj.max_mean_drift,
        max_step_residual: traj.max_step_residual,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcavityPoint {
    pub t: f64,
    /// `∫₀ᵗ ‖u‖₂²`
    pub m: f64,
    pub m1: f64,
    /// `−2I`, the exact second derivative of `m` along the flow.
    pub m2: f64,
    /// `m″m − ((r⁻+2)/4)(m′)²`
    pub diagnostic: f64,
}

pub fn blowup_functional(traj: &Trajectory, r_minus: f64) -> Vec<ConcavityPoint> {
    let mut m = 0.0;
    let mut prev: Option<&EnergySnapshot> = None;
    traj.snapshots
        .iter()
        .map(|s| {
            if let Some(p) = prev {
                m += 0.5 * (s.t - p.t) * (s.l2sq + p.l2sq);
            }
            prev = Some(s);
            let m2 = -2.0 * s.i;
            ConcavityPoint {
                t: s.t,
                m,
                m1: s.l2sq,
                m2,
                diagnostic: m2 * m - 0.25 * (r_minus + 2.0) * s.l2sq * s.l2sq,
            }
        })
        .collect()
}

/// First time after which the diagnostic stays positive through the last
/// point, if any.
pub fn concavity_onset(points: &[ConcavityPoint]) -> Option<f64> {
    let last_bad = points.iter().rposition(|p| p.diagnostic <= 0.0);
    match last_bad {
        None => points.first().map(|p| p.t),
        Some(k) if k + 1 < points.len() => Some(points[k + 1].t),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponent::ExponentField;
    use crate::grid::{integrate, Grid};
    use crate::witness::{cosine_field, trial_rng};

    fn model(g: &Grid, p: impl Fn(f64, f64) -> f64, r: f64) -> Model {
        Model::new(
            ExponentField::from_fn(g, "p", p).unwrap(),
            ExponentField::constant(g, "r", r).unwrap(),
            1e-8,
        )
        .unwrap()
    }

    #[test]
    fn zero_is_fixed() {
        let g = Grid::new_2d(6, 6, 1.0, 1.0).unwrap();
        let m = model(&g, |x, _| 1.8 + 0.5 * x, 4.0);
        assert!(step(&g.zeros(), &m, 1e-3).unwrap().is_zero());
        let traj = simulate(&g.zeros(), &m, &SolverConfig::default()).unwrap();
        assert_eq!(traj.outcome, Outcome::GlobalUntilTend);
        assert!(traj.snapshots.iter().all(|s| s.j == 0.0 && s.i == 0.0 && s.l2sq == 0.0));
    }

    #[test]
    fn constants_project_to_zero() {
        let g = Grid::new_1d(8, 1.0).unwrap();
        let m = model(&g, |_, _| 2.0, 4.0);
        let c = g.sample(|_, _| 3.0);
        assert!(step(&c, &m, 1e-3).unwrap().sup_norm() < 1e-15);
    }

    #[test]
    fn linear_source_with_quadratic_diffusion() {
        // r ≡ 2: source is u itself, so one step is heat + identity
        let g = Grid::new_1d(16, 1.0).unwrap();
        let m = model(&g, |_, _| 2.0, 2.0);
        let u = cosine_field(&g, &mut trial_rng(0, 0));
        let dt = 1e-4;
        let lap = crate::grid::px_flux_divergence(&u, m.p(), 1e-8);
        let expect = u.axpy(dt, &lap).axpy(dt, &u);
        let got = step(&u, &m, dt).unwrap();
        for (a, b) in got.values.iter().zip(&expect.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn step_preserves_zero_mean() {
        let g = Grid::new_2d(10, 7, 1.0, 0.7).unwrap();
        let m = model(&g, |x, y| 1.7 + x + 0.3 * y, 3.3);
        for t in 0..5 {
            let u = cosine_field(&g, &mut trial_rng(9, t)).scaled(3.0);
            let v = step(&u, &m, 1e-4).unwrap();
            assert!(integrate(&v).abs() < 1e-14);
        }
    }

    #[test]
    fn pure_diffusion_dissipates() {
        let g = Grid::new_2d(12, 12, 1.0, 1.0).unwrap();
        let m = model(&g, |x, y| 1.6 + 1.5 * x * y, 4.0).without_source();
        let u = cosine_field(&g, &mut trial_rng(3, 0));
        let cfg = SolverConfig {
            t_end: 0.05,
            record_every: 1,
            ..SolverConfig::default()
        };
        let traj = simulate(&u, &m, &cfg).unwrap();
        assert_eq!(traj.outcome, Outcome::GlobalUntilTend);
        assert!(traj.max_step_residual <= cfg.energy_tol);
        for w in traj.snapshots.windows(2) {
            assert!(w[1].j <= w[0].j + cfg.energy_tol * (1.0 + w[0].j.abs()));
        }
    }

    #[test]
    fn small_datum_decays_and_large_datum_blows_up() {
        let g = Grid::new_2d(12, 12, 1.0, 1.0).unwrap();
        let m = model(&g, |x, y| 1.8 + 0.35 * (x + y), 4.0);
        let phi = cosine_field(&g, &mut trial_rng(1, 0));
        let cfg = SolverConfig {
            t_end: 0.2,
            record_every: 5,
            ..SolverConfig::default()
        };
        let small = simulate(&phi.scaled(0.1), &m, &cfg).unwrap();
        assert_eq!(small.outcome, Outcome::GlobalUntilTend);
        assert!(small.snapshots.iter().all(|s| s.i > 0.0));

        let big = simulate(&phi.scaled(40.0), &m, &cfg).unwrap();
        assert!(big.outcome.is_blowup(), "{:?}", big.outcome);
        assert!(big.snapshots.iter().all(|s| s.i < 0.0));
        let audit = audit_trajectory(&big, Some(f64::INFINITY));
        assert_eq!(audit.sign_persistent, Some(true));
        let conc = blowup_functional(&big, 4.0);
        let onset = concavity_onset(&conc).unwrap();
        assert!(onset < conc.last().unwrap().t);
    }

    #[test]
    fn zero_trajectory_audit_is_clean() {
        let g = Grid::new_1d(8, 1.0).unwrap();
        let m = model(&g, |_, _| 2.0, 4.0);
        let traj = simulate(&g.zeros(), &m, &SolverConfig::default()).unwrap();
        let rep = audit_trajectory(&traj, Some(1.0));
        assert!(rep.energy_monotone);
        assert_eq!(rep.max_mean_drift, 0.0);
        assert!(blowup_functional(&traj, 4.0).iter().all(|p| p.m == 0.0 && p.diagnostic == 0.0));
    }
}
