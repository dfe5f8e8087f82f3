//! Closed-form upper envelopes for the scalar differential inequality
//! `h' + C1·min(h^α, h^β) ≤ C2` and an RK4 oracle that checks them against
//! the equality solution.

use serde::Serialize;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdeParams {
    pub c1: f64,
    pub c2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub h0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    /// `C2 ≥ C1`, start at or below the equilibrium bound.
    StrongSourceBelow,
    StrongSourceSuperlinear,
    StrongSourceSublinear,
    /// `C1 > C2`, start at or below the equilibrium bound.
    WeakSourceBelow,
    WeakSourceSuperlinear,
    WeakSourceSublinear,
}

impl Branch {
    pub fn id(self) -> &'static str {
        match self {
            Branch::StrongSourceBelow => "strong-below",
            Branch::StrongSourceSuperlinear => "strong-superlinear",
            Branch::StrongSourceSublinear => "strong-sublinear",
            Branch::WeakSourceBelow => "weak-below",
            Branch::WeakSourceSuperlinear => "weak-superlinear",
            Branch::WeakSourceSublinear => "weak-sublinear",
        }
    }
}

impl OdeParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.c1 > 0.0
            && self.c2 > 0.0
            && self.beta > 0.0
            && self.alpha >= self.beta
            && self.h0 >= 0.0
            && [self.c1, self.c2, self.alpha, self.beta, self.h0].iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Hypothesis(format!("invalid ode parameters {self:?}")))
        }
    }

    /// Level the envelope settles at when the datum starts above it.
    pub fn threshold(&self) -> f64 {
        if self.c2 >= self.c1 {
            (self.c2 / self.c1).powf(1.0 / self.beta)
        } else {
            (self.c2 / self.c1).powf(1.0 / self.alpha)
        }
    }

    pub fn branch(&self) -> Branch {
        let strong = self.c2 >= self.c1;
        let below = self.h0 <= self.threshold();
        match (strong, below, self.beta > 1.0) {
            (true, true, _) => Branch::StrongSourceBelow,
            (true, false, true) => Branch::StrongSourceSuperlinear,
            (true, false, false) => Branch::StrongSourceSublinear,
            (false, true, _) => Branch::WeakSourceBelow,
            (false, false, true) => Branch::WeakSourceSuperlinear,
            (false, false, false) => Branch::WeakSourceSublinear,
        }
    }

    /// Right side of the equality case.
    pub fn rhs(&self, h: f64) -> f64 {
        let h = h.max(0.0);
        self.c2 - self.c1 * h.powf(self.alpha).min(h.powf(self.beta))
    }
}

/// Closed-form bound on `h(t)`.
pub fn envelope(params: &OdeParams, t: f64) -> f64 {
    let OdeParams { c1, c2, alpha, beta, h0 } = *params;
    let th = params.threshold();
    match params.branch() {
        Branch::StrongSourceBelow | Branch::WeakSourceBelow => th,
        Branch::StrongSourceSuperlinear => {
            th + ((h0 - th).powf(1.0 - beta) + c1 * (beta - 1.0) * t).powf(1.0 / (1.0 - beta))
        }
        Branch::StrongSourceSublinear => {
            let limit = (c2 / c1) * h0.powf(1.0 - beta);
            limit + h0 * (1.0 - c2 * h0.powf(-beta) / c1) * (-c1 * h0.powf(beta - 1.0) * t).exp()
        }
        Branch::WeakSourceSuperlinear => {
            let rate = c1 * (c2 / c1).powf((alpha - beta) / (alpha - beta + 1.0));
            th + ((h0 - th).powf(1.0 - beta) + rate * (beta - 1.0) * t).powf(1.0 / (1.0 - beta))
        }
        Branch::WeakSourceSublinear => {
            let q = (c2 / c1).powf(beta / alpha);
            let rate = c2 * (c1 / c2).powf(beta / alpha) * h0.powf(beta - 1.0);
            q * h0.powf(1.0 - beta) + h0 * (1.0 - q * h0.powf(-beta)) * (-rate * t).exp()
        }
    }
}

/// RK4 for `h' = f(h)` with `steps_per_sample` steps between each of the
/// `samples` equally spaced output times on `[0, t_end]`.
pub fn rk4_path(f: impl Fn(f64) -> f64, h0: f64, t_end: f64, samples: usize, steps_per_sample: usize) -> Vec<f64> {
    let dt = t_end / (samples * steps_per_sample) as f64;
    let mut h = h0;
    let mut out = Vec::with_capacity(samples + 1);
    out.push(h);
    for _ in 0..samples {
        for _ in 0..steps_per_sample {
            let k1 = f(h);
            let k2 = f(h + 0.5 * dt * k1);
            let k3 = f(h + 0.5 * dt * k2);
            let k4 = f(h + dt * k3);
            h += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        out.push(h);
    }
    out
}

pub const RK4_AGREEMENT: f64 = 1e-9;
pub const VIOLATION_TOL: f64 = 1e-6;
const SAMPLES: usize = 400;
const MAX_REFINEMENTS: usize = 16;

#[derive(Debug, Clone, Serialize)]
pub struct Verification {
    pub params: OdeParams,
    pub branch: Branch,
    pub threshold: f64,
    pub t_end: f64,
    pub dt: f64,
    pub rk4_agreement: f64,
    /// Largest `h(t) − envelope(t)` over the sample times.
    pub max_violation: f64,
    /// Largest envelope value, used to scale the tolerance.
    pub scale: f64,
    pub pass: bool,
}

/// Integrates the equality case with RK4, halving `dt` until two successive
/// resolutions agree to [`RK4_AGREEMENT`], then compares with [`envelope`].
pub fn verify(params: &OdeParams, t_end: f64, dt: f64) -> Result<Verification> {
    params.validate()?;
    if !(t_end > 0.0 && dt > 0.0) {
        return Err(Error::Hypothesis("verify needs positive horizon and step".into()));
    }
    let f = |h: f64| params.rhs(h);
    let mut steps = ((t_end / SAMPLES as f64 / dt).ceil() as usize).max(1);
    let mut coarse = rk4_path(f, params.h0, t_end, SAMPLES, steps);
    let mut agreement = f64::INFINITY;
    for _ in 0..MAX_REFINEMENTS {
        steps *= 2;
        let fine = rk4_path(f, params.h0, t_end, SAMPLES, steps);
        agreement = coarse.iter().zip(&fine).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        coarse = fine;
        if agreement <= RK4_AGREEMENT {
            break;
        }
    }
    if !coarse.iter().all(|h| h.is_finite()) {
        return Err(Error::NonFinite("ode oracle".into()));
    }
    let mut max_violation = f64::NEG_INFINITY;
    let mut scale: f64 = 0.0;
    for (k, h) in coarse.iter().enumerate() {
        let t = t_end * k as f64 / SAMPLES as f64;
        let e = envelope(params, t);
        scale = scale.max(e.abs());
        max_violation = max_violation.max(h - e);
    }
    Ok(Verification {
        params: *params,
        branch: params.branch(),
        threshold: params.threshold(),
        t_end,
        dt: t_end / (SAMPLES * steps) as f64,
        rk4_agreement: agreement,
        max_violation,
        scale,
        pass: agreement <= RK4_AGREEMENT && max_violation <= VIOLATION_TOL * (1.0 + scale),
    })
}

/// Every admissible cell of `C1, C2 ∈ {0.5,1,2}`, `α ∈ {1,2,3}`,
/// `β ∈ {0.5,1,2}` with `β ≤ α`, `h0 ∈ {0.1, threshold, 10·threshold}`.
pub fn sweep_params() -> Vec<OdeParams> {
    let levels = [0.5, 1.0, 2.0];
    let mut out = Vec::new();
    for &c1 in &levels {
        for &c2 in &levels {
            for alpha in [1.0, 2.0, 3.0] {
                for beta in [0.5, 1.0, 2.0] {
                    if beta > alpha {
                        continue;
                    }
                    let base = OdeParams { c1, c2, alpha, beta, h0: 0.0 };
                    let th = base.threshold();
                    for h0 in [0.1, th, 10.0 * th] {
                        out.push(OdeParams { h0, ..base });
                    }
                }
            }
        }
    }
    out
}

pub const SWEEP_HORIZON: f64 = 10.0;
pub const SWEEP_DT: f64 = 1e-2;

pub fn sweep() -> Result<Vec<Verification>> {
    sweep_params().iter().map(|p| verify(p, SWEEP_HORIZON, SWEEP_DT)).collect()
}
