//! Radial example on nested balls of radius 1, 2, 3 in ℝ³ showing that the
//! modular Poincaré quotient `∫|v|^{p} / ∫|∇v|^{p}` is unbounded over
//! mean-zero functions when `p` varies.
//!
//! All fields depend on `|X|` only, so every integral reduces to
//! `4π∫ r²(·) dr`, evaluated by Gauss–Legendre on panels split at the ball
//! interfaces and at the two zeros of `u`.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use serde::Serialize;

use crate::{Error, Result};

pub const OUTER_RADIUS: f64 = 3.0;
/// Panel breaks: ball interfaces at 1, 2 and the zeros of `u`.
pub const BREAKS: [f64; 6] = [0.0, 0.75, 1.0, 2.0, 251.0 / 104.0, 3.0];
pub const RICHARDSON_TOL: f64 = 1e-8;
pub const DEFAULT_NODES: usize = 64;

pub fn exponent(r: f64) -> f64 {
    if r <= 1.0 {
        1.5 + r
    } else if r <= 2.0 {
        2.5
    } else {
        4.5 - r
    }
}

pub fn profile(r: f64) -> f64 {
    if r <= 1.0 {
        0.75 - r
    } else if r <= 2.0 {
        -0.25
    } else {
        (104.0 * r - 251.0) / 172.0
    }
}

/// Radial derivative of [`profile`], taking the inner piece at the breaks.
pub fn profile_slope(r: f64) -> f64 {
    if r <= 1.0 {
        -1.0
    } else if r <= 2.0 {
        0.0
    } else {
        104.0 / 172.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Integral {
    pub value: f64,
    /// Change from `n` to `2n` nodes per panel, relative to `∫|f|`.
    pub richardson: f64,
}

fn panels(rule: &GaussLegendre, lo: f64, hi: f64, f: &impl Fn(f64) -> f64) -> f64 {
    BREAKS
        .windows(2)
        .filter_map(|w| {
            let (a, b) = (w[0].max(lo), w[1].min(hi));
            (a < b).then(|| rule.integrate(a, b, |r| 4.0 * PI * r * r * f(r)))
        })
        .sum()
}

/// `4π∫_lo^hi r² f(r) dr` with `n` and `2n` nodes per panel.
pub fn shell_integral(lo: f64, hi: f64, n: usize, what: &str, f: impl Fn(f64) -> f64) -> Result<Integral> {
    let nodes = |k: usize| {
        NonZeroUsize::new(k).map(GaussLegendre::new).ok_or_else(|| Error::Quadrature {
            what: what.to_string(),
            rel: f64::NAN,
            tol: RICHARDSON_TOL,
        })
    };
    let fine_rule = nodes(2 * n)?;
    let coarse = panels(&nodes(n)?, lo, hi, &f);
    let fine = panels(&fine_rule, lo, hi, &f);
    // signed integrands may cancel; measure the change against ∫|f|
    let scale = panels(&fine_rule, lo, hi, &|r| f(r).abs()).max(f64::MIN_POSITIVE);
    let rel = (fine - coarse).abs() / scale;
    if rel > RICHARDSON_TOL || !fine.is_finite() {
        return Err(Error::Quadrature {
            what: what.to_string(),
            rel,
            tol: RICHARDSON_TOL,
        });
    }
    Ok(Integral {
        value: fine,
        richardson: rel,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradientModular {
    pub total: Integral,
    pub inner_ball: Integral,
    pub outer_shell: Integral,
    /// `4πε^{3/2}(ε−1)/ln ε`, dominating the inner-ball part.
    pub inner_bound: f64,
    /// Ten times `inner_bound`, dominating the total.
    pub total_bound: f64,
}

/// `∫|∇(εu)|^{p}` over the outer ball; the middle shell contributes nothing.
pub fn numerator(eps: f64, n: usize) -> Result<GradientModular> {
    if eps <= 1.0 {
        return Err(Error::Hypothesis(format!("scaling must exceed 1, got {eps}")));
    }
    let f = |r: f64| (eps * profile_slope(r).abs()).powf(exponent(r)) * f64::from(profile_slope(r) != 0.0);
    let inner_ball = shell_integral(0.0, 1.0, n, "gradient modular, inner ball", f)?;
    let outer_shell = shell_integral(2.0, 3.0, n, "gradient modular, outer shell", f)?;
    let total = shell_integral(0.0, OUTER_RADIUS, n, "gradient modular", f)?;
    let inner_bound = 4.0 * PI * eps.powf(1.5) * (eps - 1.0) / eps.ln();
    Ok(GradientModular {
        total,
        inner_ball,
        outer_shell,
        inner_bound,
        total_bound: 10.0 * inner_bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValueModular {
    pub total: Integral,
    pub middle_shell: Integral,
    /// `(4π/3)(2³−1³)(ε/4)^{5/2} = (7π/24)ε^{5/2}`
    pub middle_shell_exact: f64,
}

/// `∫|εu|^{p}` over the outer ball, with the middle-shell part separately.
pub fn denominator(eps: f64, n: usize) -> Result<ValueModular> {
    if eps <= 0.0 {
        return Err(Error::Hypothesis(format!("scaling must be positive, got {eps}")));
    }
    let f = |r: f64| (eps * profile(r).abs()).powf(exponent(r));
    Ok(ValueModular {
        total: shell_integral(0.0, OUTER_RADIUS, n, "value modular", f)?,
        middle_shell: shell_integral(1.0, 2.0, n, "value modular, middle shell", f)?,
        middle_shell_exact: 7.0 * PI / 24.0 * eps.powf(2.5),
    })
}

/// `∫u` over the outer ball; the profile is balanced so this vanishes.
pub fn profile_integral(n: usize) -> Result<f64> {
    Ok(shell_integral(0.0, OUTER_RADIUS, n, "mean of the profile", profile)?.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuotientRow {
    pub eps: f64,
    pub numerator: f64,
    pub denominator: f64,
    /// gradient modular over value modular
    pub quotient: f64,
    /// `960(ε−1)/(7ε ln ε)`
    pub envelope: f64,
    pub inner_numerator: f64,
    pub inner_bound: f64,
    pub richardson: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub rows: Vec<QuotientRow>,
    pub below_envelope: bool,
    pub inner_bounded: bool,
    /// Strictly decreasing over the rows with `ε ≥ e²`.
    pub decreasing: bool,
    pub max_richardson: f64,
    pub profile_integral: f64,
}

impl SweepReport {
    pub fn pass(&self) -> bool {
        self.below_envelope && self.inner_bounded && self.decreasing && self.max_richardson <= RICHARDSON_TOL
    }
}

pub fn quotient_sweep(epsilons: &[f64], n: usize) -> Result<SweepReport> {
    if epsilons.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Hypothesis("scalings must be increasing".into()));
    }
    let mut rows = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let num = numerator(eps, n)?;
        let den = denominator(eps, n)?;
        rows.push(QuotientRow {
            eps,
            numerator: num.total.value,
            denominator: den.total.value,
            quotient: num.total.value / den.total.value,
            envelope: 960.0 * (eps - 1.0) / (7.0 * eps * eps.ln()),
            inner_numerator: num.inner_ball.value,
            inner_bound: num.inner_bound,
            richardson: [num.total, num.inner_ball, num.outer_shell, den.total, den.middle_shell]
                .iter()
                .map(|i| i.richardson)
                .fold(0.0, f64::max),
        });
    }
    let e2 = std::f64::consts::E.powi(2);
    let tail: Vec<f64> = rows.iter().filter(|r| r.eps >= e2).map(|r| r.quotient).collect();
    Ok(SweepReport {
        below_envelope: rows.iter().all(|r| r.quotient <= r.envelope),
        inner_bounded: rows.iter().all(|r| r.inner_numerator <= r.inner_bound),
        decreasing: tail.windows(2).all(|w| w[1] < w[0]),
        max_richardson: rows.iter().map(|r| r.richardson).fold(0.0, f64::max),
        profile_integral: profile_integral(n)?,
        rows,
    })
}
