//! Potential-well classification of an initial datum and the closed-form
//! bounds that accompany each verdict.
//!
//! Every verdict rests on sampled estimates of the well depth and of
//! embedding constants, so none is certified.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::energy::{find_lambda_star, integrals, DepthEstimate, LevelRadii, Model, LAMBDA_TOL};
use crate::exponent::{ExponentField, HypothesisReport};
use crate::grid::GridFunction;
use crate::norms::EmbeddingEstimate;
use crate::solver::Trajectory;
use crate::{Error, Result};

/// Half-width of the band treated as `J₀ = d`, relative to `1 + d̂`.
pub const CRITICAL_BAND: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Prediction {
    Global,
    Blowup,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    /// `None` when no depth estimate applies (the well needs `r⁻ > p⁺`).
    pub regime: Option<Regime>,
    pub prediction: Prediction,
    /// Which criterion produced the prediction.
    pub criterion: String,
    pub constants: BTreeMap<String, f64>,
    /// Ids of the sampled estimates the constants came from.
    pub estimates: Vec<String>,
    /// Sufficient blow-up test from large gradient and small energy.
    pub large_gradient_blowup: Option<bool>,
    pub certified: bool,
    pub deviations: Vec<String>,
}

/// Everything [`classify`] may consult besides the datum itself.
#[derive(Debug, Clone, Copy)]
pub struct ClassifyInputs<'a> {
    pub hypotheses: &'a HypothesisReport,
    pub depth: Option<&'a DepthEstimate>,
    /// Radii of a level `s ≥ J₀`; larger levels only make the tests harder.
    pub radii: Option<&'a LevelRadii>,
    /// Sampled constant of `‖u‖_{r} ≤ B‖∇u‖_{p}`.
    pub b: Option<&'a EmbeddingEstimate>,
}

const RADII_NOTE: &str = "level-radius tests compare ‖u0‖₂ with λ̂ (global) and Λ̂ (blow-up) directly, \
     following the argument rather than the squared/one-sided form of its statement";

pub fn classify(u0: &GridFunction, model: &Model, inputs: ClassifyInputs<'_>) -> Verdict {
    let k = integrals(u0, model);
    let (j0, i0) = (k.j(), k.i());
    let (pm, pp, rm, rp) = (model.p().minus(), model.p().plus(), model.r().minus(), model.r().plus());
    let mut constants = BTreeMap::new();
    constants.insert("J0".to_string(), j0);
    constants.insert("I0".to_string(), i0);
    constants.insert("grad_modular0".to_string(), k.grad_modular);
    constants.insert("u0_l2".to_string(), u0.l2());
    let mut estimates = Vec::new();

    let large_gradient_blowup = inputs.b.and_then(|b| {
        estimates.push(b.id.clone());
        let (alpha1, e1) = large_gradient_constants(b.constant, pp, rm, rp);
        constants.insert("alpha1".to_string(), alpha1);
        constants.insert("E1".to_string(), e1);
        let n = model.grid().dim() as f64;
        let window = 1f64.max(2.0 * n / (n + 2.0)) < pm
            && pm < n
            && pp.max(2.0) < rm
            && rp <= (2.0 * n + (n + 2.0) * pm) / (2.0 * n);
        window.then_some(j0 < e1 && k.grad_modular > alpha1)
    });

    let mut v = Verdict {
        regime: None,
        prediction: Prediction::Undetermined,
        criterion: String::new(),
        constants,
        estimates,
        large_gradient_blowup,
        certified: false,
        deviations: Vec::new(),
    };

    if !inputs.hypotheses.condition_h {
        let h = inputs.hypotheses;
        return if h.r_plus_below_p_minus {
            settle(v, None, Prediction::Global, "sublinear source: global for any energy")
        } else if h.weak_source_regime && j0 < 0.0 {
            settle(v, None, Prediction::Global, "weak source with negative energy: global")
        } else {
            settle(v, None, Prediction::Undetermined, "structural hypotheses fail")
        };
    }
    let Some(depth) = inputs.depth else {
        return settle(v, None, Prediction::Undetermined, "no depth estimate");
    };
    v.estimates.push(depth.id.clone());
    let d = depth.upper;
    v.constants.insert("d_upper".to_string(), d);
    v.constants.insert("d_lower_formula".to_string(), depth.lower_formula);
    let band = CRITICAL_BAND * (1.0 + d.abs());

    if (j0 - d).abs() <= band {
        let regime = Some(Regime::Critical);
        return if i0 >= 0.0 {
            settle(v, regime, Prediction::Global, "critical energy, I0 ≥ 0: global")
        } else {
            settle(v, regime, Prediction::Blowup, "critical energy, I0 < 0: blow-up")
        };
    }
    if j0 < d {
        let regime = Some(Regime::Subcritical);
        return if u0.is_zero() {
            settle(v, regime, Prediction::Global, "zero datum: stationary")
        } else if i0 > 0.0 {
            settle(v, regime, Prediction::Global, "subcritical energy, I0 > 0: global with decay")
        } else if i0 < 0.0 {
            settle(v, regime, Prediction::Blowup, "subcritical energy, I0 < 0: blow-up")
        } else {
            settle(v, regime, Prediction::Undetermined, "subcritical energy on the Nehari manifold")
        };
    }

    let regime = Some(Regime::Supercritical);
    if i0 < 0.0 {
        if let Ok(rep) = mass_check(u0, model) {
            v.constants.insert("mass_lhs".to_string(), rep.lhs);
            v.constants.insert("mass_rhs".to_string(), rep.rhs);
            if rep.pass {
                return settle(v, regime, Prediction::Blowup, "supercritical, large L2 mass: blow-up");
            }
        }
    }
    let Some(radii) = inputs.radii.filter(|r| r.s >= j0) else {
        return settle(v, regime, Prediction::Undetermined, "supercritical without level radii");
    };
    v.estimates.push(format!("radii:s{}:seed{}:samples{}", radii.s, radii.seed, radii.sampled));
    v.constants.insert("lambda_hat".to_string(), radii.lambda_s);
    v.constants.insert("Lambda_hat".to_string(), radii.big_lambda_s);
    v.deviations.push(RADII_NOTE.to_string());
    let l2 = u0.l2();
    if i0 > 0.0 && l2 <= radii.lambda_s {
        settle(v, regime, Prediction::Global, "supercritical, ‖u0‖₂ ≤ λ̂: global with decay")
    } else if i0 < 0.0 && l2 >= radii.big_lambda_s {
        settle(v, regime, Prediction::Blowup, "supercritical, ‖u0‖₂ ≥ Λ̂: blow-up")
    } else {
        settle(v, regime, Prediction::Undetermined, "supercritical, level-radius tests inconclusive")
    }
}

fn settle(mut v: Verdict, regime: Option<Regime>, prediction: Prediction, criterion: &str) -> Verdict {
    v.regime = regime;
    v.prediction = prediction;
    v.criterion = criterion.to_string();
    v
}

/// `α₁ = (B+1)^{r⁺p⁺/(p⁺−r⁻)}` and `E₁ = α₁(r⁻−p⁺)/(p⁺r⁻)`.
pub fn large_gradient_constants(b: f64, p_plus: f64, r_minus: f64, r_plus: f64) -> (f64, f64) {
    let alpha1 = (b + 1.0).powf(r_plus * p_plus / (p_plus - r_minus));
    (alpha1, (r_minus - p_plus) / (p_plus * r_minus) * alpha1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EnvelopeKind {
    DecayAlgebraic,
    DecayExponential,
    L2SandwichLower,
    L2SandwichUpper,
    SublinearBound,
}

/// Closed forms used by the envelopes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Form {
    Constant(f64),
    /// `(k1²p/(k1 + k0(p−2)t))^{p/(p−2)}`
    Algebraic { k0: f64, k1: f64, p: f64 },
    /// `k1·e^{(k0−t)/k0}`
    Exponential { k0: f64, k1: f64 },
    /// `a + (b + c·t)^e`
    ShiftedPower { a: f64, b: f64, c: f64, e: f64 },
    /// `(a + b·e^{−c·t})^e`
    RelaxPower { a: f64, b: f64, c: f64, e: f64 },
}

impl Form {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Form::Constant(c) => c,
            Form::Algebraic { k0, k1, p } => (k1 * k1 * p / (k1 + k0 * (p - 2.0) * t)).powf(p / (p - 2.0)),
            Form::Exponential { k0, k1 } => k1 * ((k0 - t) / k0).exp(),
            Form::ShiftedPower { a, b, c, e } => a + (b + c * t).powf(e),
            Form::RelaxPower { a, b, c, e } => (a + b * (-c * t).exp()).powf(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub kind: EnvelopeKind,
    pub form: Form,
    pub constants: BTreeMap<String, f64>,
    /// Multiplier turning the bound into a gradient-modular bound, where
    /// one is available.
    pub grad_factor: Option<f64>,
    pub valid_hypotheses: Vec<String>,
}

impl Envelope {
    pub fn eval(&self, t: f64) -> f64 {
        self.form.eval(t)
    }

    pub fn grad_bound(&self, t: f64) -> Option<f64> {
        self.grad_factor.map(|f| f * self.eval(t))
    }
}

fn named(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Decay bound on `J(u(t))` for subcritical global data, with `K₁ = J₀` and
/// `K₀ = B₀²/(2p⁻(1−δ₀))·max{1, D^{2/p⁻−2/p⁺}}·(p⁺r⁻/(r⁻−p⁺))^{2/p⁺}`,
/// `D = p⁺r⁻d/(r⁻−p⁺)`.
pub fn decay_envelope(
    j0: f64,
    depth: f64,
    p: &ExponentField,
    r: &ExponentField,
    b0: f64,
    delta0: f64,
) -> Result<Envelope> {
    let (pm, pp, rm) = (p.minus(), p.plus(), r.minus());
    if !(delta0 > 0.0 && delta0 < 1.0) {
        return Err(Error::Hypothesis(format!("decay needs 0 < δ0 < 1, got {delta0}")));
    }
    if pp < 2.0 {
        return Err(Error::Hypothesis(format!("decay needs p+ ≥ 2, got {pp}")));
    }
    if !(j0 > 0.0 && b0 > 0.0 && depth > 0.0) {
        return Err(Error::Hypothesis("decay needs J0, B0 and the depth positive".into()));
    }
    let gain = pp * rm / (rm - pp);
    let k0 = b0 * b0 / (2.0 * pm * (1.0 - delta0))
        * (gain * depth).powf(2.0 / pm - 2.0 / pp).max(1.0)
        * gain.powf(2.0 / pp);
    let k1 = j0;
    let exponential = (pp - 2.0).abs() <= 1e-12;
    let (kind, form) = if exponential {
        (EnvelopeKind::DecayExponential, Form::Exponential { k0, k1 })
    } else {
        (EnvelopeKind::DecayAlgebraic, Form::Algebraic { k0, k1, p: pp })
    };
    Ok(Envelope {
        kind,
        form,
        constants: named(&[("K0", k0), ("K1", k1), ("B0", b0), ("delta0", delta0), ("depth", depth)]),
        grad_factor: Some(gain),
        valid_hypotheses: vec!["J0 < d".into(), "I0 > 0".into(), "0 < δ0 < 1".into(), "p+ ≥ 2".into()],
    })
}

/// Time after which the blow-up functional is strictly convex in the
/// concavity argument, evaluated with the estimated depth and `B₀`.
pub fn blowup_tstar(j0: f64, d: f64, p: &ExponentField, r: &ExponentField, u0_l2: f64, b0: f64) -> Result<f64> {
    let (pm, pp, rm) = (p.minus(), p.plus(), r.minus());
    if j0 >= d {
        return Err(Error::Hypothesis(format!("t* needs J0 < d, got {j0} ≥ {d}")));
    }
    if rm <= pp.max(2.0) {
        return Err(Error::Hypothesis("t* needs r- > max(p+, 2)".into()));
    }
    let gap = d - j0;
    let m = b0.powf(-pp).min(b0.powf(-pm));
    let first = (pp * rm * j0.abs() / ((rm - pp) * m)).powf(2.0 / pm) / (2.0 * rm * gap);
    let second = 2.0 * u0_l2 / ((rm - 2.0) * gap).sqrt();
    Ok(first.max(second))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrictDescentReport {
    pub checked: usize,
    pub violations: usize,
    /// Largest `I − r⁻(J − d̂)` over checked snapshots.
    pub max_excess: f64,
    pub vacuous: bool,
}

/// On the unstable side, `I ≤ r⁻(J − d)`; evaluated with the upper depth
/// estimate at every snapshot with `I < 0`.
pub fn unstable_descent_check(traj: &Trajectory, d_upper: f64, r_minus: f64) -> StrictDescentReport {
    let mut rep = StrictDescentReport {
        checked: 0,
        violations: 0,
        max_excess: f64::NEG_INFINITY,
        vacuous: true,
    };
    for s in traj.snapshots.iter().filter(|s| s.i < 0.0) {
        let excess = s.i - r_minus * (s.j - d_upper);
        rep.checked += 1;
        rep.vacuous = false;
        rep.max_excess = rep.max_excess.max(excess);
        if excess > 0.0 {
            rep.violations += 1;
        }
    }
    rep
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassReport {
    /// `p⁺r/(r−p⁺)·|Ω|^{(r−2)/2}·J(u0)`
    pub lhs: f64,
    /// `‖u0‖₂^r`
    pub rhs: f64,
    pub pass: bool,
}

/// Large-mass blow-up test for a constant source exponent.
pub fn mass_check(u0: &GridFunction, model: &Model) -> Result<MassReport> {
    if !model.r().is_constant() {
        return Err(Error::Hypothesis("the mass test needs a constant r".into()));
    }
    let r = model.r().values()[0];
    let pp = model.p().plus();
    if r <= pp {
        return Err(Error::Hypothesis("the mass test needs r > p+".into()));
    }
    let j = integrals(u0, model).j();
    let vol = u0.grid.volume();
    let lhs = pp * r / (r - pp) * vol.powf(0.5 * (r - 2.0)) * j;
    let rhs = u0.l2().powf(r);
    Ok(MassReport {
        lhs,
        rhs,
        pass: !u0.is_zero() && lhs <= rhs,
    })
}

/// Highest frequency tried for the positive-energy part.
const MAX_FREQUENCY: usize = 64;
const SCALE_BISECTIONS: usize = 200;

#[derive(Debug, Clone)]
pub struct HighEnergyDatum {
    pub u: GridFunction,
    pub j: f64,
    pub alpha: f64,
    pub omega_scale: f64,
    pub omega_frequency: usize,
    pub mass: MassReport,
}

/// Builds a datum with `J = m_target` on the unstable side: a large
/// negative-energy bump on the left part of the domain plus an oscillation
/// on the right part carrying the energy, separated by a gap of two cells
/// so the two parts do not interact.
pub fn construct_high_energy_datum(m_target: f64, model: &Model, depth_upper: f64) -> Result<HighEnergyDatum> {
    if m_target <= depth_upper {
        return Err(Error::Construction(format!("target {m_target} must exceed the depth {depth_upper}")));
    }
    if !model.r().is_constant() {
        return Err(Error::Construction("needs a constant r".into()));
    }
    let r = model.r().values()[0];
    let pp = model.p().plus();
    if r <= pp {
        return Err(Error::Construction("needs r > p+".into()));
    }
    let grid = *model.grid();
    let nx = grid.nx();
    let left = nx / 2 - 1;
    let right_start = nx / 2 + 1;
    if left < 2 || nx - right_start < 4 {
        return Err(Error::Construction(format!("grid with {nx} columns is too small")));
    }
    let strip = |start: usize, len: usize, k: usize| {
        let mut values = vec![0.0; grid.len()];
        for j in 0..grid.ny() {
            for i in start..start + len {
                let s = (i - start) as f64 + 0.5;
                values[grid.index(i, j)] = (2.0 * std::f64::consts::PI * k as f64 * s / len as f64).sin();
            }
        }
        GridFunction { grid, values }
    };
    let j_of = |u: &GridFunction| integrals(u, model).j();

    let v = strip(0, left, 1);
    let threshold = grid.volume().powf(0.5 * (r - 2.0)) * pp * r / (r - pp) * m_target;
    let admissible = |a: f64| {
        let av = v.scaled(a);
        j_of(&av) <= 0.0 && av.l2().powf(r) > threshold
    };
    let mut hi = 1.0;
    let mut doublings = 0;
    while !admissible(hi) {
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::Construction("no admissible amplitude for the left bump".into()));
        }
    }
    let mut lo = hi / 2.0;
    if !admissible(lo) {
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if admissible(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    let alpha = hi;
    let av = v.scaled(alpha);
    let j_left = j_of(&av);
    let needed = m_target - j_left;

    let width = nx - right_start;
    for k in 1..=MAX_FREQUENCY.min(width / 2) {
        let w = strip(right_start, width, k);
        let Ok(lambda_star) = find_lambda_star(&w, model, LAMBDA_TOL) else {
            continue;
        };
        if j_of(&w.scaled(lambda_star)) < needed {
            continue;
        }
        let total = |s: f64| j_of(&av.axpy(s, &w));
        let (mut lo, mut hi) = (0.0, lambda_star);
        for _ in 0..SCALE_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            if total(mid) < m_target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        let s = 0.5 * (lo + hi);
        let u = av.axpy(s, &w);
        let j = j_of(&u);
        if (j - m_target).abs() > 1e-6 * m_target.abs() {
            return Err(Error::Construction(format!("energy {j} missed target {m_target}")));
        }
        let mass = mass_check(&u, model)?;
        return Ok(HighEnergyDatum {
            u,
            j,
            alpha,
            omega_scale: s,
            omega_frequency: k,
            mass,
        });
    }
    Err(Error::Construction(format!(
        "no oscillation up to frequency {} reaches energy {needed}",
        MAX_FREQUENCY.min(width / 2)
    )))
}

/// `M₁`, the largest of the four powers of `2B^{r±}`.
pub fn sublinear_level(b: f64, p: &ExponentField, r: &ExponentField) -> f64 {
    let (pm, pp, rm, rp) = (p.minus(), p.plus(), r.minus(), r.plus());
    let base_p = 2.0 * b.powf(rp);
    let base_m = 2.0 * b.powf(rm);
    [
        base_p.powf(pm / (pm - rp)),
        base_p.powf(pp / (pp - rp)),
        base_m.powf(pm / (pm - rm)),
        base_m.powf(pp / (pp - rm)),
    ]
    .into_iter()
    .fold(f64::NEG_INFINITY, f64::max)
}

/// Bound on `w(t) = ‖u(t)‖₂²/B₀²` for a sublinear source (`r⁺ < p⁻`).
pub fn sublinear_envelope(w0: f64, p: &ExponentField, r: &ExponentField, b: f64, b0: f64) -> Result<Envelope> {
    let (pm, pp, rp) = (p.minus(), p.plus(), r.plus());
    if rp >= pp.min(pm) {
        return Err(Error::Hypothesis(format!("sublinear bound needs r+ < p-, got {rp} ≥ {pm}")));
    }
    if !(w0 >= 0.0 && b > 0.0 && b0 > 0.0) {
        return Err(Error::Hypothesis("sublinear bound needs w0 ≥ 0 and positive constants".into()));
    }
    let m1 = sublinear_level(b, p, r);
    let l2 = w0.sqrt() * b0;
    let large = m1 >= 0.5;
    let th = if large { (2.0 * m1).powf(2.0 / pm) } else { (2.0 * m1).powf(2.0 / pp) };
    let mut constants = named(&[("M1", m1), ("B", b), ("B0", b0), ("w0", w0), ("threshold", th)]);
    let form = if w0 <= th {
        Form::Constant(th)
    } else if pm > 2.0 {
        let c = if large {
            (pm - 2.0) / (2.0 * b0 * b0)
        } else {
            (2.0 * m1).powf((pp - pm) / (pp - pm + 2.0)) * (pm - 2.0) / (2.0 * b0 * b0)
        };
        constants.insert("C3".to_string(), c);
        Form::ShiftedPower {
            a: th,
            b: (w0 - th).powf(0.5 * (2.0 - pm)),
            c,
            e: 2.0 / (2.0 - pm),
        }
    } else {
        let (q, rate) = if large {
            (2.0 * m1, l2.powf(pm - 2.0) / b0.powf(pm))
        } else {
            let c4 = l2.powf(pm - 2.0) / b0.powf(pm) * (2.0 * m1).powf((pp - pm) / pp);
            constants.insert("C4".to_string(), c4);
            ((2.0 * m1).powf(pm / pp), c4)
        };
        let limit = q * w0.powf(0.5 * (2.0 - pm));
        Form::RelaxPower {
            a: limit,
            b: w0 * (1.0 - q * w0.powf(-0.5 * pm)),
            c: rate,
            e: 1.0,
        }
    };
    Ok(Envelope {
        kind: EnvelopeKind::SublinearBound,
        form,
        constants,
        grad_factor: None,
        valid_hypotheses: vec!["1 < r+ < p-".into(), if large { "M1 ≥ 1/2" } else { "M1 < 1/2" }.into()],
    })
}

/// Two-sided bounds on `G(t) = ‖u(t)‖₂²` for a weak source
/// (`r⁻ ≤ min{p⁺,2}`, `r⁺ < 2`) and negative initial energy.
pub fn weak_source_bounds(
    g0: f64,
    e0: f64,
    p: &ExponentField,
    r: &ExponentField,
    b0: f64,
    omega_vol: f64,
) -> Result<(Envelope, Envelope)> {
    let (pm, pp, rm, rp) = (p.minus(), p.plus(), r.minus(), r.plus());
    if e0 >= 0.0 {
        return Err(Error::Hypothesis(format!("E(0) < 0 fails: {e0}")));
    }
    if !(1.0 < rm && rm <= pp.min(2.0)) {
        return Err(Error::Hypothesis(format!("1 < r- <= min(p+, 2) fails: r- = {rm}, p+ = {pp}")));
    }
    if rp >= 2.0 {
        return Err(Error::Hypothesis(format!("r+ < 2 fails: r+ = {rp}")));
    }
    if rm >= pp {
        return Err(Error::Hypothesis("r- = p+ makes the lower rate vanish".into()));
    }
    let vol = 1.0 + omega_vol;
    let x = pp * rm * e0 / ((rm - pp) * vol.powf(rp));
    let m2 = g0.max(x.powf(2.0 / rp)).max(x.powf(2.0 / rm));
    let c5 = 2.0 * (pp - rm) / rm * vol.powf(rp) * m2.powf(0.5 * (rp - 2.0)).max(m2.powf(0.5 * (rm - 2.0)));
    let ratio = m2 / (b0 * b0);
    let c6 = (2.0 - rp) / (b0 * b0) * ratio.powf(0.5 * (pp - 2.0)).min(ratio.powf(0.5 * (pm - 2.0)));
    let c7 = ratio.powf(0.5 * (rm - rp)).max(1.0) * (2.0 - rp) * b0.powf(-rp) * vol.powf(0.5 * rp);
    let shift = 2.0 * pp * e0 / c5;
    let constants = named(&[("M2", m2), ("C5", c5), ("C6", c6), ("C7", c7), ("B0", b0), ("G0", g0), ("E0", e0)]);
    let hyps = vec!["E(0) < 0".to_string(), "1 < r- <= min{p+,2}".to_string(), "r+ < 2".to_string()];
    let lower = Envelope {
        kind: EnvelopeKind::L2SandwichLower,
        form: Form::RelaxPower {
            a: -shift,
            b: g0 + shift,
            c: c5,
            e: 1.0,
        },
        constants: constants.clone(),
        grad_factor: None,
        valid_hypotheses: hyps.clone(),
    };
    let upper = Envelope {
        kind: EnvelopeKind::L2SandwichUpper,
        form: Form::RelaxPower {
            a: c7 / c6,
            b: g0.powf(0.5 * (2.0 - rp)) - c7 / c6,
            c: c6,
            e: 2.0 / (2.0 - rp),
        },
        constants,
        grad_factor: None,
        valid_hypotheses: hyps,
    };
    Ok((lower, upper))
}
