//! Variable exponents p(x), r(x) sampled at cell centers, plus the structural
//! checks the classification results rely on.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::str::FromStr;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Default cap on the sampled logarithmic modulus of continuity.
pub const LOG_HOLDER_CAP: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentField {
    grid: Grid,
    label: String,
    values: Vec<f64>,
    minus: f64,
    plus: f64,
}

impl ExponentField {
    pub fn from_values(grid: &Grid, label: &str, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Grid(format!(
                "exponent `{label}` has {} values for {} cells",
                values.len(),
                grid.len()
            )));
        }
        for (cell, &value) in values.iter().enumerate() {
            if !(value.is_finite() && value > 1.0) {
                return Err(Error::InadmissibleExponent {
                    label: label.to_string(),
                    cell,
                    value,
                });
            }
        }
        let minus = values.iter().copied().fold(f64::INFINITY, f64::min);
        let plus = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            grid: *grid,
            label: label.to_string(),
            values,
            minus,
            plus,
        })
    }

    pub fn from_fn(grid: &Grid, label: &str, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = (0..grid.len())
            .map(|k| {
                let [x, y] = grid.center(k);
                f(x, y)
            })
            .collect();
        Self::from_values(grid, label, values)
    }

    pub fn constant(grid: &Grid, label: &str, value: f64) -> Result<Self> {
        Self::from_values(grid, label, vec![value; grid.len()])
    }

    pub fn build(spec: &ExponentSpec, grid: &Grid, label: &str) -> Result<Self> {
        Self::from_fn(grid, label, |x, y| spec.eval(x, y))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn minus(&self) -> f64 {
        self.minus
    }

    pub fn plus(&self) -> f64 {
        self.plus
    }

    pub fn is_constant(&self) -> bool {
        self.minus == self.plus
    }

    /// Per-cell conjugate exponent q/(q−1).
    pub fn conjugate(&self) -> ExponentField {
        let values = self.values.iter().map(|q| q / (q - 1.0)).collect();
        // q > 1 keeps q' finite and > 1
        Self::from_values(&self.grid, &format!("{}'", self.label), values)
            .expect("conjugate of an admissible exponent is admissible")
    }

    pub fn map(&self, label: &str, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_values(&self.grid, label, self.values.iter().map(|v| f(*v)).collect())
    }
}

/// Exponent description accepted in configs.
///
/// * `const:<v>`
/// * `affine:<a>+<b>x+<c>y` (signed terms in any order; `y` may be omitted)
/// * `sin:<a>+<b>*sin(<k>πx)` (`pi` is accepted for `π`)
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ExponentSpec {
    Const(f64),
    Affine { a: f64, bx: f64, cy: f64 },
    Sin { a: f64, b: f64, k: f64 },
}

impl ExponentSpec {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            ExponentSpec::Const(v) => v,
            ExponentSpec::Affine { a, bx, cy } => a + bx * x + cy * y,
            ExponentSpec::Sin { a, b, k } => a + b * (k * PI * x).sin(),
        }
    }
}

impl FromStr for ExponentSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::ExponentSpec(s.to_string());
        let s = s.trim();
        let (kind, body) = s.split_once(':').ok_or_else(bad)?;
        let body: String = body.chars().filter(|c| !c.is_whitespace()).collect();
        match kind.trim() {
            "const" => body.parse().map(ExponentSpec::Const).map_err(|_| bad()),
            "affine" => {
                let (mut a, mut bx, mut cy) = (0.0, 0.0, 0.0);
                for term in signed_terms(&body) {
                    if let Some(c) = term.strip_suffix('x') {
                        bx += coefficient(c).ok_or_else(bad)?;
                    } else if let Some(c) = term.strip_suffix('y') {
                        cy += coefficient(c).ok_or_else(bad)?;
                    } else {
                        a += term.parse::<f64>().map_err(|_| bad())?;
                    }
                }
                Ok(ExponentSpec::Affine { a, bx, cy })
            }
            "sin" => {
                let body = body.replace("π", "pi");
                let (head, tail) = body.split_once("sin(").ok_or_else(bad)?;
                let inner = tail.strip_suffix("pix)").ok_or_else(bad)?;
                let k = if inner.is_empty() {
                    1.0
                } else {
                    inner.trim_end_matches('*').parse().map_err(|_| bad())?
                };
                let head = head.strip_suffix('*').ok_or_else(bad)?;
                let terms = signed_terms(head);
                let [a_str, b_str] = terms.as_slice() else {
                    return Err(bad());
                };
                Ok(ExponentSpec::Sin {
                    a: a_str.parse().map_err(|_| bad())?,
                    b: coefficient(b_str).ok_or_else(bad)?,
                    k,
                })
            }
            _ => Err(bad()),
        }
    }
}

/// Splits `1.8+0.35x-2e-1y` into `["1.8", "+0.35x", "-2e-1y"]`, leaving
/// exponent signs (`e-1`) attached.
fn signed_terms(s: &str) -> Vec<String> {
    let mut terms = Vec::new();
    let mut cur = String::new();
    let mut prev = ' ';
    for c in s.chars() {
        if (c == '+' || c == '-') && !cur.is_empty() && prev != 'e' && prev != 'E' {
            terms.push(std::mem::take(&mut cur));
        }
        cur.push(c);
        prev = c;
    }
    if !cur.is_empty() {
        terms.push(cur);
    }
    terms
}

fn coefficient(c: &str) -> Option<f64> {
    let c = c.trim_end_matches('*');
    match c {
        "" | "+" => Some(1.0),
        "-" => Some(-1.0),
        _ => c.parse().ok(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub max_log_modulus: f64,
    pub passes: bool,
    pub pairs_checked: usize,
    pub cap: f64,
}

/// Sampled audit of the logarithmic modulus of continuity:
/// `sup |q(x)−q(y)|·ln(1/|x−y|)` over cell pairs with `|x−y| < 1`.
///
/// When the number of distinct pairs fits in `pair_budget` every pair is
/// checked; otherwise all axis-neighbour pairs are checked and the remaining
/// budget is spent on pairs drawn from a seeded stream.
pub fn check_log_holder(
    field: &ExponentField,
    pair_budget: usize,
    seed: u64,
    cap: f64,
) -> RegularityReport {
    let grid = field.grid();
    let n = grid.len();
    let q = field.values();
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    let mut visit = |a: usize, b: usize| {
        let dist = grid.distance(a, b);
        if dist > 0.0 && dist < 1.0 {
            worst = worst.max((q[a] - q[b]).abs() * (1.0 / dist).ln());
            checked += 1;
        }
    };

    let total = n * (n - 1) / 2;
    if total <= pair_budget {
        for a in 0..n {
            for b in a + 1..n {
                visit(a, b);
            }
        }
    } else {
        let mut seen = BTreeSet::new();
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let a = grid.index(i, j);
                if i + 1 < grid.nx() {
                    seen.insert((a, grid.index(i + 1, j)));
                }
                if grid.dim() == 2 && j + 1 < grid.ny() {
                    seen.insert((a, grid.index(i, j + 1)));
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut attempts = 0;
        while seen.len() < pair_budget && attempts < 4 * pair_budget {
            attempts += 1;
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            if a != b {
                seen.insert((a.min(b), a.max(b)));
            }
        }
        for (a, b) in seen {
            visit(a, b);
        }
    }

    RegularityReport {
        max_log_modulus: worst,
        passes: worst.is_finite() && worst < cap,
        pairs_checked: checked,
        cap,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub lhs: f64,
    /// `None` when the bound is infinite.
    pub rhs: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub condition_h: bool,
    pub r_plus_below_p_minus: bool,
    pub weak_source_regime: bool,
    pub critical_sobolev: Option<f64>,
    pub details: Vec<HypothesisCheck>,
}

impl HypothesisReport {
    pub fn check(&self, name: &str) -> Option<&HypothesisCheck> {
        self.details.iter().find(|c| c.name == name)
    }
}

/// Evaluates the structural inequalities on the sampled extrema, strict
/// where the statements are strict.
pub fn check_hypotheses(p: &ExponentField, r: &ExponentField, dim: usize) -> Result<HypothesisReport> {
    if p.grid() != r.grid() {
        return Err(Error::GridMismatch);
    }
    let n = dim as f64;
    let (pm, pp, rm, rp) = (p.minus(), p.plus(), r.minus(), r.plus());
    let critical_sobolev = (pm < n).then(|| n * pm / (n - pm));

    let mut details = Vec::new();
    let mut push = |name: &str, lhs: f64, rhs: f64, pass: bool| {
        details.push(HypothesisCheck {
            name: name.to_string(),
            lhs,
            rhs: rhs.is_finite().then_some(rhs),
            pass,
        });
        pass
    };

    let lower = 1f64.max(2.0 * n / (n + 2.0));
    let h1 = push("max{1,2N/(N+2)} < p-", lower, pm, lower < pm);
    let h2 = push("p- < N", pm, n, pm < n);
    let floor = pp.max(2.0);
    let h3 = push("max{p+,2} < r-", floor, rm, floor < rm);
    let h4 = match critical_sobolev {
        Some(cs) => push("r+ <= N p-/(N-p-)", rp, cs, rp <= cs),
        None => push("r+ <= N p-/(N-p-)", rp, f64::INFINITY, false),
    };
    let s1 = push("1 < r+ < p-", rp, pm, 1.0 < rp && rp < pm);
    let cap = pp.min(2.0);
    let t1 = push("r- <= min{p+,2}", rm, cap, 1.0 < rm && rm <= cap);
    let t2 = push("r+ < 2", rp, 2.0, rp < 2.0);

    Ok(HypothesisReport {
        condition_h: h1 && h2 && h3 && h4,
        r_plus_below_p_minus: s1,
        weak_source_regime: t1 && t2,
        critical_sobolev,
        details,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> Grid {
        Grid::new_1d(n, 1.0).unwrap()
    }

    #[test]
    fn constant_field_extrema() {
        let g = Grid::new_2d(3, 5, 1.0, 1.0).unwrap();
        let f = ExponentField::constant(&g, "p", 2.0).unwrap();
        assert_eq!(f.minus(), 2.0);
        assert_eq!(f.plus(), 2.0);
        assert!(f.is_constant());
    }

    #[test]
    fn affine_field_extrema_at_corners() {
        let g = Grid::new_2d(4, 4, 1.0, 1.0).unwrap();
        let spec: ExponentSpec = "affine:1.8+0.35x+0.35y".parse().unwrap();
        let f = ExponentField::build(&spec, &g, "p").unwrap();
        let lo = f.values().iter().position(|v| *v == f.minus()).unwrap();
        let hi = f.values().iter().position(|v| *v == f.plus()).unwrap();
        assert_eq!(lo, g.index(0, 0));
        assert_eq!(hi, g.index(3, 3));
        assert!((f.minus() - (1.8 + 0.7 * 0.125)).abs() < 1e-12);
        assert!((f.plus() - (1.8 + 0.7 * 0.875)).abs() < 1e-12);
    }

    #[test]
    fn exponent_one_is_rejected() {
        let err = ExponentField::constant(&line(4), "p", 1.0).unwrap_err();
        assert!(matches!(err, Error::InadmissibleExponent { cell: 0, .. }));
        let err = ExponentField::from_fn(&line(4), "r", |x, _| 0.8 + x).unwrap_err();
        assert!(matches!(err, Error::InadmissibleExponent { cell: 0, .. }));
    }

    #[test]
    fn spec_parsing() {
        assert_eq!("const:4".parse::<ExponentSpec>().unwrap(), ExponentSpec::Const(4.0));
        assert_eq!(
            "affine: 2 - 0.5x".parse::<ExponentSpec>().unwrap(),
            ExponentSpec::Affine { a: 2.0, bx: -0.5, cy: 0.0 }
        );
        assert_eq!(
            "affine:1e-1y+2+x".parse::<ExponentSpec>().unwrap(),
            ExponentSpec::Affine { a: 2.0, bx: 1.0, cy: 0.1 }
        );
        assert_eq!(
            "sin:2.2+0.3*sin(2πx)".parse::<ExponentSpec>().unwrap(),
            ExponentSpec::Sin { a: 2.2, b: 0.3, k: 2.0 }
        );
        assert_eq!(
            "sin:2-0.3*sin(pix)".parse::<ExponentSpec>().unwrap(),
            ExponentSpec::Sin { a: 2.0, b: -0.3, k: 1.0 }
        );
        for bad in ["", "const:", "cubic:1", "affine:2+x^2", "sin:2+sin(x)"] {
            assert!(bad.parse::<ExponentSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn log_holder_constant_and_lipschitz() {
        let g = line(32);
        let c = ExponentField::constant(&g, "p", 3.0).unwrap();
        let rep = check_log_holder(&c, 10_000, 1, LOG_HOLDER_CAP);
        assert_eq!(rep.max_log_modulus, 0.0);
        assert!(rep.passes);

        let lip = ExponentField::from_fn(&g, "p", |x, _| 2.0 + x).unwrap();
        let rep = check_log_holder(&lip, 10_000, 1, LOG_HOLDER_CAP);
        assert!(rep.passes);
        assert!(rep.max_log_modulus <= (-1f64).exp() + 1e-12);
        assert_eq!(rep.pairs_checked, 32 * 31 / 2);
    }

    #[test]
    fn log_holder_flags_emulated_jump_on_fine_grids() {
        let jump = |n: usize| {
            let g = line(n);
            let h = g.spacing(0);
            ExponentField::from_fn(&g, "p", |x, _| 3.5 + 2.0 * ((x - 0.5) / (0.1 * h)).tanh())
                .unwrap()
        };
        assert!(check_log_holder(&jump(8), 1000, 3, LOG_HOLDER_CAP).passes);
        let fine = check_log_holder(&jump(64), 1000, 3, LOG_HOLDER_CAP);
        assert!(!fine.passes);
        assert!(fine.max_log_modulus > 4.0 * 64f64.ln() * 0.99);
    }

    #[test]
    fn log_holder_budgeted_sampling_is_deterministic() {
        let g = Grid::new_2d(20, 20, 1.0, 1.0).unwrap();
        let f = ExponentField::from_fn(&g, "p", |x, y| 2.0 + (7.0 * x * y).sin()).unwrap();
        let a = check_log_holder(&f, 2000, 9, LOG_HOLDER_CAP);
        let b = check_log_holder(&f, 2000, 9, LOG_HOLDER_CAP);
        assert_eq!(a, b);
        assert!(a.pairs_checked >= 760);
    }

    #[test]
    fn log_holder_monotone_under_nested_refinement() {
        // refining by 3 keeps every coarse center as a fine center
        let field = |n: usize| {
            ExponentField::from_fn(&line(n), "p", |x, _| 2.0 + (x - 0.3).abs().sqrt()).unwrap()
        };
        let mut last = 0.0;
        for n in [4, 12, 36] {
            let rep = check_log_holder(&field(n), usize::MAX, 0, LOG_HOLDER_CAP);
            assert!(rep.max_log_modulus >= last);
            last = rep.max_log_modulus;
        }
    }

    #[test]
    fn hypothesis_examples() {
        let g = Grid::new_2d(4, 4, 1.0, 1.0).unwrap();
        let p = ExponentField::from_fn(&g, "p", |x, _| 1.8 + 0.1 * x).unwrap();
        let p = p.map("p", |v| v.clamp(1.8, 1.9)).unwrap();
        let r = ExponentField::constant(&g, "r", 4.0).unwrap();
        let rep = check_hypotheses(&p, &r, 2).unwrap();
        assert!(rep.condition_h);
        assert!((rep.critical_sobolev.unwrap() - 2.0 * p.minus() / (2.0 - p.minus())).abs() < 1e-12);

        let p = ExponentField::constant(&g, "p", 2.5).unwrap();
        let r = ExponentField::constant(&g, "r", 1.5).unwrap();
        let rep = check_hypotheses(&p, &r, 2).unwrap();
        assert!(!rep.condition_h);
        assert!(rep.r_plus_below_p_minus);
        assert!(rep.critical_sobolev.is_none());
        assert!(rep.weak_source_regime);

        let gl = line(8);
        let p = ExponentField::from_fn(&gl, "p", |x, _| 1.2 + x).unwrap();
        let r = ExponentField::constant(&gl, "r", 3.0).unwrap();
        let rep = check_hypotheses(&p, &r, 1).unwrap();
        assert!(!rep.condition_h);
        assert!(!rep.check("p- < N").unwrap().pass);
    }

    #[test]
    fn raising_r_never_enables_subcritical_regime() {
        let g = line(8);
        let p = ExponentField::from_fn(&g, "p", |x, _| 2.0 + x).unwrap();
        for base in [1.2, 1.8, 2.1, 2.5, 3.5] {
            let r = ExponentField::from_fn(&g, "r", |x, _| base + 0.2 * x).unwrap();
            let before = check_hypotheses(&p, &r, 2).unwrap().r_plus_below_p_minus;
            for bump in [0.05, 0.5, 2.0] {
                let r2 = r.map("r", |v| v + bump).unwrap();
                let after = check_hypotheses(&p, &r2, 2).unwrap().r_plus_below_p_minus;
                assert!(before || !after);
            }
        }
    }
}
