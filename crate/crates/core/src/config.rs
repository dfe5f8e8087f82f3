//! Run configuration: flat `key = value` lines under `[section]` headers.
//! Only documented keys are accepted; anything else is an error naming the
//! line, so a typo never silently falls back to a default.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::exponent::ExponentSpec;
use crate::solver::SolverConfig;
use crate::{Error, Result};

const KEYS: &[(&str, &[&str])] = &[
    ("run", &["id", "seed"]),
    ("grid", &["dim", "nx", "ny", "lx", "ly"]),
    ("exponents", &["p", "r", "delta", "source"]),
    ("datum", &["kind", "amplitude", "ray", "trial", "multiple", "file"]),
    (
        "estimates",
        &["embedding_trials", "depth_trials", "radii_samples", "b0", "b", "log_holder_pairs"],
    ),
    (
        "solver",
        &["t_end", "dt_init", "dt_min", "dt_max", "energy_tol", "blowup_threshold", "record_every", "max_steps"],
    ),
    ("norm", &["field", "exponent", "tol"]),
];

/// Parsed file with the line each value came from.
#[derive(Debug, Clone, Default)]
struct Raw {
    path: String,
    values: BTreeMap<String, BTreeMap<String, (String, usize)>>,
}

impl Raw {
    fn parse(path: &str, text: &str) -> Result<Self> {
        let mut raw = Raw {
            path: path.to_string(),
            ..Default::default()
        };
        let mut section: Option<String> = None;
        for (k, line) in text.lines().enumerate() {
            let n = k + 1;
            let line = line.split(['#', ';']).next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| Error::config(path, n, "unterminated section header"))?
                    .trim();
                if !KEYS.iter().any(|(s, _)| *s == name) {
                    return Err(Error::config(path, n, format!("unknown section [{name}]")));
                }
                if raw.values.contains_key(name) {
                    return Err(Error::config(path, n, format!("section [{name}] repeated")));
                }
                raw.values.insert(name.to_string(), BTreeMap::new());
                section = Some(name.to_string());
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::config(path, n, format!("expected key = value, got `{line}`")));
            };
            let (key, value) = (key.trim(), value.trim());
            let Some(sec) = &section else {
                return Err(Error::config(path, n, format!("key `{key}` outside any section")));
            };
            let allowed = KEYS.iter().find(|(s, _)| s == sec).map(|(_, k)| *k).unwrap_or(&[]);
            if !allowed.contains(&key) {
                return Err(Error::config(path, n, format!("unknown key `{key}` in [{sec}]")));
            }
            let entries = raw.values.get_mut(sec).expect("section registered");
            if entries.insert(key.to_string(), (value.to_string(), n)).is_some() {
                return Err(Error::config(path, n, format!("key `{key}` repeated in [{sec}]")));
            }
        }
        Ok(raw)
    }

    fn get<T: FromStr>(&self, sec: &str, key: &str) -> Result<Option<T>> {
        let Some((v, line)) = self.values.get(sec).and_then(|s| s.get(key)) else {
            return Ok(None);
        };
        v.parse()
            .map(Some)
            .map_err(|_| Error::config(&self.path, *line, format!("cannot parse `{v}` for {sec}.{key}")))
    }

    fn or<T: FromStr>(&self, sec: &str, key: &str, default: T) -> Result<T> {
        Ok(self.get(sec, key)?.unwrap_or(default))
    }

    fn require<T: FromStr>(&self, sec: &str, key: &str) -> Result<T> {
        self.get(sec, key)?
            .ok_or_else(|| Error::config(&self.path, 0, format!("missing required key {sec}.{key}")))
    }

    fn line(&self, sec: &str, key: &str) -> usize {
        self.values.get(sec).and_then(|s| s.get(key)).map_or(0, |(_, l)| *l)
    }

    fn echo(&self) -> BTreeMap<String, BTreeMap<String, String>> {
        self.values
            .iter()
            .map(|(s, kv)| (s.clone(), kv.iter().map(|(k, (v, _))| (k.clone(), v.clone())).collect()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSettings {
    pub dim: usize,
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum DatumSpec {
    Zero,
    /// `cos(πx/Lx)`, scaled.
    Mode { scale: Scaling },
    /// Random cosine field of the given trial stream, scaled.
    Witness { trial: u64, scale: Scaling },
    /// Two-part datum with energy `multiple × depth` on the unstable side.
    HighEnergy { multiple: f64 },
    Csv { file: String },
}

/// Either an absolute amplitude or a multiple of the Nehari scaling of the
/// direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Scaling {
    Amplitude(f64),
    Ray(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateSettings {
    pub embedding_trials: usize,
    pub depth_trials: usize,
    pub radii_samples: usize,
    /// Pinned constants override sampling.
    pub b0: Option<f64>,
    pub b: Option<f64>,
    pub log_holder_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormSettings {
    pub field: String,
    pub exponent: String,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Config {
    pub path: String,
    pub id: String,
    pub seed: u64,
    pub grid: GridSettings,
    /// Exponent specs; absent only in configs that need no model.
    pub p: Option<String>,
    pub r: Option<String>,
    pub delta: f64,
    pub source: bool,
    pub datum: DatumSpec,
    pub estimates: EstimateSettings,
    pub solver: SolverConfig,
    pub norm: Option<NormSettings>,
    /// Every key as written, for the run record.
    pub echo: BTreeMap<String, BTreeMap<String, String>>,
}

impl Config {
    pub fn exponent(&self, key: &str) -> Result<ExponentSpec> {
        let spec = if key == "p" { &self.p } else { &self.r };
        spec.as_deref()
            .ok_or_else(|| Error::config(&self.path, 0, format!("missing required key exponents.{key}")))?
            .parse()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| Error::config(&shown, 0, e.to_string()))?;
        Self::parse(&shown, &text)
    }

    pub fn parse(path: &str, text: &str) -> Result<Self> {
        let raw = Raw::parse(path, text)?;
        let dim = raw.or("grid", "dim", 2usize)?;
        if dim != 1 && dim != 2 {
            return Err(Error::config(path, raw.line("grid", "dim"), "dim must be 1 or 2"));
        }
        let nx = raw.or("grid", "nx", 32usize)?;
        let grid = GridSettings {
            dim,
            nx,
            ny: if dim == 2 { raw.or("grid", "ny", nx)? } else { 1 },
            lx: raw.or("grid", "lx", 1.0)?,
            ly: if dim == 2 { raw.or("grid", "ly", 1.0)? } else { 1.0 },
        };

        let p: Option<String> = raw.get("exponents", "p")?;
        let r: Option<String> = raw.get("exponents", "r")?;
        for (key, spec) in [("p", &p), ("r", &r)].into_iter().filter_map(|(k, s)| Some((k, s.as_ref()?))) {
            spec.parse::<ExponentSpec>()
                .map_err(|e| Error::config(path, raw.line("exponents", key), e.to_string()))?;
        }

        let kind: String = raw.or("datum", "kind", "zero".to_string())?;
        let datum_line = raw.line("datum", "kind");
        let datum = match kind.as_str() {
            "zero" => DatumSpec::Zero,
            "mode" | "witness" => {
                let scale = match (raw.get("datum", "amplitude")?, raw.get("datum", "ray")?) {
                    (Some(a), None) => Scaling::Amplitude(a),
                    (None, Some(f)) => Scaling::Ray(f),
                    _ => return Err(Error::config(path, datum_line, format!("{kind} needs exactly one of amplitude, ray"))),
                };
                match kind.as_str() {
                    "mode" => DatumSpec::Mode { scale },
                    _ => DatumSpec::Witness {
                        trial: raw.or("datum", "trial", 0)?,
                        scale,
                    },
                }
            }
            "high_energy" => DatumSpec::HighEnergy {
                multiple: raw.or("datum", "multiple", 10.0)?,
            },
            "csv" => DatumSpec::Csv {
                file: raw.require("datum", "file")?,
            },
            other => return Err(Error::config(path, datum_line, format!("unknown datum kind `{other}`"))),
        };

        let estimates = EstimateSettings {
            embedding_trials: raw.or("estimates", "embedding_trials", 16)?,
            depth_trials: raw.or("estimates", "depth_trials", 8)?,
            radii_samples: raw.or("estimates", "radii_samples", 64)?,
            b0: raw.get("estimates", "b0")?,
            b: raw.get("estimates", "b")?,
            log_holder_pairs: raw.or("estimates", "log_holder_pairs", 20_000)?,
        };

        let d = SolverConfig::default();
        let solver = SolverConfig {
            t_end: raw.or("solver", "t_end", d.t_end)?,
            dt_init: raw.or("solver", "dt_init", d.dt_init)?,
            dt_min: raw.or("solver", "dt_min", d.dt_min)?,
            dt_max: raw.or("solver", "dt_max", d.dt_max)?,
            energy_tol: raw.or("solver", "energy_tol", d.energy_tol)?,
            blowup_threshold: raw.or("solver", "blowup_threshold", d.blowup_threshold)?,
            record_every: raw.or("solver", "record_every", d.record_every)?,
            max_steps: raw.or("solver", "max_steps", d.max_steps)?,
        };
        solver
            .validate()
            .map_err(|e| Error::config(path, raw.line("solver", "t_end"), e.to_string()))?;

        let norm = match raw.values.contains_key("norm") {
            true => Some(NormSettings {
                field: raw.require("norm", "field")?,
                exponent: raw.require("norm", "exponent")?,
                tol: raw.or("norm", "tol", crate::norms::NORM_TOL)?,
            }),
            false => None,
        };

        Ok(Config {
            path: path.to_string(),
            id: raw.or("run", "id", "run".to_string())?,
            seed: raw.or("run", "seed", 0)?,
            grid,
            p,
            r,
            delta: raw.or("exponents", "delta", crate::energy::DEFAULT_DELTA)?,
            source: raw.or("exponents", "source", true)?,
            datum,
            estimates,
            solver,
            norm,
            echo: raw.echo(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[exponents]\np = const:1.8\nr = const:4\n";

    #[test]
    fn minimal_config_defaults() {
        let c = Config::parse("m.ini", MINIMAL).unwrap();
        assert_eq!(c.datum, DatumSpec::Zero);
        assert_eq!(c.grid.nx, 32);
        assert_eq!(c.solver, SolverConfig::default());
        assert_eq!(c.echo["exponents"]["r"], "const:4");
    }

    #[test]
    fn unknown_key_names_line() {
        let text = format!("{MINIMAL}[solver]\nt_end = 1\ndt_mni = 1e-9\n");
        match Config::parse("x.ini", &text).unwrap_err() {
            Error::Config { line, msg, .. } => {
                assert_eq!(line, 6);
                assert!(msg.contains("dt_mni"));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn bad_values_are_rejected() {
        for text in [
            "[grid]\ndim = 3\n[exponents]\np = const:2\nr = const:3\n",
            "[exponents]\np = cubic:2\nr = const:3\n",
            "[nonsense]\n",
            "p = const:2\n",
            "[exponents]\np = const:2\nr = const:3\n[datum]\nkind = witness\n",
            "[exponents]\np = const:2\nr = const:3\n[solver]\ndt_min = 1\n",
            "[exponents]\np = const:2\np = const:3\n",
        ] {
            assert!(matches!(Config::parse("b.ini", text), Err(Error::Config { .. })), "{text}");
        }
    }

    #[test]
    fn comments_and_witness() {
        let text = "# lab\n[run]\nid = w ; trailing\nseed = 7\n[exponents]\np = affine:1.8+0.7x\nr = const:4\n\
                    [datum]\nkind = witness\ntrial = 3\nray = 0.5\n";
        let c = Config::parse("w.ini", text).unwrap();
        assert_eq!((c.id.as_str(), c.seed), ("w", 7));
        assert_eq!(c.datum, DatumSpec::Witness { trial: 3, scale: Scaling::Ray(0.5) });
    }
}
