//! Flat `key = value` experiment configurations.
//!
//! One setting per line, `#` starts a comment. `kind` names the experiment;
//! `seed` is the master seed (default 0). Every other key belongs to the
//! experiment's schema, and omitted keys take their documented defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use sha2::{Digest, Sha256};

/// Environment variable that overrides the master seed.
pub const SEED_ENV: &str = "LATTHOM_SEED";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Kind {
    HeatKernel,
    SampleEnv,
    Greens,
    Corrector,
    QMatrix,
    AHom,
    AvgGreens,
    RateFit,
    Correlate,
    Thm13,
    Malliavin,
    Poincare,
    SdeAppendix,
}

impl Kind {
    pub const ALL: [Kind; 13] = [
        Self::HeatKernel,
        Self::SampleEnv,
        Self::Greens,
        Self::Corrector,
        Self::QMatrix,
        Self::AHom,
        Self::AvgGreens,
        Self::RateFit,
        Self::Correlate,
        Self::Thm13,
        Self::Malliavin,
        Self::Poincare,
        Self::SdeAppendix,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::HeatKernel => "heat-kernel",
            Self::SampleEnv => "sample-env",
            Self::Greens => "greens",
            Self::Corrector => "corrector",
            Self::QMatrix => "qmatrix",
            Self::AHom => "ahom",
            Self::AvgGreens => "avg-greens",
            Self::RateFit => "rate-fit",
            Self::Correlate => "correlate",
            Self::Thm13 => "thm13",
            Self::Malliavin => "malliavin",
            Self::Poincare => "poincare",
            Self::SdeAppendix => "sde-appendix",
        }
    }

    /// Documented keys with their types and defaults.
    pub fn schema(self) -> Vec<Key> {
        use Ty::*;
        let env = |d: &'static str, l: &'static str, pot: &'static str, a: &'static str| {
            vec![
                Key::new("d", Int, d, "lattice dimension"),
                Key::new("L", Side, l, "cube side length (even)"),
                Key::new("potential", Word(&["quadratic", "dipole"]), pot, "interaction potential V"),
                Key::new("c", Float, "1", "quadratic coefficient of V"),
                Key::new("a", Float, a, "dipole amplitude of V"),
                Key::new("m", Float, "1", "mass"),
            ]
        };
        let walk = |dt: &'static str| {
            vec![
                Key::new("walk_dt", Float, dt, "walk-time spacing of coefficient slices"),
                Key::new("clock", Float, "1", "field time per unit walk time"),
            ]
        };
        let mut keys = match self {
            Self::HeatKernel => vec![
                Key::new("d", Int, "1", "lattice dimension"),
                Key::new("t", FloatList, "0.5,1,2", "times"),
                Key::new("radius", Int, "4", "largest |x_j| written"),
            ],
            Self::SampleEnv => {
                let mut k = env("2", "8", "dipole", "0.3");
                k.extend([
                    Key::new("dt", Float, "0.05", "Langevin step"),
                    Key::new("steps", Int, "200", "recorded steps"),
                    Key::new("stride", Int, "10", "steps between written slices"),
                ]);
                k
            }
            Self::Greens => {
                let mut k = env("2", "8", "dipole", "0.3");
                k.extend(walk("0.1"));
                k.push(Key::new("steps", Int, "20", "terminal time index"));
                k
            }
            Self::Corrector | Self::QMatrix | Self::AHom => {
                let mut k = env("2", "4", "dipole", "0.3");
                k.extend(walk("0.1"));
                k.push(Key::new("slices", Int, "4", "coefficient slices per sample (time period)"));
                k.push(Key::new("xi", FloatList, "0,0", "twist ξ"));
                match self {
                    Self::Corrector => k.push(Key::new("eta", Float, "0.1", "η")),
                    Self::QMatrix => {
                        k.push(Key::new("eta", Float, "0.1", "η"));
                        k.push(Key::new("samples", Int, "8", "environment samples"));
                    }
                    _ => {
                        k.push(Key::new("etas", FloatListOrAuto, "auto", "decreasing η ladder"));
                        k.push(Key::new("samples", Int, "8", "environment samples"));
                    }
                }
                k
            }
            Self::AvgGreens => {
                let mut k = env("1", "32", "quadratic", "0.2");
                k.extend(walk("0.05"));
                k.extend([
                    Key::new("sampler", Word(&["langevin", "gaussian"]), "langevin", "field sampler"),
                    Key::new("times", FloatList, "1,2,4", "walk times"),
                    Key::new("samples", Int, "64", "environment samples"),
                ]);
                k
            }
            Self::RateFit => vec![
                Key::new("model", Word(&["power", "parabolic", "elliptic"]), "power", "fit model"),
                Key::new("offset", Float, "0", "exponent offset of the parabolic or elliptic model"),
                Key::new("scales", FloatList, "", "scales (required)"),
                Key::new("values", FloatList, "", "measured differences (required)"),
                Key::new("floor", FloatListOrAuto, "auto", "per-point noise floor, or auto for none"),
            ],
            Self::Correlate => {
                let mut k = env("1", "32", "quadratic", "0.2");
                k.extend([
                    Key::new("offsets", PointList, "0;1;2;3", "offsets x, points separated by ';'"),
                    Key::new("samples", Int, "2000", "invariant-measure samples"),
                ]);
                k
            }
            Self::Thm13 => {
                let mut k = env("2", "32", "dipole", "0.2");
                k.retain(|k| k.name != "m");
                k.extend([
                    Key::new("masses", FloatList, "0.4,0.3,0.2", "mass ladder"),
                    Key::new("scales", IntList, "1,2,3,4,6,8", "axis distances"),
                    Key::new("environments", Int, "64", "environments per mass"),
                ]);
                k
            }
            Self::Malliavin => {
                let mut k = env("2", "6", "dipole", "0.3");
                k.extend([
                    Key::new("dt", Float, "0.001", "Langevin step"),
                    Key::new("y", IntList, "1,0", "perturbed site"),
                    Key::new("s", Float, "0.3", "perturbation time"),
                    Key::new("x", IntList, "2,1", "observed site"),
                    Key::new("t", Float, "0.8", "observation time"),
                    Key::new("delta", Float, "1e-5", "increment shift"),
                ]);
                k
            }
            Self::Poincare => {
                let mut k = env("2", "4", "dipole", "0.3");
                k.extend([
                    Key::new("dt", Float, "0.05", "Langevin step"),
                    Key::new("T", Float, "2", "horizon"),
                    Key::new("samples", Int, "2000", "paths"),
                ]);
                k
            }
            Self::SdeAppendix => vec![
                Key::new("samples", Int, "20000", "independent paths for the moment checks"),
                Key::new("paths", Int, "20000", "Brownian paths for the path-weight estimate"),
                Key::new("T", Float, "8", "path-weight horizon"),
                Key::new("dt", Float, "0.01", "time step"),
                Key::new("eps", Float, "0.3", "cosine perturbation of W"),
                Key::new("duration", Float, "10000", "length of the time-average run"),
            ],
        };
        keys.sort_by_key(|k| k.name);
        keys
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ConfigError::new("kind", format!("unknown experiment `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ty {
    Int,
    /// A positive even integer.
    Side,
    Float,
    FloatList,
    FloatListOrAuto,
    IntList,
    /// Integer points separated by `;`, coordinates by `,`.
    PointList,
    Word(&'static [&'static str]),
}

#[derive(Clone, Debug)]
pub struct Key {
    pub name: &'static str,
    pub ty: Ty,
    /// Empty means required.
    pub default: &'static str,
    pub doc: &'static str,
}

impl Key {
    const fn new(name: &'static str, ty: Ty, default: &'static str, doc: &'static str) -> Self {
        Self { name, ty, default, doc }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("invalid configuration for `{field}`: {reason}")]
pub struct ConfigError {
    pub field: String,
    pub reason: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self { field: field.into(), reason: reason.into() }
    }
}

fn list<T: FromStr>(field: &str, s: &str, sep: char) -> Result<Vec<T>, ConfigError> {
    s.split(sep)
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| v.parse().map_err(|_| ConfigError::new(field, format!("cannot parse `{v}`"))))
        .collect()
}

fn check(key: &Key, value: &str) -> Result<(), ConfigError> {
    let bad = |reason: String| Err(ConfigError::new(key.name, reason));
    match key.ty {
        Ty::Int => match value.parse::<i64>() {
            Ok(_) => Ok(()),
            Err(_) => bad(format!("expected an integer, got `{value}`")),
        },
        Ty::Side => match value.parse::<usize>() {
            Ok(v) if v >= 2 && v % 2 == 0 => Ok(()),
            _ => bad(format!("side length must be an even integer >= 2, got `{value}`")),
        },
        Ty::Float => match value.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(()),
            _ => bad(format!("expected a finite number, got `{value}`")),
        },
        Ty::FloatListOrAuto if value == "auto" => Ok(()),
        Ty::FloatList | Ty::FloatListOrAuto => list::<f64>(key.name, value, ',').map(|_| ()),
        Ty::IntList => list::<i64>(key.name, value, ',').map(|_| ()),
        Ty::PointList => value.split(';').try_for_each(|p| list::<i64>(key.name, p, ',').map(|_| ())),
        Ty::Word(words) if words.contains(&value) => Ok(()),
        Ty::Word(words) => bad(format!("expected one of {words:?}, got `{value}`")),
    }
}

/// A validated configuration with every schema key resolved.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub seed: u64,
    values: BTreeMap<String, String>,
}

impl ExperimentConfig {
    /// Parses `text`; `kind` is taken from the text unless given here, and
    /// must agree when both are present.
    pub fn parse(text: &str, kind: Option<Kind>) -> Result<Self, ConfigError> {
        let mut raw = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::new(format!("line {}", n + 1), format!("expected `key = value`, got `{line}`")))?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if raw.insert(k.clone(), v).is_some() {
                return Err(ConfigError::new(k, "set more than once"));
            }
        }
        let kind = match (raw.remove("kind"), kind) {
            (Some(k), Some(given)) => {
                let k: Kind = k.parse()?;
                if k != given {
                    return Err(ConfigError::new("kind", format!("file says `{k}` but `{given}` was requested")));
                }
                k
            }
            (Some(k), None) => k.parse()?,
            (None, Some(given)) => given,
            (None, None) => return Err(ConfigError::new("kind", "missing")),
        };
        let seed = match raw.remove("seed") {
            Some(s) => s.parse().map_err(|_| ConfigError::new("seed", format!("expected a u64, got `{s}`")))?,
            None => 0,
        };
        let schema = kind.schema();
        if let Some(unknown) = raw.keys().find(|k| !schema.iter().any(|s| s.name == k.as_str())) {
            return Err(ConfigError::new(unknown.clone(), format!("not a key of `{kind}`")));
        }
        let mut values = BTreeMap::new();
        for key in &schema {
            let v = raw.get(key.name).map(String::as_str).unwrap_or(key.default);
            if v.is_empty() {
                return Err(ConfigError::new(key.name, "required"));
            }
            check(key, v)?;
            values.insert(key.name.to_string(), v.to_string());
        }
        Ok(Self { kind, seed, values })
    }

    /// Defaults only.
    pub fn defaults(kind: Kind) -> Result<Self, ConfigError> {
        Self::parse("", Some(kind))
    }

    pub fn values(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    /// The resolved configuration in canonical form.
    pub fn canonical(&self) -> String {
        let mut s = format!("kind = {}\nseed = {}\n", self.kind, self.seed);
        for (k, v) in &self.values {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    /// SHA-256 of [`Self::canonical`], hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("`{key}` is not in the `{}` schema", self.kind))
    }

    pub fn f64(&self, key: &str) -> f64 {
        self.raw(key).parse().expect("validated")
    }

    pub fn usize(&self, key: &str) -> Result<usize, ConfigError> {
        self.raw(key).parse().map_err(|_| ConfigError::new(key.to_string(), "must be non-negative"))
    }

    pub fn word(&self, key: &str) -> &str {
        self.raw(key)
    }

    pub fn f64_list(&self, key: &str) -> Option<Vec<f64>> {
        match self.raw(key) {
            "auto" => None,
            v => Some(list(key, v, ',').expect("validated")),
        }
    }

    pub fn i64_list(&self, key: &str) -> Vec<i64> {
        list(key, self.raw(key), ',').expect("validated")
    }

    pub fn points(&self, key: &str) -> Vec<Vec<i64>> {
        self.raw(key).split(';').map(|p| list(key, p, ',').expect("validated")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_for_every_kind_but_rate_fit() {
        for kind in Kind::ALL {
            let r = ExperimentConfig::defaults(kind);
            assert_eq!(r.is_err(), kind == Kind::RateFit, "{kind}");
        }
    }

    #[test]
    fn odd_side_names_the_field() {
        let e = ExperimentConfig::parse("kind = greens\nL = 7\n", None).unwrap_err();
        assert_eq!(e.field, "L");
    }

    #[test]
    fn unknown_and_duplicate_keys_are_rejected() {
        assert_eq!(ExperimentConfig::parse("kind = greens\nLL = 8\n", None).unwrap_err().field, "LL");
        assert_eq!(ExperimentConfig::parse("kind = greens\nL = 8\nL = 8\n", None).unwrap_err().field, "L");
        assert_eq!(ExperimentConfig::parse("kind = greens\n", Some(Kind::Thm13)).unwrap_err().field, "kind");
    }

    #[test]
    fn canonical_form_ignores_layout() {
        let a = ExperimentConfig::parse("kind = poincare\n# note\nsamples = 100\nseed = 3\n", None).unwrap();
        let b = ExperimentConfig::parse("seed=3\n  samples =100  \nkind=poincare", None).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = ExperimentConfig::parse("kind = poincare\nsamples = 101\nseed = 3\n", None).unwrap();
        assert_ne!(a.hash(), c.hash());
    }
}
