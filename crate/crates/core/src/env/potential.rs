use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::matrix::EllipticityPair;

/// Separable nearest-neighbor potentials `V(z) = Σ_j v(z_j)`, so `V''` is diagonal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "lowercase")]
pub enum Potential {
    /// `V(z) = c|z|²/2`.
    Quadratic { c: f64 },
    /// `V(z) = c|z|²/2 + a Σ_j cos z_j`, uniformly convex when `|a| < c`.
    Dipole { c: f64, a: f64 },
}

impl Potential {
    pub fn quadratic(c: f64) -> Result<Self> {
        let p = Self::Quadratic { c };
        p.validate()?;
        Ok(p)
    }

    pub fn dipole(c: f64, a: f64) -> Result<Self> {
        let p = Self::Dipole { c, a };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Quadratic { c } if !(c > 0.0 && c.is_finite()) => {
                Err(config("c", format!("quadratic weight must be positive, got {c}")))
            }
            Self::Dipole { c, .. } if !(c > 0.0 && c.is_finite()) => {
                Err(config("c", format!("quadratic weight must be positive, got {c}")))
            }
            Self::Dipole { c, a } if !(a.abs() < c) => {
                Err(config("a_dip", format!("need |a_dip| < c for convexity, got a_dip={a}, c={c}")))
            }
            _ => Ok(()),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Self::Quadratic { .. } => "quadratic",
            Self::Dipole { .. } => "dipole",
        }
    }

    /// The window `[λ, Λ]` containing every diagonal entry of `V''`.
    pub fn window(&self) -> EllipticityPair {
        let (lo, hi) = match *self {
            Self::Quadratic { c } => (c, c),
            Self::Dipole { c, a } => (c - a.abs(), c + a.abs()),
        };
        EllipticityPair::new(lo, hi).expect("validated potential has a valid window")
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        match *self {
            Self::Quadratic { c } => z.iter().map(|x| 0.5 * c * x * x).sum(),
            Self::Dipole { c, a } => z.iter().map(|x| 0.5 * c * x * x + a * x.cos()).sum(),
        }
    }

    /// One component of `V'`, as a function of that component of `z`.
    #[inline]
    pub fn d1(&self, z: f64) -> f64 {
        match *self {
            Self::Quadratic { c } => c * z,
            Self::Dipole { c, a } => c * z - a * z.sin(),
        }
    }

    /// One diagonal entry of `V''`.
    #[inline]
    pub fn d2(&self, z: f64) -> f64 {
        match *self {
            Self::Quadratic { c } => c,
            Self::Dipole { c, a } => c - a * z.cos(),
        }
    }

    #[inline]
    pub fn d3(&self, z: f64) -> f64 {
        match *self {
            Self::Quadratic { .. } => 0.0,
            Self::Dipole { a, .. } => a * z.sin(),
        }
    }
}
