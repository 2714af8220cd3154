use serde::{Deserialize, Serialize};

use super::Potential;
use crate::lattice::PeriodicCube;
use crate::rng::SeedRecord;

/// Where a trajectory came from, enough to regenerate it bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub sampler: String,
    pub potential: Potential,
    pub mass: f64,
    pub burn_in: usize,
    pub seed: SeedRecord,
}

/// A scalar field `φ(x, t_i)` on a periodic cube and a uniform time grid
/// `t_i = t_0 + i·Δt`. Slice `i` holds the field at `t_i` in site order.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldTrajectory {
    cube: PeriodicCube,
    t0: f64,
    dt: f64,
    values: Vec<f64>,
    provenance: Provenance,
}

impl FieldTrajectory {
    pub fn new(cube: PeriodicCube, t0: f64, dt: f64, values: Vec<f64>, provenance: Provenance) -> Self {
        assert_eq!(values.len() % cube.volume(), 0, "values must fill whole time slices");
        Self { cube, t0, dt, values, provenance }
    }

    pub fn cube(&self) -> &PeriodicCube {
        &self.cube
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn n_times(&self) -> usize {
        self.values.len() / self.cube.volume()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn slice(&self, i: usize) -> &[f64] {
        let n = self.cube.volume();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn at(&self, x: usize, i: usize) -> f64 {
        self.values[i * self.cube.volume() + x]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
