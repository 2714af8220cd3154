use crate::lattice::PeriodicCube;

/// A real space-time field on the cube, slice `i` at `t_0 + i·Δt`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeField {
    cube: PeriodicCube,
    t0: f64,
    dt: f64,
    values: Vec<f64>,
}

impl SpaceTimeField {
    pub fn zeros(cube: &PeriodicCube, t0: f64, dt: f64, n_times: usize) -> Self {
        Self { cube: cube.clone(), t0, dt, values: vec![0.0; n_times * cube.volume()] }
    }

    pub fn from_values(cube: &PeriodicCube, t0: f64, dt: f64, values: Vec<f64>) -> Self {
        assert_eq!(values.len() % cube.volume(), 0, "values must fill whole time slices");
        Self { cube: cube.clone(), t0, dt, values }
    }

    pub fn cube(&self) -> &PeriodicCube {
        &self.cube
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_times(&self) -> usize {
        self.values.len() / self.cube.volume()
    }

    pub fn slice(&self, i: usize) -> &[f64] {
        let n = self.cube.volume();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn slice_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.cube.volume();
        &mut self.values[i * n..(i + 1) * n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(Σ_i Δt Σ_y |u(y, t_i)|²)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        (self.dt * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    /// Index of the last slice with a nonzero entry.
    pub fn last_nonzero(&self) -> Option<usize> {
        (0..self.n_times()).rev().find(|&i| self.slice(i).iter().any(|v| *v != 0.0))
    }

    pub fn first_nonzero(&self) -> Option<usize> {
        (0..self.n_times()).find(|&i| self.slice(i).iter().any(|v| *v != 0.0))
    }
}
