//! Lattice geometry, discrete calculus and exact constant-coefficient kernels.
//!
//! Sites of the periodic cube `Q_L ⊂ Z^d` are stored in a flat array in
//! row-major order: the site with coordinates `(x_0, …, x_{d-1})`, each in
//! `0..L`, lives at index `Σ_j x_j · L^(d-1-j)`. Scalar fields are slices of
//! length `L^d`; vector fields are component-major slices of length `d·L^d`
//! where component `j` of site `i` sits at `j·L^d + i`.

mod bessel;
mod calculus;
mod kernels;

pub use bessel::{ln_factorial, scaled_bessel_i};
pub use calculus::{
    discrete_divergence, discrete_gradient, divergence, div_a_grad, div_a_grad_diag, gradient,
    inner, laplacian, norm2,
};
pub use kernels::{
    heat_kernel, heat_kernel_bound_constant, heat_kernel_box, heat_kernel_diag, heat_kernel_tail_radius,
    hom_gaussian_kernel, BoxField,
};

use crate::error::{config, Error, Result};

/// A periodic cube of side `L` in `d` dimensions with wraparound indexing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PeriodicCube {
    dim: usize,
    side: usize,
    volume: usize,
    // plus[j * volume + i] is the index of i + e_j; minus likewise for i - e_j.
    plus: Vec<usize>,
    minus: Vec<usize>,
}

impl PeriodicCube {
    pub fn new(dim: usize, side: usize) -> Result<Self> {
        if dim == 0 {
            return Err(config("d", "dimension must be at least 1"));
        }
        if side < 2 || side % 2 != 0 {
            return Err(config("L", format!("side length must be an even integer >= 2, got {side}")));
        }
        let volume = side
            .checked_pow(dim as u32)
            .filter(|v| *v <= 1 << 28)
            .ok_or_else(|| config("L", "cube volume too large"))?;
        let mut plus = vec![0; dim * volume];
        let mut minus = vec![0; dim * volume];
        let mut coords = vec![0usize; dim];
        for i in 0..volume {
            for j in 0..dim {
                let stride = side.pow((dim - 1 - j) as u32);
                let up = if coords[j] + 1 == side { i + stride - side * stride } else { i + stride };
                let down = if coords[j] == 0 { i + side * stride - stride } else { i - stride };
                plus[j * volume + i] = up;
                minus[j * volume + i] = down;
            }
            // advance the row-major odometer
            for j in (0..dim).rev() {
                coords[j] += 1;
                if coords[j] < side {
                    break;
                }
                coords[j] = 0;
            }
        }
        Ok(Self { dim, side, volume, plus, minus })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn side(&self) -> usize {
        self.side
    }

    /// Number of sites, `L^d`.
    #[inline]
    pub fn volume(&self) -> usize {
        self.volume
    }

    /// Index of `i + e_dir`.
    #[inline]
    pub fn up(&self, dir: usize, i: usize) -> usize {
        self.plus[dir * self.volume + i]
    }

    /// Index of `i - e_dir`.
    #[inline]
    pub fn down(&self, dir: usize, i: usize) -> usize {
        self.minus[dir * self.volume + i]
    }

    pub fn check(&self, i: usize) -> Result<()> {
        if i < self.volume {
            Ok(())
        } else {
            Err(Error::Index { index: i, size: self.volume })
        }
    }

    /// Index of an arbitrary point of `Z^d`, reduced modulo `L` in every coordinate.
    pub fn index(&self, point: &[i64]) -> usize {
        debug_assert_eq!(point.len(), self.dim);
        let l = self.side as i64;
        point.iter().fold(0usize, |acc, &x| acc * self.side + x.rem_euclid(l) as usize)
    }

    /// Coordinates in `0..L`.
    pub fn coords(&self, mut i: usize) -> Vec<i64> {
        let mut out = vec![0i64; self.dim];
        for j in (0..self.dim).rev() {
            out[j] = (i % self.side) as i64;
            i /= self.side;
        }
        out
    }

    /// Coordinates of the representative in `[-L/2, L/2)`.
    pub fn centered(&self, i: usize) -> Vec<i64> {
        let half = (self.side / 2) as i64;
        let l = self.side as i64;
        self.coords(i).into_iter().map(|x| if x >= half { x - l } else { x }).collect()
    }

    /// Index of `i + j` (sum of lattice vectors modulo `L`).
    pub fn translate(&self, i: usize, j: usize) -> usize {
        let a = self.coords(i);
        let b = self.coords(j);
        let p: Vec<i64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        self.index(&p)
    }

    /// Index of `i - j`.
    pub fn difference(&self, i: usize, j: usize) -> usize {
        let a = self.coords(i);
        let b = self.coords(j);
        let p: Vec<i64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        self.index(&p)
    }

    /// Euclidean length of the minimal-image representative of site `i`.
    pub fn periodic_norm(&self, i: usize) -> f64 {
        self.centered(i).iter().map(|&x| (x * x) as f64).sum::<f64>().sqrt()
    }

    /// Minimal-image distance between two sites.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.periodic_norm(self.difference(i, j))
    }

    /// The site at the origin.
    #[inline]
    pub fn origin(&self) -> usize {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_odd_or_small_side() {
        assert!(matches!(PeriodicCube::new(2, 5), Err(Error::Config { field: "L", .. })));
        assert!(PeriodicCube::new(1, 0).is_err());
        assert!(PeriodicCube::new(0, 4).is_err());
        assert!(PeriodicCube::new(3, 2).is_ok());
    }

    #[test]
    fn neighbors_wrap_and_are_distinct() {
        let cube = PeriodicCube::new(3, 4).unwrap();
        for i in 0..cube.volume() {
            let mut nbrs = Vec::new();
            for j in 0..3 {
                assert_eq!(cube.down(j, cube.up(j, i)), i);
                nbrs.push(cube.up(j, i));
                nbrs.push(cube.down(j, i));
            }
            nbrs.sort_unstable();
            nbrs.dedup();
            assert_eq!(nbrs.len(), 6);
        }
    }

    #[test]
    fn index_is_a_bijection_on_representatives() {
        let cube = PeriodicCube::new(2, 6).unwrap();
        for i in 0..cube.volume() {
            assert_eq!(cube.index(&cube.coords(i)), i);
            assert_eq!(cube.index(&cube.centered(i)), i);
        }
        assert_eq!(cube.index(&[-1, 7]), cube.index(&[5, 1]));
        assert_eq!(cube.index(&[0, 1]), 1);
        assert_eq!(cube.index(&[1, 0]), 6);
    }

    #[test]
    fn row_major_layout() {
        let cube = PeriodicCube::new(2, 4).unwrap();
        assert_eq!(cube.up(1, 0), 1);
        assert_eq!(cube.up(0, 0), 4);
        assert_eq!(cube.down(1, 0), 3);
        assert_eq!(cube.centered(3), vec![0, -1]);
    }
}
