//! Exact sampling of the stationary Gaussian process of the quadratic
//! dynamics `dφ = −½(∇*∇ + m²)φ dt + dB`, one Ornstein–Uhlenbeck process per
//! real Fourier mode.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{FieldTrajectory, Potential, Provenance};
use crate::error::{config, Error, Result};
use crate::lattice::PeriodicCube;
use crate::rng::SeedRecord;

/// Real orthonormal eigenbasis of the periodic 1D Laplacian on `Z_L`,
/// `matrix[b * L + x]`. Basis vector `b` has eigenvalue `eig[b]`.
#[derive(Clone, Debug)]
pub struct RealFourierBasis {
    side: usize,
    matrix: Vec<f64>,
    eig: Vec<f64>,
}

impl RealFourierBasis {
    pub fn new(side: usize) -> Self {
        let l = side as f64;
        let half = side / 2;
        let mut matrix = vec![0.0; side * side];
        let mut eig = vec![0.0; side];
        let tau = 2.0 * std::f64::consts::PI;
        for b in 0..side {
            let (freq, kind) = match b {
                0 => (0, 0),
                b if b < half => (b, 1),
                b if b == half => (half, 0),
                b => (b - half, 2),
            };
            eig[b] = 4.0 * (std::f64::consts::PI * freq as f64 / l).sin().powi(2);
            for x in 0..side {
                let arg = tau * (freq * x) as f64 / l;
                matrix[b * side + x] = match kind {
                    0 => arg.cos() / l.sqrt(),
                    1 => arg.cos() * (2.0 / l).sqrt(),
                    _ => arg.sin() * (2.0 / l).sqrt(),
                };
            }
        }
        Self { side, matrix, eig }
    }

    pub fn eigenvalue(&self, b: usize) -> f64 {
        self.eig[b]
    }

    /// Eigenvalue of `∇*∇` on the cube for every tensor-product mode, in site order.
    pub fn symbols(&self, cube: &PeriodicCube) -> Vec<f64> {
        (0..cube.volume())
            .map(|i| cube.coords(i).iter().map(|&b| self.eig[b as usize]).sum())
            .collect()
    }

    /// Maps mode coefficients to field values, axis by axis.
    pub fn synthesize(&self, cube: &PeriodicCube, coeffs: &[f64], out: &mut [f64]) {
        self.transform(cube, coeffs, out, false);
    }

    /// Maps field values to mode coefficients (the transpose map).
    pub fn analyze(&self, cube: &PeriodicCube, values: &[f64], out: &mut [f64]) {
        self.transform(cube, values, out, true);
    }

    fn transform(&self, cube: &PeriodicCube, input: &[f64], out: &mut [f64], transpose: bool) {
        let l = self.side;
        let n = cube.volume();
        let mut cur = input.to_vec();
        let mut next = vec![0.0; n];
        for axis in 0..cube.dim() {
            let stride = l.pow((cube.dim() - 1 - axis) as u32);
            for base in 0..n {
                if (base / stride) % l != 0 {
                    continue;
                }
                for o in 0..l {
                    let mut acc = 0.0;
                    for i in 0..l {
                        let m = if transpose { self.matrix[o * l + i] } else { self.matrix[i * l + o] };
                        acc += m * cur[base + i * stride];
                    }
                    next[base + o * stride] = acc;
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        out.copy_from_slice(&cur);
    }
}

/// Draws `n_times` slices spaced by `dt` of the stationary massive Gaussian field.
pub fn gaussian_field_sample(
    cube: &PeriodicCube,
    mass: f64,
    dt: f64,
    n_times: usize,
    seed: SeedRecord,
) -> Result<FieldTrajectory> {
    if mass == 0.0 {
        return Err(Error::Unsupported("the massless Gaussian field has no stationary law".into()));
    }
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(config("m", format!("mass must be positive, got {mass}")));
    }
    if !(dt > 0.0) {
        return Err(config("dt", format!("time step must be positive, got {dt}")));
    }
    if n_times == 0 {
        return Err(config("n_times", "need at least one time slice"));
    }
    let basis = RealFourierBasis::new(cube.side());
    let symbols: Vec<f64> = basis.symbols(cube).into_iter().map(|s| s + mass * mass).collect();
    let n = cube.volume();
    let mut rng = seed.rng();
    let mut c: Vec<f64> = symbols
        .iter()
        .map(|&a| {
            let z: f64 = rng.sample(StandardNormal);
            z / a.sqrt()
        })
        .collect();
    let rho: Vec<f64> = symbols.iter().map(|&a| (-a * dt / 2.0).exp()).collect();
    let kick: Vec<f64> = symbols.iter().zip(&rho).map(|(&a, &r)| ((1.0 - r * r) / a).sqrt()).collect();
    let mut values = vec![0.0; n * n_times];
    for i in 0..n_times {
        if i > 0 {
            for k in 0..n {
                let z: f64 = rng.sample(StandardNormal);
                c[k] = rho[k] * c[k] + kick[k] * z;
            }
        }
        basis.synthesize(cube, &c, &mut values[i * n..(i + 1) * n]);
    }
    let provenance = Provenance {
        sampler: "gaussian".into(),
        potential: Potential::Quadratic { c: 1.0 },
        mass,
        burn_in: 0,
        seed,
    };
    Ok(FieldTrajectory::new(cube.clone(), 0.0, dt, values, provenance))
}

/// `(∇*∇ + m²)^{-1}(x, 0)` on the cube by the Fourier sum.
pub fn massive_green_periodic(cube: &PeriodicCube, mass: f64, x: usize) -> f64 {
    let l = cube.side() as f64;
    let tau = 2.0 * std::f64::consts::PI;
    let c = cube.coords(x);
    let mut acc = 0.0;
    for k in 0..cube.volume() {
        let kc = cube.coords(k);
        let mut sym = mass * mass;
        let mut phase = 0.0;
        for j in 0..cube.dim() {
            sym += 4.0 * (std::f64::consts::PI * kc[j] as f64 / l).sin().powi(2);
            phase += tau * (kc[j] * c[j]) as f64 / l;
        }
        acc += phase.cos() / sym;
    }
    acc / cube.volume() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::laplacian;

    #[test]
    fn basis_is_orthonormal_and_diagonalizes_laplacian() {
        let cube = PeriodicCube::new(2, 6).unwrap();
        let basis = RealFourierBasis::new(6);
        let sym = basis.symbols(&cube);
        let n = cube.volume();
        for k in 0..n {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            let mut v = vec![0.0; n];
            basis.synthesize(&cube, &e, &mut v);
            assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-13);
            let mut lv = vec![0.0; n];
            laplacian(&cube, &v, &mut lv);
            for x in 0..n {
                assert!((lv[x] - sym[k] * v[x]).abs() < 1e-12);
            }
            let mut back = vec![0.0; n];
            basis.analyze(&cube, &v, &mut back);
            for j in 0..n {
                assert!((back[j] - e[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn massive_green_at_origin() {
        let cube = PeriodicCube::new(1, 16).unwrap();
        let g = massive_green_periodic(&cube, 1.0, 0);
        assert!((g - 1.0 / 5f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn equal_seeds_are_bit_identical() {
        let cube = PeriodicCube::new(2, 4).unwrap();
        let a = gaussian_field_sample(&cube, 0.7, 0.1, 5, SeedRecord::new(1, 2)).unwrap();
        let b = gaussian_field_sample(&cube, 0.7, 0.1, 5, SeedRecord::new(1, 2)).unwrap();
        assert_eq!(a.values(), b.values());
    }
}
