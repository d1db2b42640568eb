//! Deterministic random streams and low-discrepancy sphere directions.
//!
//! Every stochastic routine takes a `(seed, stream)` pair so results never
//! depend on how work is scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::kernel::Vector;

/// SplitMix64 finalizer.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    mix(seed ^ mix(stream.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream))
}

pub fn gaussian_vector<R: Rng>(rng: &mut R, dim: usize) -> Vector {
    let mut v = Vector::zeros(dim);
    for i in 0..dim {
        v[i] = StandardNormal.sample(rng);
    }
    v
}

/// Uniformly distributed unit vector.
pub fn unit_vector<R: Rng>(rng: &mut R, dim: usize) -> Vector {
    loop {
        if let Some(u) = gaussian_vector(rng, dim).normalized() {
            return u;
        }
    }
}

/// Uniform point in the box `[lo, hi]`.
pub fn uniform_in_box<R: Rng>(rng: &mut R, lo: &Vector, hi: &Vector) -> Vector {
    let mut v = *lo;
    for i in 0..lo.dim() {
        v[i] = lo[i] + (hi[i] - lo[i]) * rng.random::<f64>();
    }
    v
}

/// Flat Dirichlet weights (uniform on the simplex).
pub fn simplex_weights<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k)
        .map(|_| -(1.0 - rng.random::<f64>()).ln())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// `count` unit directions in R^dim from a randomly shifted Halton sequence
/// turned into Gaussian coordinates by the Box-Muller map. In the plane the directions are
/// equally spaced angles with a random phase.
pub fn sphere_directions(dim: usize, count: usize, seed: u64, stream: u64) -> Vec<Vector> {
    let mut rng = stream_rng(seed, stream);
    match dim {
        0 => Vec::new(),
        1 => (0..count)
            .map(|i| Vector::from_slice(&[if i % 2 == 0 { 1.0 } else { -1.0 }]))
            .collect(),
        2 => {
            let phase: f64 = rng.random();
            (0..count)
                .map(|i| {
                    let t = std::f64::consts::TAU * (i as f64 + phase) / count as f64;
                    Vector::from_slice(&[t.cos(), t.sin()])
                })
                .collect()
        }
        _ => {
            let pairs = dim.div_ceil(2);
            let shift: Vec<f64> = (0..2 * pairs).map(|_| rng.random()).collect();
            let mut out = Vec::with_capacity(count);
            let mut i = 1u64;
            while out.len() < count {
                let mut v = Vector::zeros(dim);
                for p in 0..pairs {
                    let u1 = (radical_inverse(i, PRIMES[2 * p]) + shift[2 * p])
                        .fract()
                        .max(1e-300);
                    let u2 = (radical_inverse(i, PRIMES[2 * p + 1]) + shift[2 * p + 1]).fract();
                    let r = (-2.0 * u1.ln()).sqrt();
                    let t = std::f64::consts::TAU * u2;
                    v[2 * p] = r * t.cos();
                    if 2 * p + 1 < dim {
                        v[2 * p + 1] = r * t.sin();
                    }
                }
                if let Some(u) = v.normalized() {
                    out.push(u);
                }
                i += 1;
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directions_are_unit_and_deterministic() {
        for dim in 1..=4 {
            let a = sphere_directions(dim, 50, 7, 3);
            let b = sphere_directions(dim, 50, 7, 3);
            assert_eq!(a, b);
            assert_eq!(a.len(), 50);
            for d in &a {
                assert!((d.norm() - 1.0).abs() < 1e-12);
            }
        }
        assert_ne!(sphere_directions(3, 5, 7, 3), sphere_directions(3, 5, 7, 4));
    }

    #[test]
    fn halton_directions_cover_the_sphere() {
        // every octant of S^2 receives samples
        let dirs = sphere_directions(3, 200, 1, 1);
        let mut seen = [false; 8];
        for d in &dirs {
            let idx = (d[0] > 0.0) as usize | ((d[1] > 0.0) as usize) << 1 | ((d[2] > 0.0) as usize) << 2;
            seen[idx] = true;
        }
        assert!(seen.iter().all(|s| *s));
    }
}
