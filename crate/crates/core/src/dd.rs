//! Double-description conversion from an inequality description
//! `{x : a_i · x <= 0}` of a polyhedral cone to its generators
//! (extreme rays plus a lineality basis).
//!
//! Constraints are added one at a time. Lineality directions are consumed
//! first; afterwards new rays come from adjacent (positive, negative) pairs,
//! with adjacency decided by the combinatorial zero-set test.

use crate::error::{GeomError, Result};
use crate::kernel::{orthonormalize, Vector};

pub(crate) const DD_EPS: f64 = 1e-9;
const MAX_CONSTRAINTS: usize = 128;

#[derive(Clone, Debug, Default)]
pub(crate) struct ConeGenerators {
    pub rays: Vec<Vector>,
    pub lineality: Vec<Vector>,
}

impl ConeGenerators {
    /// Rays followed by both signs of every lineality vector.
    pub fn all_generators(&self) -> Vec<Vector> {
        let mut out = self.rays.clone();
        for l in &self.lineality {
            out.push(*l);
            out.push(-*l);
        }
        out
    }
}

struct Ray {
    dir: Vector,
    zeros: u128,
}

pub(crate) fn cone_from_constraints(dim: usize, constraints: &[Vector]) -> Result<ConeGenerators> {
    let rows: Vec<Vector> = constraints.iter().filter_map(|a| a.normalized()).collect();
    if rows.len() > MAX_CONSTRAINTS {
        return Err(GeomError::Unsupported(format!(
            "{} constraints exceed the double-description limit of {MAX_CONSTRAINTS}",
            rows.len()
        )));
    }
    let mut lineality: Vec<Vector> = (0..dim).map(|i| Vector::unit(dim, i)).collect();
    let mut rays: Vec<Ray> = Vec::new();

    for (k, a) in rows.iter().enumerate() {
        let bit = 1u128 << k;
        let pivot = lineality
            .iter()
            .enumerate()
            .map(|(i, l)| (i, a.dot(l)))
            .filter(|(_, s)| s.abs() > DD_EPS)
            .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()));

        if let Some((pi, al)) = pivot {
            let l = lineality.remove(pi);
            let rest: Vec<Vector> = lineality
                .iter()
                .map(|m| m.axpy(-a.dot(m) / al, &l))
                .collect();
            lineality = orthonormalize(&rest, DD_EPS);
            for r in &mut rays {
                let shifted = r.dir.axpy(-a.dot(&r.dir) / al, &l);
                if let Some(u) = shifted.normalized() {
                    r.dir = u;
                }
                r.zeros |= bit;
            }
            let new_dir = (l * (-al.signum())).normalized().expect("unit pivot");
            rays.push(Ray {
                dir: new_dir,
                zeros: bit - 1,
            });
            continue;
        }

        let values: Vec<f64> = rays.iter().map(|r| a.dot(&r.dir)).collect();
        let pos: Vec<usize> = (0..rays.len()).filter(|&i| values[i] > DD_EPS).collect();
        if pos.is_empty() {
            for (r, s) in rays.iter_mut().zip(&values) {
                if s.abs() <= DD_EPS {
                    r.zeros |= bit;
                }
            }
            continue;
        }
        let neg: Vec<usize> = (0..rays.len()).filter(|&i| values[i] < -DD_EPS).collect();

        let mut created = Vec::new();
        for &p in &pos {
            for &n in &neg {
                let common = rays[p].zeros & rays[n].zeros;
                let adjacent = rays.iter().enumerate().all(|(i, r)| {
                    i == p || i == n || (r.zeros & common) != common
                });
                if !adjacent {
                    continue;
                }
                let w = rays[n].dir * values[p] - rays[p].dir * values[n];
                if let Some(u) = w.normalized() {
                    created.push(Ray {
                        dir: u,
                        zeros: common | bit,
                    });
                }
            }
        }
        let mut next: Vec<Ray> = Vec::with_capacity(rays.len() + created.len());
        for (i, mut r) in rays.into_iter().enumerate() {
            if values[i] > DD_EPS {
                continue;
            }
            if values[i].abs() <= DD_EPS {
                r.zeros |= bit;
            }
            next.push(r);
        }
        for c in created {
            if !next.iter().any(|r| r.dir.dist(&c.dir) < 1e-9) {
                next.push(c);
            }
        }
        rays = next;
    }

    Ok(ConeGenerators {
        rays: rays.into_iter().map(|r| r.dir).collect(),
        lineality,
    })
}
