//! Point sampling on closed sets and Hausdorff distances between them.

use serde::Serialize;

use super::ClosedSet;
use crate::error::{check_dim, GeomError, Result};
use crate::kernel::Vector;
use crate::rng::{simplex_weights, stream_rng, unit_vector};

impl ClosedSet {
    /// Deterministic sample of points lying on the set, concentrated on its
    /// topological boundary. Polytopes contribute every vertex first, then
    /// random relative-interior points of the proper faces in round-robin
    /// order of face dimension.
    pub fn sample_boundary(&self, count: usize, seed: u64) -> Vec<Vector> {
        let mut rng = stream_rng(seed, 0xB0);
        let n = self.ambient_dim();
        match self {
            ClosedSet::HPolytope { polytope, .. } | ClosedSet::VPolytope { polytope, .. } => {
                let mut out: Vec<Vector> = polytope.vertices().iter().take(count).copied().collect();
                let full = polytope.dim() == n;
                let faces: Vec<_> = polytope
                    .faces()
                    .iter()
                    .filter(|f| f.dim >= 1 && !(full && f.dim == n))
                    .collect();
                if faces.is_empty() {
                    return out;
                }
                let max_dim = faces.iter().map(|f| f.dim).max().unwrap_or(1);
                let by_dim: Vec<Vec<_>> = (1..=max_dim)
                    .map(|d| faces.iter().filter(|f| f.dim == d).copied().collect())
                    .filter(|g: &Vec<_>| !g.is_empty())
                    .collect();
                let mut k = 0usize;
                while out.len() < count {
                    let group = &by_dim[k % by_dim.len()];
                    let face = group[(k / by_dim.len()) % group.len()];
                    let w = simplex_weights(&mut rng, face.vertices.len());
                    let p = face
                        .vertices
                        .iter()
                        .zip(&w)
                        .fold(Vector::zeros(n), |acc, (&j, wj)| {
                            acc.axpy(*wj, &polytope.vertices()[j])
                        });
                    out.push(p);
                    k += 1;
                }
                out
            }
            ClosedSet::Ball { center, radius } | ClosedSet::Sphere { center, radius } => (0..count)
                .map(|_| center.axpy(*radius, &unit_vector(&mut rng, n)))
                .collect(),
            ClosedSet::Flat(f) => (0..count)
                .map(|_| {
                    let c: Vec<f64> = (0..f.dim()).map(|_| 2.0 * rand::Rng::random::<f64>(&mut rng) - 1.0).collect();
                    f.at(&c)
                })
                .collect(),
            ClosedSet::PointCloud(pts) => pts.iter().cycle().take(count.min(pts.len())).copied().collect(),
            ClosedSet::Union(parts) => {
                let per = count.div_ceil(parts.len());
                let mut out = Vec::new();
                for (i, p) in parts.iter().enumerate() {
                    out.extend(p.sample_boundary(per, seed.wrapping_add(i as u64 + 1)));
                }
                out.truncate(count);
                out
            }
        }
    }

    /// Points of the set within `step * sqrt(n)` of every point of the set:
    /// projections of the grid nodes (spacing `step`) near the set, plus the
    /// axis extremes of round primitives.
    pub fn covering_sample(&self, step: f64) -> Result<Vec<Vector>> {
        let (lo, hi) = self
            .bounds()
            .ok_or_else(|| GeomError::Unsupported("unbounded set cannot be sampled".into()))?;
        if !(step > 0.0) {
            return Err(GeomError::InvalidInput("sampling step must be positive".into()));
        }
        let n = self.ambient_dim();
        let reach = 0.5 * step * (n as f64).sqrt();
        let counts: Vec<usize> = (0..n)
            .map(|i| ((hi[i] - lo[i] + 2.0 * step) / step).ceil() as usize + 1)
            .collect();
        let total: usize = counts.iter().product();
        if total > 50_000_000 {
            return Err(GeomError::Unsupported(format!(
                "covering grid of {total} nodes is too fine"
            )));
        }
        let tol = self.default_tol_unique();
        let mut out = Vec::new();
        let mut idx = vec![0usize; n];
        for _ in 0..total {
            let mut x = Vector::zeros(n);
            for i in 0..n {
                x[i] = lo[i] - step + idx[i] as f64 * step;
            }
            if self.distance(&x) <= reach {
                out.push(self.nearest_point_set(&x, tol).nearest[0]);
            }
            for i in 0..n {
                idx[i] += 1;
                if idx[i] < counts[i] {
                    break;
                }
                idx[i] = 0;
            }
        }
        self.push_extremes(&mut out);
        Ok(out)
    }

    fn push_extremes(&self, out: &mut Vec<Vector>) {
        let n = self.ambient_dim();
        match self {
            ClosedSet::Ball { center, radius } | ClosedSet::Sphere { center, radius } => {
                for i in 0..n {
                    let e = Vector::unit(n, i) * *radius;
                    out.push(*center + e);
                    out.push(*center - e);
                }
            }
            ClosedSet::HPolytope { polytope, .. } | ClosedSet::VPolytope { polytope, .. } => {
                out.extend(polytope.vertices().iter().copied());
            }
            ClosedSet::PointCloud(pts) => out.extend(pts.iter().copied()),
            ClosedSet::Flat(f) => out.push(*f.base()),
            ClosedSet::Union(parts) => parts.iter().for_each(|p| p.push_extremes(out)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HausdorffEstimate {
    pub value: f64,
    /// Zero when exact; otherwise the covering radius of the sample used.
    pub sampling_error: f64,
    pub step: f64,
}

/// `sup_{a in from} dist(a, to)` together with its sampling error.
fn one_sided(from: &ClosedSet, to: &ClosedSet, step: f64) -> Result<(f64, f64)> {
    let sup = |pts: &[Vector]| pts.iter().map(|p| to.distance(p)).fold(0.0_f64, f64::max);
    match from {
        ClosedSet::PointCloud(pts) => Ok((sup(pts), 0.0)),
        // distance to a convex set is convex, so the sup over a polytope is
        // attained at a vertex
        ClosedSet::HPolytope { polytope, .. } | ClosedSet::VPolytope { polytope, .. } if to.is_convex() => {
            Ok((sup(polytope.vertices()), 0.0))
        }
        ClosedSet::Flat(f) if f.dim() == 0 => Ok((to.distance(f.base()), 0.0)),
        ClosedSet::Union(parts) => {
            let mut best = (0.0_f64, 0.0_f64);
            for p in parts {
                let (v, e) = one_sided(p, to, step)?;
                best = (best.0.max(v), best.1.max(e));
            }
            Ok(best)
        }
        _ => {
            let pts = from.covering_sample(step)?;
            Ok((sup(&pts), step * (from.ambient_dim() as f64).sqrt()))
        }
    }
}

/// Hausdorff distance between two bounded closed sets. Exact for pairs of
/// polytopes and for finite sets; otherwise sampled at resolution `step`,
/// with the resulting error bound reported.
pub fn hausdorff_distance_sets(a: &ClosedSet, b: &ClosedSet, step: f64) -> Result<HausdorffEstimate> {
    check_dim(a.ambient_dim(), b.ambient_dim())?;
    if !a.is_bounded() || !b.is_bounded() {
        return Err(GeomError::Unsupported(
            "hausdorff distance requires bounded sets".into(),
        ));
    }
    let (ab, e1) = one_sided(a, b, step)?;
    let (ba, e2) = one_sided(b, a, step)?;
    Ok(HausdorffEstimate {
        value: ab.max(ba),
        sampling_error: e1.max(e2),
        step,
    })
}
