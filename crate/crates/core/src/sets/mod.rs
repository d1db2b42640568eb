//! Closed subsets of R^n with exact distance and nearest-point oracles.

mod polytope;
mod sample;

use std::sync::Arc;

use serde::Serialize;

pub use polytope::{box_halfspaces, Face, Halfspace, Polytope};
pub use sample::{hausdorff_distance_sets, HausdorffEstimate};

use crate::error::{check_dim, GeomError, Result};
use crate::kernel::{check_same_dim, AffineFlat, Subspace, Vector, MAX_DIM};

/// Absolute tolerance for ties between minimizers.
pub const TOL_DIST: f64 = 1e-10;

/// A closed set built from exact primitives.
///
/// Construct through the associated functions, which validate the payload.
#[derive(Clone, Debug)]
pub enum ClosedSet {
    HPolytope {
        halfspaces: Vec<Halfspace>,
        polytope: Arc<Polytope>,
    },
    VPolytope {
        vertices: Vec<Vector>,
        polytope: Arc<Polytope>,
    },
    Ball {
        center: Vector,
        radius: f64,
    },
    Sphere {
        center: Vector,
        radius: f64,
    },
    Flat(AffineFlat),
    PointCloud(Vec<Vector>),
    Union(Vec<ClosedSet>),
}

/// Nearest points of a set to a query point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProjectionResult {
    pub distance: f64,
    /// Representative minimizers.
    pub nearest: Vec<Vector>,
    /// Upper bound on the diameter of the full set of minimizers.
    pub diameter_bound: f64,
    pub unique: bool,
}

fn check_ambient(dim: usize) -> Result<()> {
    if dim == 0 || dim > MAX_DIM {
        return Err(GeomError::InvalidInput(format!(
            "ambient dimension {dim} outside 1..={MAX_DIM}"
        )));
    }
    Ok(())
}

impl ClosedSet {
    pub fn h_polytope(halfspaces: Vec<Halfspace>) -> Result<Self> {
        let polytope = Arc::new(Polytope::from_halfspaces(&halfspaces)?);
        Ok(ClosedSet::HPolytope {
            halfspaces,
            polytope,
        })
    }

    pub fn v_polytope(vertices: Vec<Vector>) -> Result<Self> {
        let polytope = Arc::new(Polytope::from_vertices(&vertices)?);
        Ok(ClosedSet::VPolytope { vertices, polytope })
    }

    /// Axis-aligned box as an H-polytope.
    pub fn cuboid(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(GeomError::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        Self::h_polytope(box_halfspaces(lo, hi))
    }

    pub fn ball(center: Vector, radius: f64) -> Result<Self> {
        check_ambient(center.dim())?;
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(GeomError::InvalidInput(format!("ball radius {radius}")));
        }
        Ok(ClosedSet::Ball { center, radius })
    }

    pub fn sphere(center: Vector, radius: f64) -> Result<Self> {
        check_ambient(center.dim())?;
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(GeomError::InvalidInput(format!("sphere radius {radius}")));
        }
        Ok(ClosedSet::Sphere { center, radius })
    }

    pub fn flat(flat: AffineFlat) -> Result<Self> {
        check_ambient(flat.ambient_dim())?;
        Ok(ClosedSet::Flat(flat))
    }

    pub fn point_cloud(points: Vec<Vector>) -> Result<Self> {
        if points.is_empty() {
            return Err(GeomError::InvalidInput("empty point cloud".into()));
        }
        check_ambient(check_same_dim(&points)?)?;
        if points.iter().any(|p| !p.is_finite()) {
            return Err(GeomError::InvalidInput("non-finite point".into()));
        }
        Ok(ClosedSet::PointCloud(points))
    }

    pub fn union(parts: Vec<ClosedSet>) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| GeomError::InvalidInput("empty union".into()))?;
        let dim = first.ambient_dim();
        for p in &parts {
            check_dim(dim, p.ambient_dim())?;
        }
        Ok(ClosedSet::Union(parts))
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            ClosedSet::HPolytope { polytope, .. } | ClosedSet::VPolytope { polytope, .. } => {
                polytope.ambient_dim()
            }
            ClosedSet::Ball { center, .. } | ClosedSet::Sphere { center, .. } => center.dim(),
            ClosedSet::Flat(f) => f.ambient_dim(),
            ClosedSet::PointCloud(pts) => pts[0].dim(),
            ClosedSet::Union(parts) => parts[0].ambient_dim(),
        }
    }

    pub fn polytope(&self) -> Option<&Polytope> {
        match self {
            ClosedSet::HPolytope { polytope, .. } | ClosedSet::VPolytope { polytope, .. } => {
                Some(polytope)
            }
            _ => None,
        }
    }

    pub fn is_convex(&self) -> bool {
        match self {
            ClosedSet::HPolytope { .. }
            | ClosedSet::VPolytope { .. }
            | ClosedSet::Ball { .. }
            | ClosedSet::Flat(_) => true,
            ClosedSet::PointCloud(pts) => pts.iter().all(|p| *p == pts[0]),
            ClosedSet::Sphere { .. } | ClosedSet::Union(_) => false,
        }
    }

    pub fn is_bounded(&self) -> bool {
        match self {
            ClosedSet::Flat(f) => f.dim() == 0,
            ClosedSet::Union(parts) => parts.iter().all(|p| p.is_bounded()),
            _ => true,
        }
    }

    /// Axis-aligned bounding box, `None` when unbounded.
    pub fn bounds(&self) -> Option<(Vector, Vector)> {
        let n = self.ambient_dim();
        let from_points = |pts: &[Vector]| {
            let mut lo = pts[0];
            let mut hi = pts[0];
            for p in pts {
                for i in 0..n {
                    lo[i] = lo[i].min(p[i]);
                    hi[i] = hi[i].max(p[i]);
                }
            }
            (lo, hi)
        };
        match self {
            ClosedSet::HPolytope { polytope, .. } | ClosedSet::VPolytope { polytope, .. } => {
                Some(from_points(polytope.vertices()))
            }
            ClosedSet::Ball { center, radius } | ClosedSet::Sphere { center, radius } => {
                let r = Vector::from_slice(&vec![*radius; n]);
                Some((*center - r, *center + r))
            }
            ClosedSet::Flat(f) => (f.dim() == 0).then(|| (*f.base(), *f.base())),
            ClosedSet::PointCloud(pts) => Some(from_points(pts)),
            ClosedSet::Union(parts) => {
                let boxes: Option<Vec<(Vector, Vector)>> = parts.iter().map(|p| p.bounds()).collect();
                let boxes = boxes?;
                let corners: Vec<Vector> = boxes.iter().flat_map(|(a, b)| [*a, *b]).collect();
                Some(from_points(&corners))
            }
        }
    }

    /// Diameter of the set (an upper bound for unions: their bounding-box
    /// diagonal). `None` when unbounded.
    pub fn diameter(&self) -> Option<f64> {
        match self {
            ClosedSet::HPolytope { polytope, .. } | ClosedSet::VPolytope { polytope, .. } => {
                Some(polytope.diameter())
            }
            ClosedSet::Ball { radius, .. } | ClosedSet::Sphere { radius, .. } => Some(2.0 * radius),
            ClosedSet::Flat(f) => (f.dim() == 0).then_some(0.0),
            ClosedSet::PointCloud(pts) => {
                let mut d = 0.0_f64;
                for (i, a) in pts.iter().enumerate() {
                    for b in &pts[i + 1..] {
                        d = d.max(a.dist(b));
                    }
                }
                Some(d)
            }
            ClosedSet::Union(_) => self.bounds().map(|(lo, hi)| lo.dist(&hi)),
        }
    }

    /// Length scale used to make tolerances relative: the diameter, or 1
    /// for unbounded or single-point sets.
    pub fn length_scale(&self) -> f64 {
        match self.diameter() {
            Some(d) if d > 0.0 => d,
            _ => 1.0,
        }
    }

    /// `1e-8` times the length scale.
    pub fn default_tol_unique(&self) -> f64 {
        1e-8 * self.length_scale()
    }

    /// `dist(x, A)`.
    pub fn distance(&self, x: &Vector) -> f64 {
        match self {
            ClosedSet::HPolytope { polytope, .. } | ClosedSet::VPolytope { polytope, .. } => {
                polytope.project(x).1
            }
            ClosedSet::Ball { center, radius } => (x.dist(center) - radius).max(0.0),
            ClosedSet::Sphere { center, radius } => (x.dist(center) - radius).abs(),
            ClosedSet::Flat(f) => f.distance(x),
            ClosedSet::PointCloud(pts) => pts
                .iter()
                .map(|p| p.dist(x))
                .fold(f64::INFINITY, f64::min),
            ClosedSet::Union(parts) => parts
                .iter()
                .map(|p| p.distance(x))
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn nearest_point_set(&self, x: &Vector, tol_unique: f64) -> ProjectionResult {
        let single = |p: Vector, d: f64| ProjectionResult {
            distance: d,
            nearest: vec![p],
            diameter_bound: 0.0,
            unique: true,
        };
        match self {
            ClosedSet::HPolytope { polytope, .. } | ClosedSet::VPolytope { polytope, .. } => {
                let (p, d) = polytope.project(x);
                single(p, d)
            }
            ClosedSet::Ball { center, radius } => {
                let r = x.dist(center);
                if r <= *radius {
                    single(*x, 0.0)
                } else {
                    single(center.axpy(radius / r, &(*x - *center)), r - radius)
                }
            }
            ClosedSet::Sphere { center, radius } => {
                let r = x.dist(center);
                if r > 0.0 {
                    single(center.axpy(radius / r, &(*x - *center)), (r - radius).abs())
                } else {
                    let n = x.dim();
                    let nearest = (0..n)
                        .flat_map(|i| {
                            let e = Vector::unit(n, i) * *radius;
                            [*center + e, *center - e]
                        })
                        .collect();
                    ProjectionResult {
                        distance: *radius,
                        nearest,
                        diameter_bound: 2.0 * radius,
                        unique: 2.0 * radius <= tol_unique,
                    }
                }
            }
            ClosedSet::Flat(f) => {
                let p = f.project(x);
                single(p, x.dist(&p))
            }
            ClosedSet::PointCloud(pts) => {
                let d = self.distance(x);
                let nearest: Vec<Vector> = pts
                    .iter()
                    .filter(|p| p.dist(x) <= d + TOL_DIST)
                    .copied()
                    .collect();
                finish(d, nearest, 0.0, tol_unique)
            }
            ClosedSet::Union(parts) => {
                let results: Vec<ProjectionResult> = parts
                    .iter()
                    .map(|p| p.nearest_point_set(x, tol_unique))
                    .collect();
                let d = results
                    .iter()
                    .map(|r| r.distance)
                    .fold(f64::INFINITY, f64::min);
                let mut nearest = Vec::new();
                let mut part_diam = 0.0_f64;
                for r in results.iter().filter(|r| r.distance <= d + TOL_DIST) {
                    part_diam = part_diam.max(r.diameter_bound);
                    nearest.extend(r.nearest.iter().copied());
                }
                finish(d, nearest, part_diam, tol_unique)
            }
        }
    }

    /// The nearest-point projection, `None` outside its domain (several
    /// nearest points).
    pub fn xi(&self, x: &Vector, tol_unique: f64) -> Option<Vector> {
        let r = self.nearest_point_set(x, tol_unique);
        r.unique.then(|| r.nearest[0])
    }

    /// Directions known to lie in the normal cone at a point of the set.
    /// Used to seed bundle sampling with directions a random sphere sample
    /// would almost surely miss.
    pub fn normal_hints(&self, a: &Vector) -> Vec<Vector> {
        let tol = 1e-9 * self.length_scale();
        match self {
            ClosedSet::HPolytope { polytope, .. } | ClosedSet::VPolytope { polytope, .. } => {
                polytope.normal_cone_generators(a, tol)
            }
            ClosedSet::Ball { center, radius } => {
                let r = a.dist(center);
                if r >= radius - tol && r > 0.0 {
                    vec![(*a - *center) / r]
                } else {
                    Vec::new()
                }
            }
            ClosedSet::Sphere { center, .. } => match (*a - *center).normalized() {
                Some(u) => vec![u, -u],
                None => Vec::new(),
            },
            ClosedSet::Flat(f) => f
                .direction_space()
                .orthogonal_complement()
                .basis()
                .iter()
                .flat_map(|b| [*b, -*b])
                .collect(),
            ClosedSet::PointCloud(_) => Vec::new(),
            ClosedSet::Union(parts) => parts
                .iter()
                .filter(|p| p.distance(a) <= tol)
                .flat_map(|p| p.normal_hints(a))
                .collect(),
        }
    }

    /// Normal space of a flat, exposed for tangent-space checks.
    pub fn flat_normal_space(&self) -> Option<Subspace> {
        match self {
            ClosedSet::Flat(f) => Some(f.direction_space().orthogonal_complement()),
            _ => None,
        }
    }
}

fn finish(distance: f64, nearest: Vec<Vector>, part_diam: f64, tol_unique: f64) -> ProjectionResult {
    let mut diam = part_diam;
    for (i, a) in nearest.iter().enumerate() {
        for b in &nearest[i + 1..] {
            diam = diam.max(a.dist(b));
        }
    }
    ProjectionResult {
        distance,
        nearest,
        diameter_bound: diam,
        unique: diam <= tol_unique,
    }
}

/// `dist(x, A)` with dimension checking.
pub fn distance(set: &ClosedSet, x: &Vector) -> Result<f64> {
    check_dim(set.ambient_dim(), x.dim())?;
    Ok(set.distance(x))
}

pub fn nearest_point_set(set: &ClosedSet, x: &Vector, tol_unique: f64) -> Result<ProjectionResult> {
    check_dim(set.ambient_dim(), x.dim())?;
    if !(tol_unique > 0.0) {
        return Err(GeomError::InvalidInput("tol_unique must be positive".into()));
    }
    Ok(set.nearest_point_set(x, tol_unique))
}

pub fn xi(set: &ClosedSet, x: &Vector, tol_unique: f64) -> Result<Option<Vector>> {
    let r = nearest_point_set(set, x, tol_unique)?;
    Ok(r.unique.then(|| r.nearest[0]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(c: &[f64]) -> Vector {
        Vector::new(c).unwrap()
    }

    #[test]
    fn distance_examples() {
        let ball = ClosedSet::ball(v(&[0.0, 0.0]), 1.0).unwrap();
        assert_abs_diff_eq!(ball.distance(&v(&[2.0, 0.0])), 1.0);
        let square = ClosedSet::cuboid(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(square.distance(&v(&[2.0, 2.0])), 2f64.sqrt(), epsilon = 1e-14);
        let two = ClosedSet::union(vec![
            ClosedSet::ball(v(&[0.0, 0.0]), 1.0).unwrap(),
            ClosedSet::ball(v(&[4.0, 0.0]), 1.0).unwrap(),
        ])
        .unwrap();
        assert_abs_diff_eq!(two.distance(&v(&[2.0, 0.0])), 1.0);
    }

    #[test]
    fn nearest_set_examples() {
        let circle = ClosedSet::sphere(v(&[0.0, 0.0]), 1.0).unwrap();
        let r = circle.nearest_point_set(&v(&[0.0, 0.0]), 1e-8);
        assert_eq!(r.distance, 1.0);
        assert_eq!(r.diameter_bound, 2.0);
        assert!(!r.unique);

        let axis = ClosedSet::flat(AffineFlat::new(v(&[0.0, 0.0]), vec![v(&[1.0, 0.0])]).unwrap()).unwrap();
        let r = axis.nearest_point_set(&v(&[0.0, 3.0]), 1e-8);
        assert!(r.unique);
        assert_eq!(r.nearest, vec![v(&[0.0, 0.0])]);

        let pair = ClosedSet::point_cloud(vec![v(&[-1.0, 0.0]), v(&[1.0, 0.0])]).unwrap();
        let r = pair.nearest_point_set(&v(&[0.0, 0.0]), 1e-8);
        assert_eq!(r.nearest.len(), 2);
        assert_eq!(r.diameter_bound, 2.0);
        assert!(!r.unique);
    }

    #[test]
    fn xi_examples() {
        let square = ClosedSet::cuboid(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let p = square.xi(&v(&[2.0, 0.5]), 1e-8).unwrap();
        assert_abs_diff_eq!(p.dist(&v(&[1.0, 0.5])), 0.0, epsilon = 1e-14);
        let p = square.xi(&v(&[2.0, 2.0]), 1e-8).unwrap();
        assert_abs_diff_eq!(p.dist(&v(&[1.0, 1.0])), 0.0, epsilon = 1e-14);
        let circle = ClosedSet::sphere(v(&[0.0, 0.0]), 1.0).unwrap();
        assert!(circle.xi(&v(&[0.0, 0.0]), 1e-8).is_none());
    }

    #[test]
    fn union_tie_reports_both_parts() {
        let two = ClosedSet::union(vec![
            ClosedSet::ball(v(&[0.0, 0.0]), 1.0).unwrap(),
            ClosedSet::ball(v(&[4.0, 0.0]), 1.0).unwrap(),
        ])
        .unwrap();
        let r = two.nearest_point_set(&v(&[2.0, 0.0]), 1e-8);
        assert_eq!(r.nearest.len(), 2);
        assert!(!r.unique);
        assert_abs_diff_eq!(r.diameter_bound, 2.0);
    }

    #[test]
    fn constructors_validate() {
        assert!(ClosedSet::ball(v(&[0.0]), -1.0).is_err());
        assert!(ClosedSet::sphere(v(&[0.0]), 0.0).is_err());
        assert!(ClosedSet::point_cloud(vec![]).is_err());
        assert!(ClosedSet::union(vec![]).is_err());
        assert!(ClosedSet::union(vec![
            ClosedSet::ball(v(&[0.0]), 1.0).unwrap(),
            ClosedSet::ball(v(&[0.0, 0.0]), 1.0).unwrap(),
        ])
        .is_err());
        assert!(distance(&ClosedSet::ball(v(&[0.0]), 1.0).unwrap(), &v(&[0.0, 1.0])).is_err());
    }

    #[test]
    fn convex_variants_always_unique() {
        let sets = [
            ClosedSet::cuboid(&[0.0, 0.0], &[1.0, 1.0]).unwrap(),
            ClosedSet::ball(v(&[0.0, 0.0]), 1.0).unwrap(),
            ClosedSet::flat(AffineFlat::new(v(&[0.0, 1.0]), vec![v(&[0.6, 0.8])]).unwrap()).unwrap(),
        ];
        for s in &sets {
            assert!(s.is_convex());
            for x in [v(&[0.5, 0.5]), v(&[-3.0, 7.0]), v(&[0.0, 0.0])] {
                assert!(s.xi(&x, 1e-12).is_some());
            }
        }
    }
}
