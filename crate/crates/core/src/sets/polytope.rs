//! Convex polytopes with both representations and the full face lattice.
//!
//! Projection is exact: every face's affine hull is a candidate, candidates
//! outside the polytope are discarded, the nearest survivor wins. The true
//! nearest point lies in the relative interior of some face and equals the
//! projection onto that face's affine hull, so the minimum is exact.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::dd::{cone_from_constraints, DD_EPS};
use crate::error::{GeomError, Result};
use crate::kernel::{check_same_dim, AffineFlat, Vector, MAX_DIM};

/// `normal · x <= offset`
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub normal: Vector,
    pub offset: f64,
}

impl Halfspace {
    pub fn new(normal: Vector, offset: f64) -> Self {
        Halfspace { normal, offset }
    }

    #[inline]
    pub fn slack(&self, x: &Vector) -> f64 {
        self.normal.dot(x) - self.offset
    }
}

#[derive(Clone, Debug)]
pub struct Face {
    pub dim: usize,
    /// Indices into [`Polytope::vertices`], sorted.
    pub vertices: Vec<usize>,
    /// Indices into [`Polytope::facets`] of every facet containing the face.
    pub facets: Vec<usize>,
    pub flat: AffineFlat,
}

#[derive(Clone, Debug)]
pub struct Polytope {
    ambient_dim: usize,
    vertices: Vec<Vector>,
    facets: Vec<Halfspace>,
    equalities: Vec<Halfspace>,
    faces: Vec<Face>,
    scale: f64,
}

const MAX_HALFSPACES: usize = 64;

impl Polytope {
    /// Convex hull of finitely many points.
    pub fn from_vertices(points: &[Vector]) -> Result<Self> {
        if points.is_empty() {
            return Err(GeomError::InvalidInput("polytope needs at least one vertex".into()));
        }
        let dim = check_same_dim(points)?;
        if dim == 0 || dim > MAX_DIM {
            return Err(GeomError::InvalidInput(format!("ambient dimension {dim}")));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(GeomError::InvalidInput("non-finite vertex".into()));
        }

        let n = points.len() as f64;
        let centroid = points
            .iter()
            .fold(Vector::zeros(dim), |acc, p| acc + *p)
            / n;
        let radius = points
            .iter()
            .map(|p| p.dist(&centroid))
            .fold(0.0_f64, f64::max);
        let scale = if radius > 0.0 { radius } else { 1.0 };

        // Valid inequalities z = (a, -b) satisfy z · (v, 1) <= 0 for every
        // normalized vertex v.
        let lifted: Vec<Vector> = points
            .iter()
            .map(|p| ((*p - centroid) / scale).push(1.0))
            .collect();
        let gens = cone_from_constraints(dim + 1, &lifted)?;

        let to_halfspace = |z: &Vector| -> Option<Halfspace> {
            let a = z.truncated(dim);
            let norm = a.norm();
            if norm <= 1e-9 * z.norm() {
                return None;
            }
            let a = a / norm;
            let b = -z[dim] / norm;
            // undo the normalization: a·(x-c)/s <= b  <=>  a·x <= s b + a·c
            Some(Halfspace::new(a, scale * b + a.dot(&centroid)))
        };
        let mut facets: Vec<Halfspace> = gens.rays.iter().filter_map(to_halfspace).collect();
        dedup_halfspaces(&mut facets);
        let equalities: Vec<Halfspace> = gens.lineality.iter().filter_map(to_halfspace).collect();

        // dedupe vertices and drop non-extreme points: a vertex is extreme
        // iff the facets through it cut out a single point
        let tol = 1e-9 * scale;
        let mut candidates: Vec<Vector> = Vec::new();
        for p in points {
            if !candidates.iter().any(|q| q.dist(p) <= tol) {
                candidates.push(*p);
            }
        }
        let mut vertices = Vec::new();
        for p in &candidates {
            let tight: Vec<Vector> = facets
                .iter()
                .filter(|h| h.slack(p).abs() <= tol)
                .map(|h| h.normal)
                .chain(equalities.iter().map(|h| h.normal))
                .collect();
            if crate::kernel::rank_of(&tight, 1e-9).unwrap_or(0) == dim {
                vertices.push(*p);
            }
        }
        if vertices.is_empty() {
            return Err(GeomError::InvalidInput("degenerate vertex set".into()));
        }

        let mut poly = Polytope {
            ambient_dim: dim,
            vertices,
            facets,
            equalities,
            faces: Vec::new(),
            scale,
        };
        poly.faces = poly.enumerate_faces()?;
        Ok(poly)
    }

    /// Bounded nonempty intersection of halfspaces; unbounded or empty
    /// inputs are rejected.
    pub fn from_halfspaces(halfspaces: &[Halfspace]) -> Result<Self> {
        if halfspaces.is_empty() {
            return Err(GeomError::InvalidInput(
                "H-polytope without halfspaces is unbounded".into(),
            ));
        }
        if halfspaces.len() > MAX_HALFSPACES {
            return Err(GeomError::Unsupported(format!(
                "{} halfspaces exceed the limit of {MAX_HALFSPACES}",
                halfspaces.len()
            )));
        }
        let dim = halfspaces[0].normal.dim();
        for h in halfspaces {
            if h.normal.dim() != dim {
                return Err(GeomError::DimensionMismatch {
                    expected: dim,
                    got: h.normal.dim(),
                });
            }
            if !h.normal.is_finite() || !h.offset.is_finite() || h.normal.norm() == 0.0 {
                return Err(GeomError::InvalidInput("degenerate halfspace".into()));
            }
        }
        // homogenized cone {(x, t) : a·x - b t <= 0, -t <= 0}
        let mut rows: Vec<Vector> = halfspaces
            .iter()
            .map(|h| {
                let n = h.normal.norm();
                (h.normal / n).push(-h.offset / n)
            })
            .collect();
        rows.push(Vector::unit(dim + 1, dim) * -1.0);
        let gens = cone_from_constraints(dim + 1, &rows)?;
        if !gens.lineality.is_empty() {
            return Err(GeomError::InvalidInput(
                "H-polytope is unbounded (contains a line)".into(),
            ));
        }
        let mut vertices = Vec::new();
        for r in &gens.rays {
            let t = r[dim];
            if t > DD_EPS {
                vertices.push(r.truncated(dim) / t);
            } else {
                return Err(GeomError::InvalidInput(
                    "H-polytope is unbounded (has a recession direction)".into(),
                ));
            }
        }
        if vertices.is_empty() {
            return Err(GeomError::InvalidInput("H-polytope is empty".into()));
        }
        Self::from_vertices(&vertices)
    }

    fn enumerate_faces(&self) -> Result<Vec<Face>> {
        let tol = 1e-9 * self.scale;
        let incidence: Vec<Vec<bool>> = self
            .facets
            .iter()
            .map(|h| self.vertices.iter().map(|v| h.slack(v).abs() <= tol).collect())
            .collect();
        let facets_of = |verts: &[usize]| -> Vec<usize> {
            (0..self.facets.len())
                .filter(|&i| verts.iter().all(|&j| incidence[i][j]))
                .collect()
        };

        let all: Vec<usize> = (0..self.vertices.len()).collect();
        let mut seen: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut faces = Vec::new();
        let mut queue = vec![all];
        while let Some(verts) = queue.pop() {
            if seen.contains_key(&verts) {
                continue;
            }
            let pts: Vec<Vector> = verts.iter().map(|&j| self.vertices[j]).collect();
            let flat = AffineFlat::through_points(&pts)?;
            let facets = facets_of(&verts);
            for i in 0..self.facets.len() {
                if facets.contains(&i) {
                    continue;
                }
                let sub: Vec<usize> = verts.iter().copied().filter(|&j| incidence[i][j]).collect();
                if !sub.is_empty() && !seen.contains_key(&sub) {
                    queue.push(sub);
                }
            }
            seen.insert(verts.clone(), faces.len());
            faces.push(Face {
                dim: flat.dim(),
                vertices: verts,
                facets,
                flat,
            });
        }
        faces.sort_by(|a, b| a.dim.cmp(&b.dim).then_with(|| a.vertices.cmp(&b.vertices)));
        Ok(faces)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn vertices(&self) -> &[Vector] {
        &self.vertices
    }

    /// Irredundant facet inequalities with unit normals.
    pub fn facets(&self) -> &[Halfspace] {
        &self.facets
    }

    /// Equalities cutting out the affine hull when the polytope is not
    /// full-dimensional.
    pub fn equalities(&self) -> &[Halfspace] {
        &self.equalities
    }

    /// All nonempty faces, sorted by dimension, the polytope itself last.
    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn dim(&self) -> usize {
        self.faces.last().map(|f| f.dim).unwrap_or(0)
    }

    /// Radius of the vertex set about its centroid (length scale for tolerances).
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn diameter(&self) -> f64 {
        let mut d = 0.0_f64;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                d = d.max(a.dist(b));
            }
        }
        d
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        self.facets.iter().all(|h| h.slack(x) <= tol)
            && self.equalities.iter().all(|h| h.slack(x).abs() <= tol)
    }

    /// Exact nearest point and distance.
    pub fn project(&self, x: &Vector) -> (Vector, f64) {
        let feas = 1e-12 * self.scale.max(x.max_abs());
        if self.contains(x, 0.0) {
            return (*x, 0.0);
        }
        let mut best = (self.vertices[0], f64::INFINITY);
        for face in &self.faces {
            let p = face.flat.project(x);
            let d = x.dist(&p);
            if d < best.1 && self.contains(&p, feas) {
                best = (p, d);
            }
        }
        best
    }

    /// Index of the lowest-dimensional face containing `x` within `tol`.
    pub fn locate(&self, x: &Vector, tol: f64) -> Option<usize> {
        if !self.contains(x, tol) {
            return None;
        }
        self.faces
            .iter()
            .position(|f| f.flat.distance(x) <= tol && self.contains(&f.flat.project(x), tol))
    }

    /// Generators of the normal cone at a boundary point: the unit normals of
    /// the facets through it, plus both signs of each equality normal.
    pub fn normal_cone_generators(&self, a: &Vector, tol: f64) -> Vec<Vector> {
        let mut out: Vec<Vector> = self
            .facets
            .iter()
            .filter(|h| h.slack(a).abs() <= tol)
            .map(|h| h.normal)
            .collect();
        for e in &self.equalities {
            out.push(e.normal);
            out.push(-e.normal);
        }
        out
    }

    /// Faces not sharing a vertex with the given face.
    pub fn disjoint_faces(&self, face: usize) -> impl Iterator<Item = &Face> {
        let verts: BTreeSet<usize> = self.faces[face].vertices.iter().copied().collect();
        self.faces
            .iter()
            .filter(move |g| g.vertices.iter().all(|j| !verts.contains(j)))
    }

    /// Exact distance from `x` to a face of this polytope.
    pub fn distance_to_face(&self, x: &Vector, face: usize) -> f64 {
        let target = &self.faces[face];
        let feas = 1e-12 * self.scale.max(x.max_abs());
        let members: BTreeSet<usize> = target.vertices.iter().copied().collect();
        self.faces
            .iter()
            .filter(|f| f.vertices.iter().all(|j| members.contains(j)))
            .filter_map(|f| {
                let p = f.flat.project(x);
                self.contains(&p, feas).then(|| x.dist(&p))
            })
            .fold(f64::INFINITY, f64::min)
    }
}

fn dedup_halfspaces(hs: &mut Vec<Halfspace>) {
    let mut out: Vec<Halfspace> = Vec::with_capacity(hs.len());
    for h in hs.drain(..) {
        if !out
            .iter()
            .any(|g| g.normal.dist(&h.normal) < 1e-9 && (g.offset - h.offset).abs() < 1e-9)
        {
            out.push(h);
        }
    }
    *hs = out;
}

/// Axis-aligned box `[lo, hi]` as an H-polytope description.
pub fn box_halfspaces(lo: &[f64], hi: &[f64]) -> Vec<Halfspace> {
    let dim = lo.len();
    let mut out = Vec::with_capacity(2 * dim);
    for i in 0..dim {
        out.push(Halfspace::new(Vector::unit(dim, i), hi[i]));
        out.push(Halfspace::new(-Vector::unit(dim, i), -lo[i]));
    }
    out
}
