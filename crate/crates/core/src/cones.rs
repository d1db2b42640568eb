//! Polyhedral convex cones given by generators.
//!
//! A cone keeps its generators together with the generators of its polar
//! (computed once by double description). The polar generators are exactly
//! the inequality normals of the cone, which gives membership, relative
//! interior tests and exact projection without any LP machinery.

use std::sync::OnceLock;

use serde::Serialize;

use crate::dd::cone_from_constraints;
use crate::error::{check_dim, GeomError, Result};
use crate::kernel::{dist_to_subspace, orthonormalize, Subspace, Vector};

/// Membership tolerance used when checking the hypotheses of
/// [`gamma_constant`].
pub const TOL_MEMBERSHIP: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct PolyhedralCone {
    ambient_dim: usize,
    generators: Vec<Vector>,
    span: Subspace,
    /// Generators of the polar cone; both signs of every lineality vector.
    polar_generators: Vec<Vector>,
    /// Unit inequality normals restricted to the linear hull of the cone,
    /// dropping those identically zero there.
    facets: Vec<Vector>,
    faces: OnceLock<Vec<Subspace>>,
}

fn dedup_units(vs: Vec<Vector>) -> Vec<Vector> {
    let mut out: Vec<Vector> = Vec::with_capacity(vs.len());
    for v in vs.into_iter().filter_map(|v| v.normalized()) {
        if !out.iter().any(|w| w.dist(&v) < 1e-9) {
            out.push(v);
        }
    }
    out
}

impl PolyhedralCone {
    /// Cone `{ sum l_i g_i : l_i >= 0 }`; zero generators are ignored.
    pub fn new(ambient_dim: usize, generators: Vec<Vector>) -> Result<Self> {
        for g in &generators {
            check_dim(ambient_dim, g.dim())?;
            if !g.is_finite() {
                return Err(GeomError::InvalidInput("non-finite generator".into()));
            }
        }
        let generators: Vec<Vector> = generators.into_iter().filter(|g| g.norm() > 0.0).collect();
        let span = Subspace::spanned_by(ambient_dim, &generators)?;
        let polar = cone_from_constraints(ambient_dim, &generators)?;
        let polar_generators = dedup_units(polar.all_generators());
        let facets = dedup_units(
            polar
                .rays
                .iter()
                .map(|h| span.project(h))
                .filter(|h| h.norm() > 1e-9)
                .collect(),
        );
        Ok(PolyhedralCone {
            ambient_dim,
            generators,
            span,
            polar_generators,
            facets,
            faces: OnceLock::new(),
        })
    }

    /// Cone `{ x : h · x <= 0 for every normal h }`.
    pub fn from_inequalities(ambient_dim: usize, normals: &[Vector]) -> Result<Self> {
        for h in normals {
            check_dim(ambient_dim, h.dim())?;
        }
        let gens = cone_from_constraints(ambient_dim, normals)?;
        Self::new(ambient_dim, gens.all_generators())
    }

    pub fn zero(ambient_dim: usize) -> Self {
        Self::new(ambient_dim, Vec::new()).expect("zero cone")
    }

    pub fn full(ambient_dim: usize) -> Self {
        let gens = (0..ambient_dim)
            .flat_map(|i| {
                let e = Vector::unit(ambient_dim, i);
                [e, -e]
            })
            .collect();
        Self::new(ambient_dim, gens).expect("full cone")
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn generators(&self) -> &[Vector] {
        &self.generators
    }

    /// Dimension of the linear (= affine) hull.
    pub fn dim(&self) -> usize {
        self.span.dim()
    }

    pub fn span(&self) -> &Subspace {
        &self.span
    }

    /// Inequality normals `h` with `C = { x : h · x <= 0 }`.
    pub fn inequalities(&self) -> &[Vector] {
        &self.polar_generators
    }

    /// Inequality normals restricted to the linear hull of the cone.
    pub fn facet_normals(&self) -> &[Vector] {
        &self.facets
    }

    pub fn is_zero(&self) -> bool {
        self.generators.is_empty()
    }

    /// `{ d : d · c <= 0 for c in C }`.
    pub fn polar(&self) -> PolyhedralCone {
        Self::new(self.ambient_dim, self.polar_generators.clone()).expect("polar of a valid cone")
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        let scale = x.norm().max(1.0);
        self.polar_generators.iter().all(|h| h.dot(x) <= tol * scale)
    }

    /// Whether `v` lies in the relative interior: inside the linear hull up
    /// to `tol` and strictly inside every facet by more than `tol * |v|`.
    pub fn relint_contains(&self, v: &Vector, tol: f64) -> bool {
        let len = v.norm();
        if len == 0.0 {
            return self.is_zero();
        }
        if self.span.residual(v).norm() > tol {
            return false;
        }
        self.facets.iter().all(|h| h.dot(v) < -tol * len)
    }

    fn candidate_faces(&self) -> &[Subspace] {
        self.faces.get_or_init(|| {
            let rows = &self.polar_generators;
            let n = self.ambient_dim;
            let mut out: Vec<Subspace> = Vec::new();
            let k = rows.len();
            // every subset of at most n inequality normals; each spans the
            // normal space of a candidate face
            let mut stack: Vec<(usize, Vec<usize>)> = vec![(0, Vec::new())];
            while let Some((start, subset)) = stack.pop() {
                let picked: Vec<Vector> = subset.iter().map(|&i| rows[i]).collect();
                let basis = orthonormalize(&picked, 1e-9);
                if basis.len() < subset.len() {
                    continue;
                }
                out.push(Subspace::new(n, basis).expect("orthonormal"));
                if subset.len() < n {
                    for i in start..k {
                        let mut next = subset.clone();
                        next.push(i);
                        stack.push((i + 1, next));
                    }
                }
            }
            out
        })
    }

    /// Exact nearest point of the cone.
    pub fn project(&self, b: &Vector) -> Vector {
        let mut best = Vector::zeros(self.ambient_dim);
        let mut best_d = b.norm();
        let feas = 1e-12 * b.norm().max(1e-300);
        for normals in self.candidate_faces() {
            let p = normals.residual(b);
            let d = b.dist(&p);
            if d < best_d && self.polar_generators.iter().all(|h| h.dot(&p) <= feas) {
                best = p;
                best_d = d;
            }
        }
        best
    }

    pub fn distance(&self, b: &Vector) -> f64 {
        b.dist(&self.project(b))
    }
}

/// `Tan = { u : u · v <= 0 for v in Nor }`, the polar of a normal cone.
pub fn tangent_from_normal(normal: &PolyhedralCone) -> PolyhedralCone {
    normal.polar()
}

#[derive(Clone, Debug, Serialize)]
pub struct GammaCertificate {
    pub gamma: f64,
    /// Unit extreme rays of `D ∩ U^⊥` over which the maximum was taken.
    pub extreme_rays: Vec<Vector>,
    /// The ray attaining the maximum, when there is one.
    pub argmax: Option<Vector>,
}

/// Least `gamma >= 0` with `dist(d, U) <= -gamma d · v` for all `d` in the
/// polar `D` of `cone`.
///
/// Requires `U ⊂ D`, `dim C >= n - dim U` and `v` in the relative interior
/// of `C`. Since `D` is invariant under translation by `U`, the maximum of
/// `dist(d, U) / (-d · v)` is taken over `D ∩ U^⊥`, where the ratio is
/// quasi-convex, so it is attained on an extreme ray.
pub fn gamma_constant(cone: &PolyhedralCone, plane: &Subspace, v: &Vector) -> Result<GammaCertificate> {
    let n = cone.ambient_dim();
    check_dim(n, plane.ambient_dim())?;
    check_dim(n, v.dim())?;
    for u in plane.basis() {
        for c in cone.generators() {
            let c = c.normalized().expect("nonzero generator");
            if u.dot(&c).abs() > TOL_MEMBERSHIP {
                return Err(GeomError::Precondition(
                    "plane is not contained in the polar cone".into(),
                ));
            }
        }
    }
    if cone.dim() + plane.dim() < n {
        return Err(GeomError::Precondition(format!(
            "dim C = {} is below n - dim U = {}",
            cone.dim(),
            n - plane.dim()
        )));
    }
    if !cone.relint_contains(v, TOL_MEMBERSHIP) {
        return Err(if cone.contains(v, TOL_MEMBERSHIP) {
            GeomError::UnboundedGamma("v lies on the relative boundary of C".into())
        } else {
            GeomError::Precondition("v does not belong to C".into())
        });
    }
    if cone.dim() != n - plane.dim() {
        return Err(GeomError::Contradiction(format!(
            "dim C = {} but n - dim U = {}",
            cone.dim(),
            n - plane.dim()
        )));
    }

    let mut constraints: Vec<Vector> = cone.generators().to_vec();
    for u in plane.basis() {
        constraints.push(*u);
        constraints.push(-*u);
    }
    let section = cone_from_constraints(n, &constraints)?;
    if !section.lineality.is_empty() {
        return Err(GeomError::Contradiction(
            "D ∩ U^⊥ contains a line although C spans U^⊥".into(),
        ));
    }
    let mut gamma = 0.0_f64;
    let mut argmax = None;
    for d in &section.rays {
        let denom = -d.dot(v);
        if denom <= 1e-12 * v.norm() {
            return Err(GeomError::UnboundedGamma(format!(
                "extreme ray {d:?} of D is orthogonal to v"
            )));
        }
        let ratio = dist_to_subspace(d, plane)? / denom;
        if ratio > gamma {
            gamma = ratio;
            argmax = Some(*d);
        }
    }
    Ok(GammaCertificate {
        gamma,
        extreme_rays: section.rays,
        argmax,
    })
}
