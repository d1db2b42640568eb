//! Small dense linear algebra for ambient dimension at most [`MAX_DIM`].
//!
//! Everything here is a plain value type. Vectors live on the stack with a
//! fixed capacity of `MAX_DIM + 1` coordinates; the extra slot is only used
//! internally for homogenized coordinates when converting polytopes.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{check_dim, GeomError, Result};

/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 8;
const CAP: usize = MAX_DIM + 1;

/// Orthonormality tolerance for flat and subspace bases.
pub const TOL_ORTHO: f64 = 1e-12;
/// Default relative threshold for [`rank_of`].
pub const DEFAULT_TOL_RANK: f64 = 1e-9;
/// Default relative threshold below which a vector is treated as dependent
/// during Gram-Schmidt.
pub const DEFAULT_TOL_DEPENDENT: f64 = 1e-9;

#[derive(Clone, Copy)]
pub struct Vector {
    dim: u8,
    coords: [f64; CAP],
}

impl Vector {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim <= CAP, "dimension {dim} exceeds capacity");
        Vector {
            dim: dim as u8,
            coords: [0.0; CAP],
        }
    }

    /// Builds an ambient vector, rejecting non-finite coordinates and
    /// dimensions outside `1..=MAX_DIM`.
    pub fn new(coords: &[f64]) -> Result<Self> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(GeomError::InvalidInput(format!(
                "vector dimension {} outside 1..={MAX_DIM}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(GeomError::InvalidInput(format!(
                "non-finite coordinate in {coords:?}"
            )));
        }
        Ok(Self::from_slice(coords))
    }

    /// Unchecked constructor for internal use (allows the homogenizing slot).
    pub(crate) fn from_slice(coords: &[f64]) -> Self {
        let mut v = Self::zeros(coords.len());
        v.coords[..coords.len()].copy_from_slice(coords);
        v
    }

    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.coords[axis] = 1.0;
        v
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.coords[..self.dim()]
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        let d = self.dim();
        &mut self.coords[..d]
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.as_slice().to_vec()
    }

    #[inline]
    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        self.as_slice()
            .iter()
            .zip(other.as_slice())
            .map(|(a, b)| a * b)
            .sum()
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn dist(&self, other: &Vector) -> f64 {
        (*self - *other).norm()
    }

    /// Unit vector in the same direction, or `None` for the zero vector.
    pub fn normalized(&self) -> Option<Vector> {
        let n = self.norm();
        if n > 0.0 && n.is_finite() {
            Some(*self / n)
        } else {
            None
        }
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|c| c.is_finite())
    }

    /// `self + s * other`
    #[inline]
    pub fn axpy(&self, s: f64, other: &Vector) -> Vector {
        let mut out = *self;
        for (o, b) in out.as_mut_slice().iter_mut().zip(other.as_slice()) {
            *o += s * b;
        }
        out
    }

    pub(crate) fn push(&self, value: f64) -> Vector {
        let mut out = Vector::zeros(self.dim() + 1);
        out.coords[..self.dim()].copy_from_slice(self.as_slice());
        out.coords[self.dim()] = value;
        out
    }

    pub(crate) fn truncated(&self, dim: usize) -> Vector {
        Vector::from_slice(&self.as_slice()[..dim])
    }

    pub fn max_abs(&self) -> f64 {
        self.as_slice().iter().fold(0.0_f64, |m, c| m.max(c.abs()))
    }
}

impl PartialEq for Vector {
    fn eq(&self, other: &Self) -> bool {
        self.as_slice() == other.as_slice()
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.as_slice()).finish()
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.as_slice()[i]
    }
}

impl IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.as_mut_slice()[i]
    }
}

impl Add for Vector {
    type Output = Vector;
    fn add(self, rhs: Vector) -> Vector {
        self.axpy(1.0, &rhs)
    }
}

impl Sub for Vector {
    type Output = Vector;
    fn sub(self, rhs: Vector) -> Vector {
        self.axpy(-1.0, &rhs)
    }
}

impl AddAssign for Vector {
    fn add_assign(&mut self, rhs: Vector) {
        *self = *self + rhs;
    }
}

impl SubAssign for Vector {
    fn sub_assign(&mut self, rhs: Vector) {
        *self = *self - rhs;
    }
}

impl Neg for Vector {
    type Output = Vector;
    fn neg(self) -> Vector {
        self * -1.0
    }
}

impl Mul<f64> for Vector {
    type Output = Vector;
    fn mul(mut self, s: f64) -> Vector {
        for c in self.as_mut_slice() {
            *c *= s;
        }
        self
    }
}

impl Div<f64> for Vector {
    type Output = Vector;
    fn div(self, s: f64) -> Vector {
        self * (1.0 / s)
    }
}

impl Serialize for Vector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.as_slice().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let coords = Vec::<f64>::deserialize(d)?;
        Vector::new(&coords).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn check_same_dim(vectors: &[Vector]) -> Result<usize> {
    let Some(first) = vectors.first() else {
        return Ok(0);
    };
    for v in vectors {
        check_dim(first.dim(), v.dim())?;
    }
    Ok(first.dim())
}

/// Number of singular values above `tol_rank * sigma_max` of the stacked
/// matrix of the nonzero inputs, each scaled to unit length first so the
/// result does not depend on their individual magnitudes.
pub fn rank_of(vectors: &[Vector], tol_rank: f64) -> Result<usize> {
    if !(tol_rank > 0.0) {
        return Err(GeomError::InvalidInput("tol_rank must be positive".into()));
    }
    if vectors.iter().any(|v| !v.is_finite()) {
        return Err(GeomError::InvalidInput("non-finite coordinate".into()));
    }
    let dim = check_same_dim(vectors)?;
    if vectors.is_empty() || dim == 0 {
        return Ok(0);
    }
    let units: Vec<Vector> = vectors.iter().filter_map(Vector::normalized).collect();
    if units.is_empty() {
        return Ok(0);
    }
    let m = DMatrix::from_fn(units.len(), dim, |i, j| units[i][j]);
    let sv = m.singular_values();
    let largest = sv.iter().cloned().fold(0.0_f64, f64::max);
    Ok(sv.iter().filter(|&&s| s > tol_rank * largest).count())
}

/// Modified Gram-Schmidt with one re-orthogonalization pass. Vectors whose
/// residual falls below `tol_dependent` times their own norm are dropped.
pub fn orthonormalize(vectors: &[Vector], tol_dependent: f64) -> Vec<Vector> {
    let mut basis: Vec<Vector> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let scale = v.norm();
        if scale == 0.0 {
            continue;
        }
        let mut w = *v;
        for _ in 0..2 {
            for q in &basis {
                w = w.axpy(-w.dot(q), q);
            }
        }
        let r = w.norm();
        if r > tol_dependent * scale {
            basis.push(w / r);
        }
    }
    basis
}

fn check_orthonormal(basis: &[Vector], tol: f64) -> Result<()> {
    for (i, u) in basis.iter().enumerate() {
        if (u.norm() - 1.0).abs() > tol {
            return Err(GeomError::InvalidInput(format!(
                "basis vector {i} is not unit length"
            )));
        }
        for w in &basis[..i] {
            if u.dot(w).abs() > tol {
                return Err(GeomError::InvalidInput(
                    "basis vectors are not orthogonal".into(),
                ));
            }
        }
    }
    Ok(())
}

/// Linear subspace with an orthonormal basis.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Subspace {
    ambient_dim: usize,
    basis: Vec<Vector>,
}

impl Subspace {
    /// Wraps an already orthonormal basis (checked within [`TOL_ORTHO`]).
    pub fn new(ambient_dim: usize, basis: Vec<Vector>) -> Result<Self> {
        for b in &basis {
            check_dim(ambient_dim, b.dim())?;
        }
        if basis.len() > ambient_dim {
            return Err(GeomError::InvalidInput("too many basis vectors".into()));
        }
        check_orthonormal(&basis, TOL_ORTHO)?;
        Ok(Subspace { ambient_dim, basis })
    }

    /// Span of arbitrary vectors.
    pub fn spanned_by(ambient_dim: usize, vectors: &[Vector]) -> Result<Self> {
        for v in vectors {
            check_dim(ambient_dim, v.dim())?;
        }
        Ok(Subspace {
            ambient_dim,
            basis: orthonormalize(vectors, DEFAULT_TOL_DEPENDENT),
        })
    }

    pub fn zero(ambient_dim: usize) -> Self {
        Subspace {
            ambient_dim,
            basis: Vec::new(),
        }
    }

    pub fn full(ambient_dim: usize) -> Self {
        Subspace {
            ambient_dim,
            basis: (0..ambient_dim).map(|i| Vector::unit(ambient_dim, i)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn basis(&self) -> &[Vector] {
        &self.basis
    }

    pub fn project(&self, x: &Vector) -> Vector {
        self.basis
            .iter()
            .fold(Vector::zeros(self.ambient_dim), |acc, b| acc.axpy(x.dot(b), b))
    }

    /// Component of `x` orthogonal to the subspace.
    pub fn residual(&self, x: &Vector) -> Vector {
        *x - self.project(x)
    }

    pub fn orthogonal_complement(&self) -> Subspace {
        let mut seed = self.basis.clone();
        seed.extend((0..self.ambient_dim).map(|i| Vector::unit(self.ambient_dim, i)));
        let all = orthonormalize(&seed, 1e-6);
        Subspace {
            ambient_dim: self.ambient_dim,
            basis: all[self.basis.len()..].to_vec(),
        }
    }

    pub fn as_flat(&self) -> AffineFlat {
        AffineFlat {
            base: Vector::zeros(self.ambient_dim),
            basis: self.basis.clone(),
        }
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        self.residual(x).norm() <= tol
    }
}

/// `dist(x, U)` for a linear subspace `U`.
pub fn dist_to_subspace(x: &Vector, subspace: &Subspace) -> Result<f64> {
    check_dim(subspace.ambient_dim(), x.dim())?;
    Ok(subspace.residual(x).norm())
}

/// Affine subspace `base + span(basis)`, basis orthonormal.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AffineFlat {
    base: Vector,
    basis: Vec<Vector>,
}

impl AffineFlat {
    pub fn new(base: Vector, basis: Vec<Vector>) -> Result<Self> {
        if !base.is_finite() {
            return Err(GeomError::InvalidInput("non-finite flat base".into()));
        }
        for b in &basis {
            check_dim(base.dim(), b.dim())?;
        }
        if basis.len() > base.dim() {
            return Err(GeomError::InvalidInput("too many basis vectors".into()));
        }
        check_orthonormal(&basis, TOL_ORTHO)?;
        Ok(AffineFlat { base, basis })
    }

    pub fn spanned_by(base: Vector, directions: &[Vector]) -> Result<Self> {
        for d in directions {
            check_dim(base.dim(), d.dim())?;
        }
        Ok(AffineFlat {
            base,
            basis: orthonormalize(directions, DEFAULT_TOL_DEPENDENT),
        })
    }

    /// Affine hull of a nonempty point set.
    pub fn through_points(points: &[Vector]) -> Result<Self> {
        let first = *points
            .first()
            .ok_or_else(|| GeomError::InvalidInput("no points".into()))?;
        check_same_dim(points)?;
        let diffs: Vec<Vector> = points[1..].iter().map(|p| *p - first).collect();
        Self::spanned_by(first, &diffs)
    }

    pub fn point(base: Vector) -> Self {
        AffineFlat {
            base,
            basis: Vec::new(),
        }
    }

    pub fn base(&self) -> &Vector {
        &self.base
    }

    pub fn basis(&self) -> &[Vector] {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.base.dim()
    }

    pub fn direction_space(&self) -> Subspace {
        Subspace {
            ambient_dim: self.ambient_dim(),
            basis: self.basis.clone(),
        }
    }

    /// Nearest point of the flat.
    #[inline]
    pub fn project(&self, x: &Vector) -> Vector {
        let rel = *x - self.base;
        self.basis
            .iter()
            .fold(self.base, |acc, b| acc.axpy(rel.dot(b), b))
    }

    /// Coordinates of the projection of `x` in the flat's basis.
    pub fn local_coords(&self, x: &Vector) -> Vec<f64> {
        let rel = *x - self.base;
        self.basis.iter().map(|b| rel.dot(b)).collect()
    }

    pub fn at(&self, coords: &[f64]) -> Vector {
        self.basis
            .iter()
            .zip(coords)
            .fold(self.base, |acc, (b, c)| acc.axpy(*c, b))
    }

    pub fn distance(&self, x: &Vector) -> f64 {
        x.dist(&self.project(x))
    }
}

pub fn project_onto_flat(x: &Vector, flat: &AffineFlat) -> Result<Vector> {
    check_dim(flat.ambient_dim(), x.dim())?;
    if !x.is_finite() {
        return Err(GeomError::InvalidInput("non-finite point".into()));
    }
    Ok(flat.project(x))
}

/// Hausdorff distance between two finite point sets.
pub fn hausdorff_distance(a_pts: &[Vector], b_pts: &[Vector]) -> Result<f64> {
    if a_pts.is_empty() || b_pts.is_empty() {
        return Err(GeomError::InvalidInput(
            "hausdorff distance of an empty point set".into(),
        ));
    }
    let dim = check_same_dim(a_pts)?;
    check_dim(dim, check_same_dim(b_pts)?)?;
    let one_sided = |from: &[Vector], to: &[Vector]| {
        from.iter()
            .map(|p| to.iter().map(|q| p.dist(q)).fold(f64::INFINITY, f64::min))
            .fold(0.0_f64, f64::max)
    };
    Ok(one_sided(a_pts, b_pts).max(one_sided(b_pts, a_pts)))
}

/// Least-squares solve of the small dense system `rows * x ≈ rhs` via SVD.
pub(crate) fn least_squares(rows: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let ncols = rows.first()?.len();
    let a = DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]);
    let b = nalgebra::DVector::from_column_slice(rhs);
    let svd = a.svd(true, true);
    let sol = svd.solve(&b, 1e-12).ok()?;
    Some(sol.iter().cloned().collect())
}
