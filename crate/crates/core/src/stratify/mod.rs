//! Strata `B_m = { a : dim Dis(A, a) >= n - m }`, the projection covering of
//! `B_m` by shells around the set, and covers witnessing second-order
//! rectifiability.

mod patch;
mod slab;

pub use patch::{quadratic_patch_cover, Patch, PatchConfig, PatchCover, PatchRecheck};
pub use slab::{coarea_slab_cover, SlabConfig, SlabCoverReport, SlabPiece, SlabRecheck};

use rand::Rng;
use serde::Serialize;

use crate::bundle::{dis_sample, touches, DisSampleConfig};
use crate::error::{GeomError, Result};
use crate::kernel::{AffineFlat, Subspace, Vector};
use crate::par::{map_indexed, Execution};
use crate::rng::{gaussian_vector, stream_rng, uniform_in_box};
use crate::sets::ClosedSet;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClassifiedPoint {
    pub point: Vector,
    pub est_dim: usize,
    pub in_stratum: bool,
    /// Probe radius attaining `est_dim`; zero for exact classification.
    pub q_used: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FaceDescriptor {
    pub dim: usize,
    pub vertex_indices: Vec<usize>,
    pub vertices: Vec<Vector>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StratumReport {
    pub m: usize,
    pub ambient_dim: usize,
    pub classified: Vec<ClassifiedPoint>,
    pub exact_faces: Option<Vec<FaceDescriptor>>,
    pub coverage: Option<PatchCover>,
    pub notes: Vec<String>,
}

impl StratumReport {
    /// Builds the report for stratum `m` from per-probe `(est_dim, q_used)`.
    pub fn from_classification(m: usize, ambient_dim: usize, probes: &[Vector], dims: &[(usize, f64)]) -> Self {
        let classified = probes
            .iter()
            .zip(dims)
            .map(|(p, &(d, q))| ClassifiedPoint {
                point: *p,
                est_dim: d,
                in_stratum: d + m >= ambient_dim,
                q_used: q,
            })
            .collect();
        StratumReport {
            m,
            ambient_dim,
            classified,
            exact_faces: None,
            coverage: None,
            notes: Vec::new(),
        }
    }

    pub fn in_stratum_count(&self) -> usize {
        self.classified.iter().filter(|c| c.in_stratum).count()
    }
}

fn check_m(m: usize, n: usize) -> Result<()> {
    if m > n {
        return Err(GeomError::InvalidInput(format!("m = {m} exceeds n = {n}")));
    }
    Ok(())
}

/// Exact strata of a convex polytope: the normal cone in the relative
/// interior of a `k`-face has dimension `n - k`, so `B_m` is the
/// `m`-skeleton.
pub fn stratify_exact_polytope(set: &ClosedSet, m: usize, probes: &[Vector]) -> Result<StratumReport> {
    let poly = set
        .polytope()
        .ok_or_else(|| GeomError::Unsupported("exact strata need a polytope".into()))?;
    let n = poly.ambient_dim();
    check_m(m, n)?;
    let tol = 1e-9 * poly.scale();
    let mut dims = Vec::with_capacity(probes.len());
    for p in probes {
        let face = poly.locate(p, tol).ok_or_else(|| {
            GeomError::Precondition(format!("probe {p:?} does not lie on the polytope"))
        })?;
        dims.push((n - poly.faces()[face].dim, 0.0));
    }
    let mut report = StratumReport::from_classification(m, n, probes, &dims);
    report.exact_faces = Some(
        poly.faces()
            .iter()
            .filter(|f| f.dim <= m)
            .map(|f| FaceDescriptor {
                dim: f.dim,
                vertex_indices: f.vertices.clone(),
                vertices: f.vertices.iter().map(|&j| poly.vertices()[j]).collect(),
            })
            .collect(),
    );
    Ok(report)
}

/// Estimated `dim Dis(A, a)` for every probe: the maximum of the sampled
/// dimension over the probe radii, with the first radius attaining it.
pub fn classify_probes(
    set: &ClosedSet,
    probes: &[Vector],
    q_grid: &[f64],
    cfg: &DisSampleConfig,
    exec: Execution,
) -> Result<Vec<(usize, f64)>> {
    if q_grid.is_empty() {
        return Err(GeomError::InvalidInput("q grid is empty".into()));
    }
    let per: Vec<Result<(usize, f64)>> = map_indexed(exec, probes, |i, p| {
        let mut best = (0usize, q_grid[0]);
        for (k, &q) in q_grid.iter().enumerate() {
            let stream = (i as u64) << 8 | k as u64;
            let s = dis_sample(set, p, q, cfg, stream)?;
            if s.est_dim > best.0 {
                best = (s.est_dim, q);
            }
        }
        Ok(best)
    });
    per.into_iter().collect()
}

pub fn stratify_sampled(
    set: &ClosedSet,
    m: usize,
    probes: &[Vector],
    q_grid: &[f64],
    cfg: &DisSampleConfig,
    exec: Execution,
) -> Result<StratumReport> {
    let n = set.ambient_dim();
    check_m(m, n)?;
    let dims = classify_probes(set, probes, q_grid, cfg, exec)?;
    let mut report = StratumReport::from_classification(m, n, probes, &dims);
    report.notes.push(format!(
        "sampled classification: q_grid = {q_grid:?}, q_frac = {}, num_dirs = {}, tol_rank = {:e}",
        cfg.q_frac, cfg.num_dirs, cfg.tol_rank
    ));
    Ok(report)
}

/// `count` random `m`-dimensional affine planes with base points uniform in
/// the box `center ± radius` and uniformly random orientation.
pub fn random_planes(n: usize, m: usize, count: usize, center: &Vector, radius: f64, seed: u64) -> Result<Vec<AffineFlat>> {
    check_m(m, n)?;
    let mut rng = stream_rng(seed, 0x91A7E);
    let lo = *center - Vector::from_slice(&vec![radius; n]);
    let hi = *center + Vector::from_slice(&vec![radius; n]);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let base = uniform_in_box(&mut rng, &lo, &hi);
        let raw: Vec<Vector> = (0..m).map(|_| gaussian_vector(&mut rng, n)).collect();
        let dirs = Subspace::spanned_by(n, &raw)?;
        if dirs.dim() == m {
            out.push(AffineFlat::new(base, dirs.basis().to_vec())?);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoverPair {
    pub source: Vector,
    pub image: Vector,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProjectionCover {
    pub m: usize,
    pub i: usize,
    pub pairs: Vec<CoverPair>,
    /// Points drawn on the planes.
    pub tried: usize,
}

/// Sampling knobs for [`projection_cover`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverConfig {
    /// Half-width of the coordinate box sampled on each plane.
    pub extent: f64,
    pub dis: DisSampleConfig,
    pub seed: u64,
}

/// Points `x` on the planes in the shell `W_i`: a unique nearest point
/// `a = ξ(x)` lying in `B_m`, `0 < dist(x, A) < 1/i`, and `(x - a)` scaled to
/// length `1/i` in the bundle at `a`. Returns the pairs `(x, ξ(x))`.
pub fn projection_cover(
    set: &ClosedSet,
    m: usize,
    i: usize,
    planes: &[AffineFlat],
    shell_samples: usize,
    cfg: &CoverConfig,
    exec: Execution,
) -> Result<ProjectionCover> {
    let n = set.ambient_dim();
    check_m(m, n)?;
    if i == 0 {
        return Err(GeomError::InvalidInput("shell index i must be positive".into()));
    }
    for p in planes {
        if p.dim() != m || p.ambient_dim() != n {
            return Err(GeomError::InvalidInput(format!(
                "plane of dimension {} in R^{} given, expected dimension {m} in R^{n}",
                p.dim(),
                p.ambient_dim()
            )));
        }
    }
    let radius = 1.0 / i as f64;
    let tol_unique = set.default_tol_unique();
    let per: Vec<Result<(usize, Vec<CoverPair>)>> = map_indexed(exec, planes, |k, plane| {
        let mut rng = stream_rng(cfg.seed, k as u64);
        let count = if m == 0 { 1 } else { shell_samples };
        let mut pairs = Vec::new();
        for j in 0..count {
            let coords: Vec<f64> = (0..m)
                .map(|_| cfg.extent * (2.0 * rng.random::<f64>() - 1.0))
                .collect();
            let x = plane.at(&coords);
            let pr = set.nearest_point_set(&x, tol_unique);
            if !pr.unique || !(pr.distance > 0.0 && pr.distance < radius) {
                continue;
            }
            let a = pr.nearest[0];
            if !touches(set, &a, &((x - a) * (radius / pr.distance)), cfg.dis.tol_touch) {
                continue;
            }
            let stream = (k as u64) << 20 | j as u64;
            if dis_sample(set, &a, radius, &cfg.dis, stream)?.est_dim + m < n {
                continue;
            }
            pairs.push(CoverPair { source: x, image: a });
        }
        Ok((count, pairs))
    });
    let mut cover = ProjectionCover {
        m,
        i,
        pairs: Vec::new(),
        tried: 0,
    };
    for r in per {
        let (count, pairs) = r?;
        cover.tried += count;
        cover.pairs.extend(pairs);
    }
    Ok(cover)
}
