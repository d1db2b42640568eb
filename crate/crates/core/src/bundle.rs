//! Distance bundles: vectors `v` with `|v| = dist(a + v, A)`, i.e. centers
//! `a + v` of balls touching `A` at `a`.

use serde::Serialize;

use crate::cones::PolyhedralCone;
use crate::error::{check_dim, GeomError, Result};
use crate::kernel::{rank_of, Vector};
use crate::rng::sphere_directions;
use crate::sets::ClosedSet;

pub fn dis_membership(set: &ClosedSet, a: &Vector, v: &Vector, tol_touch: f64) -> Result<bool> {
    check_dim(set.ambient_dim(), a.dim())?;
    check_dim(set.ambient_dim(), v.dim())?;
    let off = set.distance(a);
    if off > tol_touch {
        return Err(GeomError::Precondition(format!(
            "base point {a:?} is at distance {off:e} from the set"
        )));
    }
    Ok(touches(set, a, v, tol_touch))
}

#[inline]
pub(crate) fn touches(set: &ClosedSet, a: &Vector, v: &Vector, tol_touch: f64) -> bool {
    (set.distance(&(*a + *v)) - v.norm()).abs() <= tol_touch
}

/// Largest `t` in `[0, q]` with `t u` in the bundle at `a`, to relative
/// resolution `resolution`. Membership is monotone in `t` (a ball inside a
/// touching ball touches too), so bisection is valid.
pub fn max_touching_radius(
    set: &ClosedSet,
    a: &Vector,
    u: &Vector,
    q: f64,
    tol_touch: f64,
    resolution: f64,
) -> f64 {
    if touches(set, a, &(*u * q), tol_touch) {
        return q;
    }
    let (mut lo, mut hi) = (0.0, q);
    while hi - lo > resolution * q {
        let mid = 0.5 * (lo + hi);
        if touches(set, a, &(*u * mid), tol_touch) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DisSampleConfig {
    /// Low-discrepancy directions in addition to the set's normal hints.
    pub num_dirs: usize,
    pub tol_touch: f64,
    /// Directions count toward the dimension only if `t_v >= q_frac * q`.
    pub q_frac: f64,
    pub tol_rank: f64,
    /// Relative bisection resolution for the touching radius.
    pub resolution: f64,
    pub seed: u64,
}

impl Default for DisSampleConfig {
    fn default() -> Self {
        DisSampleConfig {
            num_dirs: 64,
            tol_touch: 1e-12,
            q_frac: 0.5,
            tol_rank: 1e-4,
            resolution: 1e-6,
            seed: 0,
        }
    }
}

impl DisSampleConfig {
    /// Defaults with the touching tolerance scaled to the set.
    pub fn for_set(set: &ClosedSet) -> Self {
        DisSampleConfig {
            tol_touch: 1e-12 * set.length_scale().max(1.0),
            num_dirs: 64.max(2 * set.ambient_dim()),
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TouchingDirection {
    pub direction: Vector,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistanceBundleSample {
    pub base: Vector,
    pub directions: Vec<TouchingDirection>,
    pub q: f64,
    pub q_frac: f64,
    pub est_dim: usize,
    pub resolution: f64,
    pub tol_touch: f64,
}

impl DistanceBundleSample {
    /// Directions whose touching radius reaches `q_frac * q`.
    pub fn long_directions(&self) -> impl Iterator<Item = &Vector> {
        let cut = self.q_frac * self.q;
        self.directions
            .iter()
            .filter(move |d| d.radius >= cut)
            .map(|d| &d.direction)
    }

    /// Convex cone spanned by the long directions; an inner approximation
    /// of the closed cone generated by the bundle. Directions within `1e-4`
    /// of an earlier one are merged, so near-duplicates of a normal hint do
    /// not open a sliver wedge around it.
    pub fn cone_hull(&self) -> Result<PolyhedralCone> {
        let mut gens: Vec<Vector> = Vec::new();
        for d in self.long_directions() {
            if !gens.iter().any(|g| g.dist(d) < 1e-4) {
                gens.push(*d);
            }
        }
        PolyhedralCone::new(self.base.dim(), gens)
    }
}

/// Samples the bundle at `a` up to radius `q`. `stream` selects the
/// direction sequence so that different base points use independent
/// directions while staying reproducible.
pub fn dis_sample(
    set: &ClosedSet,
    a: &Vector,
    q: f64,
    cfg: &DisSampleConfig,
    stream: u64,
) -> Result<DistanceBundleSample> {
    let n = set.ambient_dim();
    check_dim(n, a.dim())?;
    if !(q > 0.0 && q.is_finite()) {
        return Err(GeomError::InvalidInput(format!("probe radius {q} must be positive")));
    }
    if cfg.num_dirs < 2 * n {
        return Err(GeomError::InvalidInput(format!(
            "num_dirs = {} is below 2n = {}",
            cfg.num_dirs,
            2 * n
        )));
    }
    if !(cfg.q_frac > 0.0 && cfg.q_frac <= 1.0) {
        return Err(GeomError::InvalidInput("q_frac must lie in (0, 1]".into()));
    }
    let off = set.distance(a);
    if off > cfg.tol_touch {
        return Err(GeomError::Precondition(format!(
            "base point {a:?} is at distance {off:e} from the set"
        )));
    }
    let mut dirs: Vec<Vector> = set.normal_hints(a).iter().filter_map(|h| h.normalized()).collect();
    dirs.extend(sphere_directions(n, cfg.num_dirs, cfg.seed, stream));
    let directions: Vec<TouchingDirection> = dirs
        .into_iter()
        .map(|u| TouchingDirection {
            direction: u,
            radius: max_touching_radius(set, a, &u, q, cfg.tol_touch, cfg.resolution),
        })
        .collect();
    let mut sample = DistanceBundleSample {
        base: *a,
        directions,
        q,
        q_frac: cfg.q_frac,
        est_dim: 0,
        resolution: cfg.resolution,
        tol_touch: cfg.tol_touch,
    };
    let long: Vec<Vector> = sample.long_directions().copied().collect();
    sample.est_dim = rank_of(&long, cfg.tol_rank)?;
    Ok(sample)
}
