//! Greedy cover of a point sample by quadratic graphs over `m`-planes.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::kernel::{check_same_dim, least_squares, orthonormalize, AffineFlat, Subspace, Vector};
use crate::par::{map_range, Execution};

/// Graph `t -> base + sum t_i e_i + sum_j (t^T Q_j t) nu_j` over the plane
/// through `base` spanned by the `e_i`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Patch {
    pub plane: AffineFlat,
    /// Orthonormal basis `nu_j` of the normal space.
    pub normals: Vec<Vector>,
    /// Symmetric `m x m` form `Q_j` per normal direction.
    pub quadratic: Vec<Vec<Vec<f64>>>,
    pub support_radius: f64,
    pub seed_index: usize,
    pub fit_neighbors: usize,
}

impl Patch {
    /// Normal deviation of `y` from the graph above its tangent
    /// coordinates; bounds the distance from `y` to the graph.
    pub fn deviation(&self, y: &Vector) -> f64 {
        let d = *y - *self.plane.base();
        let t: Vec<f64> = self.plane.basis().iter().map(|e| e.dot(&d)).collect();
        self.normals
            .iter()
            .zip(&self.quadratic)
            .map(|(nu, q)| {
                let h = quad_form(q, &t);
                (nu.dot(&d) - h).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Largest `|Q_j|` eigenvalue magnitude over the normal directions.
    pub fn max_curvature_coefficient(&self) -> f64 {
        self.quadratic
            .iter()
            .map(|q| {
                let m = q.len();
                if m == 0 {
                    return 0.0;
                }
                let mat = DMatrix::from_fn(m, m, |i, j| q[i][j]);
                SymmetricEigen::new(mat)
                    .eigenvalues
                    .iter()
                    .fold(0.0_f64, |acc, x| acc.max(x.abs()))
            })
            .fold(0.0, f64::max)
    }

    fn admits(&self, y: &Vector, tol_fit: f64) -> bool {
        let r = y.dist(self.plane.base());
        r <= self.support_radius && self.deviation(y) <= tol_fit * r * r
    }
}

fn quad_form(q: &[Vec<f64>], t: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..t.len() {
        for k in 0..t.len() {
            s += q[i][k] * t[i] * t[k];
        }
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PatchConfig {
    pub m: usize,
    pub tol_fit: f64,
    pub support_radius: f64,
    /// Fit neighbors per unknown coefficient.
    pub neighbor_factor: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PatchCover {
    pub m: usize,
    pub patches: Vec<Patch>,
    /// Patch index per input point.
    pub assignment: Vec<Option<usize>>,
    pub residual_bound: f64,
    pub assigned_fraction: f64,
    /// Seeds whose fit was rejected or lacked neighbors, in visiting order.
    pub deferred_seeds: Vec<usize>,
    pub notes: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PatchRecheck {
    pub checked: usize,
    pub violations: usize,
    /// Largest `deviation - bound * r^2` seen (negative when all hold).
    pub worst_excess: f64,
}

impl PatchCover {
    /// Independent pass over every assigned point.
    pub fn recheck(&self, points: &[Vector], exec: Execution) -> PatchRecheck {
        let per: Vec<Option<f64>> = map_range(exec, points.len(), |i| {
            let p = &self.patches[self.assignment[i]?];
            let y = &points[i];
            let r = y.dist(p.plane.base());
            let excess = if r > p.support_radius {
                f64::INFINITY
            } else {
                p.deviation(y) - self.residual_bound * r * r
            };
            Some(excess)
        });
        let mut out = PatchRecheck {
            checked: 0,
            violations: 0,
            worst_excess: f64::NEG_INFINITY,
        };
        for e in per.into_iter().flatten() {
            out.checked += 1;
            if e > 0.0 {
                out.violations += 1;
            }
            out.worst_excess = out.worst_excess.max(e);
        }
        out
    }
}

/// Local frame from principal directions of the neighbors around `base`.
fn principal_frame(base: &Vector, nbrs: &[Vector], m: usize) -> (Vec<Vector>, Vec<Vector>) {
    let n = base.dim();
    let mut cov = DMatrix::<f64>::zeros(n, n);
    for y in nbrs {
        let d = *y - *base;
        for i in 0..n {
            for k in 0..n {
                cov[(i, k)] += d[i] * d[k];
            }
        }
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let col = |j: usize| Vector::from_slice(eig.eigenvectors.column(j).as_slice());
    let tangent: Vec<Vector> = order[..m].iter().map(|&j| col(j)).collect();
    let normals = Subspace::new(n, orthonormalize(&tangent, 1e-12))
        .expect("orthonormal")
        .orthogonal_complement()
        .basis()
        .to_vec();
    (tangent, normals)
}

fn monomials(t: &[f64], with_affine: bool) -> Vec<f64> {
    let mut row = Vec::new();
    if with_affine {
        row.push(1.0);
        row.extend_from_slice(t);
    }
    for i in 0..t.len() {
        for k in i..t.len() {
            row.push(t[i] * t[k]);
        }
    }
    row
}

fn unpack_quadratic(coef: &[f64], m: usize) -> Vec<Vec<f64>> {
    let mut q = vec![vec![0.0; m]; m];
    let mut idx = 0;
    for i in 0..m {
        for k in i..m {
            if i == k {
                q[i][i] = coef[idx];
            } else {
                q[i][k] = 0.5 * coef[idx];
                q[k][i] = 0.5 * coef[idx];
            }
            idx += 1;
        }
    }
    q
}

fn fit_quadratic(base: &Vector, tangent: &[Vector], normals: &[Vector], nbrs: &[Vector], with_affine: bool) -> Option<Vec<Vec<f64>>> {
    let rows: Vec<Vec<f64>> = nbrs
        .iter()
        .map(|y| {
            let d = *y - *base;
            let t: Vec<f64> = tangent.iter().map(|e| e.dot(&d)).collect();
            monomials(&t, with_affine)
        })
        .collect();
    normals
        .iter()
        .map(|nu| {
            let rhs: Vec<f64> = nbrs.iter().map(|y| nu.dot(&(*y - *base))).collect();
            least_squares(&rows, &rhs)
        })
        .collect()
}

/// Fits a patch at `seed`: principal directions, a full quadratic fit whose
/// linear part tilts the plane onto the tangent, then a pure quadratic refit
/// in the tilted frame.
fn fit_patch(points: &[Vector], seed: usize, nbrs: &[usize], cfg: &PatchConfig) -> Option<Patch> {
    let m = cfg.m;
    let base = points[seed];
    let n = base.dim();
    let ys: Vec<Vector> = nbrs.iter().map(|&j| points[j]).collect();
    let (tangent, normals) = principal_frame(&base, &ys, m);
    let (tangent, normals) = if normals.is_empty() || m == 0 {
        (tangent, normals)
    } else {
        let first = fit_quadratic(&base, &tangent, &normals, &ys, true)?;
        let tilted: Vec<Vector> = (0..m)
            .map(|i| {
                normals
                    .iter()
                    .zip(&first)
                    .fold(tangent[i], |acc, (nu, c)| acc.axpy(c[1 + i], nu))
            })
            .collect();
        let tangent = orthonormalize(&tilted, 1e-12);
        if tangent.len() != m {
            return None;
        }
        let normals = Subspace::new(n, tangent.clone())
            .ok()?
            .orthogonal_complement()
            .basis()
            .to_vec();
        (tangent, normals)
    };
    let coefs = if normals.is_empty() || m == 0 {
        Vec::new()
    } else {
        fit_quadratic(&base, &tangent, &normals, &ys, false)?
    };
    let quadratic = coefs.iter().map(|c| unpack_quadratic(c, m)).collect();
    Some(Patch {
        plane: AffineFlat::new(base, tangent).ok()?,
        normals,
        quadratic,
        support_radius: cfg.support_radius,
        seed_index: seed,
        fit_neighbors: ys.len(),
    })
}

/// Greedy cover: visit seeds in index order, fit a patch on the nearest
/// neighbors within the support radius, keep it only if every fit neighbor
/// meets the residual bound, and assign all still-unassigned points that do.
/// Points admissible for several patches go to the lowest index.
pub fn quadratic_patch_cover(points: &[Vector], cfg: &PatchConfig) -> Result<PatchCover> {
    if points.is_empty() {
        return Err(GeomError::InvalidInput("patch cover of an empty sample".into()));
    }
    let n = check_same_dim(points)?;
    let m = cfg.m;
    if m == 0 || m > n {
        return Err(GeomError::InvalidInput(format!("patch dimension {m} outside 1..={n}")));
    }
    if !(cfg.tol_fit > 0.0 && cfg.support_radius > 0.0) {
        return Err(GeomError::InvalidInput("tol_fit and support_radius must be positive".into()));
    }
    let coef_count = 1 + m + m * (m + 1) / 2;
    let wanted = cfg.neighbor_factor.max(1) * coef_count;
    let mut assignment: Vec<Option<usize>> = vec![None; points.len()];
    let mut patches: Vec<Patch> = Vec::new();
    let mut deferred = Vec::new();
    let mut short = 0usize;
    for seed in 0..points.len() {
        if assignment[seed].is_some() {
            continue;
        }
        let mut nbrs: Vec<(f64, usize)> = points
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != seed)
            .map(|(j, y)| (y.dist(&points[seed]), j))
            .filter(|(d, _)| *d <= cfg.support_radius)
            .collect();
        nbrs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        nbrs.truncate(wanted);
        if nbrs.len() < coef_count {
            short += 1;
            deferred.push(seed);
            continue;
        }
        let idx: Vec<usize> = nbrs.iter().map(|&(_, j)| j).collect();
        let Some(patch) = fit_patch(points, seed, &idx, cfg) else {
            deferred.push(seed);
            continue;
        };
        if !idx.iter().all(|&j| patch.admits(&points[j], cfg.tol_fit)) {
            deferred.push(seed);
            continue;
        }
        let k = patches.len();
        for (j, y) in points.iter().enumerate() {
            if assignment[j].is_none() && (j == seed || patch.admits(y, cfg.tol_fit)) {
                assignment[j] = Some(k);
            }
        }
        patches.push(patch);
    }
    let assigned = assignment.iter().filter(|a| a.is_some()).count();
    let mut notes = vec![format!(
        "greedy selection in index order; {} patches, {} seeds deferred",
        patches.len(),
        deferred.len()
    )];
    if short > 0 {
        notes.push(format!("{short} seeds had fewer than {coef_count} neighbors within the support radius"));
    }
    Ok(PatchCover {
        m,
        patches,
        assignment,
        residual_bound: cfg.tol_fit,
        assigned_fraction: assigned as f64 / points.len() as f64,
        deferred_seeds: deferred,
        notes,
    })
}
