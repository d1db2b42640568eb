//! Greedy slab cover of a gridded map: pieces of `m`-planes on which the
//! map is injective with Lipschitz inverse, chosen until their images hit
//! every value bin with a large preimage.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::grid::GridMap;
use crate::kernel::{orthonormalize, AffineFlat, Vector};
use crate::par::{map_indexed, map_range, Execution};
use crate::rng::{gaussian_vector, stream_rng, uniform_in_box};

type Bin = Vec<i64>;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlabConfig {
    /// Step, in grid nodes, between parallel axis-aligned planes.
    pub stride: usize,
    /// Number of randomly rotated planes added to the candidates.
    pub random_planes: usize,
    /// Upper bound on samples taken along one plane.
    pub sample_cap: usize,
    pub seed: u64,
    pub exec: Execution,
}

impl Default for SlabConfig {
    fn default() -> Self {
        SlabConfig {
            stride: 4,
            random_planes: 16,
            sample_cap: 4096,
            seed: 0,
            exec: Execution::Parallel,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaneKind {
    AxisAligned,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlabPiece {
    pub plane: AffineFlat,
    pub kind: PlaneKind,
    /// Position in the greedy selection.
    pub order: usize,
    pub candidate_index: usize,
    pub points: Vec<Vector>,
    pub values: Vec<Vec<f64>>,
    /// Largest `|p - p'| / |f(p) - f(p')|` over retained pairs.
    pub inverse_lipschitz: f64,
    pub new_bins: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlabCoverReport {
    pub m: usize,
    pub pieces: Vec<SlabPiece>,
    pub covered_fraction: f64,
    pub z_threshold: f64,
    pub bin_width: f64,
    pub lip_bound: f64,
    pub z_bins: usize,
    pub covered_bins: usize,
    pub candidates: usize,
    pub notes: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlabRecheck {
    pub pieces: usize,
    pub pairs_checked: usize,
    pub worst_constant: f64,
    pub pass: bool,
}

impl SlabCoverReport {
    /// Recomputes every pairwise inverse-Lipschitz quotient from the stored
    /// samples, independently of the selection pass.
    pub fn recheck(&self, exec: Execution) -> SlabRecheck {
        let per: Vec<(usize, f64)> = map_indexed(exec, &self.pieces, |_, piece| {
            let mut pairs = 0;
            let mut worst = 0.0_f64;
            for i in 0..piece.points.len() {
                for j in 0..i {
                    pairs += 1;
                    let dp = piece.points[i].dist(&piece.points[j]);
                    let df = value_dist(&piece.values[i], &piece.values[j]);
                    let c = if df > 0.0 { dp / df } else { f64::INFINITY };
                    worst = worst.max(c);
                }
            }
            (pairs, worst)
        });
        let pairs_checked = per.iter().map(|p| p.0).sum();
        let worst_constant = per.iter().map(|p| p.1).fold(0.0, f64::max);
        SlabRecheck {
            pieces: self.pieces.len(),
            pairs_checked,
            worst_constant,
            pass: worst_constant <= self.lip_bound,
        }
    }
}

fn value_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn bin_of(v: &[f64], width: f64) -> Bin {
    v.iter().map(|x| (x / width).floor() as i64).collect()
}

struct Candidate {
    plane: AffineFlat,
    kind: PlaneKind,
    samples: Vec<(Vector, Vec<f64>)>,
}

fn combinations(n: usize, m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, m, cur, out);
            cur.pop();
        }
    }
    rec(0, n, m, &mut cur, &mut out);
    out
}

/// Odometer over `0..dims[i]` in steps of `steps[i]`.
fn lattice(dims: &[usize], steps: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for (&d, &s) in dims.iter().zip(steps) {
        let mut next = Vec::new();
        for prefix in &out {
            for i in (0..d).step_by(s.max(1)) {
                let mut p = prefix.clone();
                p.push(i);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Node-aligned planes: for each choice of `m` free axes, the remaining
/// coordinates run over every `stride`-th node. Values are read at the
/// nodes, so no interpolation error enters.
fn axis_candidates(grid: &GridMap, m: usize, cfg: &SlabConfig) -> Vec<Candidate> {
    let n = grid.n;
    let mut out = Vec::new();
    for free in combinations(n, m) {
        let fixed: Vec<usize> = (0..n).filter(|a| !free.contains(a)).collect();
        let fixed_dims: Vec<usize> = fixed.iter().map(|&a| grid.shape[a]).collect();
        let free_dims: Vec<usize> = free.iter().map(|&a| grid.shape[a]).collect();
        let total: usize = free_dims.iter().product();
        let mut step: usize = 1;
        while total.div_ceil(step.pow(m as u32)) > cfg.sample_cap.max(1) {
            step += 1;
        }
        let free_steps = vec![step; m];
        let fixed_steps = vec![cfg.stride; fixed.len()];
        for fixed_idx in lattice(&fixed_dims, &fixed_steps) {
            let mut idx = vec![0usize; n];
            for (&a, &i) in fixed.iter().zip(&fixed_idx) {
                idx[a] = i;
            }
            let base = grid.node(grid.flat_index(&idx));
            let basis: Vec<Vector> = free.iter().map(|&a| Vector::unit(n, a)).collect();
            let plane = AffineFlat::new(base, basis).expect("axis basis is orthonormal");
            let mut samples = Vec::new();
            for free_idx in lattice(&free_dims, &free_steps) {
                for (&a, &i) in free.iter().zip(&free_idx) {
                    idx[a] = i;
                }
                let k = grid.flat_index(&idx);
                if let Some(v) = grid.value(k) {
                    samples.push((grid.node(k), v.to_vec()));
                }
            }
            out.push(Candidate {
                plane,
                kind: PlaneKind::AxisAligned,
                samples,
            });
        }
    }
    out
}

/// Planes through uniform points of the box with uniformly rotated frames,
/// sampled by multilinear interpolation at the finest grid spacing.
fn random_candidates(grid: &GridMap, m: usize, cfg: &SlabConfig) -> Vec<Candidate> {
    let n = grid.n;
    let lo = Vector::new(&grid.lo).expect("grid bounds");
    let hi = Vector::new(&grid.hi).expect("grid bounds");
    let half_diag = 0.5 * lo.dist(&hi);
    let h0 = (0..n).map(|a| grid.spacing(a)).fold(f64::INFINITY, f64::min);
    let mut per_axis = (2.0 * half_diag / h0).ceil() as usize + 1;
    while per_axis.pow(m as u32) > cfg.sample_cap.max(1) && per_axis > 2 {
        per_axis = per_axis.div_ceil(2);
    }
    let h = 2.0 * half_diag / (per_axis - 1) as f64;
    map_range(cfg.exec, cfg.random_planes, |k| {
        let mut rng = stream_rng(cfg.seed, k as u64);
        let base = uniform_in_box(&mut rng, &lo, &hi);
        let basis = loop {
            let raw: Vec<Vector> = (0..m).map(|_| gaussian_vector(&mut rng, n)).collect();
            let b = orthonormalize(&raw, 1e-9);
            if b.len() == m {
                break b;
            }
        };
        let plane = AffineFlat::new(base, basis).expect("orthonormal frame");
        let mut samples = Vec::new();
        for t in lattice(&vec![per_axis; m], &vec![1; m]) {
            let coords: Vec<f64> = t.iter().map(|&i| -half_diag + h * i as f64).collect();
            let x = plane.at(&coords);
            if let Some(v) = grid.interpolate(&x) {
                samples.push((x, v));
            }
        }
        Candidate {
            plane,
            kind: PlaneKind::Random,
            samples,
        }
    })
}

/// Greedy retention in sample order: a sample is kept when its value lies
/// in a `Z` bin and the inverse-Lipschitz bound holds against every sample
/// kept so far.
fn retain(samples: &[(Vector, Vec<f64>)], z: &BTreeSet<Bin>, width: f64, lip: f64) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    for (i, (p, v)) in samples.iter().enumerate() {
        if !z.contains(&bin_of(v, width)) {
            continue;
        }
        let ok = kept.iter().all(|&j| {
            let (q, w) = &samples[j];
            let df = value_dist(v, w);
            df > 0.0 && p.dist(q) <= lip * df
        });
        if ok {
            kept.push(i);
        }
    }
    kept
}

fn inverse_lipschitz(points: &[Vector], values: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..points.len() {
        for j in 0..i {
            let df = value_dist(&values[i], &values[j]);
            let c = if df > 0.0 { points[i].dist(&points[j]) / df } else { f64::INFINITY };
            worst = worst.max(c);
        }
    }
    worst
}

/// Cover of the value bins with at least `z_threshold` preimage nodes by
/// images of injective, inverse-Lipschitz pieces of `m`-planes.
///
/// Candidates are node-aligned planes and random rotated planes. Each is
/// reduced to its greedily retained samples; then pieces are chosen by
/// greedy set cover over the `Z` bins, lowest candidate index on ties. A
/// chosen piece keeps only the samples landing in bins not yet covered, so
/// images of distinct pieces occupy disjoint bins. An empty `Z` is reported
/// as fully covered.
pub fn coarea_slab_cover(
    grid: &GridMap,
    m: usize,
    z_threshold: f64,
    bin_width: f64,
    lip_bound: f64,
    cfg: &SlabConfig,
) -> Result<SlabCoverReport> {
    if m == 0 || m > grid.n {
        return Err(GeomError::InvalidInput(format!("slab dimension {m} outside 1..={}", grid.n)));
    }
    if grid.node_count() == 0 || grid.values.is_empty() {
        return Err(GeomError::InvalidInput("empty grid".into()));
    }
    if !(bin_width > 0.0 && lip_bound > 0.0 && z_threshold >= 0.0) {
        return Err(GeomError::InvalidInput(
            "bin width and Lipschitz bound must be positive, threshold nonnegative".into(),
        ));
    }
    let mut counts: BTreeMap<Bin, usize> = BTreeMap::new();
    for k in 0..grid.node_count() {
        if let Some(v) = grid.value(k) {
            *counts.entry(bin_of(v, bin_width)).or_default() += 1;
        }
    }
    let z: BTreeSet<Bin> = counts
        .into_iter()
        .filter(|&(_, c)| c as f64 >= z_threshold)
        .map(|(b, _)| b)
        .collect();
    let mut notes = Vec::new();
    if z.is_empty() {
        notes.push("no value bin reaches the threshold; empty Z counts as fully covered".into());
        return Ok(SlabCoverReport {
            m,
            pieces: Vec::new(),
            covered_fraction: 1.0,
            z_threshold,
            bin_width,
            lip_bound,
            z_bins: 0,
            covered_bins: 0,
            candidates: 0,
            notes,
        });
    }

    let mut cands = axis_candidates(grid, m, cfg);
    cands.extend(random_candidates(grid, m, cfg));
    let retained: Vec<(Vec<usize>, BTreeSet<Bin>)> = map_indexed(cfg.exec, &cands, |_, c| {
        let kept = retain(&c.samples, &z, bin_width, lip_bound);
        let bins = kept.iter().map(|&i| bin_of(&c.samples[i].1, bin_width)).collect();
        (kept, bins)
    });

    let mut covered: BTreeSet<Bin> = BTreeSet::new();
    let mut used = vec![false; cands.len()];
    let mut pieces = Vec::new();
    loop {
        let mut best: Option<(usize, usize)> = None;
        for (ci, (_, bins)) in retained.iter().enumerate() {
            if used[ci] {
                continue;
            }
            let gain = bins.difference(&covered).count();
            if gain > 0 && best.is_none_or(|(_, g)| gain > g) {
                best = Some((ci, gain));
            }
        }
        let Some((ci, gain)) = best else { break };
        used[ci] = true;
        let c = &cands[ci];
        let mut points = Vec::new();
        let mut values = Vec::new();
        let mut claimed = BTreeSet::new();
        for &i in &retained[ci].0 {
            let (p, v) = &c.samples[i];
            let b = bin_of(v, bin_width);
            if !covered.contains(&b) {
                claimed.insert(b);
                points.push(*p);
                values.push(v.clone());
            }
        }
        covered.extend(claimed);
        let inverse_lipschitz = inverse_lipschitz(&points, &values);
        log::debug!(
            "slab piece {}: candidate {ci} ({:?}), {} samples, {gain} new bins",
            pieces.len(),
            c.kind,
            points.len()
        );
        pieces.push(SlabPiece {
            plane: c.plane.clone(),
            kind: c.kind,
            order: pieces.len(),
            candidate_index: ci,
            points,
            values,
            inverse_lipschitz,
            new_bins: gain,
        });
    }
    notes.push(format!(
        "greedy set cover over {} candidates ({} axis-aligned, {} random)",
        cands.len(),
        cands.iter().filter(|c| c.kind == PlaneKind::AxisAligned).count(),
        cands.iter().filter(|c| c.kind == PlaneKind::Random).count()
    ));
    Ok(SlabCoverReport {
        m,
        covered_fraction: covered.len() as f64 / z.len() as f64,
        pieces,
        z_threshold,
        bin_width,
        lip_bound,
        z_bins: z.len(),
        covered_bins: covered.len(),
        candidates: cands.len(),
        notes,
    })
}
