//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stratakit_core::bundle::DisSampleConfig;
use stratakit_core::cones::gamma_constant;
use stratakit_core::grid::GridMap;
use stratakit_core::kernel::{Subspace, Vector};
use stratakit_core::par::Execution;
use stratakit_core::sets::{ClosedSet, Halfspace};
use stratakit_core::stratify::{
    coarea_slab_cover, projection_cover, quadratic_patch_cover, random_planes, stratify_exact_polytope,
    stratify_sampled, CoverConfig, PatchConfig, SlabConfig, StratumReport,
};
use stratakit_core::verify::{
    campaign_cone_control, campaign_one_sided, campaign_projection_lipschitz, check_quadratic_contact, kappa,
    random_cone_instance, CampaignConfig, ConeInstance, ContactConfig,
};

type Outcome = Result<String, String>;

fn v(c: &[f64]) -> Vector {
    Vector::new(c).unwrap()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_h_polytope(rng: &mut ChaCha8Rng) -> ClosedSet {
    loop {
        let k = rng.random_range(6..=14);
        let hs: Vec<Halfspace> = (0..k)
            .map(|_| {
                let g = v(&[rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5]);
                Halfspace::new(g.normalized().unwrap(), rng.random_range(0.5..1.5))
            })
            .collect();
        if let Ok(set) = ClosedSet::h_polytope(hs) {
            return set;
        }
    }
}

/// Half the smallest distance from a vertex to a face not containing it,
/// an upper estimate of half the face-to-nonadjacent-face distance.
fn probe_radius(set: &ClosedSet) -> f64 {
    let poly = set.polytope().unwrap();
    let mut best = f64::INFINITY;
    for (fi, f) in poly.faces().iter().enumerate() {
        if f.dim == poly.dim() {
            continue;
        }
        for (j, x) in poly.vertices().iter().enumerate() {
            if !f.vertices.contains(&j) {
                best = best.min(poly.distance_to_face(x, fi));
            }
        }
    }
    0.5 * best
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut sets = vec![ClosedSet::cuboid(&[0.0; 3], &[1.0; 3]).unwrap()];
    sets.extend((0..20).map(|_| random_h_polytope(&mut rng)));
    let mut probes_total = 0;
    for (k, set) in sets.iter().enumerate() {
        let probes = set.sample_boundary(500, 1000 + k as u64);
        ensure(probes.len() >= 500, || format!("polytope {k}: only {} probes", probes.len()))?;
        probes_total += probes.len();
        let q = probe_radius(set);
        let cfg = DisSampleConfig { seed: k as u64, ..DisSampleConfig::for_set(set) };
        let base = stratify_sampled(set, 0, &probes, &[q], &cfg, Execution::Parallel).map_err(|e| e.to_string())?;
        let dims: Vec<(usize, f64)> = base.classified.iter().map(|c| (c.est_dim, c.q_used)).collect();
        for m in 0..=2 {
            let sampled = StratumReport::from_classification(m, 3, &probes, &dims);
            let exact = stratify_exact_polytope(set, m, &probes).map_err(|e| e.to_string())?;
            let agree = exact
                .classified
                .iter()
                .zip(&sampled.classified)
                .filter(|(a, b)| a.in_stratum == b.in_stratum)
                .count();
            ensure(agree == probes.len(), || {
                format!("polytope {k}, m = {m}: {agree}/{} probes agree", probes.len())
            })?;
        }
    }
    let secs = started.elapsed().as_secs_f64();
    ensure(secs <= 60.0, || format!("took {secs:.1} s"))?;
    Ok(format!("{} polytopes, {probes_total} probes, m = 0,1,2 all agree, {secs:.1} s", sets.len()))
}

fn convex_scenes() -> Vec<(&'static str, ClosedSet)> {
    vec![
        ("cube", ClosedSet::cuboid(&[0.0; 3], &[1.0; 3]).unwrap()),
        ("square", ClosedSet::cuboid(&[0.0; 2], &[1.0; 2]).unwrap()),
        ("segment", ClosedSet::v_polytope(vec![v(&[0.0, 0.0]), v(&[1.0, 0.0])]).unwrap()),
        ("disk", ClosedSet::ball(v(&[0.0, 0.0]), 1.0).unwrap()),
        (
            "simplex",
            ClosedSet::v_polytope(vec![v(&[0.0, 0.0, 0.0]), v(&[1.0, 0.0, 0.0]), v(&[0.0, 1.0, 0.0]), v(&[0.0, 0.0, 1.0])])
                .unwrap(),
        ),
    ]
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst = f64::NEG_INFINITY;
    for (name, set) in convex_scenes() {
        let n = set.ambient_dim();
        let tol = set.default_tol_unique();
        for _ in 0..10_000 {
            let x = Vector::new(&(0..n).map(|_| rng.random_range(-2.0..3.0)).collect::<Vec<_>>()).unwrap();
            let y = x + Vector::new(&(0..n).map(|_| rng.random_range(-0.5..0.5)).collect::<Vec<_>>()).unwrap();
            let px = set.xi(&x, tol).ok_or(format!("{name}: no unique nearest point"))?;
            let py = set.xi(&y, tol).ok_or(format!("{name}: no unique nearest point"))?;
            let excess = px.dist(&py) - x.dist(&y);
            worst = worst.max(excess);
            ensure(excess <= 1e-9, || format!("{name}: violation {excess:e} at x = {x:?}, y = {y:?}"))?;
        }
    }
    Ok(format!("5 scenes x 10^4 pairs, max(|ξx-ξy| - |x-y|) = {worst:e}"))
}

fn campaign_scenes() -> Vec<(&'static str, ClosedSet)> {
    vec![
        ("cube", ClosedSet::cuboid(&[0.0; 3], &[1.0; 3]).unwrap()),
        ("square", ClosedSet::cuboid(&[0.0; 2], &[1.0; 2]).unwrap()),
        ("segment", ClosedSet::v_polytope(vec![v(&[0.0, 0.0]), v(&[1.0, 0.0])]).unwrap()),
        ("circle", ClosedSet::sphere(v(&[0.0, 0.0]), 1.0).unwrap()),
        (
            "two_balls",
            ClosedSet::union(vec![
                ClosedSet::ball(v(&[-1.0, 0.0]), 1.0).unwrap(),
                ClosedSet::ball(v(&[1.0, 0.0]), 1.0).unwrap(),
            ])
            .unwrap(),
        ),
    ]
}

fn criterion_3() -> Outcome {
    let mut parts = Vec::new();
    for (k, (name, set)) in campaign_scenes().into_iter().enumerate() {
        let cfg = CampaignConfig { samples: 10_000, seed: 300 + k as u64, ..CampaignConfig::default() };
        let r = campaign_projection_lipschitz(&set, 0.4, 0.2, &cfg).map_err(|e| format!("{name}: {e}"))?;
        let diam = set.diameter().unwrap();
        let bound = 1e-8 * diam * diam;
        ensure(r.samples == 10_000, || format!("{name}: {} admissible pairs", r.samples))?;
        ensure(!r.theorem_violation, || format!("{name}: theorem violation at {:?}", r.worst_witness))?;
        ensure(r.worst_residual <= bound, || format!("{name}: residual {:e} > {bound:e}", r.worst_residual))?;
        parts.push(format!("{name} {:.1e}", r.worst_residual));
    }
    Ok(format!("10^4 pairs per scene, worst residuals: {}", parts.join(", ")))
}

fn criterion_4() -> Outcome {
    let k = kappa(0.1, 0.2, 0.4);
    let mut parts = Vec::new();
    let mut campaign_ok = true;
    for (j, (name, set)) in campaign_scenes().into_iter().enumerate() {
        let cfg = CampaignConfig { samples: 10_000, seed: 400 + j as u64, ..CampaignConfig::default() };
        let r = campaign_one_sided(&set, 0.1, 0.2, 0.4, &cfg).map_err(|e| format!("{name}: {e}"))?;
        let ok = r.samples == 10_000 && r.pass && !r.theorem_violation;
        campaign_ok &= ok;
        parts.push(format!("{name} {} ({:.1e})", if ok { "ok" } else { "FAIL" }, r.worst_residual));
    }
    let campaigns = format!("campaigns at κ = {k}: {}", parts.join(", "));
    ensure(campaign_ok, || campaigns.clone())?;
    ensure((k - 45.0).abs() <= 1e-12, || {
        format!("κ(0.1, 0.2, 0.4) evaluates to {k}, not the stated 45; {campaigns}")
    })?;
    Ok(campaigns)
}

/// Extreme rays of `D ∩ U^⊥` by enumerating subsets of active polar
/// inequalities.
fn extreme_rays(inst: &ConeInstance) -> Vec<Vector> {
    let n = inst.v.dim();
    let gens: Vec<Vector> = inst.cone.generators().iter().map(|g| g.normalized().unwrap()).collect();
    let ub = inst.plane.basis().to_vec();
    let need = n - ub.len() - 1;
    let mut out = Vec::new();
    let mut subset: Vec<usize> = Vec::new();
    fn rec(start: usize, need: usize, total: usize, subset: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if subset.len() == need {
            f(subset);
            return;
        }
        for i in start..total {
            subset.push(i);
            rec(i + 1, need, total, subset, f);
            subset.pop();
        }
    }
    rec(0, need, gens.len(), &mut subset, &mut |s: &[usize]| {
        let rows: Vec<Vector> = ub.iter().copied().chain(s.iter().map(|&i| gens[i])).collect();
        let m = DMatrix::from_fn(n, n, |i, j| if i < rows.len() { rows[i][j] } else { 0.0 });
        let svd = m.svd(false, true);
        let sv = svd.singular_values.clone();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| sv[a].total_cmp(&sv[b]));
        if sv[order[1]] < 1e-9 {
            return;
        }
        let vt = svd.v_t.unwrap();
        let r = Vector::new(&vt.row(order[0]).iter().copied().collect::<Vec<_>>()).unwrap();
        for d in [r, -r] {
            if gens.iter().all(|c| c.dot(&d) <= 1e-10) {
                out.push(d);
            }
        }
    });
    out
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let instances: Vec<ConeInstance> = (0..50).map(|_| random_cone_instance(3, &mut rng).unwrap()).collect();
    let mut worst_rel = 0.0_f64;
    for (k, inst) in instances.iter().enumerate() {
        let gamma = gamma_constant(&inst.cone, &inst.plane, &inst.v).map_err(|e| format!("instance {k}: {e}"))?.gamma;
        let rays = extreme_rays(inst);
        ensure(!rays.is_empty(), || format!("instance {k}: no extreme rays"))?;
        let ratio = |d: &Vector| inst.plane.residual(d).norm() / (-d.dot(&inst.v));
        let mut brute = rays.iter().map(ratio).fold(0.0, f64::max);
        for _ in 0..100_000 {
            let d = rays.iter().fold(Vector::zeros(3), |acc, r| acc.axpy(rng.random::<f64>().powi(8), r));
            if let Some(u) = d.normalized() {
                brute = brute.max(ratio(&u));
            }
        }
        let rel = (gamma - brute).abs() / brute.max(1e-300);
        worst_rel = worst_rel.max(rel);
        ensure(rel <= 1e-5, || format!("instance {k}: γ = {gamma}, brute force {brute}"))?;
    }
    let direct = campaign_cone_control(&instances, 10_000, false, 55, Execution::Parallel).map_err(|e| e.to_string())?;
    let cor = campaign_cone_control(&instances, 10_000, true, 56, Execution::Parallel).map_err(|e| e.to_string())?;
    ensure(direct.pass && !direct.theorem_violation, || format!("cone control residual {:e}", direct.worst_residual))?;
    ensure(cor.pass && !cor.theorem_violation, || format!("corollary residual {:e}", cor.worst_residual))?;
    Ok(format!(
        "50 instances, γ vs brute force max rel. error {worst_rel:.1e}; corollary worst residual {:.1e} over {} b",
        cor.worst_residual, cor.samples
    ))
}

fn criterion_6() -> Outcome {
    let circle = ClosedSet::sphere(v(&[0.0, 0.0]), 1.0).unwrap();
    let cfg = ContactConfig {
        q: 0.4,
        radius_grid: vec![1e-2, 1e-3, 1e-4, 1e-5],
        samples_per_radius: 256,
        tol: 1e-9,
        seed: 6,
    };
    let plane = Subspace::spanned_by(2, &[v(&[0.0, 1.0])]).unwrap();
    let r = check_quadratic_contact(&circle, &v(&[1.1, 0.0]), &plane, &cfg).map_err(|e| e.to_string())?;
    let lam = r.params["lambda_empirical"];
    ensure(r.pass, || format!("two-scale check failed: residual {:e}", r.worst_residual))?;

    let probes = circle.sample_boundary(1000, 61);
    let dis = DisSampleConfig::for_set(&circle);
    let strata = stratify_sampled(&circle, 1, &probes, &[0.25], &dis, Execution::Parallel).map_err(|e| e.to_string())?;
    let pts: Vec<Vector> = strata.classified.iter().filter(|c| c.in_stratum).map(|c| c.point).collect();
    ensure(pts.len() == 1000, || format!("only {} probes in B_1", pts.len()))?;
    let cover = quadratic_patch_cover(&pts, &PatchConfig { m: 1, tol_fit: 1.0, support_radius: 0.3, neighbor_factor: 3 })
        .map_err(|e| e.to_string())?;
    let worst = cover
        .patches
        .iter()
        .map(|p| (p.max_curvature_coefficient() - 0.5).abs() / 0.5)
        .fold(0.0, f64::max);
    ensure(!cover.patches.is_empty() && worst <= 0.05, || format!("coefficient off by {:.2}%", 100.0 * worst))?;
    ensure(cover.recheck(&pts, Execution::Parallel).violations == 0, || "patch residual recheck failed".into())?;
    Ok(format!(
        "λ_emp = {lam:.4}, {} patches, worst coefficient error {:.2}%, assigned {:.1}%",
        cover.patches.len(),
        100.0 * worst,
        100.0 * cover.assigned_fraction
    ))
}

fn criterion_7() -> Outcome {
    let cfg = SlabConfig::default();
    let coord = GridMap::sample(2, 1, 1, &[65, 65], &[0.0, 0.0], &[1.0, 1.0], |x| Some(vec![x[0]])).unwrap();
    let a = coarea_slab_cover(&coord, 1, 16.0, 1.0 / 64.0, 4.0, &cfg).map_err(|e| e.to_string())?;
    ensure(a.covered_fraction == 1.0, || format!("coordinate grid covered {}", a.covered_fraction))?;
    let nodes = 3 * 256 + 1;
    let annulus = GridMap::sample(2, 1, 2, &[nodes, nodes], &[-1.5, -1.5], &[1.5, 1.5], |x| {
        let r = x.norm();
        (0.5..=1.5).contains(&r).then(|| vec![x[0] / r, x[1] / r])
    })
    .unwrap();
    let b = coarea_slab_cover(&annulus, 1, 16.0, 1.0 / 64.0, 4.0, &cfg).map_err(|e| e.to_string())?;
    ensure(b.covered_fraction >= 0.95, || format!("annulus covered {}", b.covered_fraction))?;
    for (name, r) in [("coordinate", &a), ("annulus", &b)] {
        let check = r.recheck(Execution::Parallel);
        ensure(check.pass, || format!("{name}: recheck constant {}", check.worst_constant))?;
    }
    Ok(format!(
        "coordinate 1.0 ({} piece); annulus {:.4} over {} Z-bins with {} pieces, rechecks pass",
        a.pieces.len(),
        b.covered_fraction,
        b.z_bins,
        b.pieces.len()
    ))
}

fn criterion_8() -> Outcome {
    let cube = ClosedSet::cuboid(&[0.0; 3], &[1.0; 3]).unwrap();
    let circle = ClosedSet::sphere(v(&[0.0, 0.0]), 1.0).unwrap();
    let mut summary = Vec::new();
    let cases: Vec<(&str, &ClosedSet, usize, usize, usize, Vector, f64)> = vec![
        ("cube", &cube, 0, 2, 2000, v(&[0.5, 0.5, 0.5]), 0.0),
        ("cube", &cube, 1, 2, 200, v(&[0.5, 0.5, 0.5]), 1.0),
        ("cube", &cube, 2, 2, 100, v(&[0.5, 0.5, 0.5]), 1.0),
        ("circle", &circle, 1, 4, 100, v(&[0.0, 0.0]), 1.5),
    ];
    for (name, set, m, i, count, center, extent) in cases {
        let n = set.ambient_dim();
        let dis = DisSampleConfig::for_set(set);
        let planes = random_planes(n, m, count, &center, 1.0, 80 + m as u64).map_err(|e| e.to_string())?;
        let cfg = CoverConfig { extent, dis: dis.clone(), seed: 81 };
        let cover = projection_cover(set, m, i, &planes, 40, &cfg, Execution::Parallel).map_err(|e| e.to_string())?;
        let images: Vec<Vector> = cover.pairs.iter().map(|p| p.image).collect();
        ensure(!images.is_empty(), || format!("{name}, m = {m}: empty cover"))?;
        let strata = stratify_sampled(set, m, &images, &[0.25], &dis, Execution::Parallel).map_err(|e| e.to_string())?;
        ensure(strata.in_stratum_count() == images.len(), || {
            format!("{name}, m = {m}: {} of {} images in stratum", strata.in_stratum_count(), images.len())
        })?;
        if name == "cube" && m == 0 {
            let verts: Vec<Vector> = (0..8).map(|k| v(&[(k & 1) as f64, ((k >> 1) & 1) as f64, ((k >> 2) & 1) as f64])).collect();
            ensure(images.iter().all(|p| verts.iter().any(|q| q.dist(p) <= 1e-8)), || "image off the vertices".into())?;
            ensure(verts.iter().all(|q| images.iter().any(|p| q.dist(p) <= 1e-8)), || "a vertex was not hit".into())?;
        }
        summary.push(format!("{name} m={m}: {} images", images.len()));
    }
    Ok(format!("{}; cube B_0 image set = 8 vertices", summary.join(", ")))
}

/// Runs the command line in a fresh process: this binary re-enters as the
/// CLI when its first argument is `--cli`.
fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(std::env::current_exe().unwrap()).arg("--cli").args(args).output().expect("run cli")
}

fn criterion_9() -> Outcome {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenes");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let grid = dir.path().join("annulus.grid");
    let out = run_cli(&["grid", "--map", "annulus", "--h", "0.015625", "--out", grid.to_str().unwrap()]);
    ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
    let runs: Vec<Vec<String>> = vec![
        vec!["stratify".into(), "--scene".into(), root.join("cube.toml").display().to_string(), "--m".into(), "1".into()],
        vec!["verify".into(), "--scene".into(), root.join("circle.toml").display().to_string()],
        vec!["coarea".into(), "--grid".into(), grid.display().to_string(), "--seed".into(), "3".into()],
    ];
    for (k, args) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let o = dir.path().join(format!("run{k}_{rep}"));
            let mut a: Vec<&str> = args.iter().map(String::as_str).collect();
            a.extend(["--out", o.to_str().unwrap()]);
            let res = run_cli(&a);
            ensure(res.status.code() == Some(0), || {
                format!("{} exited {:?}: {}", args[0], res.status.code(), String::from_utf8_lossy(&res.stderr))
            })?;
            outputs.push(std::fs::read(o.join("result.json")).map_err(|e| e.to_string())?);
        }
        ensure(outputs[0] == outputs[1], || format!("{} output differs between runs", args[0]))?;
    }
    Ok("stratify, verify and coarea: byte-identical result.json across two runs".into())
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    if args.get(1).map(String::as_str) == Some("--cli") {
        let cli_args = std::iter::once("stratakit".to_string()).chain(args[2..].iter().cloned());
        std::process::exit(stratakit_cli::run(cli_args) as i32);
    }
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("polytope stratification exactness", criterion_1),
        ("convex projection is 1-Lipschitz", criterion_2),
        ("projection Lipschitz estimate", criterion_3),
        ("one-sided estimate", criterion_4),
        ("cone control", criterion_5),
        ("quadratic contact and patch curvature", criterion_6),
        ("coarea slab cover", criterion_7),
        ("projection-cover soundness", criterion_8),
        ("determinism", criterion_9),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} [{name}]: PASS ({secs:.1} s) {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} [{name}]: FAIL ({secs:.1} s) {detail}", k + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
