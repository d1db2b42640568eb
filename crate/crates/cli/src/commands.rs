use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use stratakit_core::bundle::DisSampleConfig;
use stratakit_core::grid::GridMap;
use stratakit_core::kernel::{Subspace, Vector};
use stratakit_core::par::Execution;
use stratakit_core::rng::stream_rng;
use stratakit_core::sets::ClosedSet;
use stratakit_core::stratify::{
    coarea_slab_cover, quadratic_patch_cover, stratify_exact_polytope, stratify_sampled, PatchConfig, SlabConfig,
};
use stratakit_core::verify::{
    campaign_angle, campaign_cone_control, campaign_cone_distance, campaign_one_sided, campaign_projection_lipschitz,
    check_quadratic_contact, polytope_cone_instances, random_cone_instance, CampaignConfig, ConeInstance, ContactConfig,
    EstimateId, EstimateReport,
};

use crate::output::{write_atomic, write_json, Table};
use crate::scene::SceneSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Violation,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::Violation => 3,
        }
    }

    fn worst(self, other: Status) -> Status {
        match (self, other) {
            (Status::Violation, _) | (_, Status::Violation) => Status::Violation,
            (Status::Fail, _) | (_, Status::Fail) => Status::Fail,
            _ => Status::Pass,
        }
    }
}

/// Payload of `result.json`. Wall time goes to `timing.json` so that the
/// result stays byte-stable.
#[derive(Debug, Serialize)]
pub struct CampaignResult {
    pub scene_id: String,
    pub command: String,
    pub reports: Vec<Value>,
    pub checks: BTreeMap<String, Value>,
    pub pass: bool,
    pub library_version: String,
    pub seed: u64,
    #[serde(skip)]
    pub wall_time: f64,
}

impl CampaignResult {
    fn new(scene_id: &str, command: &str, seed: u64) -> Self {
        CampaignResult {
            scene_id: scene_id.into(),
            command: command.into(),
            reports: Vec::new(),
            checks: BTreeMap::new(),
            pass: false,
            library_version: env!("CARGO_PKG_VERSION").into(),
            seed,
            wall_time: 0.0,
        }
    }

    fn finish(mut self, out: &Path, status: Status, started: Instant) -> Result<Status> {
        self.pass = status == Status::Pass;
        self.wall_time = started.elapsed().as_secs_f64();
        write_json(&out.join("result.json"), &self)?;
        let timing = serde_json::to_string_pretty(&json!({ "wall_time_seconds": self.wall_time }))?;
        write_atomic(&out.join("timing.json"), timing.as_bytes())?;
        log::info!("{} finished in {:.3} s: {:?}", self.command, self.wall_time, status);
        Ok(status)
    }
}

fn coord_header(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

pub struct StratifyArgs {
    pub scene: PathBuf,
    pub m: Option<usize>,
    pub q_grid: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

pub fn stratify(args: &StratifyArgs) -> Result<Status> {
    let started = Instant::now();
    let spec = SceneSpec::load(&args.scene)?;
    let set = spec.build_set()?;
    let n = set.ambient_dim();
    let probes = spec.probe_points(&set)?;
    let m = args.m.or(spec.params.m).unwrap_or(0);
    if m > n {
        bail!("--m {m} exceeds the ambient dimension {n}");
    }
    let q_grid = args
        .q_grid
        .clone()
        .or_else(|| spec.params.q_grid.clone())
        .context("no q grid: pass --q-grid or set params.q_grid")?;
    if q_grid.is_empty() || q_grid.iter().any(|q| !(*q > 0.0)) {
        bail!("q grid needs positive radii");
    }
    let seed = args.seed.unwrap_or(spec.seed);
    let dis = DisSampleConfig {
        seed,
        ..DisSampleConfig::for_set(&set)
    };
    let mut report = stratify_sampled(&set, m, &probes, &q_grid, &dis, Execution::Parallel).context("stratify_sampled")?;
    let mut result = CampaignResult::new(&spec.scene_id, "stratify", seed);
    let mut status = Status::Pass;

    if set.polytope().is_some() {
        let exact = stratify_exact_polytope(&set, m, &probes).context("stratify_exact_polytope")?;
        let agree = exact
            .classified
            .iter()
            .zip(&report.classified)
            .filter(|(e, s)| e.in_stratum == s.in_stratum)
            .count();
        if agree != probes.len() {
            log::warn!("sampled strata disagree with exact faces on {} probes", probes.len() - agree);
            status = Status::Fail;
        }
        result.checks.insert("exact_agreement".into(), json!(agree as f64 / probes.len().max(1) as f64));
        report.exact_faces = exact.exact_faces;
    }

    if let Some(p) = &spec.params.patch {
        if m == 0 {
            report.notes.push("patch covering skipped for m = 0".into());
        } else {
            let pts: Vec<Vector> = report.classified.iter().filter(|c| c.in_stratum).map(|c| c.point).collect();
            if pts.is_empty() {
                report.notes.push("no in-stratum probes to cover".into());
            } else {
                let cfg = PatchConfig {
                    m,
                    tol_fit: p.tol_fit,
                    support_radius: p.support_radius,
                    neighbor_factor: p.neighbor_factor.unwrap_or(3),
                };
                let cover = quadratic_patch_cover(&pts, &cfg).context("quadratic_patch_cover")?;
                let recheck = cover.recheck(&pts, Execution::Parallel);
                if recheck.violations > 0 {
                    log::error!("patch recheck found {} violations", recheck.violations);
                    status = Status::Violation;
                }
                result.checks.insert("patch_recheck".into(), serde_json::to_value(recheck)?);
                result.checks.insert("patch_assigned_fraction".into(), json!(cover.assigned_fraction));
                report.coverage = Some(cover);
            }
        }
    }

    let mut table = Table::new(coord_header("x", n));
    table.header.extend(["est_dim", "in_stratum", "q_used"].map(String::from));
    for c in &report.classified {
        table.push_numbers(Vec::new(), c.point.as_slice(), vec![c.est_dim.to_string(), c.in_stratum.to_string(), format!("{:.16e}", c.q_used)]);
    }
    result.checks.insert("in_stratum".into(), json!(report.in_stratum_count()));
    result.checks.insert("probes".into(), json!(probes.len()));
    result.reports.push(serde_json::to_value(&report)?);
    table.write(&args.out, "strata")?;
    result.finish(&args.out, status, started)
}

pub struct VerifyArgs {
    pub scene: PathBuf,
    pub estimates: Vec<String>,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

fn cone_instances(set: &ClosedSet, count: usize, seed: u64) -> Result<Vec<ConeInstance>> {
    if let Some(poly) = set.polytope() {
        return Ok(polytope_cone_instances(poly)?);
    }
    let mut rng = stream_rng(seed, 0xC0E);
    (0..count)
        .map(|_| Ok(random_cone_instance(set.ambient_dim(), &mut rng)?))
        .collect()
}

fn run_estimate(spec: &SceneSpec, set: &ClosedSet, id: EstimateId, seed: u64) -> Result<EstimateReport> {
    let p = &spec.params;
    let (s, r, q) = (p.s.unwrap_or(0.1), p.r.unwrap_or(0.2), p.q.unwrap_or(0.4));
    let cfg = CampaignConfig {
        samples: p.samples.unwrap_or(10_000),
        seed,
        exec: Execution::Parallel,
        max_attempts: p.max_attempts.unwrap_or(CampaignConfig::default().max_attempts),
    };
    let per_instance = p.samples_per_instance.unwrap_or(10_000);
    let report = match id {
        EstimateId::Angle => campaign_angle(set, q, &cfg)?,
        EstimateId::ProjectionLipschitz => campaign_projection_lipschitz(set, q, r, &cfg)?,
        EstimateId::OneSided => campaign_one_sided(set, s, r, q, &cfg)?,
        EstimateId::ConeDistance => campaign_cone_distance(set, q, p.bases.unwrap_or(64), &cfg)?,
        EstimateId::ConeControl | EstimateId::CorollaryConeControl => {
            let inst = cone_instances(set, p.cone_instances.unwrap_or(50), seed)?;
            campaign_cone_control(&inst, per_instance, id == EstimateId::CorollaryConeControl, seed, Execution::Parallel)?
        }
        EstimateId::QuadraticContact => {
            let c = p.contact.as_ref().context("quadratic_contact needs params.contact")?;
            let x = Vector::new(&c.x)?;
            let dirs: Vec<Vector> = c.plane.iter().map(|u| Ok(Vector::new(u)?)).collect::<Result<_>>()?;
            let plane = Subspace::spanned_by(set.ambient_dim(), &dirs)?;
            let cfg = ContactConfig {
                q: c.q.unwrap_or(q),
                radius_grid: c.radii.clone().unwrap_or_else(|| vec![1e-2, 1e-3, 1e-4, 1e-5]),
                samples_per_radius: c.samples_per_radius.unwrap_or(256),
                tol: c.tol.unwrap_or(1e-9),
                seed,
            };
            check_quadratic_contact(set, &x, &plane, &cfg)?
        }
    };
    let report = report.with_scene(&spec.scene_id, seed);
    Ok(match p.tol_report {
        Some(t) => report.with_tolerance(t),
        None => report,
    })
}

pub fn verify(args: &VerifyArgs) -> Result<Status> {
    let started = Instant::now();
    let spec = SceneSpec::load(&args.scene)?;
    let set = spec.build_set()?;
    let names: Vec<String> = if args.estimates.is_empty() {
        spec.params.estimates.clone().unwrap_or_default()
    } else {
        args.estimates.clone()
    };
    if names.is_empty() {
        bail!("no estimate selected: pass --estimate or set params.estimates");
    }
    let ids: Vec<EstimateId> = names.iter().map(|s| Ok(s.parse::<EstimateId>()?)).collect::<Result<_>>()?;
    let seed = args.seed.unwrap_or(spec.seed);
    let mut result = CampaignResult::new(&spec.scene_id, "verify", seed);
    let mut status = Status::Pass;
    for id in ids {
        let report = run_estimate(&spec, &set, id, seed).with_context(|| format!("estimate {id}"))?;
        let this = if report.theorem_violation {
            log::error!("{id}: theorem violation, witness {:?}", report.worst_witness);
            Status::Violation
        } else if report.pass {
            Status::Pass
        } else {
            log::warn!("{id}: residual {:e} above {:e}, witness {:?}", report.worst_residual, report.tol_report, report.worst_witness);
            Status::Fail
        };
        status = status.worst(this);
        result.checks.insert(id.to_string(), json!(report.pass));
        result.reports.push(serde_json::to_value(&report)?);
    }
    result.finish(&args.out, status, started)
}

pub struct CoareaArgs {
    pub grid: PathBuf,
    pub m: Option<usize>,
    pub z_threshold: f64,
    pub bin_width: f64,
    pub lip_bound: f64,
    pub stride: usize,
    pub random_planes: usize,
    pub seed: u64,
    pub min_coverage: Option<f64>,
    pub out: PathBuf,
}

pub fn coarea(args: &CoareaArgs) -> Result<Status> {
    let started = Instant::now();
    let file = File::open(&args.grid).with_context(|| format!("opening grid {}", args.grid.display()))?;
    let grid = GridMap::read_from(BufReader::new(file)).with_context(|| format!("in grid {}", args.grid.display()))?;
    let m = args.m.unwrap_or(if grid.m == 0 { 1 } else { grid.m });
    let cfg = SlabConfig {
        stride: args.stride,
        random_planes: args.random_planes,
        seed: args.seed,
        ..SlabConfig::default()
    };
    let report = coarea_slab_cover(&grid, m, args.z_threshold, args.bin_width, args.lip_bound, &cfg).context("coarea_slab_cover")?;
    let recheck = report.recheck(Execution::Parallel);
    let scene_id = args.grid.file_stem().map_or_else(|| "grid".into(), |s| s.to_string_lossy().into_owned());
    let mut result = CampaignResult::new(&scene_id, "coarea", args.seed);
    let mut status = if recheck.pass { Status::Pass } else { Status::Violation };
    if let Some(min) = args.min_coverage {
        if report.covered_fraction < min {
            log::warn!("covered fraction {} below {min}", report.covered_fraction);
            status = status.worst(Status::Fail);
        }
    }
    result.checks.insert("slab_recheck".into(), serde_json::to_value(recheck)?);
    result.checks.insert("covered_fraction".into(), json!(report.covered_fraction));

    let mut table = Table::new(["piece", "order", "kind"].map(String::from).to_vec());
    table.header.extend(coord_header("x", grid.n));
    table.header.extend(coord_header("f", grid.nu));
    for (k, piece) in report.pieces.iter().enumerate() {
        let kind = serde_json::to_value(piece.kind)?.as_str().unwrap_or("").to_string();
        for (p, v) in piece.points.iter().zip(&piece.values) {
            let mut nums = p.to_vec();
            nums.extend(v);
            table.push_numbers(vec![k.to_string(), piece.order.to_string(), kind.clone()], &nums, Vec::new());
        }
    }
    table.write(&args.out, "pieces")?;
    result.reports.push(serde_json::to_value(&report)?);
    result.finish(&args.out, status, started)
}

/// Sample maps for the coarea command.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum SampleMap {
    /// `f(x) = x_0` on `[0,1]^2`.
    Coordinate,
    /// `f(x) = x` on `[0,1]^2`.
    Identity,
    /// Nearest point on the unit circle, on the annulus `0.5 <= |x| <= 1.5`.
    Annulus,
}

pub fn write_sample_grid(map: SampleMap, h: f64, out: &Path) -> Result<()> {
    if !(h > 0.0) {
        bail!("--h must be positive");
    }
    let (lo, hi) = match map {
        SampleMap::Annulus => ([-1.5, -1.5], [1.5, 1.5]),
        _ => ([0.0, 0.0], [1.0, 1.0]),
    };
    let nodes = ((hi[0] - lo[0]) / h).round() as usize + 1;
    let shape = [nodes, nodes];
    let grid = match map {
        SampleMap::Coordinate => GridMap::sample(2, 1, 1, &shape, &lo, &hi, |x| Some(vec![x[0]]))?,
        SampleMap::Identity => GridMap::sample(2, 1, 2, &shape, &lo, &hi, |x| Some(x.to_vec()))?,
        SampleMap::Annulus => GridMap::sample(2, 1, 2, &shape, &lo, &hi, |x| {
            let r = x.norm();
            (0.5..=1.5).contains(&r).then(|| vec![x[0] / r, x[1] / r])
        })?,
    };
    let mut buf = Vec::new();
    grid.write_to(&mut buf)?;
    write_atomic(out, &buf)
}
