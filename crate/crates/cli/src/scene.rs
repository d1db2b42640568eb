//! Scene files: a closed set, where to probe it, and campaign parameters.
//!
//! Scenes are TOML. `format_version` must be 1.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use stratakit_core::kernel::{AffineFlat, Vector};
use stratakit_core::sets::{ClosedSet, Halfspace};

pub const SCENE_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub format_version: u32,
    pub scene_id: String,
    pub ambient_dim: usize,
    pub seed: u64,
    pub set: SetSpec,
    pub probes: ProbeSpec,
    #[serde(default)]
    pub params: Params,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetSpec {
    Cuboid { lo: Vec<f64>, hi: Vec<f64> },
    HPolytope { halfspaces: Vec<HalfspaceSpec> },
    VPolytope { vertices: Vec<Vec<f64>> },
    Ball { center: Vec<f64>, radius: f64 },
    Sphere { center: Vec<f64>, radius: f64 },
    Flat { base: Vec<f64>, directions: Vec<Vec<f64>> },
    PointCloud { points: Vec<Vec<f64>> },
    Union { parts: Vec<SetSpec> },
}

/// `normal · x <= offset`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfspaceSpec {
    pub normal: Vec<f64>,
    pub offset: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProbeSpec {
    Points { points: Vec<Vec<f64>> },
    Boundary { count: usize, seed: u64 },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub q_grid: Option<Vec<f64>>,
    pub m: Option<usize>,
    pub estimates: Option<Vec<String>>,
    pub samples: Option<usize>,
    pub max_attempts: Option<usize>,
    pub s: Option<f64>,
    pub r: Option<f64>,
    pub q: Option<f64>,
    pub bases: Option<usize>,
    pub cone_instances: Option<usize>,
    pub samples_per_instance: Option<usize>,
    pub tol_report: Option<f64>,
    pub contact: Option<ContactSpec>,
    pub patch: Option<PatchSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactSpec {
    pub x: Vec<f64>,
    /// Spanning vectors of the plane `U`.
    pub plane: Vec<Vec<f64>>,
    pub radii: Option<Vec<f64>>,
    pub samples_per_radius: Option<usize>,
    pub q: Option<f64>,
    pub tol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchSpec {
    pub tol_fit: f64,
    pub support_radius: f64,
    pub neighbor_factor: Option<usize>,
}

impl SceneSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let spec: SceneSpec = toml::from_str(text).map_err(|e| anyhow::anyhow!("malformed scene: {e}"))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading scene {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in scene {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != SCENE_FORMAT_VERSION {
            bail!("format_version: expected {SCENE_FORMAT_VERSION}, found {}", self.format_version);
        }
        if self.scene_id.trim().is_empty() {
            bail!("scene_id: must not be empty");
        }
        let n = self.ambient_dim;
        if n == 0 {
            bail!("ambient_dim: must be positive");
        }
        self.set.check_dims(n, "set")?;
        if let ProbeSpec::Points { points } = &self.probes {
            for (i, p) in points.iter().enumerate() {
                check_len(p, n, &format!("probes.points[{i}]"))?;
            }
        }
        let p = &self.params;
        if let Some(q) = &p.q_grid {
            if q.is_empty() || q.iter().any(|x| !(*x > 0.0)) {
                bail!("params.q_grid: needs at least one positive radius");
            }
        }
        if let Some(m) = p.m {
            if m > n {
                bail!("params.m: {m} exceeds ambient_dim {n}");
            }
        }
        if let Some(c) = &p.contact {
            check_len(&c.x, n, "params.contact.x")?;
            for (i, u) in c.plane.iter().enumerate() {
                check_len(u, n, &format!("params.contact.plane[{i}]"))?;
            }
        }
        Ok(())
    }

    pub fn build_set(&self) -> Result<ClosedSet> {
        self.set.build().context("set")
    }

    pub fn probe_points(&self, set: &ClosedSet) -> Result<Vec<Vector>> {
        match &self.probes {
            ProbeSpec::Points { points } => points.iter().map(|p| Ok(Vector::new(p)?)).collect(),
            ProbeSpec::Boundary { count, seed } => Ok(set.sample_boundary(*count, *seed)),
        }
    }
}

fn check_len(v: &[f64], n: usize, field: &str) -> Result<()> {
    if v.len() != n {
        bail!("{field}: expected {n} coordinates, found {}", v.len());
    }
    Ok(())
}

impl SetSpec {
    fn check_dims(&self, n: usize, path: &str) -> Result<()> {
        match self {
            SetSpec::Cuboid { lo, hi } => {
                check_len(lo, n, &format!("{path}.lo"))?;
                check_len(hi, n, &format!("{path}.hi"))
            }
            SetSpec::HPolytope { halfspaces } => halfspaces
                .iter()
                .enumerate()
                .try_for_each(|(i, h)| check_len(&h.normal, n, &format!("{path}.halfspaces[{i}].normal"))),
            SetSpec::VPolytope { vertices: pts } | SetSpec::PointCloud { points: pts } => pts
                .iter()
                .enumerate()
                .try_for_each(|(i, p)| check_len(p, n, &format!("{path}.points[{i}]"))),
            SetSpec::Ball { center, .. } | SetSpec::Sphere { center, .. } => check_len(center, n, &format!("{path}.center")),
            SetSpec::Flat { base, directions } => {
                check_len(base, n, &format!("{path}.base"))?;
                directions
                    .iter()
                    .enumerate()
                    .try_for_each(|(i, d)| check_len(d, n, &format!("{path}.directions[{i}]")))
            }
            SetSpec::Union { parts } => parts
                .iter()
                .enumerate()
                .try_for_each(|(i, p)| p.check_dims(n, &format!("{path}.parts[{i}]"))),
        }
    }

    pub fn build(&self) -> Result<ClosedSet> {
        let vecs = |pts: &[Vec<f64>]| -> Result<Vec<Vector>> { pts.iter().map(|p| Ok(Vector::new(p)?)).collect() };
        Ok(match self {
            SetSpec::Cuboid { lo, hi } => ClosedSet::cuboid(lo, hi)?,
            SetSpec::HPolytope { halfspaces } => ClosedSet::h_polytope(
                halfspaces
                    .iter()
                    .map(|h| Ok(Halfspace::new(Vector::new(&h.normal)?, h.offset)))
                    .collect::<Result<_>>()?,
            )?,
            SetSpec::VPolytope { vertices } => ClosedSet::v_polytope(vecs(vertices)?)?,
            SetSpec::Ball { center, radius } => ClosedSet::ball(Vector::new(center)?, *radius)?,
            SetSpec::Sphere { center, radius } => ClosedSet::sphere(Vector::new(center)?, *radius)?,
            SetSpec::Flat { base, directions } => {
                ClosedSet::flat(AffineFlat::spanned_by(Vector::new(base)?, &vecs(directions)?)?)?
            }
            SetSpec::PointCloud { points } => ClosedSet::point_cloud(vecs(points)?)?,
            SetSpec::Union { parts } => ClosedSet::union(
                parts
                    .iter()
                    .enumerate()
                    .map(|(i, p)| p.build().with_context(|| format!("parts[{i}]")))
                    .collect::<Result<_>>()?,
            )?,
        })
    }
}
