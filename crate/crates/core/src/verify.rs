//! Residual checks for the quantitative estimates on distance bundles,
//! nearest-point projections and cones.
//!
//! Every check produces an [`EstimateReport`] whose residual is positive
//! exactly when the inequality is violated. Campaigns draw many admissible
//! inputs with index-derived seeds and keep the worst residual.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bundle::{dis_sample, touches, DisSampleConfig};
use crate::cones::{gamma_constant, PolyhedralCone};
use crate::error::{check_dim, GeomError, Result};
use crate::kernel::{dist_to_subspace, Subspace, Vector};
use crate::par::{map_range, Execution};
use crate::rng::{gaussian_vector, simplex_weights, stream_rng, unit_vector};
use crate::sets::{ClosedSet, Polytope};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateId {
    Angle,
    ProjectionLipschitz,
    ConeDistance,
    OneSided,
    ConeControl,
    CorollaryConeControl,
    QuadraticContact,
}

impl EstimateId {
    pub const ALL: [EstimateId; 7] = [
        EstimateId::Angle,
        EstimateId::ProjectionLipschitz,
        EstimateId::ConeDistance,
        EstimateId::OneSided,
        EstimateId::ConeControl,
        EstimateId::CorollaryConeControl,
        EstimateId::QuadraticContact,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EstimateId::Angle => "angle",
            EstimateId::ProjectionLipschitz => "projection_lipschitz",
            EstimateId::ConeDistance => "cone_distance",
            EstimateId::OneSided => "one_sided",
            EstimateId::ConeControl => "cone_control",
            EstimateId::CorollaryConeControl => "corollary_cone_control",
            EstimateId::QuadraticContact => "quadratic_contact",
        }
    }
}

impl fmt::Display for EstimateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimateId {
    type Err = GeomError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| GeomError::InvalidInput(format!("unknown estimate id `{s}`")))
    }
}

/// Named inputs of the sample attaining the worst residual.
pub type Witness = BTreeMap<String, Vec<f64>>;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateReport {
    pub estimate_id: EstimateId,
    pub params: BTreeMap<String, f64>,
    pub samples: usize,
    /// Positive means the inequality failed on some sample.
    pub worst_residual: f64,
    pub worst_witness: Witness,
    pub pass: bool,
    pub tol_report: f64,
    /// Set when the data contradict a conclusion that the hypotheses force,
    /// as opposed to merely exceeding a bound.
    pub theorem_violation: bool,
    pub seed: u64,
    pub scene_id: String,
    pub notes: Vec<String>,
}

impl EstimateReport {
    pub fn with_scene(mut self, scene_id: &str, seed: u64) -> Self {
        self.scene_id = scene_id.to_string();
        self.seed = seed;
        self
    }

    /// Re-evaluates `pass` against another tolerance.
    pub fn with_tolerance(mut self, tol_report: f64) -> Self {
        self.tol_report = tol_report;
        self.pass = self.worst_residual <= tol_report && !self.theorem_violation;
        self
    }
}

/// Tolerances derived from the length scale `L` of a set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    pub tol_touch: f64,
    pub tol_unique: f64,
    /// `1e-8 L`.
    pub first_order: f64,
    /// `1e-8 L^2`.
    pub second_order: f64,
}

impl Tolerances {
    pub fn for_set(set: &ClosedSet) -> Self {
        let l = set.length_scale();
        Tolerances {
            tol_touch: 1e-12 * l.max(1.0),
            tol_unique: 1e-8 * l,
            first_order: 1e-8 * l,
            second_order: 1e-8 * l * l,
        }
    }
}

fn witness(items: &[(&str, &Vector)]) -> Witness {
    items
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_vec()))
        .collect()
}

#[derive(Clone, Debug)]
struct Outcome {
    residual: f64,
    witness: Witness,
    violation: bool,
    /// Secondary residual folded into the worst one and reported separately.
    aux: Option<f64>,
}

impl Outcome {
    fn new(residual: f64, witness: Witness) -> Self {
        Outcome {
            residual,
            witness,
            violation: false,
            aux: None,
        }
    }
}

#[derive(Default)]
struct Tally {
    worst: Option<Outcome>,
    samples: usize,
    violation: bool,
    aux: Option<f64>,
}

impl Tally {
    fn push(&mut self, o: Outcome) {
        self.samples += 1;
        self.violation |= o.violation;
        if let Some(x) = o.aux {
            self.aux = Some(self.aux.map_or(x, |y| y.max(x)));
        }
        // violations rank above any residual
        let worse = match &self.worst {
            None => true,
            Some(w) => (o.violation, o.residual) > (w.violation, w.residual),
        };
        if worse {
            self.worst = Some(o);
        }
    }

    fn report(
        self,
        id: EstimateId,
        mut params: BTreeMap<String, f64>,
        tol_report: f64,
        aux_name: Option<&str>,
        notes: Vec<String>,
    ) -> EstimateReport {
        if let (Some(name), Some(x)) = (aux_name, self.aux) {
            params.insert(name.to_string(), x);
        }
        let (worst_residual, worst_witness) = match self.worst {
            Some(o) => (o.residual, o.witness),
            None => (f64::NEG_INFINITY, Witness::new()),
        };
        EstimateReport {
            estimate_id: id,
            params,
            samples: self.samples,
            worst_residual,
            worst_witness,
            pass: worst_residual <= tol_report && !self.violation,
            tol_report,
            theorem_violation: self.violation,
            seed: 0,
            scene_id: String::new(),
            notes,
        }
    }
}

fn single(
    id: EstimateId,
    params: BTreeMap<String, f64>,
    o: Outcome,
    tol_report: f64,
    aux_name: Option<&str>,
) -> EstimateReport {
    let mut t = Tally::default();
    t.push(o);
    t.report(id, params, tol_report, aux_name, Vec::new())
}

fn params(items: &[(&str, f64)]) -> BTreeMap<String, f64> {
    items.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn require_on_set(set: &ClosedSet, p: &Vector, name: &str, tol: f64) -> Result<()> {
    check_dim(set.ambient_dim(), p.dim())?;
    let d = set.distance(p);
    if d > tol {
        return Err(GeomError::Precondition(format!(
            "{name} = {p:?} is at distance {d:e} from the set"
        )));
    }
    Ok(())
}

fn require_radii(s: Option<f64>, r: f64, q: f64) -> Result<()> {
    let ok = match s {
        Some(s) => 0.0 < s && s < r && r < q,
        None => 0.0 < r && r < q,
    } && q.is_finite();
    if ok {
        Ok(())
    } else {
        Err(GeomError::Precondition(format!(
            "radii must satisfy 0 < s < r < q, got s = {s:?}, r = {r}, q = {q}"
        )))
    }
}

// ---------------------------------------------------------------- angle

fn eval_angle(set: &ClosedSet, a: &Vector, b: &Vector, v: &Vector, q: f64, tol: &Tolerances) -> Option<Outcome> {
    let len = v.norm();
    if len > 0.0 && !touches(set, a, &(*v * (q / len)), tol.tol_touch) {
        return None;
    }
    let ba = *b - *a;
    let residual = ba.dot(v) - ba.norm_sq() * len / (2.0 * q);
    Some(Outcome::new(residual, witness(&[("a", a), ("b", b), ("v", v)])))
}

/// `(b - a) · v <= (2q)^{-1} |b - a|^2 |v|` when `q v / |v|` lies in the
/// bundle at `a`.
pub fn check_angle(set: &ClosedSet, a: &Vector, b: &Vector, v: &Vector, q: f64, tol: &Tolerances) -> Result<EstimateReport> {
    require_on_set(set, a, "a", tol.tol_touch)?;
    require_on_set(set, b, "b", tol.tol_touch)?;
    check_dim(set.ambient_dim(), v.dim())?;
    if !(q > 0.0 && q.is_finite()) {
        return Err(GeomError::Precondition(format!("q = {q} must be positive")));
    }
    let o = eval_angle(set, a, b, v, q, tol)
        .ok_or_else(|| GeomError::Precondition("q v/|v| is not in the bundle at a".into()))?;
    Ok(single(EstimateId::Angle, params(&[("q", q)]), o, tol.second_order, None))
}

// ------------------------------------------------------ projection bound

enum Base {
    Admissible(Vector),
    /// Some nearest point satisfies the hypothesis although the nearest
    /// point is not unique.
    Violation(Vector),
    Rejected,
}

/// Base point for `x` under the hypothesis "either `x = a` or
/// `q (x - a)/|x - a|` lies in the bundle at `a`".
fn classify_base(set: &ClosedSet, x: &Vector, q: f64, tol: &Tolerances) -> Base {
    let pr = set.nearest_point_set(x, tol.tol_unique);
    let cond = |a: &Vector| {
        let d = *x - *a;
        let len = d.norm();
        len <= tol.tol_touch || touches(set, a, &(d * (q / len)), tol.tol_touch)
    };
    if pr.unique {
        if cond(&pr.nearest[0]) {
            Base::Admissible(pr.nearest[0])
        } else {
            Base::Rejected
        }
    } else {
        match pr.nearest.iter().find(|a| cond(a)) {
            Some(a) => Base::Violation(*a),
            None => Base::Rejected,
        }
    }
}

fn eval_projection(set: &ClosedSet, x: &Vector, y: &Vector, q: f64, r: f64, tol: &Tolerances) -> Option<Outcome> {
    if set.distance(x) > r || set.distance(y) > r {
        return None;
    }
    let (a, va) = match classify_base(set, x, q, tol) {
        Base::Admissible(a) => (a, false),
        Base::Violation(a) => (a, true),
        Base::Rejected => return None,
    };
    let (b, vb) = match classify_base(set, y, q, tol) {
        Base::Admissible(b) => (b, false),
        Base::Violation(b) => (b, true),
        Base::Rejected => return None,
    };
    let residual = a.dist(&b) - q / (q - r) * y.dist(x);
    let mut o = Outcome::new(residual, witness(&[("x", x), ("y", y), ("a", &a), ("b", &b)]));
    o.violation = va || vb;
    Some(o)
}

/// `|ξ(x) - ξ(y)| <= q (q - r)^{-1} |y - x|`. A non-unique nearest point
/// under the hypotheses is flagged as a theorem violation.
pub fn check_projection_lipschitz(
    set: &ClosedSet,
    x: &Vector,
    y: &Vector,
    q: f64,
    r: f64,
    tol: &Tolerances,
) -> Result<EstimateReport> {
    check_dim(set.ambient_dim(), x.dim())?;
    check_dim(set.ambient_dim(), y.dim())?;
    require_radii(None, r, q)?;
    let o = eval_projection(set, x, y, q, r, tol).ok_or_else(|| {
        GeomError::Precondition("x or y violates the distance or bundle hypothesis".into())
    })?;
    Ok(single(
        EstimateId::ProjectionLipschitz,
        params(&[("q", q), ("r", r)]),
        o,
        tol.first_order,
        None,
    ))
}

// --------------------------------------------------------- cone distance

fn eval_cone_distance(polar: &PolyhedralCone, a: &Vector, b: &Vector, q: f64) -> Outcome {
    let ba = *b - *a;
    let residual = polar.distance(&ba) - ba.norm_sq() / (2.0 * q);
    Outcome::new(residual, witness(&[("a", a), ("b", b)]))
}

/// `dist(b - a, D) <= (2q)^{-1} |b - a|^2` with `D` the polar of the cone
/// spanned by `generators`, each of which must touch at radius `q`.
pub fn check_cone_distance(
    set: &ClosedSet,
    a: &Vector,
    b: &Vector,
    generators: &[Vector],
    q: f64,
    tol: &Tolerances,
) -> Result<EstimateReport> {
    require_on_set(set, a, "a", tol.tol_touch)?;
    require_on_set(set, b, "b", tol.tol_touch)?;
    if !(q > 0.0 && q.is_finite()) {
        return Err(GeomError::Precondition(format!("q = {q} must be positive")));
    }
    for g in generators {
        check_dim(set.ambient_dim(), g.dim())?;
        if let Some(u) = g.normalized() {
            if !touches(set, a, &(u * q), tol.tol_touch) {
                return Err(GeomError::Precondition(format!(
                    "generator {g:?} does not touch at radius {q}"
                )));
            }
        }
    }
    let cone = PolyhedralCone::new(set.ambient_dim(), generators.to_vec())?;
    let o = eval_cone_distance(&cone.polar(), a, b, q);
    Ok(single(EstimateId::ConeDistance, params(&[("q", q)]), o, tol.first_order, None))
}

// -------------------------------------------------------------- one-sided

/// `(2s)^{-1} (1 + 2q/(q - r))^2`.
pub fn kappa(s: f64, r: f64, q: f64) -> f64 {
    let t = 1.0 + 2.0 * q / (q - r);
    t * t / (2.0 * s)
}

/// `gamma kappa |x| + (1 + gamma |x|) q / (2 (q - r)^2)`.
pub fn lambda(gamma: f64, kappa: f64, x_norm: f64, q: f64, r: f64) -> f64 {
    gamma * kappa * x_norm + (1.0 + gamma * x_norm) * q / (2.0 * (q - r) * (q - r))
}

/// Nearest point and unit direction of `x` when `x` is at distance within
/// `[s, r]`, has a unique nearest point, and `q v` touches.
fn one_sided_base(set: &ClosedSet, x: &Vector, s: f64, r: f64, q: f64, tol: &Tolerances) -> Option<(Vector, Vector, f64)> {
    let pr = set.nearest_point_set(x, tol.tol_unique);
    if !pr.unique || pr.distance < s - tol.tol_touch || pr.distance > r + tol.tol_touch {
        return None;
    }
    let a = pr.nearest[0];
    let v = (*x - a).normalized()?;
    touches(set, &a, &(v * q), tol.tol_touch).then_some((a, v, pr.distance))
}

fn eval_one_sided(set: &ClosedSet, x: &Vector, y: &Vector, s: f64, r: f64, q: f64, tol: &Tolerances) -> Option<Outcome> {
    let (a, v, _) = one_sided_base(set, x, s, r, q, tol)?;
    let (b, w, _) = one_sided_base(set, y, s, r, q, tol)?;
    let k = kappa(s, r, q);
    let main = (a - b).dot(&v) - k * y.dist(x).powi(2);
    // the same pair moved onto the level set at distance exactly s
    let alpha = a.axpy(s, &v);
    let beta = b.axpy(s, &w);
    let level = (alpha - beta).dot(&v) - alpha.dist(&beta).powi(2) / (2.0 * s);
    let mut o = Outcome::new(
        main.max(level),
        witness(&[("x", x), ("y", y), ("a", &a), ("b", &b), ("alpha", &alpha), ("beta", &beta)]),
    );
    o.aux = Some(level);
    Some(o)
}

/// `(ξ(x) - ξ(y)) · v <= kappa |y - x|^2` together with the level-set
/// inequality `(α - β) · v <= (2s)^{-1} |β - α|^2` for the pair moved to
/// distance `s`.
pub fn check_one_sided(
    set: &ClosedSet,
    x: &Vector,
    y: &Vector,
    q: f64,
    r: f64,
    s: f64,
    tol: &Tolerances,
) -> Result<EstimateReport> {
    check_dim(set.ambient_dim(), x.dim())?;
    check_dim(set.ambient_dim(), y.dim())?;
    require_radii(Some(s), r, q)?;
    let o = eval_one_sided(set, x, y, s, r, q, tol).ok_or_else(|| {
        GeomError::Precondition("x or y violates the distance or bundle hypothesis".into())
    })?;
    Ok(single(
        EstimateId::OneSided,
        params(&[("q", q), ("r", r), ("s", s), ("kappa", kappa(s, r, q))]),
        o,
        tol.first_order,
        Some("level_set_residual"),
    ))
}

// ------------------------------------------------------------ cone control

/// Data `(C, U, v)` for the cone-control inequality.
#[derive(Clone, Debug)]
pub struct ConeInstance {
    pub cone: PolyhedralCone,
    pub plane: Subspace,
    pub v: Vector,
}

/// Random valid instance in `R^n`: `U` of random dimension `m < n`, and a
/// pointed cone spanning `U^⊥` around a random axis, with `v` the sum of its
/// generators.
pub fn random_cone_instance(n: usize, rng: &mut ChaCha8Rng) -> Result<ConeInstance> {
    loop {
        let m = rng.random_range(0..n);
        let raw: Vec<Vector> = (0..m).map(|_| gaussian_vector(rng, n)).collect();
        let plane = Subspace::spanned_by(n, &raw)?;
        if plane.dim() != m {
            continue;
        }
        let perp = plane.orthogonal_complement();
        let Some(axis) = perp.project(&gaussian_vector(rng, n)).normalized() else {
            continue;
        };
        let k = rng.random_range(n - m..=n - m + 3);
        let spread = 0.2 + 1.5 * rng.random::<f64>();
        let gens: Vec<Vector> = (0..k)
            .map(|_| {
                let g = perp.project(&gaussian_vector(rng, n));
                let side = g - axis * g.dot(&axis);
                axis + side * spread
            })
            .collect();
        let cone = PolyhedralCone::new(n, gens)?;
        if cone.dim() != n - m {
            continue;
        }
        let v = cone
            .generators()
            .iter()
            .fold(Vector::zeros(n), |acc, g| acc + g.normalized().unwrap_or(*g));
        if !cone.relint_contains(&v, 1e-6) {
            continue;
        }
        return Ok(ConeInstance { cone, plane, v });
    }
}

/// One instance per proper face of a polytope: the normal cone at the face,
/// the face's direction space, and the sum of the normal generators.
pub fn polytope_cone_instances(poly: &Polytope) -> Result<Vec<ConeInstance>> {
    let n = poly.ambient_dim();
    let mut out = Vec::new();
    for face in poly.faces() {
        if face.dim == poly.dim() {
            continue;
        }
        let centroid = face
            .vertices
            .iter()
            .fold(Vector::zeros(n), |acc, &j| acc + poly.vertices()[j])
            / face.vertices.len() as f64;
        let gens = poly.normal_cone_generators(&centroid, 1e-9 * poly.scale());
        let cone = PolyhedralCone::new(n, gens)?;
        let v = cone.generators().iter().fold(Vector::zeros(n), |acc, g| acc + *g);
        out.push(ConeInstance {
            cone,
            plane: face.flat.direction_space(),
            v,
        });
    }
    Ok(out)
}

/// A point of `D` as a random sparse nonnegative combination of its
/// generators, rescaled to a random length.
fn sample_in_cone(gens: &[Vector], n: usize, rng: &mut ChaCha8Rng) -> Vector {
    if gens.is_empty() {
        return Vector::zeros(n);
    }
    let k = rng.random_range(1..=gens.len());
    let w = simplex_weights(rng, k);
    let mut d = Vector::zeros(n);
    for wi in w {
        d = d.axpy(wi, &gens[rng.random_range(0..gens.len())]);
    }
    d * (0.1 + 3.0 * rng.random::<f64>())
}

/// Checks `dist(d, U) <= -gamma d · v` (or, with `corollary`, the bound for
/// arbitrary `b`) on sampled points of every instance.
pub fn campaign_cone_control(
    instances: &[ConeInstance],
    samples_per_instance: usize,
    corollary: bool,
    seed: u64,
    exec: Execution,
) -> Result<EstimateReport> {
    let tol = if corollary { 1e-8 } else { 1e-9 };
    let per: Vec<Result<(f64, Vec<Outcome>)>> = map_range(exec, instances.len(), |i| {
        let inst = &instances[i];
        let n = inst.v.dim();
        let cert = gamma_constant(&inst.cone, &inst.plane, &inst.v)?;
        let g = cert.gamma;
        let polar = inst.cone.polar();
        let gens = polar.generators().to_vec();
        let mut rng = stream_rng(seed, i as u64);
        let mut outs = Vec::with_capacity(samples_per_instance);
        for _ in 0..samples_per_instance {
            let o = if corollary {
                let b = gaussian_vector(&mut rng, n) * (0.1 + 3.0 * rng.random::<f64>());
                let lhs = dist_to_subspace(&b, &inst.plane)?;
                let rhs = -g * b.dot(&inst.v) + (1.0 + g * inst.v.norm()) * polar.distance(&b);
                Outcome::new(lhs - rhs, witness(&[("b", &b), ("v", &inst.v)]))
            } else {
                let d = sample_in_cone(&gens, n, &mut rng);
                let lhs = dist_to_subspace(&d, &inst.plane)?;
                Outcome::new(lhs + g * d.dot(&inst.v), witness(&[("d", &d), ("v", &inst.v)]))
            };
            outs.push(o);
        }
        Ok((g, outs))
    });
    let mut tally = Tally::default();
    let mut gamma_max = 0.0_f64;
    for r in per {
        let (g, outs) = r?;
        gamma_max = gamma_max.max(g);
        outs.into_iter().for_each(|o| tally.push(o));
    }
    let id = if corollary {
        EstimateId::CorollaryConeControl
    } else {
        EstimateId::ConeControl
    };
    Ok(tally.report(
        id,
        params(&[("gamma", gamma_max), ("instances", instances.len() as f64)]),
        tol,
        None,
        Vec::new(),
    ))
}

// -------------------------------------------------------- quadratic contact

/// Tolerance and sampling knobs for [`check_quadratic_contact`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContactConfig {
    pub q: f64,
    pub radius_grid: Vec<f64>,
    pub samples_per_radius: usize,
    /// Absolute slack on the two-scale comparison.
    pub tol: f64,
    pub seed: u64,
}

/// Samples `R(y) = |y - x|^{-2} dist(ξ(y) - a, U)` over admissible `y` on
/// spheres around `x` of the given radii. Passes when the largest value at
/// the two smallest radii is at most 4 times the largest value at the two
/// largest radii (plus `tol`); a finite-sample stand-in for a bounded
/// limit superior.
pub fn check_quadratic_contact(
    set: &ClosedSet,
    x: &Vector,
    plane: &Subspace,
    cfg: &ContactConfig,
) -> Result<EstimateReport> {
    let n = set.ambient_dim();
    check_dim(n, x.dim())?;
    check_dim(n, plane.ambient_dim())?;
    let tol = Tolerances::for_set(set);
    let q = cfg.q;
    if cfg.radius_grid.len() < 2 || cfg.radius_grid.iter().any(|r| !(*r > 0.0)) {
        return Err(GeomError::InvalidInput(
            "radius grid needs at least two positive radii".into(),
        ));
    }
    let pr = set.nearest_point_set(x, tol.tol_unique);
    if !pr.unique || !(pr.distance > 0.0 && pr.distance < q) {
        return Err(GeomError::Precondition(
            "x needs a unique nearest point at distance in (0, q)".into(),
        ));
    }
    let a = pr.nearest[0];
    let u = (*x - a) / pr.distance;
    let bundle = dis_sample(
        set,
        &a,
        q,
        &DisSampleConfig {
            seed: cfg.seed,
            ..DisSampleConfig::for_set(set)
        },
        0,
    )?;
    if !touches(set, &a, &(u * q), tol.tol_touch) {
        return Err(GeomError::Precondition("x is not in the admissible shell".into()));
    }
    let hull = bundle.cone_hull()?;
    if !hull.relint_contains(&u, 1e-6) {
        return Err(GeomError::Precondition(
            "direction of x is not in the relative interior of the sampled bundle".into(),
        ));
    }
    if bundle.est_dim + plane.dim() < n {
        return Err(GeomError::Precondition(format!(
            "sampled bundle dimension {} is below n - dim U = {}",
            bundle.est_dim,
            n - plane.dim()
        )));
    }
    for b in plane.basis() {
        if hull.generators().iter().any(|g| b.dot(g).abs() > 1e-6) {
            return Err(GeomError::Precondition(
                "U is not contained in the tangent cone".into(),
            ));
        }
    }

    let mut radii = cfg.radius_grid.clone();
    radii.sort_by(|a, b| b.total_cmp(a));
    let mut per_radius: Vec<(f64, Outcome)> = Vec::new();
    let mut tally = Tally::default();
    for (k, &rho) in radii.iter().enumerate() {
        let mut rng = stream_rng(cfg.seed, 0x51DE + k as u64);
        let mut best: Option<Outcome> = None;
        let mut hits = 0usize;
        for _ in 0..cfg.samples_per_radius {
            let y = x.axpy(rho, &unit_vector(&mut rng, n));
            let pr = set.nearest_point_set(&y, tol.tol_unique);
            if !pr.unique || !(pr.distance > 0.0 && pr.distance < q) {
                continue;
            }
            let b = pr.nearest[0];
            if !touches(set, &b, &((y - b) * (q / pr.distance)), tol.tol_touch) {
                continue;
            }
            hits += 1;
            let ratio = dist_to_subspace(&(b - a), plane)? / y.dist(x).powi(2);
            if best.as_ref().is_none_or(|o| ratio > o.residual) {
                best = Some(Outcome::new(ratio, witness(&[("x", x), ("y", &y), ("a", &a)])));
            }
        }
        match best {
            Some(o) if hits > 0 => {
                per_radius.push((rho, o.clone()));
                tally.samples += hits;
            }
            _ => {
                return Err(GeomError::InsufficientSample(format!(
                    "no admissible point at radius {rho:e}"
                )))
            }
        }
    }
    let k = per_radius.len();
    let large = per_radius[0].1.residual.max(per_radius[1].1.residual);
    let small = per_radius[k - 2].1.residual.max(per_radius[k - 1].1.residual);
    let (lambda_idx, _) = per_radius
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| a.1.residual.total_cmp(&b.1.residual))
        .expect("nonempty");
    let lambda_emp = per_radius[lambda_idx].1.residual;
    let mut p = params(&[
        ("q", q),
        ("lambda_empirical", lambda_emp),
        ("max_ratio_large_scales", large),
        ("max_ratio_small_scales", small),
        ("scale_factor", 4.0),
        ("radius_largest", radii[0]),
        ("radius_smallest", radii[k - 1]),
    ]);
    for (i, (rho, o)) in per_radius.iter().enumerate() {
        p.insert(format!("ratio_at_radius_{i}"), o.residual);
        p.insert(format!("radius_{i}"), *rho);
    }
    let residual = small - 4.0 * large;
    let worst = Outcome::new(residual, per_radius[lambda_idx].1.witness.clone());
    let samples = tally.samples;
    tally.worst = Some(worst);
    let mut report = tally.report(
        EstimateId::QuadraticContact,
        p,
        cfg.tol,
        None,
        vec!["two-scale boundedness heuristic: small-scale max <= 4 x large-scale max".into()],
    );
    report.samples = samples;
    report.seed = cfg.seed;
    Ok(report)
}

// -------------------------------------------------------------- campaigns

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CampaignConfig {
    pub samples: usize,
    pub seed: u64,
    pub exec: Execution,
    /// Rejection-sampling attempts allowed per admissible sample.
    pub max_attempts: usize,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            samples: 10_000,
            seed: 0,
            exec: Execution::default(),
            max_attempts: 2_000,
        }
    }
}

/// Draws points near a set: a boundary anchor plus a random offset.
struct ShellSampler<'a> {
    set: &'a ClosedSet,
    anchors: Vec<Vector>,
    scale: f64,
}

impl<'a> ShellSampler<'a> {
    fn new(set: &'a ClosedSet, seed: u64) -> Self {
        ShellSampler {
            set,
            anchors: set.sample_boundary(512, seed),
            scale: set.length_scale(),
        }
    }

    fn anchor(&self, rng: &mut ChaCha8Rng) -> Vector {
        self.anchors[rng.random_range(0..self.anchors.len())]
    }

    fn near(&self, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Vector {
        let a = self.anchor(rng);
        let t = lo + (hi - lo) * rng.random::<f64>();
        a.axpy(t, &unit_vector(rng, self.set.ambient_dim()))
    }

    /// Either an independent point or one at log-uniform distance from `x`.
    fn partner(&self, rng: &mut ChaCha8Rng, x: &Vector, lo: f64, hi: f64) -> Vector {
        if rng.random::<bool>() {
            self.near(rng, lo, hi)
        } else {
            let rho = self.scale * 10f64.powf(-6.0 * rng.random::<f64>());
            x.axpy(rho, &unit_vector(rng, self.set.ambient_dim()))
        }
    }
}

fn run_campaign<F>(cfg: &CampaignConfig, draw: F) -> Result<Tally>
where
    F: Fn(&mut ChaCha8Rng) -> Option<Outcome> + Sync + Send,
{
    let results: Vec<Option<Outcome>> = map_range(cfg.exec, cfg.samples, |i| {
        let mut rng = stream_rng(cfg.seed, i as u64);
        (0..cfg.max_attempts).find_map(|_| draw(&mut rng))
    });
    let mut tally = Tally::default();
    let mut missing = 0usize;
    for r in results {
        match r {
            Some(o) => tally.push(o),
            None => missing += 1,
        }
    }
    if missing > 0 {
        return Err(GeomError::InsufficientSample(format!(
            "{missing} of {} samples found no admissible input within {} attempts",
            cfg.samples, cfg.max_attempts
        )));
    }
    Ok(tally)
}

pub fn campaign_angle(set: &ClosedSet, q: f64, cfg: &CampaignConfig) -> Result<EstimateReport> {
    let tol = Tolerances::for_set(set);
    let sampler = ShellSampler::new(set, cfg.seed);
    let tally = run_campaign(cfg, |rng| {
        let x = sampler.near(rng, 0.0, q);
        let pr = set.nearest_point_set(&x, tol.tol_unique);
        if !pr.unique || pr.distance <= tol.tol_touch {
            return None;
        }
        let a = pr.nearest[0];
        let v = (x - a) * (sampler.scale * rng.random::<f64>() / pr.distance);
        let b = if rng.random::<bool>() {
            sampler.anchor(rng)
        } else {
            let rho = sampler.scale * 10f64.powf(-6.0 * rng.random::<f64>());
            set.nearest_point_set(&a.axpy(rho, &unit_vector(rng, set.ambient_dim())), tol.tol_unique)
                .nearest[0]
        };
        eval_angle(set, &a, &b, &v, q, &tol)
    })?;
    Ok(tally
        .report(EstimateId::Angle, params(&[("q", q)]), tol.second_order, None, Vec::new()))
}

pub fn campaign_projection_lipschitz(set: &ClosedSet, q: f64, r: f64, cfg: &CampaignConfig) -> Result<EstimateReport> {
    require_radii(None, r, q)?;
    let tol = Tolerances::for_set(set);
    let sampler = ShellSampler::new(set, cfg.seed);
    let tally = run_campaign(cfg, |rng| {
        let x = sampler.near(rng, 0.0, r);
        let y = sampler.partner(rng, &x, 0.0, r);
        eval_projection(set, &x, &y, q, r, &tol)
    })?;
    Ok(tally.report(
        EstimateId::ProjectionLipschitz,
        params(&[("q", q), ("r", r)]),
        tol.first_order,
        None,
        Vec::new(),
    ))
}

pub fn campaign_one_sided(set: &ClosedSet, s: f64, r: f64, q: f64, cfg: &CampaignConfig) -> Result<EstimateReport> {
    require_radii(Some(s), r, q)?;
    let tol = Tolerances::for_set(set);
    let sampler = ShellSampler::new(set, cfg.seed);
    let tally = run_campaign(cfg, |rng| {
        let x = sampler.near(rng, s, r);
        let y = sampler.partner(rng, &x, s, r);
        eval_one_sided(set, &x, &y, s, r, q, &tol)
    })?;
    Ok(tally.report(
        EstimateId::OneSided,
        params(&[("q", q), ("r", r), ("s", s), ("kappa", kappa(s, r, q))]),
        tol.first_order,
        Some("level_set_residual"),
        Vec::new(),
    ))
}

/// Base points (polytope vertices first) each paired with the polar of the
/// cone of sampled directions touching at the full radius `q`.
pub fn campaign_cone_distance(set: &ClosedSet, q: f64, bases: usize, cfg: &CampaignConfig) -> Result<EstimateReport> {
    let tol = Tolerances::for_set(set);
    let sampler = ShellSampler::new(set, cfg.seed);
    let dis_cfg = DisSampleConfig {
        seed: cfg.seed,
        ..DisSampleConfig::for_set(set)
    };
    let anchors: Vec<Vector> = sampler.anchors.iter().take(bases.max(1)).copied().collect();
    let cones: Vec<Result<PolyhedralCone>> = map_range(cfg.exec, anchors.len(), |i| {
        let s = dis_sample(set, &anchors[i], q, &dis_cfg, i as u64)?;
        let mut gens: Vec<Vector> = Vec::new();
        for d in s.directions.iter().filter(|d| d.radius >= q) {
            if !gens.iter().any(|g| g.dist(&d.direction) < 1e-4) {
                gens.push(d.direction);
            }
        }
        Ok(PolyhedralCone::new(set.ambient_dim(), gens)?.polar())
    });
    let polars = cones.into_iter().collect::<Result<Vec<_>>>()?;
    let tally = run_campaign(cfg, |rng| {
        let i = rng.random_range(0..anchors.len());
        let a = anchors[i];
        let b = if rng.random::<bool>() {
            sampler.anchor(rng)
        } else {
            let rho = sampler.scale * 10f64.powf(-6.0 * rng.random::<f64>());
            set.nearest_point_set(&a.axpy(rho, &unit_vector(rng, set.ambient_dim())), tol.tol_unique)
                .nearest[0]
        };
        Some(eval_cone_distance(&polars[i], &a, &b, q))
    })?;
    Ok(tally.report(
        EstimateId::ConeDistance,
        params(&[("q", q), ("bases", anchors.len() as f64)]),
        tol.first_order,
        None,
        Vec::new(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::AffineFlat;
    use approx::assert_abs_diff_eq;

    fn v(c: &[f64]) -> Vector {
        Vector::new(c).unwrap()
    }

    fn x_axis() -> ClosedSet {
        ClosedSet::flat(AffineFlat::new(v(&[0.0, 0.0]), vec![v(&[1.0, 0.0])]).unwrap()).unwrap()
    }

    fn circle() -> ClosedSet {
        ClosedSet::sphere(v(&[0.0, 0.0]), 1.0).unwrap()
    }

    #[test]
    fn kappa_values() {
        assert_abs_diff_eq!(kappa(1.0, 2.0, 4.0), 12.5, epsilon = 1e-12);
        // 1 + 2 (0.4)/(0.2) = 5, so kappa = 25/0.2
        assert_abs_diff_eq!(kappa(0.1, 0.2, 0.4), 125.0, epsilon = 1e-9);
    }

    #[test]
    fn estimate_ids_round_trip() {
        for id in EstimateId::ALL {
            assert_eq!(id.as_str().parse::<EstimateId>().unwrap(), id);
        }
        assert!("nope".parse::<EstimateId>().is_err());
    }

    #[test]
    fn angle_examples() {
        let a = x_axis();
        let tol = Tolerances::for_set(&a);
        let o = v(&[0.0, 0.0]);
        for q in [0.5, 1.0, 7.0] {
            let r = check_angle(&a, &o, &v(&[1.0, 0.0]), &v(&[0.0, q]), q, &tol).unwrap();
            assert_abs_diff_eq!(r.worst_residual, -0.5, epsilon = 1e-12);
            assert!(r.pass);
        }
        let r = check_angle(&a, &o, &v(&[1.0, 0.0]), &v(&[0.0, 0.0]), 1.0, &tol).unwrap();
        assert_eq!(r.worst_residual, 0.0);
        assert!(r.pass);

        let c = circle();
        let tol = Tolerances::for_set(&c);
        for k in 0..=200 {
            let t = std::f64::consts::PI * (k as f64 / 100.0 - 1.0);
            let b = v(&[t.cos(), t.sin()]);
            let r = check_angle(&c, &v(&[1.0, 0.0]), &b, &v(&[0.5, 0.0]), 0.5, &tol).unwrap();
            assert!(r.worst_residual <= 1e-15, "{t} {}", r.worst_residual);
        }
    }

    #[test]
    fn angle_rejects_non_bundle_direction() {
        let c = circle();
        let tol = Tolerances::for_set(&c);
        let e = check_angle(&c, &v(&[1.0, 0.0]), &v(&[0.0, 1.0]), &v(&[0.0, 1.0]), 0.5, &tol);
        assert!(matches!(e, Err(GeomError::Precondition(_))));
    }

    #[test]
    fn projection_examples() {
        let a = x_axis();
        let tol = Tolerances::for_set(&a);
        let r = check_projection_lipschitz(&a, &v(&[0.0, 1.0]), &v(&[3.0, 1.0]), 2.0, 1.0, &tol).unwrap();
        assert_abs_diff_eq!(r.worst_residual, 3.0 - 6.0, epsilon = 1e-12);
        assert!(r.pass);
        let x = v(&[0.3, -0.7]);
        let r = check_projection_lipschitz(&a, &x, &x, 2.0, 1.0, &tol).unwrap();
        assert_eq!(r.worst_residual, 0.0);
        let e = check_projection_lipschitz(&a, &x, &x, 1.0, 2.0, &tol);
        assert!(matches!(e, Err(GeomError::Precondition(_))));
    }

    #[test]
    fn projection_symmetry() {
        let sq = ClosedSet::cuboid(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let tol = Tolerances::for_set(&sq);
        let x = v(&[1.2, 0.4]);
        let y = v(&[-0.1, 1.15]);
        let r1 = check_projection_lipschitz(&sq, &x, &y, 0.5, 0.25, &tol).unwrap();
        let r2 = check_projection_lipschitz(&sq, &y, &x, 0.5, 0.25, &tol).unwrap();
        assert!((r1.worst_residual - r2.worst_residual).abs() <= 1e-12);
    }

    #[test]
    fn non_unique_without_bundle_is_rejected() {
        // the midpoint has two nearest points, and the ball of radius q in
        // either direction swallows the other point
        let pts = ClosedSet::point_cloud(vec![v(&[-1.0, 0.0]), v(&[1.0, 0.0])]).unwrap();
        let tol = Tolerances::for_set(&pts);
        let e = check_projection_lipschitz(&pts, &v(&[0.0, 0.0]), &v(&[0.0, 0.0]), 2.0, 1.5, &tol);
        assert!(matches!(e, Err(GeomError::Precondition(_))));
    }

    #[test]
    fn cone_distance_examples() {
        let sq = ClosedSet::cuboid(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let tol = Tolerances::for_set(&sq);
        let a = v(&[0.0, 0.0]);
        let gens = [v(&[-1.0, 0.0]), v(&[0.0, -1.0])];
        let r = check_cone_distance(&sq, &a, &a, &gens, 0.3, &tol).unwrap();
        assert!(r.worst_residual <= 0.0);
        for b in [
            v(&[1.0, 0.0]),
            v(&[0.0, 1.0]),
            v(&[1.0, 1.0]),
            v(&[0.5, 0.0]),
            v(&[0.0, 0.5]),
            v(&[1.0, 0.5]),
            v(&[0.5, 1.0]),
        ] {
            let r = check_cone_distance(&sq, &a, &b, &gens, 0.3, &tol).unwrap();
            // D is the closed first quadrant, which contains b - a
            assert_abs_diff_eq!(r.worst_residual, -(b.norm_sq()) / 0.6, epsilon = 1e-12);
        }
        let c = circle();
        let tol = Tolerances::for_set(&c);
        for k in 1..100 {
            let t = std::f64::consts::PI * (k as f64 / 50.0 - 1.0);
            let b = v(&[t.cos(), t.sin()]);
            let r = check_cone_distance(&c, &v(&[1.0, 0.0]), &b, &[v(&[1.0, 0.0])], 0.5, &tol).unwrap();
            assert!(r.worst_residual <= 1e-15);
        }
    }

    #[test]
    fn one_sided_identity_pair() {
        let cube = ClosedSet::cuboid(&[0.0; 3], &[1.0; 3]).unwrap();
        let tol = Tolerances::for_set(&cube);
        let x = v(&[1.15, 0.5, 0.5]);
        let r = check_one_sided(&cube, &x, &x, 0.4, 0.2, 0.1, &tol).unwrap();
        assert_eq!(r.worst_residual, 0.0);
        assert_abs_diff_eq!(r.params["kappa"], 125.0, epsilon = 1e-9);
        assert!(r.params.contains_key("level_set_residual"));
    }

    #[test]
    fn cone_control_instances_hold() {
        let mut rng = stream_rng(3, 0);
        let insts: Vec<_> = (0..10).map(|_| random_cone_instance(3, &mut rng).unwrap()).collect();
        let r = campaign_cone_control(&insts, 500, false, 1, Execution::Sequential).unwrap();
        assert!(r.pass, "{r:?}");
        let r = campaign_cone_control(&insts, 500, true, 1, Execution::Sequential).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn polytope_instances() {
        let cube = ClosedSet::cuboid(&[0.0; 3], &[1.0; 3]).unwrap();
        let insts = polytope_cone_instances(cube.polytope().unwrap()).unwrap();
        assert_eq!(insts.len(), 26);
        let r = campaign_cone_control(&insts, 100, true, 0, Execution::Sequential).unwrap();
        assert!(r.pass);
        assert_abs_diff_eq!(r.params["gamma"], 1.0, epsilon = 1e-9);
    }

    fn contact(q: f64) -> ContactConfig {
        ContactConfig {
            q,
            radius_grid: vec![1e-2, 1e-3, 1e-4, 1e-5],
            samples_per_radius: 64,
            tol: 1e-9,
            seed: 0,
        }
    }

    #[test]
    fn quadratic_contact_flat_and_circle() {
        let half = ClosedSet::cuboid(&[-10.0, -10.0], &[10.0, 0.0]).unwrap();
        let xaxis = Subspace::new(2, vec![v(&[1.0, 0.0])]).unwrap();
        let r = check_quadratic_contact(&half, &v(&[0.0, 1.0]), &xaxis, &contact(2.0)).unwrap();
        assert!(r.pass);
        assert_eq!(r.params["lambda_empirical"], 0.0);

        let sq = ClosedSet::cuboid(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let r = check_quadratic_contact(&sq, &v(&[0.5, -0.5]), &xaxis, &contact(1.0)).unwrap();
        assert!(r.pass);
        assert_eq!(r.params["lambda_empirical"], 0.0);

        let yaxis = Subspace::new(2, vec![v(&[0.0, 1.0])]).unwrap();
        let r = check_quadratic_contact(&circle(), &v(&[2.0, 0.0]), &yaxis, &contact(2.0)).unwrap();
        assert!(r.pass, "{r:?}");
        let lam = r.params["lambda_empirical"];
        // xi(y) - a = (cos t - 1, sin t) with t about |y - x|/2 at most
        assert!(lam > 0.05 && lam < 0.2, "{lam}");
    }

    #[test]
    fn quadratic_contact_preconditions() {
        let c = circle();
        let yaxis = Subspace::new(2, vec![v(&[0.0, 1.0])]).unwrap();
        let xaxis = Subspace::new(2, vec![v(&[1.0, 0.0])]).unwrap();
        assert!(matches!(
            check_quadratic_contact(&c, &v(&[2.0, 0.0]), &xaxis, &contact(2.0)),
            Err(GeomError::Precondition(_))
        ));
        assert!(matches!(
            check_quadratic_contact(&c, &v(&[0.0, 0.0]), &yaxis, &contact(2.0)),
            Err(GeomError::Precondition(_))
        ));
    }

    #[test]
    fn small_campaigns_pass() {
        let cfg = CampaignConfig {
            samples: 300,
            seed: 9,
            exec: Execution::Sequential,
            max_attempts: 2000,
        };
        let cube = ClosedSet::cuboid(&[0.0; 3], &[1.0; 3]).unwrap();
        let c = circle();
        for set in [&cube, &c] {
            assert!(campaign_angle(set, 0.4, &cfg).unwrap().pass);
            assert!(campaign_projection_lipschitz(set, 0.5, 0.25, &cfg).unwrap().pass);
            assert!(campaign_one_sided(set, 0.1, 0.2, 0.4, &cfg).unwrap().pass);
            assert!(campaign_cone_distance(set, 0.3, 16, &cfg).unwrap().pass);
        }
    }

    #[test]
    fn campaigns_do_not_depend_on_execution() {
        let cube = ClosedSet::cuboid(&[0.0; 3], &[1.0; 3]).unwrap();
        let mut cfg = CampaignConfig {
            samples: 200,
            seed: 4,
            exec: Execution::Sequential,
            max_attempts: 2000,
        };
        let a = campaign_one_sided(&cube, 0.1, 0.2, 0.4, &cfg).unwrap();
        cfg.exec = Execution::Parallel;
        let b = campaign_one_sided(&cube, 0.1, 0.2, 0.4, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
