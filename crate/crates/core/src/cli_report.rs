//! Reports and the command implementations behind the `calib6` binary.
//!
//! Every command returns a [`Report`]: the resolved configuration and its
//! SHA-256 hash, a list of named checks, timings, written files, and a
//! command-specific `data` payload. Output files are written atomically.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::forms6::special_lagrangian_form;
use crate::form_orbit::{kappa_findings, kappa_table, kernel_contains_sl3c, stabilizer_dimension};
use crate::gluing::{self, GluingConfig, Mode};
use crate::graph_embed::{plan_embedding_with, plan_obj, validate_plan, EmbeddingPlan, GraphSpec, PlanSettings};
use crate::hl_cone::{count_rays, ray_cosines, ray_table, RayOptions, DEFAULT_SEEDS, RESIDUAL_TOL};
use crate::unitary_planes::p_plane;

pub const SCHEMA: &str = "calib6/1";

/// One named pass/fail measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tol: f64,
    /// What property the check certifies.
    pub reference: String,
}

impl Check {
    /// Passes when `value <= tol`.
    pub fn at_most(name: &str, value: f64, tol: f64, reference: &str) -> Self {
        Self { name: name.into(), passed: value <= tol, value, tol, reference: reference.into() }
    }

    /// Passes when `value >= tol`.
    pub fn at_least(name: &str, value: f64, tol: f64, reference: &str) -> Self {
        Self { name: name.into(), passed: value >= tol, value, tol, reference: reference.into() }
    }

    pub fn flag(name: &str, passed: bool, reference: &str) -> Self {
        Self { name: name.into(), passed, value: if passed { 1.0 } else { 0.0 }, tol: 1.0, reference: reference.into() }
    }

    /// Passes when `value == expected`.
    pub fn equals(name: &str, value: f64, expected: f64, reference: &str) -> Self {
        Self { name: name.into(), passed: value == expected, value, tol: expected, reference: reference.into() }
    }
}

impl Serialize for Check {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Check", 5)?;
        st.serialize_field("name", &self.name)?;
        st.serialize_field("status", if self.passed { "pass" } else { "fail" })?;
        st.serialize_field("value", &self.value)?;
        st.serialize_field("tol", &self.tol)?;
        st.serialize_field("reference", &self.reference)?;
        st.end()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub command: String,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    /// Seconds per stage.
    pub timings: BTreeMap<String, f64>,
    pub files: Vec<String>,
    pub data: serde_json::Value,
}

impl Report {
    pub fn new<C: Serialize>(command: &str, config: &C) -> Result<Self> {
        let config = serde_json::to_value(config)?;
        Ok(Self {
            schema: SCHEMA,
            command: command.into(),
            config_hash: config_hash(&config)?,
            config,
            passed: true,
            checks: Vec::new(),
            timings: BTreeMap::new(),
            files: Vec::new(),
            data: serde_json::Value::Null,
        })
    }

    pub fn push(&mut self, c: Check) {
        self.passed &= c.passed;
        self.checks.push(c);
    }

    pub fn extend(&mut self, cs: impl IntoIterator<Item = Check>) {
        for c in cs {
            self.push(c);
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Hex SHA-256 of the compact JSON encoding.
pub fn config_hash(config: &serde_json::Value) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| Error::Invalid(format!("not a file path: {}", path.display())))?;
    let tmp: PathBuf = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })?;
    Ok(())
}

fn elapsed(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

// ---------------------------------------------------------------------------
// verify-rays

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RaysConfig {
    pub seeds: usize,
    pub residual_tol: f64,
    pub cosine_tol: f64,
}

impl Default for RaysConfig {
    fn default() -> Self {
        Self { seeds: DEFAULT_SEEDS, residual_tol: RESIDUAL_TOL, cosine_tol: 1e-8 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RayRow {
    pub tau: f64,
    pub theta: f64,
    pub expected: usize,
    pub count: Option<usize>,
    pub fine_count: Option<usize>,
    pub max_residual: Option<f64>,
    pub error: Option<String>,
}

pub fn cmd_verify_rays(cfg: &RaysConfig) -> Result<Report> {
    let mut rep = Report::new("verify-rays", cfg)?;
    let t = Instant::now();
    let opts = RayOptions { seeds: cfg.seeds, residual_tol: cfg.residual_tol, two_resolution: true, ..Default::default() };
    let mut rows = Vec::new();
    for (tau, theta, expected) in ray_table() {
        let name = format!("rays({tau:.6},{theta:.6})");
        match count_rays(&p_plane(tau, theta), &opts) {
            Ok(r) => {
                let worst = r.residuals.iter().cloned().fold(0.0, f64::max);
                rep.push(Check::equals(&format!("{name}.count"), r.count as f64, expected as f64, "number of intersecting rays"));
                rep.push(Check::at_most(&format!("{name}.residual"), worst, cfg.residual_tol, "each ray solves the link equations"));
                rep.push(Check::flag(&format!("{name}.two_resolution"), r.stable, "count unchanged with four times the seeds"));
                if (tau, theta) == (0.0, std::f64::consts::FRAC_PI_2) {
                    let cos = ray_cosines(&r.rays);
                    let dev = cos.iter().map(|c| (c + 1.0 / 3.0).abs()).fold(0.0, f64::max);
                    let ok = cos.len() == 6;
                    rep.push(Check::flag("tetrahedron.pairs", ok, "four rays give six pairs"));
                    rep.push(Check::at_most("tetrahedron.cosines", if ok { dev } else { f64::INFINITY }, cfg.cosine_tol, "rays point to the vertices of a regular tetrahedron"));
                }
                rows.push(RayRow {
                    tau,
                    theta,
                    expected,
                    count: Some(r.count),
                    fine_count: r.fine_count,
                    max_residual: Some(worst),
                    error: None,
                });
            }
            Err(e) => {
                rep.push(Check::flag(&format!("{name}.solved"), false, "ray solver finished"));
                rows.push(RayRow { tau, theta, expected, count: None, fine_count: None, max_residual: None, error: Some(e.to_string()) });
            }
        }
    }
    rep.timings.insert("rays".into(), elapsed(t));
    rep.data = serde_json::to_value(rows)?;
    Ok(rep)
}

// ---------------------------------------------------------------------------
// verify-orbit and kappa

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct OrbitConfig {
    pub n_max: u32,
}

impl Default for OrbitConfig {
    fn default() -> Self {
        Self { n_max: 12 }
    }
}

fn kappa_checks(rep: &mut Report, n_max: u32) -> Result<()> {
    let table = kappa_table(n_max);
    let findings = kappa_findings(&table);
    rep.push(Check::at_most("kappa.trichotomy_disagreements", findings.len() as f64, 0.0, "kappa > 0 exactly when the trichotomy says so"));
    let k2 = table.iter().filter(|e| e.k == 2 && e.n >= 2).all(|e| e.positive);
    rep.push(Check::flag("kappa.k2_positive", k2, "kappa(2, n) > 0"));
    rep.data = serde_json::json!({ "kappa": table, "disagreements": findings });
    Ok(())
}

pub fn cmd_verify_orbit(cfg: &OrbitConfig) -> Result<Report> {
    let mut rep = Report::new("verify-orbit", cfg)?;
    let phi = special_lagrangian_form();
    let t = Instant::now();
    let st = stabilizer_dimension(&phi)?;
    rep.timings.insert("rank".into(), elapsed(t));
    rep.push(Check::equals("orbit.rank", st.rank as f64, 20.0, "rank of the orbit differential"));
    rep.push(Check::equals("orbit.kernel_dim", st.kernel_dim as f64, 16.0, "dimension of the stabilizer algebra"));
    rep.push(Check::flag("orbit.kernel_contains_sl3c", kernel_contains_sl3c(&phi)?, "realified sl(3, C) fixes phi"));
    let t = Instant::now();
    kappa_checks(&mut rep, cfg.n_max)?;
    rep.timings.insert("kappa".into(), elapsed(t));
    if let serde_json::Value::Object(m) = &mut rep.data {
        m.insert("stabilizer".into(), serde_json::to_value(&st)?);
    }
    Ok(rep)
}

pub fn cmd_kappa(cfg: &OrbitConfig) -> Result<Report> {
    let mut rep = Report::new("kappa", cfg)?;
    let t = Instant::now();
    kappa_checks(&mut rep, cfg.n_max)?;
    rep.timings.insert("kappa".into(), elapsed(t));
    Ok(rep)
}

// ---------------------------------------------------------------------------
// glue-segment

/// Runs the gluing pipeline; returns the report and an OBJ slice of the
/// glued surface, the plane and the segment.
pub fn cmd_glue_segment(cfg: &GluingConfig) -> Result<(Report, String)> {
    let mut rep = Report::new("glue-segment", cfg)?;
    let t = Instant::now();
    let (gr, pkg) = gluing::run(cfg)?;
    rep.timings.insert("gluing".into(), elapsed(t));
    rep.extend(gr.checks.iter().cloned());
    let obj = gluing::mesh::slice_obj(pkg.potential.as_ref(), gr.tube_radius, cfg.r0, 2.0 * cfg.p3 - cfg.r0, 65)?;
    rep.data = serde_json::to_value(&gr)?;
    Ok((rep, obj))
}

// ---------------------------------------------------------------------------
// embed-graph

/// Which edges get a full gluing run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GlueEdges {
    /// All edges when there are at most eight, otherwise none.
    Auto,
    All,
    None,
    /// The first `k` edges.
    First(usize),
}

impl std::str::FromStr for GlueEdges {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "all" => Ok(Self::All),
            "none" => Ok(Self::None),
            k => k.parse().map(Self::First).map_err(|_| Error::Invalid(format!("--glue-edges expects all, none, auto or a count, got {k:?}"))),
        }
    }
}

impl GlueEdges {
    pub fn count(&self, edges: usize) -> usize {
        match *self {
            Self::Auto if edges <= 8 => edges,
            Self::Auto | Self::None => 0,
            Self::All => edges,
            Self::First(k) => k.min(edges),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EmbedConfig {
    pub plan: PlanSettings,
    pub glue_edges: GlueEdges,
    /// Template for per-edge gluing runs; `p3` and the plane are set per edge.
    pub gluing: GluingConfig,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self { plan: PlanSettings::default(), glue_edges: GlueEdges::Auto, gluing: GluingConfig::default() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EdgeGluing {
    pub edge: usize,
    pub half_length: f64,
    pub passed: bool,
    pub failed_checks: Vec<String>,
    pub seconds: f64,
}

pub fn cmd_embed_graph(graph: &GraphSpec, cfg: &EmbedConfig) -> Result<(Report, EmbeddingPlan)> {
    #[derive(Serialize)]
    struct Echo<'a> {
        graph: &'a GraphSpec,
        #[serde(flatten)]
        cfg: &'a EmbedConfig,
    }
    let mut rep = Report::new("embed-graph", &Echo { graph, cfg })?;
    let t = Instant::now();
    let plan = plan_embedding_with(graph, &cfg.plan)?;
    rep.timings.insert("plan".into(), elapsed(t));
    let t = Instant::now();
    let v = validate_plan(&plan);
    rep.timings.insert("validate".into(), elapsed(t));
    rep.push(Check::flag("embedding.distinct_vertices", v.distinct_vertices, "vertex images are distinct"));
    rep.push(Check::at_least("embedding.min_edge_distance", v.min_edge_distance, f64::MIN_POSITIVE, "edges meet only at shared vertices"));
    rep.push(Check::at_least("embedding.min_vertex_angle", v.min_vertex_angle, crate::graph_embed::MIN_VERTEX_ANGLE, "edges are transverse at shared vertices"));
    rep.push(Check::flag("embedding.degrees_realized", v.degrees_realized, "one plane with one cone ray per incident edge"));
    for e in &plan.edges {
        let c = &e.certificates;
        let p3 = cfg.plan.p3;
        rep.push(Check::at_least(&format!("edge{}.page_clearance", e.index), e.page.clearance, cfg.plan.delta_page, "page meets the occupied set only on the spine"));
        rep.push(Check::at_least(&format!("edge{}.other_vertices", e.index), c.min_other_vertex_distance, p3, "curve stays p3 away from other vertices"));
        rep.push(Check::at_least(&format!("edge{}.spine", e.index), c.min_spine_distance, p3, "curve stays p3 away from the spine outside the end balls"));
        rep.push(Check::at_most(&format!("edge{}.log", e.index), c.log_defect, 1e-10, "exp of the generator is the end rotation"));
    }

    let n_glue = cfg.glue_edges.count(plan.edges.len());
    let mut glued = Vec::new();
    for e in plan.edges.iter().take(n_glue) {
        let t = Instant::now();
        let col = plan.vertices[e.ends[0]].collection.as_ref().expect("edge ends have collections");
        let half = 0.5 * (plan.vertices[e.ends[1]].position[2] - plan.vertices[e.ends[0]].position[2]);
        let gcfg = GluingConfig {
            mode: Mode::Reflected,
            p3: half,
            plane_rows: Some(col.planes[e.planes[0]].rows),
            ..cfg.gluing.clone()
        };
        let (gr, _) = gluing::run(&gcfg)?;
        let failed: Vec<String> = gr.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
        rep.push(Check::flag(&format!("edge{}.gluing", e.index), failed.is_empty(), "edge bridge is calibrated"));
        rep.push(Check::at_most(&format!("edge{}.rho_match", e.index), (e.rho[0] - e.rho[1]).abs(), 1e-9, "both ends align to the same tangent slope"));
        glued.push(EdgeGluing { edge: e.index, half_length: half, passed: failed.is_empty(), failed_checks: failed, seconds: elapsed(t) });
    }
    rep.data = serde_json::json!({ "validity": v, "order": plan.order, "gluing": glued });
    Ok((rep, plan))
}

/// Writes the plan JSON and OBJ into `dir`, recording the files in the report.
pub fn write_plan(rep: &mut Report, plan: &EmbeddingPlan, dir: &Path) -> Result<()> {
    let json = dir.join("plan.json");
    write_atomic(&json, serde_json::to_string(plan)?.as_bytes())?;
    let obj = dir.join("edges.obj");
    write_atomic(&obj, plan_obj(plan).as_bytes())?;
    rep.files.push(json.display().to_string());
    rep.files.push(obj.display().to_string());
    Ok(())
}
