//! Command-line driver. Every subcommand prints (or writes) a JSON report.
//!
//! Exit codes: 0 all checks pass, 1 a check failed, 2 usage error,
//! 3 numeric failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use calib6::cli_report::{
    cmd_embed_graph, cmd_glue_segment, cmd_kappa, cmd_verify_orbit, cmd_verify_rays, write_atomic, write_plan,
    EmbedConfig, GlueEdges, OrbitConfig, RaysConfig, Report,
};
use calib6::gluing::{GluingConfig, Mode};
use calib6::graph_embed::{GraphSpec, PlanSettings};
use calib6::Error;

#[derive(Parser)]
#[command(name = "calib6", version, about = "Verify special Lagrangian intersections and build calibrated gluings")]
struct Cli {
    /// JSON file with default values for the subcommand's flags; flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Count cone rays on the seven tabulated planes.
    VerifyRays(RaysArgs),
    /// Stabilizer rank of phi and the kappa table.
    VerifyOrbit(OrbitArgs),
    /// The kappa table alone.
    Kappa(OrbitArgs),
    /// Glue along one singular segment and certify the calibration.
    GlueSegment(GlueArgs),
    /// Embed a graph given as JSON.
    EmbedGraph(EmbedArgs),
}

/// Takes each field from the flags, falling back to the config file.
macro_rules! merge {
    ($flags:expr, $file:expr; $($f:ident),*) => {{
        let (a, b) = ($flags, $file);
        Self { $($f: a.$f.or(b.$f),)* }
    }};
}

#[derive(Args, Deserialize, Default)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
struct RaysArgs {
    #[arg(long)]
    seeds: Option<usize>,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RaysArgs {
    fn merged(self, file: Self) -> Self {
        merge!(self, file; seeds, out)
    }
}

#[derive(Args, Deserialize, Default)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
struct OrbitArgs {
    #[arg(long)]
    nmax: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl OrbitArgs {
    fn merged(self, file: Self) -> Self {
        merge!(self, file; nmax, out)
    }
}

#[derive(Args, Deserialize, Default)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
struct GlueArgs {
    /// reflected, slopes or tangent.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    rho1: Option<f64>,
    #[arg(long)]
    rho2: Option<f64>,
    #[arg(long)]
    p3: Option<f64>,
    #[arg(long)]
    r0: Option<f64>,
    /// Nodes across the tube; the grid is N x N x (2N - 1).
    #[arg(long)]
    grid: Option<usize>,
    /// Fixed tube radius instead of the automatic choice.
    #[arg(long)]
    tube_radius: Option<f64>,
    /// Skip the refined closedness sweep.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    no_refine: Option<bool>,
    #[arg(long)]
    seed: Option<u64>,
    /// OBJ slice of the glued surface, the plane and the segment.
    #[arg(long)]
    mesh: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl GlueArgs {
    fn merged(self, file: Self) -> Self {
        merge!(self, file; mode, rho1, rho2, p3, r0, grid, tube_radius, no_refine, seed, mesh, out)
    }

    fn gluing_config(&self) -> Result<GluingConfig, Error> {
        let mut cfg = GluingConfig::default();
        if let Some(m) = &self.mode {
            cfg.mode = m.parse::<Mode>()?;
        }
        if let Some(v) = self.rho1 {
            cfg.rho1 = v;
        }
        if let Some(v) = self.rho2 {
            cfg.rho2 = v;
        }
        if let Some(v) = self.p3 {
            cfg.p3 = v;
        }
        if let Some(v) = self.r0 {
            cfg.r0 = v;
        }
        if let Some(n) = self.grid {
            if n < 5 || n % 2 == 0 {
                return Err(Error::Invalid(format!("--grid must be odd and at least 5, got {n}")));
            }
            cfg.grid = [n, n, 2 * n - 1];
        }
        cfg.tube_radius = self.tube_radius.or(cfg.tube_radius);
        if self.no_refine == Some(true) {
            cfg.refine = false;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

#[derive(Args, Deserialize, Default)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
struct EmbedArgs {
    /// Graph JSON: {"vertices": [...], "edges": [[a, b], ...]}.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// all, none, auto, or a number of edges to glue in full.
    #[arg(long)]
    glue_edges: Option<String>,
    #[arg(long)]
    p3: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Grid for per-edge gluing runs, as for glue-segment.
    #[arg(long)]
    grid: Option<usize>,
    /// Output directory for report.json, plan.json and edges.obj.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl EmbedArgs {
    fn merged(self, file: Self) -> Self {
        merge!(self, file; graph, glue_edges, p3, samples, grid, out)
    }
}

enum Failure {
    Usage(String),
    Numeric(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Invalid(_) | Error::Json(_) | Error::Io(_) => Failure::Usage(e.to_string()),
            _ => Failure::Numeric(e.to_string()),
        }
    }
}

fn load_config<T: for<'de> Deserialize<'de> + Default>(path: &Option<PathBuf>) -> Result<T, Failure> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))
        }
    }
}

fn emit(rep: &Report, out: Option<&Path>) -> Result<(), Failure> {
    let json = rep.to_json()?;
    match out {
        Some(p) => {
            write_atomic(p, json.as_bytes())?;
            eprintln!("{}: {} ({} checks) -> {}", rep.command, if rep.passed { "pass" } else { "fail" }, rep.checks.len(), p.display());
        }
        None => println!("{json}"),
    }
    for c in rep.checks.iter().filter(|c| !c.passed) {
        eprintln!("FAIL {}: value {:e}, tol {:e}", c.name, c.value, c.tol);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool, Failure> {
    let rep = match cli.command {
        Command::VerifyRays(a) => {
            let a = a.merged(load_config(&cli.config)?);
            let mut cfg = RaysConfig::default();
            if let Some(s) = a.seeds {
                cfg.seeds = s;
            }
            let rep = cmd_verify_rays(&cfg)?;
            emit(&rep, a.out.as_deref())?;
            rep
        }
        Command::VerifyOrbit(a) => {
            let a = a.merged(load_config(&cli.config)?);
            let cfg = OrbitConfig { n_max: a.nmax.unwrap_or(OrbitConfig::default().n_max) };
            let rep = cmd_verify_orbit(&cfg)?;
            emit(&rep, a.out.as_deref())?;
            rep
        }
        Command::Kappa(a) => {
            let a = a.merged(load_config(&cli.config)?);
            let cfg = OrbitConfig { n_max: a.nmax.unwrap_or(OrbitConfig::default().n_max) };
            let rep = cmd_kappa(&cfg)?;
            emit(&rep, a.out.as_deref())?;
            rep
        }
        Command::GlueSegment(a) => {
            let a = a.merged(load_config(&cli.config)?);
            let cfg = a.gluing_config()?;
            let (mut rep, obj) = cmd_glue_segment(&cfg)?;
            if let Some(m) = &a.mesh {
                write_atomic(m, obj.as_bytes())?;
                rep.files.push(m.display().to_string());
            }
            emit(&rep, a.out.as_deref())?;
            rep
        }
        Command::EmbedGraph(a) => {
            let a = a.merged(load_config(&cli.config)?);
            let path = a.graph.as_ref().ok_or_else(|| Failure::Usage("embed-graph needs --graph".into()))?;
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            let graph = GraphSpec::from_json(&text)?;
            let mut cfg = EmbedConfig::default();
            if let Some(g) = &a.glue_edges {
                cfg.glue_edges = g.parse::<GlueEdges>()?;
            }
            if let Some(p3) = a.p3 {
                cfg.plan = PlanSettings { p3, ..cfg.plan };
            }
            if let Some(n) = a.samples {
                cfg.plan.samples_per_edge = n;
            }
            if let Some(n) = a.grid {
                cfg.gluing = GlueArgs { grid: Some(n), ..Default::default() }.gluing_config()?;
            }
            let (mut rep, plan) = cmd_embed_graph(&graph, &cfg)?;
            match &a.out {
                Some(dir) => {
                    write_plan(&mut rep, &plan, dir)?;
                    emit(&rep, Some(&dir.join("report.json")))?;
                }
                None => emit(&rep, None)?,
            }
            rep
        }
    };
    Ok(rep.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::from(0),
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(m)) => {
            eprintln!("numeric failure: {m}");
            ExitCode::from(3)
        }
    }
}
