//! `wedgecmc`: construct, reflect, sweep and verify CMC drops in a wedge.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use wedgecmc::geom::{Support, Vec3, Wedge};
use wedgecmc::mesh::{read_obj, write_obj, TriMesh};
use wedgecmc::reflect::{discrete_mean_curvature, reflect_surface};
use wedgecmc::rings::{delaunay_bridge_with, identity_report, BridgeRoot};
use wedgecmc::spanner::{
    construct_spanner, existence_gate, existence_region_samples, mesh_spanner, monte_carlo_volume, SpannerIndex,
    SpannerParams, MC_FALLBACK_SEED,
};
use wedgecmc::sweep::{estimate_mean_curvature, planar_sweep_and_trace, run_sweep, SweepConfig, SweepKind};
use wedgecmc::verify::{verify, Verdict, VerifyTolerances};
use wedgecmc::Error;

const SCHEMA: &str = "wedgecmc/1";

#[derive(Parser, Serialize)]
#[command(name = "wedgecmc", version, about = "CMC drops spanning a wedge")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
enum Command {
    /// Existence test for the spherical spanner.
    Gate(Angles),
    /// Build a spherical spanner and mesh it.
    Spanner(SpannerCmd),
    /// Rotationally symmetric CMC bridge between parallel planes.
    Bridge(BridgeCmd),
    /// Invert a mesh in a sphere about the origin.
    Reflect(ReflectCmd),
    /// Reflection sweep for symmetry detection.
    Sweep(SweepCmd),
    /// Planar sweep along the vertex and cross-section by the symmetry plane.
    Trace(TraceCmd),
    /// Check topology, adherence and constant mean curvature.
    Verify(VerifyCmd),
    /// CSV table of the existence region.
    Region(RegionCmd),
}

#[derive(Args, Serialize, Clone)]
struct Angles {
    #[arg(long, allow_negative_numbers = true)]
    gamma1: f64,
    #[arg(long, allow_negative_numbers = true)]
    gamma2: f64,
    #[arg(long, allow_negative_numbers = true)]
    alpha: f64,
    /// Angles are given in degrees.
    #[arg(long)]
    deg: bool,
}

impl Angles {
    fn radians(&self) -> (f64, f64, f64) {
        let k = if self.deg { PI / 180.0 } else { 1.0 };
        (self.gamma1 * k, self.gamma2 * k, self.alpha * k)
    }
}

#[derive(Args, Serialize)]
struct SpannerCmd {
    #[command(flatten)]
    angles: Angles,
    #[arg(long, conflicts_with = "mean_curv", required_unless_present = "mean_curv")]
    volume: Option<f64>,
    #[arg(long = "mean-curv")]
    mean_curv: Option<f64>,
    #[arg(long, default_value_t = 64)]
    resolution: usize,
    #[arg(long)]
    mesh: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Also estimate the volume by Monte-Carlo with this many samples.
    #[arg(long = "mc-samples")]
    mc_samples: Option<usize>,
    #[arg(long, default_value_t = MC_FALLBACK_SEED)]
    seed: u64,
}

#[derive(Args, Serialize)]
struct BridgeCmd {
    #[arg(long)]
    gamma1: f64,
    #[arg(long)]
    gamma2: f64,
    #[arg(long)]
    separation: f64,
    #[arg(long = "mean-curv")]
    mean_curv: f64,
    /// Pick the profile whose lower contact radius is closest to this value.
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long, default_value_t = 64)]
    nu: usize,
    #[arg(long, default_value_t = 64)]
    nv: usize,
    #[arg(long)]
    deg: bool,
    #[arg(long)]
    mesh: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct ReflectCmd {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    rho: f64,
    /// Mean curvature of the input; estimated from the mesh when omitted.
    #[arg(long = "mean-curv", allow_negative_numbers = true)]
    mean_curv: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SweepCmd {
    #[arg(long)]
    mesh: PathBuf,
    /// Sweep planes along this unit direction instead of spheres.
    #[arg(long, value_delimiter = ',', num_args = 3, allow_negative_numbers = true)]
    planar: Option<Vec<f64>>,
    #[arg(long = "origin-shift", default_value_t = 0.0, allow_negative_numbers = true)]
    origin_shift: f64,
    #[arg(long = "eps-touch")]
    eps_touch: Option<f64>,
    #[arg(long = "eps-angle", default_value_t = 1e-2)]
    eps_angle: f64,
    #[arg(long, default_value_t = 256)]
    steps: usize,
    #[arg(long = "mean-curv", allow_negative_numbers = true)]
    mean_curv: Option<f64>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct TraceCmd {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    deg: bool,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct VerifyCmd {
    #[arg(long)]
    mesh: PathBuf,
    /// Wedge opening angle.
    #[arg(long, conflicts_with = "separation", required_unless_present = "separation")]
    alpha: Option<f64>,
    /// Distance between parallel planes x3 = 0 and x3 = separation.
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    deg: bool,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct RegionCmd {
    /// Range of opening angles, `a..b`.
    #[arg(long, default_value = "0..3")]
    alpha: String,
    #[arg(long, default_value_t = 64)]
    steps: usize,
    #[arg(long = "gamma-steps", default_value_t = 32)]
    gamma_steps: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure with its exit code.
struct Fail {
    code: u8,
    msg: String,
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Contract(_) => 64,
            Error::NonExistent { .. } | Error::NoBridge(_) | Error::NoTouching { .. } => 1,
            Error::Parse(_)
            | Error::NonManifold(_)
            | Error::NotPlanar(_)
            | Error::NotInWedgeFace(_)
            | Error::OpenSurface(_) => 65,
            _ => 3,
        };
        let msg = match e {
            Error::NonExistent { margin } => format!(
                "no spanner: gamma1 + gamma2 <= pi + alpha (margin {margin}); no embedded ring-type CMC surface exists"
            ),
            e => e.to_string(),
        };
        Fail { code, msg }
    }
}

fn usage(msg: impl Into<String>) -> Fail {
    Fail { code: 64, msg: msg.into() }
}

fn io_fail(path: &Path, e: std::io::Error) -> Fail {
    Fail { code: 74, msg: format!("{}: {e}", path.display()) }
}

fn read_mesh(path: &Path) -> Result<TriMesh, Fail> {
    let text = fs::read_to_string(path).map_err(|e| io_fail(path, e))?;
    Ok(read_obj(&text)?)
}

fn write_file(path: &Path, text: &str) -> Result<(), Fail> {
    fs::write(path, text).map_err(|e| io_fail(path, e))
}

fn envelope(cli: &Cli, seed: Option<u64>, result: Value) -> Result<String, Fail> {
    let config = serde_json::to_value(cli).map_err(|e| usage(e.to_string()))?;
    let canonical = serde_json::to_string(&config).map_err(|e| usage(e.to_string()))?;
    let hash = hex::encode(Sha256::digest(canonical.as_bytes()));
    let command = match &config["command"] {
        Value::Object(m) => m.keys().next().cloned().unwrap_or_default(),
        Value::String(s) => s.clone(),
        _ => String::new(),
    };
    let v = json!({
        "schema": SCHEMA,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "config_hash": hash,
        "seed": seed,
        "command": command.to_lowercase(),
        "config": config,
        "result": result,
    });
    // Round-trip through Value so every object has sorted keys.
    let sorted: Value = serde_json::from_str(&v.to_string()).map_err(|e| usage(e.to_string()))?;
    Ok(serde_json::to_string_pretty(&sorted).unwrap() + "\n")
}

fn to_value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("report serializes")
}

fn emit(cli: &Cli, seed: Option<u64>, result: Value, report: Option<&PathBuf>) -> Result<(), Fail> {
    let text = envelope(cli, seed, result)?;
    if let Some(p) = report {
        write_file(p, &text)?;
    }
    print!("{text}");
    Ok(())
}

fn parse_range(s: &str) -> Result<(f64, f64), Fail> {
    let (a, b) = s.split_once("..").ok_or_else(|| usage(format!("expected a range a..b, got {s}")))?;
    let p = |x: &str| x.trim().parse::<f64>().map_err(|e| usage(format!("bad range bound {x}: {e}")));
    Ok((p(a)?, p(b)?))
}

fn run(cli: &Cli) -> Result<u8, Fail> {
    match &cli.command {
        Command::Gate(a) => {
            let (g1, g2, al) = a.radians();
            let g = existence_gate(g1, g2, al)?;
            emit(cli, None, to_value(&g), None)?;
            Ok(0)
        }
        Command::Spanner(c) => {
            let (g1, g2, al) = c.angles.radians();
            let gate = existence_gate(g1, g2, al)?;
            if !gate.exists {
                return Err(Error::NonExistent { margin: gate.margin }.into());
            }
            let index = match (c.volume, c.mean_curv) {
                (Some(v), _) => SpannerIndex::Volume(v),
                (None, Some(h)) => SpannerIndex::MeanCurvature(h),
                _ => return Err(usage("one of --volume or --mean-curv is required")),
            };
            let s = construct_spanner(&SpannerParams { gamma1: g1, gamma2: g2, alpha: al, index })?;
            let mesh = mesh_spanner(&s, c.resolution)?;
            if let Some(p) = &c.mesh {
                write_file(p, &write_obj(&mesh)?)?;
            }
            let mut result = json!({
                "spanner": to_value(&s),
                "tangent_length": s.tangent_length(),
                "mesh_vertices": mesh.vertices.len(),
                "mesh_faces": mesh.faces.len(),
            });
            let mut seed = None;
            if let Some(n) = c.mc_samples {
                if n == 0 {
                    return Err(usage("--mc-samples must be positive"));
                }
                let v = monte_carlo_volume(&s.sphere, &s.wedge(), n, c.seed);
                result["monte_carlo_volume"] = json!(v);
                seed = Some(c.seed);
            }
            emit(cli, seed, result, c.report.as_ref())?;
            Ok(0)
        }
        Command::Bridge(c) => {
            let k = if c.deg { PI / 180.0 } else { 1.0 };
            let select = c.radius.map(BridgeRoot::NearestRadius).unwrap_or(BridgeRoot::MinArclength);
            let b = delaunay_bridge_with(c.gamma1 * k, c.gamma2 * k, c.separation, c.mean_curv, c.nu, c.nv, select)?;
            let mesh = b.chart.to_mesh();
            if let Some(p) = &c.mesh {
                write_file(p, &write_obj(&mesh)?)?;
            }
            let ids = identity_report(&b.chart)?;
            let result = json!({
                "gamma1": b.gamma1,
                "gamma2": b.gamma2,
                "separation": b.separation,
                "mean_curvature": b.chart.mean_curvature,
                "r0": b.r0,
                "flux": b.flux,
                "kind": to_value(&b.kind),
                "arclength": b.arclength,
                "contact_angle_errors": b.contact_angle_errors,
                "identities": to_value(&ids),
            });
            emit(cli, None, result, c.report.as_ref())?;
            Ok(0)
        }
        Command::Reflect(c) => {
            let mesh = read_mesh(&c.mesh)?;
            let h = match c.mean_curv {
                Some(h) => h,
                None => estimate_mean_curvature(&mesh)?,
            };
            let r = reflect_surface(&mesh, h, c.rho)?;
            if let Some(p) = &c.out {
                write_file(p, &write_obj(&r.mesh)?)?;
            }
            let dc = discrete_mean_curvature(&r.mesh)?;
            let mut errs: Vec<f64> = dc
                .values
                .iter()
                .zip(&r.mean_curvature)
                .zip(&dc.unreliable)
                .filter(|(_, bad)| !**bad)
                .map(|((d, f), _)| (d - f).abs() / f.abs().max(1e-300))
                .collect();
            errs.sort_by(f64::total_cmp);
            let (lo, hi) = r.mean_curvature.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
            let result = json!({
                "rho": r.rho,
                "mean_curvature": h,
                "reflected_mean_curvature": { "min": lo, "max": hi },
                "discrete_relative_error": {
                    "median": errs.get(errs.len() / 2),
                    "max": errs.last(),
                },
                "vertices": r.mesh.vertices.len(),
            });
            emit(cli, None, result, c.report.as_ref())?;
            Ok(0)
        }
        Command::Sweep(c) => {
            let mesh = read_mesh(&c.mesh)?;
            let kind = match &c.planar {
                Some(d) => {
                    let v = Vec3::new(d[0], d[1], d[2]);
                    if !(v.norm() > 0.0) {
                        return Err(usage("--planar direction must be nonzero"));
                    }
                    SweepKind::Planar { direction: v.normalize() }
                }
                None => SweepKind::Spherical,
            };
            let config = SweepConfig {
                kind,
                origin_shift: c.origin_shift,
                steps: c.steps,
                eps_touch: c.eps_touch,
                eps_angle: c.eps_angle,
                mean_curvature: c.mean_curv,
                ..SweepConfig::default()
            };
            let rep = run_sweep(&mesh, &config)?;
            eprintln!(
                "rho1 = {:.10} ({}; residual {:.3e})",
                rep.rho1,
                if rep.symmetric { "symmetric" } else { "not symmetric" },
                rep.coincidence_residual
            );
            emit(cli, None, to_value(&rep), c.report.as_ref())?;
            Ok(0)
        }
        Command::Trace(c) => {
            let mesh = read_mesh(&c.mesh)?;
            let k = if c.deg { PI / 180.0 } else { 1.0 };
            let wedge = Wedge::new(c.alpha * k)?;
            let rep = planar_sweep_and_trace(&mesh, &wedge, &SweepConfig::default())?;
            emit(cli, None, to_value(&rep), c.report.as_ref())?;
            Ok(0)
        }
        Command::Verify(c) => {
            let mesh = read_mesh(&c.mesh)?;
            let support = match (c.alpha, c.separation) {
                (Some(a), None) => Support::Wedge(Wedge::new(a * if c.deg { PI / 180.0 } else { 1.0 })?),
                (None, Some(s)) if s > 0.0 && s.is_finite() => Support::Slab { separation: s },
                _ => return Err(usage("give exactly one of --alpha or a positive --separation")),
            };
            let rep = verify(&mesh, &support, &VerifyTolerances::default())?;
            let code = match rep.verdict.verdict {
                Verdict::OutOfScopeTopology => 2,
                Verdict::NonexistenceRegion => 1,
                _ if !rep.all_checks_pass => 1,
                _ => 0,
            };
            emit(cli, None, to_value(&rep), c.report.as_ref())?;
            Ok(code)
        }
        Command::Region(c) => {
            let (a, b) = parse_range(&c.alpha)?;
            if c.steps < 2 || c.gamma_steps < 2 {
                return Err(usage("--steps and --gamma-steps must be at least 2"));
            }
            if !(a >= 0.0 && b >= a && b < PI) {
                return Err(usage("alpha range must satisfy 0 <= a <= b < pi"));
            }
            let alphas: Vec<f64> = (0..c.steps).map(|k| a + (b - a) * k as f64 / (c.steps - 1) as f64).collect();
            let gammas: Vec<f64> = (0..c.gamma_steps).map(|k| PI * k as f64 / (c.gamma_steps - 1) as f64).collect();
            let rows = existence_region_samples(&alphas, &gammas)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in &rows {
                w.serialize(r).map_err(|e| usage(e.to_string()))?;
            }
            let bytes = w.into_inner().map_err(|e| usage(e.to_string()))?;
            let text = String::from_utf8(bytes).expect("csv is utf-8");
            match &c.out {
                Some(p) => write_file(p, &text)?,
                None => print!("{text}"),
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Ok(n) = std::env::var("WEDGECMC_THREADS") {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: WEDGECMC_THREADS must be a positive integer");
                return ExitCode::from(64);
            }
        }
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
