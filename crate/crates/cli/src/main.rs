use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use pagas::fusion::{fuse_depths, marching_cubes, DEFAULT_TRUNCATION_VOXELS};
use pagas::geometry::{backproject, normals_from_depth, normals_to_camera};
use pagas::gradcheck::{check_gradients, GradCheckConfig, GRADIENT_TOLERANCE};
use pagas::io::{
    load_cameras, load_config_table, load_dataset, load_depth, load_image, save_dataset, save_depth, save_normal_png, view_stem, write_ply,
    DatasetPaths, DepthKind, PlyFormat,
};
use pagas::pipeline::{refine_dataset, CameraView, Preset, RefineConfig};
use pagas::synth::{perturb_depth, PerturbMode, SyntheticScene, PRESETS};
use pagas::{Camera, ColorImage, DepthMap, Error};

mod config_help;

#[derive(Parser)]
#[command(name = "pagas", version, about = "Multi-view depth refinement with pixel-aligned Gaussians")]
struct Cli {
    /// Worker threads for rendering and per-view parallelism [env: PAGAS_THREADS]
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Refine the depth map of every (or a subset of) view(s) of a dataset
    Refine(RefineArgs),
    /// Fuse depth maps into a mesh with a TSDF volume
    Fuse(FuseArgs),
    /// Write camera-frame normal maps computed from depth maps
    RenderNormals(NormalArgs),
    /// Generate a synthetic dataset with exact ground truth
    Synth(SynthArgs),
    /// Compare analytic depth gradients with finite differences
    CheckGradients(GradArgs),
}

#[derive(Args)]
struct RefineArgs {
    #[arg(long)]
    images: PathBuf,
    /// Directory of initial depth maps named after the images (.pfm or .png)
    #[arg(long)]
    depths: PathBuf,
    /// COLMAP text model directory or its images.txt
    #[arg(long)]
    cameras: PathBuf,
    #[arg(long)]
    masks: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Key-value config file (TOML) with any of the fields listed below
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["dtu", "tnt", "generic"])]
    preset: Option<String>,
    /// Comma-separated view names, stems or indices to refine
    #[arg(long, value_delimiter = ',')]
    views: Option<Vec<String>>,
    /// Context views per target (n_context)
    #[arg(long)]
    context: Option<usize>,
    /// Iterations per pyramid level, coarsest first (pyramid_iters)
    #[arg(long, value_delimiter = ',')]
    iters: Option<Vec<usize>>,
    /// Radius gate in pixels (radius_threshold)
    #[arg(long)]
    radius: Option<f64>,
    /// Any config field as key=value; may be repeated
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Convention of the depth files: z (camera z) or ray (distance along the pixel ray)
    #[arg(long, default_value = "z")]
    depth_kind: String,
}

#[derive(Args)]
struct FuseArgs {
    #[arg(long)]
    depths: PathBuf,
    #[arg(long)]
    cameras: PathBuf,
    /// Output PLY path
    #[arg(long)]
    out: PathBuf,
    /// Voxel edge length in world units
    #[arg(long)]
    voxel: f64,
    /// Truncation distance in voxels
    #[arg(long, default_value_t = DEFAULT_TRUNCATION_VOXELS)]
    trunc: f64,
    /// Optional images to color the mesh
    #[arg(long)]
    images: Option<PathBuf>,
    #[arg(long, default_value = "z")]
    depth_kind: String,
    /// Write ASCII instead of binary PLY
    #[arg(long)]
    ascii: bool,
}

#[derive(Args)]
struct NormalArgs {
    #[arg(long)]
    depths: PathBuf,
    #[arg(long)]
    cameras: PathBuf,
    /// Output directory for the normal PNGs
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "z")]
    depth_kind: String,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_parser = PRESETS)]
    scene: String,
    #[arg(long)]
    out: PathBuf,
    /// Image size as HxW
    #[arg(long, default_value = "128x128")]
    size: String,
    /// Total number of views (one central view plus an orbit)
    #[arg(long, default_value_t = 5)]
    views: usize,
    /// Orbit radius of the cameras around the central one
    #[arg(long, default_value_t = 0.05)]
    baseline: f64,
    /// Magnitude of the perturbation applied to the written depths
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    #[arg(long, default_value = "gaussian-relative", value_parser = ["gaussian-relative", "low-frequency-bias"])]
    perturb: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Samples per pixel side when ray casting the images
    #[arg(long, default_value_t = 3)]
    supersample: usize,
    #[arg(long, default_value = "z")]
    depth_kind: String,
}

#[derive(Args)]
struct GradArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of consecutive seeds to check
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// Image size as HxW
    #[arg(long, default_value = "16x16")]
    size: String,
    /// Context views
    #[arg(long, default_value_t = 2)]
    views: usize,
    /// Negate the analytic gradient (negative control)
    #[arg(long, hide = true)]
    inject_sign_flip: bool,
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Data(Error::Io { path: path.to_path_buf(), source: e })
}

type CmdResult = Result<ExitCode, Failure>;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn code_for(e: &Error) -> u8 {
    match e {
        Error::Numerical(_) => EXIT_NUMERICAL,
        _ => EXIT_DATA,
    }
}

fn parse_size(s: &str) -> Result<(usize, usize), Failure> {
    let bad = || Failure::Usage(format!("size '{s}' is not of the form HxW"));
    let (h, w) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let (h, w) = (h.trim().parse::<usize>().map_err(|_| bad())?, w.trim().parse::<usize>().map_err(|_| bad())?);
    if h == 0 || w == 0 {
        return Err(bad());
    }
    Ok((h, w))
}

fn depth_kind(s: &str) -> Result<DepthKind, Failure> {
    s.parse().map_err(|e: Error| Failure::Usage(e.to_string()))
}

fn create_dir(p: &Path) -> Result<(), Failure> {
    fs::create_dir_all(p).map_err(|e| io_err(p, e))
}

fn create_parent(p: &Path) -> Result<(), Failure> {
    match p.parent() {
        Some(d) if !d.as_os_str().is_empty() => create_dir(d),
        _ => Ok(()),
    }
}

fn resolve_config(args: &RefineArgs) -> Result<RefineConfig, Failure> {
    let mut cfg = match &args.preset {
        Some(p) => RefineConfig::preset(p.parse::<Preset>()?),
        None => RefineConfig::default(),
    };
    if let Some(path) = &args.config {
        cfg = cfg.with_overrides(&load_config_table(path)?)?;
    }
    let mut table = toml::Table::new();
    for kv in &args.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        let (k, v) = (k.trim(), v.trim());
        let value = format!("v = {v}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(v.to_string()));
        table.insert(k.to_string(), value);
    }
    if let Some(n) = args.context {
        table.insert("n_context".into(), toml::Value::Integer(n as i64));
    }
    if let Some(it) = &args.iters {
        table.insert("pyramid_iters".into(), toml::Value::Array(it.iter().map(|&i| toml::Value::Integer(i as i64)).collect()));
    }
    if let Some(r) = args.radius {
        table.insert("radius_threshold".into(), toml::Value::Float(r));
    }
    if !table.is_empty() {
        cfg = cfg.with_overrides(&table).map_err(|e| Failure::Usage(e.to_string()))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn select_views(views: &[CameraView<f64>], wanted: &[String]) -> Result<Vec<usize>, Failure> {
    let mut out = Vec::new();
    for w in wanted.iter().map(|w| w.trim()).filter(|w| !w.is_empty()) {
        let found = views.iter().position(|v| v.name == w || view_stem(&v.name) == w);
        let idx = match found {
            Some(i) => i,
            None => match w.parse::<usize>() {
                Ok(i) if i < views.len() => i,
                _ => return Err(Failure::Usage(format!("--views: no view named '{w}'"))),
            },
        };
        if !out.contains(&idx) {
            out.push(idx);
        }
    }
    Ok(out)
}

fn normal_map(depth: &DepthMap<f64>, cam: &Camera<f64>) -> pagas::NormalMap<f64> {
    normals_to_camera(&normals_from_depth(&backproject(depth, &cam.intrinsics, &cam.pose)), &cam.pose)
}

fn cmd_refine(args: RefineArgs) -> CmdResult {
    let kind = depth_kind(&args.depth_kind)?;
    let cfg = resolve_config(&args)?;
    let ds = load_dataset(&DatasetPaths {
        images: &args.images,
        depths: &args.depths,
        cameras: &args.cameras,
        masks: args.masks.as_deref(),
        depth_kind: kind,
    })?;
    let selection = match &args.views {
        Some(v) => Some(select_views(&ds.views, v)?),
        None => None,
    };
    let (dir_d, dir_n, dir_l) = (args.out.join("depths"), args.out.join("normals"), args.out.join("logs"));
    for d in [&dir_d, &dir_n, &dir_l] {
        create_dir(d)?;
    }
    let cfg_path = args.out.join("config.toml");
    fs::write(&cfg_path, cfg.to_toml()).map_err(|e| io_err(&cfg_path, e))?;
    let start = Instant::now();
    let out = refine_dataset(&ds.views, &ds.init_depths, &cfg, selection.as_deref())?;
    let mut worst = 0u8;
    let mut summary = Vec::new();
    for (&i, res) in out.views.iter().zip(&out.results) {
        let view = &ds.views[i];
        let stem = view_stem(&view.name);
        match res {
            Ok(r) => {
                let p = dir_d.join(format!("{stem}.pfm"));
                create_parent(&p)?;
                save_depth(&p, &kind.from_ray(&r.depth, &view.camera.intrinsics), None)?;
                let p = dir_n.join(format!("{stem}.png"));
                create_parent(&p)?;
                save_normal_png(&p, &normal_map(&r.depth, &view.camera))?;
                let p = dir_l.join(format!("{stem}.jsonl"));
                create_parent(&p)?;
                let mut log = String::new();
                for rec in &r.report.log {
                    log.push_str(&serde_json::to_string(rec).expect("log record serializes"));
                    log.push('\n');
                }
                fs::write(&p, log).map_err(|e| io_err(&p, e))?;
                for w in &r.report.warnings {
                    eprintln!("warning: {w}");
                }
                let iters: Vec<usize> = r.report.levels.iter().map(|l| l.iterations).collect();
                println!("{}: refined ({} valid pixels, iterations {iters:?})", view.name, r.depth.valid_count());
                summary.push(serde_json::json!({ "view": view.name, "status": "ok", "levels": r.report.levels, "warnings": r.report.warnings }));
            }
            Err(e) => {
                eprintln!("error: view '{}': {e}", view.name);
                worst = worst.max(code_for(e));
                summary.push(serde_json::json!({ "view": view.name, "status": "error", "error": e.to_string() }));
            }
        }
    }
    let p = dir_l.join("summary.json");
    let doc = serde_json::json!({ "views": summary, "seconds": start.elapsed().as_secs_f64() });
    fs::write(&p, serde_json::to_string_pretty(&doc).expect("summary serializes")).map_err(|e| io_err(&p, e))?;
    Ok(ExitCode::from(worst))
}

/// Cameras paired with the depth files found for them; views without one are skipped.
fn cameras_with_depths(cameras: &Path, depths: &Path, kind: DepthKind) -> Result<Vec<(String, Camera<f64>, DepthMap<f64>)>, Failure> {
    let mut out = Vec::new();
    for nc in load_cameras(cameras)? {
        let stem = view_stem(&nc.name);
        let Some(path) = ["pfm", "png"].iter().map(|e| depths.join(format!("{stem}.{e}"))).find(|p| p.is_file()) else {
            eprintln!("warning: no depth for view '{}', skipped", nc.name);
            continue;
        };
        let d = load_depth::<f64>(&path)?;
        if d.width() != nc.camera.width() || d.height() != nc.camera.height() {
            return Err(Error::ShapeMismatch(format!("view '{}': depth is {}×{}, camera is {}×{}", nc.name, d.width(), d.height(), nc.camera.width(), nc.camera.height())).into());
        }
        let ray = kind.to_ray(&d, &nc.camera.intrinsics);
        out.push((nc.name, nc.camera, ray));
    }
    if out.is_empty() {
        return Err(Error::NoValidPixels(format!("no depth maps for any camera in {}", depths.display())).into());
    }
    Ok(out)
}

fn cmd_fuse(args: FuseArgs) -> CmdResult {
    let kind = depth_kind(&args.depth_kind)?;
    if !(args.voxel > 0.0) || !(args.trunc >= 1.0) {
        return Err(Failure::Usage("--voxel must be positive and --trunc at least 1".into()));
    }
    let views = cameras_with_depths(&args.cameras, &args.depths, kind)?;
    let colors: Option<Vec<ColorImage<f64>>> = match &args.images {
        Some(dir) => Some(views.iter().map(|(name, _, _)| load_image::<f64>(&dir.join(name))).collect::<Result<_, _>>()?),
        None => None,
    };
    let depths: Vec<&DepthMap<f64>> = views.iter().map(|v| &v.2).collect();
    let cams: Vec<Camera<f64>> = views.iter().map(|v| v.1).collect();
    let color_refs: Option<Vec<&ColorImage<f64>>> = colors.as_ref().map(|c| c.iter().collect());
    let vol = fuse_depths(&depths, color_refs.as_deref(), &cams, args.voxel, args.voxel * args.trunc)?;
    let mesh = marching_cubes(&vol, 0.0);
    if mesh.is_empty() {
        eprintln!("warning: the fused volume contains no surface; writing an empty mesh");
    }
    create_parent(&args.out)?;
    let fmt = if args.ascii { PlyFormat::Ascii } else { PlyFormat::BinaryLittleEndian };
    write_ply(&args.out, &mesh, fmt)?;
    println!("{}: {} vertices, {} triangles from {} views", args.out.display(), mesh.vertices.len(), mesh.triangles.len(), views.len());
    Ok(ExitCode::SUCCESS)
}

fn cmd_render_normals(args: NormalArgs) -> CmdResult {
    let kind = depth_kind(&args.depth_kind)?;
    create_dir(&args.out)?;
    for (name, cam, depth) in cameras_with_depths(&args.cameras, &args.depths, kind)? {
        let p = args.out.join(format!("{}.png", view_stem(&name)));
        create_parent(&p)?;
        save_normal_png(&p, &normal_map(&depth, &cam))?;
        println!("{}", p.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_synth(args: SynthArgs) -> CmdResult {
    let kind = depth_kind(&args.depth_kind)?;
    let (h, w) = parse_size(&args.size)?;
    if args.views < 2 {
        return Err(Failure::Usage("--views must be at least 2".into()));
    }
    if args.supersample == 0 {
        return Err(Failure::Usage("--supersample must be at least 1".into()));
    }
    let mode: PerturbMode = args.perturb.parse()?;
    let scene = SyntheticScene::preset(&args.scene, args.seed)?;
    let cams = scene.default_rig(w, h, args.views - 1, args.baseline)?;
    let mut views = Vec::with_capacity(cams.len());
    let mut init = Vec::with_capacity(cams.len());
    let gt_dir = args.out.join("gt");
    create_dir(&gt_dir)?;
    for (i, cam) in cams.iter().enumerate() {
        let name = format!("view{i:03}.png");
        let img = scene.raycast(cam, args.supersample);
        let gt = scene.raycast(cam, 1).ray_depth;
        save_depth(&gt_dir.join(format!("view{i:03}.pfm")), &kind.from_ray(&gt, &cam.intrinsics), None)?;
        init.push(perturb_depth(&gt, mode, args.noise, args.seed.wrapping_mul(1000).wrapping_add(i as u64))?);
        views.push(CameraView { name, camera: *cam, image: img.color, mask: None });
    }
    save_dataset(&args.out, &views, &init, kind)?;
    println!("{}: {} views of '{}' at {w}×{h}", args.out.display(), views.len(), args.scene);
    Ok(ExitCode::SUCCESS)
}

fn cmd_check_gradients(args: GradArgs) -> CmdResult {
    let (h, w) = parse_size(&args.size)?;
    if args.views == 0 || args.seeds == 0 {
        return Err(Failure::Usage("--views and --seeds must be at least 1".into()));
    }
    let mut all_pass = true;
    let mut stdout = std::io::stdout().lock();
    for seed in args.seed..args.seed + args.seeds {
        let cfg = GradCheckConfig { seed, width: w, height: h, n_context: args.views, flip_sign: args.inject_sign_flip, ..GradCheckConfig::default() };
        let r = check_gradients(&cfg)?;
        all_pass &= r.passed;
        let _ = writeln!(
            stdout,
            "seed {seed} ({}): max relative error {:.3e} over {} of {} components ({} below {:.0e}, {} unstable) {}",
            r.scene,
            r.max_rel_error,
            r.checked,
            r.components,
            r.below_floor,
            pagas::gradcheck::MIN_CHECKED_GRADIENT,
            r.unstable,
            if r.passed { "PASS" } else { "FAIL" }
        );
    }
    if all_pass {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("gradient check failed: tolerance {GRADIENT_TOLERANCE:.0e}");
        Ok(ExitCode::from(EXIT_NUMERICAL))
    }
}

fn threads_setting(flag: Option<usize>) -> Result<Option<usize>, Failure> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("PAGAS_THREADS") {
        Ok(v) if !v.trim().is_empty() => v.trim().parse().map(Some).map_err(|_| Failure::Usage(format!("PAGAS_THREADS='{v}' is not a thread count"))),
        _ => Ok(None),
    }
}

fn run(cli: Cli) -> CmdResult {
    if let Some(n) = threads_setting(cli.threads)? {
        if n == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Refine(a) => cmd_refine(a),
        Command::Fuse(a) => cmd_fuse(a),
        Command::RenderNormals(a) => cmd_render_normals(a),
        Command::Synth(a) => cmd_synth(a),
        Command::CheckGradients(a) => cmd_check_gradients(a),
    }
}

fn main() -> ExitCode {
    let help = config_help::render();
    let cmd = Cli::command().mut_subcommand("refine", |c| c.after_help(help));
    let cli = match cmd.try_get_matches().and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(code_for(&e))
        }
    }
}
