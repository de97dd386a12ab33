use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backward::BackwardOptions;
use crate::cloud::PixelGaussianCloud;
use crate::error::{Error, Result};
use crate::geometry::{pixel_center, select_context_views, Camera};
use crate::grid::{downsample_color, downsample_depth, downsample_mask, resample_depth_bilinear, resample_depth_bilinear_strict, DepthMap, Grid, Mask};
use crate::losses::{disocclusion_mask, fit_exposure, gradient_weight};
use crate::pipeline::adam::{AdamState, DepthBounds};
use crate::pipeline::config::RefineConfig;
use crate::pipeline::consistency::consistency_filter;
use crate::pipeline::objective::{CameraView, Objective, ViewTerm};
use crate::pipeline::scheduler::{PlateauScheduler, ScheduleAction};
use crate::rasterizer::{render, RasterSettings};
use crate::scalar::Real;

/// Relative floor of the depth gate window, as a fraction of the mean z-depth.
pub const DEPTH_THRESHOLD_FLOOR: f64 = 1e-4;

/// One line of the run log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub level: usize,
    pub iter: usize,
    pub loss_c: f64,
    pub loss_s: f64,
    pub lr: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub level: usize,
    pub factor: usize,
    pub width: usize,
    pub height: usize,
    pub gaussians: usize,
    pub iterations: usize,
    pub stopped: bool,
    pub final_lr: f64,
    pub depth_threshold: f64,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub skipped_gradients: usize,
    pub depth_gated: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RefineReport {
    pub levels: Vec<LevelReport>,
    pub log: Vec<RunRecord>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct RefineOutput<T> {
    pub depth: DepthMap<T>,
    pub report: RefineReport,
}

/// Range of valid z-depths divided by `slices`, floored for flat inputs.
pub fn depth_threshold_from_init<T: Real>(init_depth: &DepthMap<T>, camera: &Camera<T>, slices: usize) -> Result<T> {
    if slices == 0 {
        return Err(Error::invalid("depth slices must be at least 1"));
    }
    let intr = &camera.intrinsics;
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    let mut sum = T::zero();
    let mut n = 0usize;
    for y in 0..init_depth.height() {
        for x in 0..init_depth.width() {
            if let Some(d) = init_depth.get(x, y) {
                let (u, v) = pixel_center(x, y);
                let z = d * intr.perspective_factor(u, v);
                lo = lo.min(z);
                hi = hi.max(z);
                sum += z;
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::NoValidPixels("depth threshold needs at least one valid depth".into()));
    }
    let floor = T::lit(DEPTH_THRESHOLD_FLOOR) * sum / T::from_usize_lossy(n);
    Ok(((hi - lo) / T::from_usize_lossy(slices)).max(floor))
}

fn level_mask(mask: Option<&Mask>, factor: usize) -> Result<Option<Mask>> {
    mask.map(|m| downsample_mask(m, factor)).transpose()
}

/// Start depth of a level: the previous level's result resampled where the
/// level input is valid, the level input elsewhere.
fn level_start<T: Real>(prev: Option<&DepthMap<T>>, input: &DepthMap<T>) -> DepthMap<T> {
    let Some(prev) = prev else { return input.clone() };
    let up = resample_depth_bilinear_strict(prev, input.width(), input.height());
    input.map_valid(|x, y, d| up.get(x, y).unwrap_or(d))
}

/// Objective of one pyramid level, with the depth gate and context masks built from `start`.
pub fn level_objective<T: Real>(
    target: &CameraView<T>,
    contexts: &[&CameraView<T>],
    start: &DepthMap<T>,
    factor: usize,
    cfg: &RefineConfig,
) -> Result<Objective<T>> {
    Ok(build_level(target, contexts, start, factor, cfg)?.objective)
}

struct Level<T> {
    objective: Objective<T>,
    depth_threshold: T,
    warnings: Vec<String>,
    overlap: bool,
}

fn build_level<T: Real>(
    target: &CameraView<T>,
    contexts: &[&CameraView<T>],
    start: &DepthMap<T>,
    factor: usize,
    cfg: &RefineConfig,
) -> Result<Level<T>> {
    let weights = cfg.weights();
    let (gmin, gmax) = (T::lit(weights.grad_min), T::lit(weights.grad_max));
    let cam = target.camera.downscaled(factor);
    let image = downsample_color(&target.image, factor)?;
    let mask = level_mask(target.mask.as_ref(), factor)?;
    let cloud = PixelGaussianCloud::init_from_depth(&image, start, &cam, mask.as_ref())?;
    let depth_threshold = depth_threshold_from_init(start, &cam, cfg.depth_slices)?;
    let settings = RasterSettings {
        radius_threshold: T::lit(cfg.radius_threshold),
        depth_threshold,
        alpha_cap: T::lit(cfg.alpha_cap),
        half_exponent: cfg.half_exponent,
        low_pass: T::lit(cfg.low_pass),
        ..RasterSettings::default()
    };
    let target_w = gradient_weight(&image, gmin, gmax)?;
    let cloud_mask = Grid::from_fn(cam.width(), cam.height(), |x, y| cloud.gaussian_at(x, y).is_some());
    let cloud_depth = DepthMap::new(start.values().clone(), cloud_mask.clone())?;
    let mut terms = vec![ViewTerm {
        camera: cam,
        reference: image,
        valid: cloud_mask,
        w_grad: target_w.clone(),
        exposure: None,
    }];
    let mut warnings = Vec::new();
    let mut overlap = false;
    for ctx in contexts {
        let ccam = ctx.camera.downscaled(factor);
        let reference = downsample_color(&ctx.image, factor)?;
        let mut valid = disocclusion_mask(&cloud_depth, &cam, &ccam, T::lit(cfg.warp_radius));
        if let Some(m) = level_mask(ctx.mask.as_ref(), factor)? {
            for (v, &keep) in valid.as_mut_slice().iter_mut().zip(m.iter()) {
                *v &= keep;
            }
        }
        overlap |= valid.iter().any(|&v| v);
        let exposure = if cfg.exposure {
            let (_, b) = render(&cloud, &ccam, &settings)?;
            match fit_exposure(&b.color, &reference, &valid) {
                Ok(e) => Some(e),
                Err(e) => {
                    warnings.push(format!("context '{}': exposure left at identity ({e})", ctx.name));
                    None
                }
            }
        } else {
            None
        };
        let w_grad = gradient_weight(&reference, gmin, gmax)?;
        terms.push(ViewTerm { camera: ccam, reference, valid, w_grad, exposure });
    }
    let objective = Objective::new(
        cloud,
        terms,
        settings,
        &weights,
        target_w,
        BackwardOptions { freeze_scale_grad: cfg.freeze_scale_grad },
    )?;
    Ok(Level { objective, depth_threshold, warnings, overlap })
}

/// Coarse-to-fine refinement of one target view's depth against its contexts.
pub fn refine_view<T: Real>(
    target: &CameraView<T>,
    init_depth: &DepthMap<T>,
    contexts: &[&CameraView<T>],
    cfg: &RefineConfig,
) -> Result<RefineOutput<T>> {
    cfg.validate()?;
    if contexts.is_empty() {
        return Err(Error::invalid(format!("view '{}' has no context views", target.name)));
    }
    let (w, h) = (target.camera.width(), target.camera.height());
    if target.image.width() != w || target.image.height() != h {
        return Err(Error::ShapeMismatch(format!("view '{}': image does not match camera size", target.name)));
    }
    let init = resample_depth_bilinear(init_depth, w, h);
    if init.valid_count() == 0 {
        return Err(Error::NoValidPixels(format!("view '{}' has no valid initial depth", target.name)));
    }
    let mut report = RefineReport::default();
    let mut current: Option<DepthMap<T>> = None;
    for (li, (&factor, &iters)) in cfg.pyramid_factors.iter().zip(&cfg.pyramid_iters).enumerate() {
        if iters == 0 {
            continue;
        }
        let input = downsample_depth(&init, factor)?;
        let start = level_start(current.as_ref(), &input);
        let level = match build_level(target, contexts, &start, factor, cfg) {
            Ok(l) => l,
            Err(Error::NoValidPixels(msg)) => {
                report.warnings.push(format!("level {li} skipped: {msg}"));
                continue;
            }
            Err(e) => return Err(e),
        };
        report.warnings.extend(level.warnings.iter().cloned());
        if !level.overlap {
            report.warnings.push(format!(
                "view '{}': no context view overlaps the target at level {li}; depth returned unchanged",
                target.name
            ));
            return Ok(RefineOutput { depth: init_depth.clone(), report });
        }
        let objective = &level.objective;
        let cloud = objective.cloud();
        let mut depths = cloud.depths().to_vec();
        let input_depths = cloud.sample(input.values());
        let bounds = DepthBounds::relative(&input_depths, T::lit(cfg.clamp_delta));
        let mut adam = AdamState::new(depths.len());
        let mut sched = PlateauScheduler::new(cfg.lr_init, cfg.lr_factor, cfg.patience, cfg.lr_stop);
        let mut lr_report = LevelReport {
            level: li,
            factor,
            width: cloud.camera().width(),
            height: cloud.camera().height(),
            gaussians: depths.len(),
            depth_threshold: level.depth_threshold.as_f64(),
            ..LevelReport::default()
        };
        for iter in 0..iters {
            let eval = objective.evaluate(&depths, true)?;
            let total = eval.total().as_f64();
            if !total.is_finite() {
                return Err(Error::Numerical(format!("view '{}': loss became non-finite at level {li}, iteration {iter}", target.name)));
            }
            if iter == 0 {
                lr_report.initial_loss = total;
            }
            lr_report.final_loss = total;
            lr_report.depth_gated = eval.depth_gated;
            report.log.push(RunRecord {
                level: li,
                iter,
                loss_c: eval.loss_c.as_f64(),
                loss_s: eval.loss_s.as_f64(),
                lr: sched.lr(),
            });
            let lr = sched.lr();
            lr_report.iterations = iter + 1;
            if sched.observe(total) == ScheduleAction::Stop {
                lr_report.stopped = true;
                break;
            }
            lr_report.skipped_gradients += adam.step(&mut depths, &eval.grad, T::lit(lr), Some(&bounds))?;
        }
        lr_report.final_lr = sched.lr();
        report.levels.push(lr_report);
        let mut refined = cloud.clone();
        refined.set_depths(&depths)?;
        current = Some(refined.to_depth_map());
    }
    let Some(last) = current else {
        return Ok(RefineOutput { depth: init_depth.clone(), report });
    };
    let full = resample_depth_bilinear_strict(&last, w, h);
    let mask = target.mask.as_ref();
    let depth = init.map_valid(|x, y, d| {
        if mask.is_some_and(|m| !m[(x, y)]) {
            return d;
        }
        full.get(x, y).unwrap_or(d)
    });
    Ok(RefineOutput { depth, report })
}

/// Per-view result of a dataset run.
#[derive(Debug)]
pub struct DatasetOutput<T> {
    /// Indices of the refined views, in the order requested.
    pub views: Vec<usize>,
    pub results: Vec<Result<RefineOutput<T>>>,
    /// Views whose pixels were invalidated by the consistency check, with their masks.
    pub consistency: Option<Vec<Mask>>,
}

/// Refines every selected view independently against its best-aligned contexts.
pub fn refine_dataset<T: Real>(
    views: &[CameraView<T>],
    init_depths: &[DepthMap<T>],
    cfg: &RefineConfig,
    selection: Option<&[usize]>,
) -> Result<DatasetOutput<T>> {
    cfg.validate()?;
    if views.len() != init_depths.len() {
        return Err(Error::ShapeMismatch(format!("{} views but {} initial depths", views.len(), init_depths.len())));
    }
    let chosen: Vec<usize> = match selection {
        Some(s) => {
            if let Some(&bad) = s.iter().find(|&&i| i >= views.len()) {
                return Err(Error::invalid(format!("view index {bad} out of range")));
            }
            s.to_vec()
        }
        None => (0..views.len()).collect(),
    };
    let cameras: Vec<Camera<T>> = views.iter().map(|v| v.camera).collect();
    let results: Vec<Result<RefineOutput<T>>> = chosen
        .par_iter()
        .map(|&i| {
            let others: Vec<usize> = (0..views.len()).filter(|&j| j != i).collect();
            let cands: Vec<Camera<T>> = others.iter().map(|&j| cameras[j]).collect();
            let sel = select_context_views(&views[i].camera, &cands, cfg.n_context, T::lit(cfg.max_fov_ratio));
            if sel.indices.is_empty() {
                return Ok(RefineOutput {
                    depth: init_depths[i].clone(),
                    report: RefineReport {
                        warnings: vec![format!("view '{}': no context views available; depth passed through", views[i].name)],
                        ..RefineReport::default()
                    },
                });
            }
            let ctx: Vec<&CameraView<T>> = sel.indices.iter().map(|&k| &views[others[k]]).collect();
            let mut out = refine_view(&views[i], &init_depths[i], &ctx, cfg)?;
            if sel.shortfall > 0 {
                out.report.warnings.push(format!("view '{}': only {} of {} context views available", views[i].name, sel.indices.len(), cfg.n_context));
            }
            Ok(out)
        })
        .collect();
    let mut out = DatasetOutput { views: chosen, results, consistency: None };
    if cfg.consistency_check {
        apply_consistency(&mut out, views, init_depths, cfg);
    }
    Ok(out)
}

fn apply_consistency<T: Real>(out: &mut DatasetOutput<T>, views: &[CameraView<T>], init_depths: &[DepthMap<T>], cfg: &RefineConfig) {
    // Views that were not refined take part with their input depth.
    let mut all: Vec<DepthMap<T>> = init_depths.to_vec();
    for (&i, r) in out.views.iter().zip(&out.results) {
        if let Ok(r) = r {
            all[i] = r.depth.clone();
        }
    }
    let cams: Vec<Camera<T>> = views.iter().map(|v| v.camera).collect();
    if cams.len() < 2 {
        return;
    }
    let masks = consistency_filter(&all, &cams, T::lit(cfg.consistency_tau), cfg.consistency_min_views);
    for (&i, r) in out.views.iter().zip(out.results.iter_mut()) {
        if let Ok(r) = r {
            if let Ok(d) = r.depth.masked(&masks[i]) {
                r.depth = d;
            }
        }
    }
    out.consistency = Some(out.views.iter().map(|&i| masks[i].clone()).collect());
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::SyntheticScene;

    fn views(scene: &SyntheticScene, n: usize, ctx: usize) -> (Vec<CameraView<f64>>, Vec<DepthMap<f64>>) {
        let cams = scene.default_rig(n, n, ctx, 0.05).unwrap();
        let mut vs = Vec::new();
        let mut ds = Vec::new();
        for (i, c) in cams.iter().enumerate() {
            let r = scene.raycast(c, 2);
            vs.push(CameraView { name: format!("v{i}"), camera: *c, image: r.color, mask: None });
            ds.push(r.ray_depth);
        }
        (vs, ds)
    }

    #[test]
    fn depth_threshold_examples() {
        let k = crate::geometry::CameraIntrinsics::<f64>::new(1e6, 1e6, 1.0, 0.5, 2, 1).unwrap();
        let cam = Camera::new(k, crate::geometry::CameraPose::identity());
        let d = DepthMap::from_values(Grid::from_vec(2, 1, vec![2.0, 4.0]).unwrap());
        assert!((depth_threshold_from_init(&d, &cam, 20).unwrap() - 0.1).abs() < 1e-9);
        assert!((depth_threshold_from_init(&d, &cam, 1).unwrap() - 2.0).abs() < 1e-9);
        let flat = DepthMap::from_values(Grid::new(2, 1, 3.0));
        assert!((depth_threshold_from_init(&flat, &cam, 20).unwrap() - 3e-4).abs() < 1e-12);
        let none = DepthMap::new(Grid::new(2, 1, 3.0), Grid::new(2, 1, false)).unwrap();
        assert!(depth_threshold_from_init(&none, &cam, 20).is_err());
    }

    #[test]
    fn zero_iterations_return_input_exactly() {
        let scene = SyntheticScene::plane_checker(0);
        let (vs, ds) = views(&scene, 24, 2);
        let noisy = ds[0].map_valid(|x, y, d| d * (1.0 + 0.003 * ((x * 7 + y * 3) % 5) as f64));
        let cfg = RefineConfig { pyramid_iters: vec![0, 0], ..RefineConfig::default() };
        let out = refine_view(&vs[0], &noisy, &[&vs[1], &vs[2]], &cfg).unwrap();
        assert_eq!(out.depth.values(), noisy.values());
        assert_eq!(out.depth.validity(), noisy.validity());
        assert!(out.report.log.is_empty());
    }

    #[test]
    fn short_run_is_bounded_logged_and_keeps_validity() {
        let scene = SyntheticScene::sphere_noise(1);
        let (vs, ds) = views(&scene, 32, 2);
        let cfg = RefineConfig { pyramid_iters: vec![4, 3], ..RefineConfig::default() };
        let out = refine_view(&vs[0], &ds[0], &[&vs[1], &vs[2]], &cfg).unwrap();
        assert_eq!(out.depth.validity(), ds[0].validity());
        assert_eq!(out.report.log.len(), 7);
        assert!(out.report.log.windows(2).all(|w| w[1].lr <= w[0].lr));
        for y in 0..32 {
            for x in 0..32 {
                if let (Some(a), Some(b)) = (out.depth.get(x, y), ds[0].get(x, y)) {
                    assert!((a - b).abs() <= 0.5 * b + 1e-12);
                }
            }
        }
    }

    #[test]
    fn single_view_dataset_passes_through() {
        let scene = SyntheticScene::plane_checker(0);
        let (vs, ds) = views(&scene, 16, 0);
        let out = refine_dataset(&vs, &ds, &RefineConfig::default(), None).unwrap();
        let r = out.results[0].as_ref().unwrap();
        assert_eq!(r.depth.values(), ds[0].values());
        assert!(!r.report.warnings.is_empty());
    }
}
