//! Finite-difference check of the analytic depth gradient on random synthetic scenes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::pipeline::{level_objective, CameraView, Objective, RefineConfig};
use crate::synth::{perturb_depth, PerturbMode, SyntheticScene, PRESETS};

/// Largest accepted relative error between analytic and finite-difference components.
pub const GRADIENT_TOLERANCE: f64 = 1e-3;
/// Components whose magnitude stays below this are not compared.
pub const MIN_CHECKED_GRADIENT: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct GradCheckConfig {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub n_context: usize,
    /// Initial central-difference step relative to each depth.
    pub relative_step: f64,
    /// How many times a step may be halved to keep every discrete decision fixed.
    pub max_halvings: usize,
    /// Negates the analytic gradient; a negative control that must fail.
    pub flip_sign: bool,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self { seed: 0, width: 16, height: 16, n_context: 2, relative_step: 1e-5, max_halvings: 8, flip_sign: false }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub seed: u64,
    pub scene: String,
    pub components: usize,
    /// Components compared against finite differences.
    pub checked: usize,
    /// Components below the magnitude floor.
    pub below_floor: usize,
    /// Components where no step kept the contributor sets unchanged.
    pub unstable: usize,
    pub max_rel_error: f64,
    pub worst_component: Option<usize>,
    pub passed: bool,
}

/// Random scene, rig and loss weights for `cfg.seed`, and the perturbed start depth.
pub fn random_objective(cfg: &GradCheckConfig) -> Result<(String, Objective<f64>)> {
    if cfg.width < 2 || cfg.height < 2 || cfg.n_context == 0 {
        return Err(Error::invalid("gradient check needs at least a 2×2 image and one context view"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let name = PRESETS[rng.random_range(0..PRESETS.len())];
    let scene = SyntheticScene::preset(name, cfg.seed)?;
    let baseline = rng.random_range(0.02..0.06);
    let cams = scene.default_rig(cfg.width, cfg.height, cfg.n_context, baseline)?;
    let views: Vec<CameraView<f64>> = cams
        .iter()
        .enumerate()
        .map(|(i, c)| CameraView { name: format!("view{i}"), camera: *c, image: scene.raycast(c, 2).color, mask: None })
        .collect();
    let gt = scene.raycast(&cams[0], 1).ray_depth;
    if gt.valid_count() == 0 {
        return Err(Error::NoValidPixels(format!("scene '{name}' misses the target view")));
    }
    let init = perturb_depth(&gt, PerturbMode::GaussianRelative, 0.02, rng.random())?;
    let run = RefineConfig {
        lambda_c: rng.random_range(0.0..1.0),
        lambda_s: rng.random_range(0.05..0.5),
        ..RefineConfig::default()
    };
    let contexts: Vec<&CameraView<f64>> = views[1..].iter().collect();
    Ok((name.to_string(), level_objective(&views[0], &contexts, &init, 1, &run)?))
}

/// Central difference of `objective` along component `k`, halving the step until
/// the discrete rendering decisions at both ends match those at `depths`.
fn central_difference(objective: &Objective<f64>, depths: &[f64], k: usize, base_sig: u64, cfg: &GradCheckConfig) -> Result<Option<f64>> {
    let mut h = cfg.relative_step * depths[k].abs().max(1e-12);
    for _ in 0..=cfg.max_halvings {
        let mut plus = depths.to_vec();
        plus[k] += h;
        let mut minus = depths.to_vec();
        minus[k] -= h;
        if objective.signature(&plus)? == base_sig && objective.signature(&minus)? == base_sig {
            let lp = objective.evaluate(&plus, false)?.total();
            let lm = objective.evaluate(&minus, false)?.total();
            return Ok(Some((lp - lm) / (2.0 * h)));
        }
        h *= 0.5;
    }
    Ok(None)
}

/// Compares every component of the analytic gradient with central differences.
pub fn check_gradients(cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let (scene, objective) = random_objective(cfg)?;
    let depths = objective.cloud().depths().to_vec();
    let mut analytic = objective.evaluate(&depths, true)?.grad;
    if cfg.flip_sign {
        analytic.iter_mut().for_each(|g| *g = -*g);
    }
    let base_sig = objective.signature(&depths)?;
    let mut report = GradCheckReport {
        seed: cfg.seed,
        scene,
        components: depths.len(),
        checked: 0,
        below_floor: 0,
        unstable: 0,
        max_rel_error: 0.0,
        worst_component: None,
        passed: false,
    };
    for (k, &a) in analytic.iter().enumerate() {
        if !a.is_finite() {
            return Err(Error::Numerical(format!("analytic gradient component {k} is not finite")));
        }
        let Some(fd) = central_difference(&objective, &depths, k, base_sig, cfg)? else {
            report.unstable += 1;
            continue;
        };
        let scale = a.abs().max(fd.abs());
        if scale <= MIN_CHECKED_GRADIENT {
            report.below_floor += 1;
            continue;
        }
        report.checked += 1;
        let rel = (a - fd).abs() / scale;
        if rel > report.max_rel_error || report.worst_component.is_none() {
            report.max_rel_error = rel;
            report.worst_component = Some(k);
        }
    }
    report.passed = report.checked > 0 && report.max_rel_error <= GRADIENT_TOLERANCE;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_scene_passes_and_sign_flip_fails() {
        let cfg = GradCheckConfig { width: 6, height: 6, seed: 3, ..GradCheckConfig::default() };
        let ok = check_gradients(&cfg).unwrap();
        assert!(ok.passed, "{ok:?}");
        let bad = check_gradients(&GradCheckConfig { flip_sign: true, ..cfg }).unwrap();
        assert!(!bad.passed);
        assert!(bad.max_rel_error > 1.0);
    }

    #[test]
    fn degenerate_sizes_are_rejected() {
        assert!(check_gradients(&GradCheckConfig { width: 1, ..GradCheckConfig::default() }).is_err());
        assert!(check_gradients(&GradCheckConfig { n_context: 0, ..GradCheckConfig::default() }).is_err());
    }
}
