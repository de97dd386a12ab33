use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{LossWeights, DEFAULT_WARP_RADIUS};
use crate::rasterizer::{DEFAULT_ALPHA_CAP, DEFAULT_LOW_PASS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Dtu,
    Tnt,
    Generic,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dtu" => Ok(Self::Dtu),
            "tnt" => Ok(Self::Tnt),
            "generic" => Ok(Self::Generic),
            other => Err(Error::invalid(format!("unknown preset '{other}' (expected dtu, tnt or generic)"))),
        }
    }
}

/// Every tunable of the refinement driver. Keys are flat so the struct maps
/// one-to-one onto a key-value config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefineConfig {
    /// Context views per target view.
    pub n_context: usize,
    /// Downsampling factor of each pyramid level, coarsest first.
    pub pyramid_factors: Vec<usize>,
    /// Iteration cap of each pyramid level.
    pub pyramid_iters: Vec<usize>,
    pub lr_init: f64,
    pub lr_stop: f64,
    pub lr_factor: f64,
    pub patience: usize,
    /// Pixel radius of the rasterizer's radius gate.
    pub radius_threshold: f64,
    /// Depth gate window is the init depth range divided by this count.
    pub depth_slices: usize,
    pub lambda_c: f64,
    pub lambda_s: f64,
    pub grad_min: f64,
    pub grad_max: f64,
    /// Fit a per-context affine color model once per level.
    pub exposure: bool,
    /// Invalidate refined pixels that disagree with other views afterwards.
    pub consistency_check: bool,
    pub consistency_tau: f64,
    pub consistency_min_views: usize,
    /// Relative bound on how far a depth may move from its level input.
    pub clamp_delta: f64,
    pub alpha_cap: f64,
    pub low_pass: f64,
    pub half_exponent: bool,
    /// Splat radius of the disocclusion warp in pixels.
    pub warp_radius: f64,
    /// Largest ratio between target and context horizontal fields of view.
    pub max_fov_ratio: f64,
    pub freeze_scale_grad: bool,
}

impl Default for RefineConfig {
    fn default() -> Self {
        let w = LossWeights::default();
        Self {
            n_context: 10,
            pyramid_factors: vec![2, 1],
            pyramid_iters: vec![200, 100],
            lr_init: 1e-5,
            lr_stop: 1e-7,
            lr_factor: 0.1,
            patience: 10,
            radius_threshold: 1.42,
            depth_slices: 20,
            lambda_c: w.lambda_c,
            lambda_s: w.lambda_s,
            grad_min: w.grad_min,
            grad_max: w.grad_max,
            exposure: false,
            consistency_check: false,
            consistency_tau: 0.01,
            consistency_min_views: 2,
            clamp_delta: 0.5,
            alpha_cap: DEFAULT_ALPHA_CAP,
            low_pass: DEFAULT_LOW_PASS,
            half_exponent: false,
            warp_radius: DEFAULT_WARP_RADIUS,
            max_fov_ratio: 2.0,
            freeze_scale_grad: false,
        }
    }
}

impl RefineConfig {
    pub fn preset(preset: Preset) -> Self {
        let base = Self::default();
        match preset {
            Preset::Dtu => Self { pyramid_iters: vec![100, 100], radius_threshold: 1.42, ..base },
            Preset::Tnt => Self {
                pyramid_iters: vec![200, 100],
                radius_threshold: 1.42,
                exposure: true,
                consistency_check: true,
                ..base
            },
            Preset::Generic => Self { radius_threshold: 2.0, ..base },
        }
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights { lambda_c: self.lambda_c, lambda_s: self.lambda_s, grad_min: self.grad_min, grad_max: self.grad_max }
    }

    /// Overrides the keys present in `table`, leaving the others untouched.
    pub fn with_overrides(&self, table: &toml::Table) -> Result<Self> {
        let mut merged = toml::Table::try_from(self).map_err(|e| Error::invalid(format!("config serialization: {e}")))?;
        for (k, v) in table {
            if !merged.contains_key(k) {
                return Err(Error::invalid(format!("unknown config key '{k}'")));
            }
            merged.insert(k.clone(), v.clone());
        }
        let cfg: Self = toml::Value::Table(merged)
            .try_into()
            .map_err(|e| Error::invalid(format!("invalid config value: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::invalid(m.to_string()));
        if self.n_context == 0 || self.patience == 0 || self.depth_slices == 0 || self.consistency_min_views == 0 {
            return bad("counts in the config must be at least 1");
        }
        if self.pyramid_factors.is_empty() || self.pyramid_factors.len() != self.pyramid_iters.len() {
            return bad("pyramid_factors and pyramid_iters must be nonempty and equally long");
        }
        if self.pyramid_factors.contains(&0) {
            return bad("pyramid factors must be at least 1");
        }
        let positive = [self.lr_init, self.lr_stop, self.lr_factor, self.radius_threshold, self.consistency_tau, self.clamp_delta, self.warp_radius, self.max_fov_ratio];
        if positive.iter().any(|v| !(*v > 0.0)) {
            return bad("rates, thresholds and tolerances must be positive");
        }
        if self.lr_factor >= 1.0 {
            return bad("lr_factor must be below 1");
        }
        if !(self.alpha_cap > 0.0 && self.alpha_cap <= 1.0) {
            return bad("alpha_cap must lie in (0, 1]");
        }
        if !(self.low_pass >= 0.0) {
            return bad("low_pass must be nonnegative");
        }
        self.weights().validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        assert_eq!(RefineConfig::preset(Preset::Dtu).pyramid_iters, vec![100, 100]);
        let t = RefineConfig::preset(Preset::Tnt);
        assert!(t.exposure && t.consistency_check);
        assert_eq!(RefineConfig::preset(Preset::Generic).radius_threshold, 2.0);
        for p in [Preset::Dtu, Preset::Tnt, Preset::Generic] {
            RefineConfig::preset(p).validate().unwrap();
        }
    }

    #[test]
    fn overrides_and_round_trip() {
        let base = RefineConfig::default();
        let table: toml::Table = toml::from_str("lr_init = 2e-5\npyramid_iters = [5, 6]").unwrap();
        let c = base.with_overrides(&table).unwrap();
        assert_eq!(c.lr_init, 2e-5);
        assert_eq!(c.pyramid_iters, vec![5, 6]);
        assert_eq!(c.patience, base.patience);
        let back: RefineConfig = toml::from_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        let bad: toml::Table = toml::from_str("lr_inti = 1.0").unwrap();
        assert!(base.with_overrides(&bad).is_err());
        let neg: toml::Table = toml::from_str("lr_init = -1.0").unwrap();
        assert!(base.with_overrides(&neg).is_err());
    }
}
