use pagas::pipeline::{Preset, RefineConfig};

const FIELDS: &[(&str, &str)] = &[
    ("n_context", "context views per target view, chosen by optical-axis alignment"),
    ("pyramid_factors", "downsampling factor of each pyramid level, coarsest first"),
    ("pyramid_iters", "iteration cap of each pyramid level"),
    ("lr_init", "Adam learning rate at the start of every level"),
    ("lr_stop", "a level stops once the learning rate falls below this"),
    ("lr_factor", "learning-rate multiplier applied on a loss plateau"),
    ("patience", "iterations without a new loss minimum before the rate is cut"),
    ("radius_threshold", "pixel radius gate between a pixel center and a projected mean"),
    ("depth_slices", "depth gate window = initial depth range / depth_slices"),
    ("lambda_c", "D-SSIM share of the photometric term (the rest is L1)"),
    ("lambda_s", "weight of the normal smoothness term"),
    ("grad_min", "color-gradient magnitude mapped to texture weight 0"),
    ("grad_max", "color-gradient magnitude mapped to texture weight 1"),
    ("exposure", "fit a per-context affine color model once per level"),
    ("consistency_check", "drop refined pixels that disagree with other views"),
    ("consistency_tau", "relative depth tolerance of the consistency check"),
    ("consistency_min_views", "views that must agree for a pixel to survive"),
    ("clamp_delta", "relative bound on how far a depth may move from its level input"),
    ("alpha_cap", "upper bound on a single Gaussian's opacity"),
    ("low_pass", "isotropic variance in px^2 added to every projected footprint"),
    ("half_exponent", "use exp(-0.5 q) instead of exp(-q) for the footprint"),
    ("warp_radius", "splat radius in pixels of the disocclusion warp"),
    ("max_fov_ratio", "largest accepted field-of-view ratio between target and context"),
    ("freeze_scale_grad", "ignore the gradient through the depth-dependent scale"),
];

fn value_of(cfg: &RefineConfig, key: &str) -> String {
    let table: toml::Table = cfg.to_toml().parse().expect("config renders as a TOML table");
    table.get(key).map(|v| v.to_string()).unwrap_or_default()
}

/// Help appendix listing every config field, its default and the preset overrides.
pub fn render() -> String {
    let base = RefineConfig::default();
    let width = FIELDS.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut s = String::from("Config fields (--config file, --set KEY=VALUE), with defaults:\n");
    for (key, doc) in FIELDS {
        s.push_str(&format!("  {key:<width$}  {:<10}  {doc}\n", value_of(&base, key)));
    }
    s.push_str("\nPresets (flags override the config file, which overrides the preset):\n");
    for (name, p) in [("dtu", Preset::Dtu), ("tnt", Preset::Tnt), ("generic", Preset::Generic)] {
        let cfg = RefineConfig::preset(p);
        let changed: Vec<String> = FIELDS
            .iter()
            .filter(|(k, _)| matches!(*k, "pyramid_iters" | "radius_threshold" | "exposure" | "consistency_check"))
            .map(|(k, _)| format!("{k}={}", value_of(&cfg, k)))
            .collect();
        s.push_str(&format!("  {name:<8} {}\n", changed.join(" ")));
    }
    s
}
