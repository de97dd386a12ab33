//! Photometric, smoothness and auxiliary terms of the refinement objective.

mod disocclusion;
mod exposure;
mod photometric;
mod smoothness;
mod ssim;
mod weights;

pub use disocclusion::{disocclusion_mask, DEFAULT_WARP_RADIUS};
pub use exposure::{fit_exposure, ExposureModel, MIN_EXPOSURE_PIXELS};
pub use photometric::{photometric_loss, PhotometricLoss};
pub use smoothness::{smoothness_loss, SmoothnessLoss};
pub use ssim::{ssim, SsimResult, SSIM_C1, SSIM_C2, SSIM_SIGMA, SSIM_WINDOW};
pub use weights::{gradient_weight, LossWeights, PixelWeightMap};
