use std::hash::{DefaultHasher, Hash, Hasher};

use crate::backward::{backward, BackwardOptions, UpstreamGradients};
use crate::cloud::PixelGaussianCloud;
use crate::error::{Error, Result};
use crate::geometry::Camera;
use crate::grid::{ColorImage, Grid, Mask};
use crate::losses::{photometric_loss, smoothness_loss, ExposureModel, LossWeights};
use crate::rasterizer::{render, RasterSettings};
use crate::scalar::Real;

/// One calibrated input image.
#[derive(Clone, Debug)]
pub struct CameraView<T> {
    pub name: String,
    pub camera: Camera<T>,
    pub image: ColorImage<T>,
    /// Optional foreground mask; pixels outside it are neither optimized nor compared.
    pub mask: Option<Mask>,
}

/// Photometric comparison of the cloud rendered into one view.
#[derive(Clone, Debug)]
pub struct ViewTerm<T> {
    pub camera: Camera<T>,
    pub reference: ColorImage<T>,
    pub valid: Mask,
    pub w_grad: Grid<T>,
    pub exposure: Option<ExposureModel<T>>,
}

#[derive(Clone, Debug)]
pub struct Evaluation<T> {
    /// Mean photometric term over the views with at least one valid pixel.
    pub loss_c: T,
    pub loss_s: T,
    /// Empty when the gradient was not requested.
    pub grad: Vec<T>,
    pub views_used: usize,
    pub depth_gated: usize,
}

impl<T: Real> Evaluation<T> {
    pub fn total(&self) -> T {
        self.loss_c + self.loss_s
    }
}

/// Loss of one pyramid level as a function of the cloud depths.
#[derive(Clone, Debug)]
pub struct Objective<T> {
    cloud: PixelGaussianCloud<T>,
    terms: Vec<ViewTerm<T>>,
    settings: RasterSettings<T>,
    lambda_c: T,
    lambda_s: T,
    smooth_weights: Grid<T>,
    options: BackwardOptions,
}

impl<T: Real> Objective<T> {
    pub fn new(
        cloud: PixelGaussianCloud<T>,
        terms: Vec<ViewTerm<T>>,
        settings: RasterSettings<T>,
        weights: &LossWeights,
        smooth_weights: Grid<T>,
        options: BackwardOptions,
    ) -> Result<Self> {
        weights.validate()?;
        settings.validate()?;
        for t in &terms {
            let (w, h) = (t.camera.width(), t.camera.height());
            if t.reference.width() != w || t.reference.height() != h || t.valid.width() != w || t.valid.height() != h || t.w_grad.width() != w || t.w_grad.height() != h {
                return Err(Error::ShapeMismatch("view term buffers do not match its camera".into()));
            }
        }
        Ok(Self {
            cloud,
            terms,
            settings,
            lambda_c: T::lit(weights.lambda_c),
            lambda_s: T::lit(weights.lambda_s),
            smooth_weights,
            options,
        })
    }

    pub fn cloud(&self) -> &PixelGaussianCloud<T> {
        &self.cloud
    }

    pub fn terms(&self) -> &[ViewTerm<T>] {
        &self.terms
    }

    pub fn settings(&self) -> &RasterSettings<T> {
        &self.settings
    }

    fn with_depths(&self, depths: &[T]) -> Result<PixelGaussianCloud<T>> {
        let mut c = self.cloud.clone();
        c.set_depths(depths)?;
        Ok(c)
    }

    pub fn evaluate(&self, depths: &[T], with_grad: bool) -> Result<Evaluation<T>> {
        let cloud = self.with_depths(depths)?;
        let mut per_view = Vec::with_capacity(self.terms.len());
        let mut depth_gated = 0;
        for term in &self.terms {
            let (proj, buffers) = render(&cloud, &term.camera, &self.settings)?;
            depth_gated += buffers.diagnostics.depth_gated;
            let rendered = match &term.exposure {
                Some(e) => e.apply(&buffers.color),
                None => buffers.color.clone(),
            };
            let loss = photometric_loss(&rendered, &term.reference, &term.valid, &term.w_grad, self.lambda_c)?;
            per_view.push((proj, buffers, loss));
        }
        let used = per_view.iter().filter(|(_, _, l)| !l.empty).count();
        let smooth = smoothness_loss(depths, &cloud, &self.smooth_weights, self.lambda_s)?;
        let mut eval = Evaluation {
            loss_c: T::zero(),
            loss_s: smooth.value,
            grad: Vec::new(),
            views_used: used,
            depth_gated,
        };
        if used == 0 {
            if with_grad {
                eval.grad = smooth.grad;
            }
            return Ok(eval);
        }
        let inv = T::one() / T::from_usize_lossy(used);
        eval.loss_c = per_view.iter().filter(|(_, _, l)| !l.empty).map(|(_, _, l)| l.value).sum::<T>() * inv;
        if !with_grad {
            return Ok(eval);
        }
        let mut grad = smooth.grad;
        for (term, (proj, buffers, loss)) in self.terms.iter().zip(&per_view) {
            if loss.empty {
                continue;
            }
            let mut up = loss.grad.map(|g| g.map(|v| v * inv));
            if let Some(e) = &term.exposure {
                up = e.backprop(&up);
            }
            let g = backward(
                buffers,
                &UpstreamGradients { color: &up, depth: None },
                proj,
                &cloud,
                &term.camera,
                &self.settings,
                self.options,
            )?;
            for (a, b) in grad.iter_mut().zip(&g.grad) {
                *a += *b;
            }
        }
        eval.grad = grad;
        Ok(eval)
    }

    /// Hash of every discrete rendering decision: per-pixel contributor ids and cap flags.
    pub fn signature(&self, depths: &[T]) -> Result<u64> {
        let cloud = self.with_depths(depths)?;
        let mut h = DefaultHasher::new();
        for term in &self.terms {
            let (_, b) = render(&cloud, &term.camera, &self.settings)?;
            for y in 0..b.height() {
                for x in 0..b.width() {
                    for c in b.contributors(x, y) {
                        (c.gaussian, c.capped).hash(&mut h);
                    }
                    u32::MAX.hash(&mut h);
                }
            }
        }
        Ok(h.finish())
    }
}
