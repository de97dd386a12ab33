//! Pinhole cameras, ray geometry, the depth-conditioned Gaussian scale, normals
//! from vertex maps, and context-view selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DepthMap, Grid, Mask};
use crate::linalg::{Mat3, Vec3};
use crate::scalar::Real;

/// Default near plane, in world units.
pub const DEFAULT_Z_NEAR: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics<T> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
    pub width: usize,
    pub height: usize,
}

impl<T: Real> CameraIntrinsics<T> {
    pub fn new(fx: T, fy: T, cx: T, cy: T, width: usize, height: usize) -> Result<Self> {
        if !(fx > T::zero() && fy > T::zero()) || !fx.is_finite() || !fy.is_finite() {
            return Err(Error::invalid(format!("focal lengths must be positive, got {fx}, {fy}")));
        }
        if width == 0 || height == 0 {
            return Err(Error::invalid("image size must be nonzero"));
        }
        Ok(Self { fx, fy, cx, cy, width, height })
    }

    /// Intrinsics of the image downsampled by an integer `factor`.
    ///
    /// With the pixel-center convention continuous coordinates scale exactly by `1/factor`.
    pub fn downscaled(&self, factor: usize) -> Self {
        let f = T::from_usize_lossy(factor);
        Self {
            fx: self.fx / f,
            fy: self.fy / f,
            cx: self.cx / f,
            cy: self.cy / f,
            width: self.width / factor,
            height: self.height / factor,
        }
    }

    /// Full horizontal field of view in radians.
    pub fn horizontal_fov(&self) -> T {
        let two = T::lit(2.0);
        two * (T::from_usize_lossy(self.width) / (two * self.fx)).atan()
    }

    /// `(((u−cx)/fx)² + ((v−cy)/fy)² + 1)^(−1/2)`: ratio of z-depth to ray length.
    #[inline]
    pub fn perspective_factor(&self, u: T, v: T) -> T {
        let a = (u - self.cx) / self.fx;
        let b = (v - self.cy) / self.fy;
        T::one() / (a * a + b * b + T::one()).sqrt()
    }

    pub fn cast<U: Real>(&self) -> CameraIntrinsics<U> {
        CameraIntrinsics {
            fx: U::lit(self.fx.as_f64()),
            fy: U::lit(self.fy.as_f64()),
            cx: U::lit(self.cx.as_f64()),
            cy: U::lit(self.cy.as_f64()),
            width: self.width,
            height: self.height,
        }
    }
}

/// Where inside a pixel its ray is cast.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PixelConvention {
    /// Pixel `(col, row)` samples `(col + 0.5, row + 0.5)`; COLMAP compatible.
    #[default]
    Center,
    /// Pixel `(col, row)` samples `(col, row)`.
    Corner,
}

impl PixelConvention {
    #[inline]
    pub fn sample<T: Real>(self, col: usize, row: usize) -> (T, T) {
        let (c, r) = (T::from_usize_lossy(col), T::from_usize_lossy(row));
        match self {
            Self::Center => (c + T::lit(0.5), r + T::lit(0.5)),
            Self::Corner => (c, r),
        }
    }
}

/// Continuous coordinates of the center of pixel `(col, row)`.
#[inline]
pub fn pixel_center<T: Real>(col: usize, row: usize) -> (T, T) {
    PixelConvention::Center.sample(col, row)
}

/// World-from-camera rigid transform. `translation` is the camera center in world coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraPose<T> {
    pub rotation: Mat3<T>,
    pub translation: Vec3<T>,
}

impl<T: Real> CameraPose<T> {
    pub fn new(rotation: Mat3<T>, translation: Vec3<T>) -> Result<Self> {
        let tol = T::lit(1e-9).max(T::epsilon() * T::lit(64.0));
        if rotation.orthonormality_error() > tol || (rotation.determinant() - T::one()).abs() > tol {
            return Err(Error::invalid("rotation is not orthonormal with determinant +1"));
        }
        if !translation.is_finite() {
            return Err(Error::invalid("non-finite camera translation"));
        }
        Ok(Self { rotation, translation })
    }

    pub fn identity() -> Self {
        Self { rotation: Mat3::identity(), translation: Vec3::zero() }
    }

    /// Camera at `eye` looking at `target`, with image rows pointing along `down`.
    pub fn look_at(eye: Vec3<T>, target: Vec3<T>, down: Vec3<T>) -> Result<Self> {
        let z = (target - eye)
            .try_normalize()
            .ok_or_else(|| Error::invalid("look_at eye equals target"))?;
        let x = down
            .cross(z)
            .try_normalize()
            .ok_or_else(|| Error::invalid("look_at down vector parallel to viewing direction"))?;
        let y = z.cross(x);
        Self::new(Mat3::from_columns(x, y, z), eye)
    }

    #[inline]
    pub fn center(&self) -> Vec3<T> {
        self.translation
    }

    /// Viewing direction: the third column of the rotation.
    #[inline]
    pub fn optical_axis(&self) -> Vec3<T> {
        self.rotation.column(2)
    }

    #[inline]
    pub fn world_to_camera(&self, p: Vec3<T>) -> Vec3<T> {
        self.rotation.tr_mul_vec(p - self.translation)
    }

    #[inline]
    pub fn camera_to_world(&self, p: Vec3<T>) -> Vec3<T> {
        self.rotation.mul_vec(p) + self.translation
    }

    pub fn cast<U: Real>(&self) -> CameraPose<U> {
        let m = self.rotation.m.map(|r| r.map(|v| U::lit(v.as_f64())));
        CameraPose { rotation: Mat3::from_rows(m), translation: self.translation.cast() }
    }
}

/// Intrinsics and pose of one calibrated view.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera<T> {
    pub intrinsics: CameraIntrinsics<T>,
    pub pose: CameraPose<T>,
}

impl<T: Real> Camera<T> {
    pub fn new(intrinsics: CameraIntrinsics<T>, pose: CameraPose<T>) -> Self {
        Self { intrinsics, pose }
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height
    }

    pub fn downscaled(&self, factor: usize) -> Self {
        Self { intrinsics: self.intrinsics.downscaled(factor), pose: self.pose }
    }

    /// Unit world-frame ray through continuous pixel coordinates `(u, v)`.
    pub fn world_ray(&self, u: T, v: T) -> Vec3<T> {
        self.pose.rotation.mul_vec(ray_direction(u, v, &self.intrinsics))
    }

    pub fn project(&self, p: Vec3<T>) -> Option<Projected<T>> {
        project(p, &self.intrinsics, &self.pose, T::lit(DEFAULT_Z_NEAR))
    }

    pub fn cast<U: Real>(&self) -> Camera<U> {
        Camera { intrinsics: self.intrinsics.cast(), pose: self.pose.cast() }
    }
}

/// Unit camera-frame ray through continuous pixel coordinates `(u, v)`.
#[inline]
pub fn ray_direction<T: Real>(u: T, v: T, intr: &CameraIntrinsics<T>) -> Vec3<T> {
    let dir = Vec3::new((u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, T::one());
    dir * (T::one() / dir.norm())
}

/// Converts a ray-length depth at `(u, v)` to camera z-depth.
#[inline]
pub fn ray_depth_to_z<T: Real>(d: T, u: T, v: T, intr: &CameraIntrinsics<T>) -> T {
    d * intr.perspective_factor(u, v)
}

/// Converts a ray-length depth map to camera z-depths.
pub fn ray_to_z_depth<T: Real>(depth: &DepthMap<T>, intr: &CameraIntrinsics<T>) -> DepthMap<T> {
    depth.map_valid(|x, y, d| {
        let (u, v) = pixel_center(x, y);
        d * intr.perspective_factor(u, v)
    })
}

/// Converts a camera z-depth map to ray lengths.
pub fn z_to_ray_depth<T: Real>(depth: &DepthMap<T>, intr: &CameraIntrinsics<T>) -> DepthMap<T> {
    depth.map_valid(|x, y, z| {
        let (u, v) = pixel_center(x, y);
        z / intr.perspective_factor(u, v)
    })
}

/// Isotropic Gaussian scale at z-depth `z`: half the side of a back-projected pixel.
#[inline]
pub fn gaussian_scale<T: Real>(z: T, intr: &CameraIntrinsics<T>) -> T {
    z / (T::lit(2.0) * (intr.fx * intr.fy).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projected<T> {
    pub u: T,
    pub v: T,
    /// Camera-frame z.
    pub z: T,
}

/// Pinhole projection; `None` when the camera-frame z is at or behind `z_near`.
#[inline]
pub fn project<T: Real>(
    p: Vec3<T>,
    intr: &CameraIntrinsics<T>,
    pose: &CameraPose<T>,
    z_near: T,
) -> Option<Projected<T>> {
    let pc = pose.world_to_camera(p);
    if !(pc.z > z_near) {
        return None;
    }
    Some(Projected { u: intr.fx * pc.x / pc.z + intr.cx, v: intr.fy * pc.y / pc.z + intr.cy, z: pc.z })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Frame<T> {
    Camera,
    /// World frame, observed from a camera centered at `center`.
    World { center: Vec3<T> },
}

impl<T: Real> Frame<T> {
    fn viewer(&self) -> Vec3<T> {
        match *self {
            Frame::Camera => Vec3::zero(),
            Frame::World { center } => center,
        }
    }
}

#[derive(Clone, Debug)]
pub struct VertexMap<T> {
    pub positions: Grid<Vec3<T>>,
    pub valid: Mask,
    pub frame: Frame<T>,
}

#[derive(Clone, Debug)]
pub struct NormalMap<T> {
    pub normals: Grid<Vec3<T>>,
    pub valid: Mask,
}

/// World-frame vertex map of a ray-length depth map.
pub fn backproject<T: Real>(depth: &DepthMap<T>, intr: &CameraIntrinsics<T>, pose: &CameraPose<T>) -> VertexMap<T> {
    let center = pose.center();
    let positions = Grid::from_fn(depth.width(), depth.height(), |x, y| match depth.get(x, y) {
        Some(d) => {
            let (u, v) = pixel_center(x, y);
            center + pose.rotation.mul_vec(ray_direction(u, v, intr)) * d
        }
        None => Vec3::zero(),
    });
    VertexMap { positions, valid: depth.validity().clone(), frame: Frame::World { center } }
}

/// Normal from the central-difference tangents `dx = P(u+1)−P(u−1)` and
/// `dy = P(v+1)−P(v−1)`, flipped to face `viewer`.
///
/// Returns the unit normal together with the orientation sign applied to `dx × dy`.
#[inline]
pub(crate) fn oriented_normal<T: Real>(dx: Vec3<T>, dy: Vec3<T>, point: Vec3<T>, viewer: Vec3<T>) -> Option<(Vec3<T>, T)> {
    let c = dx.cross(dy);
    let n = c.try_normalize()?;
    if n.norm_squared() < T::lit(0.5) {
        return None;
    }
    if n.dot(point - viewer) > T::zero() {
        Some((-n, -T::one()))
    } else {
        Some((n, T::one()))
    }
}

pub fn normals_from_depth<T: Real>(vmap: &VertexMap<T>) -> NormalMap<T> {
    let (w, h) = (vmap.positions.width(), vmap.positions.height());
    let viewer = vmap.frame.viewer();
    let mut valid = Grid::new(w, h, false);
    let normals = Grid::from_fn(w, h, |x, y| {
        if x == 0 || y == 0 || x + 1 >= w || y + 1 >= h {
            return Vec3::zero();
        }
        let ok = [(x, y), (x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)].iter().all(|&p| vmap.valid[p]);
        if !ok {
            return Vec3::zero();
        }
        let p = &vmap.positions;
        let dx = p[(x + 1, y)] - p[(x - 1, y)];
        let dy = p[(x, y + 1)] - p[(x, y - 1)];
        match oriented_normal(dx, dy, p[(x, y)], viewer) {
            Some((n, _)) => {
                valid[(x, y)] = true;
                n
            }
            None => Vec3::zero(),
        }
    });
    NormalMap { normals, valid }
}

/// Rotates world-frame normals into the frame of the camera with `pose`.
pub fn normals_to_camera<T: Real>(normals: &NormalMap<T>, pose: &CameraPose<T>) -> NormalMap<T> {
    NormalMap { normals: normals.normals.map(|&n| pose.rotation.tr_mul_vec(n)), valid: normals.valid.clone() }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContextSelection {
    /// Indices into the candidate list, best aligned first.
    pub indices: Vec<usize>,
    /// How many of the requested views could not be supplied.
    pub shortfall: usize,
}

/// Picks the `n` candidates whose optical axes are most aligned with the target's.
///
/// Candidates whose horizontal field of view differs from the target's by more
/// than `max_fov_ratio` are excluded first. Ties keep the lower index first.
pub fn select_context_views<T: Real>(
    target: &Camera<T>,
    candidates: &[Camera<T>],
    n: usize,
    max_fov_ratio: T,
) -> ContextSelection {
    let axis = target.pose.optical_axis();
    let fov = target.intrinsics.horizontal_fov();
    let mut scored: Vec<(usize, T)> = candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| {
            let f = c.intrinsics.horizontal_fov();
            f.max(fov) <= max_fov_ratio * f.min(fov)
        })
        .map(|(i, c)| (i, axis.dot(c.pose.optical_axis())))
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
    scored.truncate(n);
    ContextSelection { shortfall: n - scored.len(), indices: scored.into_iter().map(|(i, _)| i).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn intr() -> CameraIntrinsics<f64> {
        CameraIntrinsics::new(500.0, 400.0, 320.0, 240.0, 640, 480).unwrap()
    }

    #[test]
    fn on_axis_and_diagonal_rays() {
        let k = intr();
        let r = ray_direction(k.cx, k.cy, &k);
        assert_eq!(r, Vec3::new(0.0, 0.0, 1.0));
        let r = ray_direction(k.cx + k.fx, k.cy, &k);
        let s = 1.0 / 2f64.sqrt();
        assert!((r - Vec3::new(s, 0.0, s)).norm() < 1e-15);
    }

    #[test]
    fn ray_matches_direct_formula() {
        let k = intr();
        for &(u, v) in &[(0.5, 0.5), (17.25, 400.0), (639.5, 3.0)] {
            let d = Vec3::new((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
            let expected = d * (1.0 / d.norm());
            let r = ray_direction(u, v, &k);
            assert!((r - expected).norm() < 1e-15);
            assert!((r.norm() - 1.0).abs() < 1e-15 && r.z > 0.0);
        }
    }

    #[test]
    fn z_depth_examples() {
        let k = intr();
        assert_eq!(ray_depth_to_z(5.0, k.cx, k.cy, &k), 5.0);
        let z = ray_depth_to_z(5.0, k.cx + k.fx, k.cy, &k);
        assert!((z - 5.0 / 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn scale_examples() {
        let k = CameraIntrinsics::<f64>::new(500.0, 500.0, 0.0, 0.0, 10, 10).unwrap();
        assert_eq!(gaussian_scale(1000.0, &k), 1.0);
        let k = CameraIntrinsics::<f64>::new(400.0, 900.0, 0.0, 0.0, 10, 10).unwrap();
        assert!((gaussian_scale(600.0, &k) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn invalid_intrinsics_and_pose_rejected() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 0.0, 0.0, 1, 1).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0, 0, 1).is_err());
        let mut m = Mat3::<f64>::identity();
        m.m[2][2] = -1.0;
        assert!(CameraPose::new(m, Vec3::zero()).is_err());
    }

    #[test]
    fn projection_examples() {
        let k = intr();
        let id = CameraPose::identity();
        let p = project(Vec3::new(0.0, 0.0, 1.0), &k, &id, 1e-4).unwrap();
        assert_eq!((p.u, p.v, p.z), (k.cx, k.cy, 1.0));
        let p = project(Vec3::new(0.2, -0.1, 2.0), &k, &id, 1e-4).unwrap();
        assert_eq!((p.u, p.v), (k.fx * 0.1 + k.cx, k.fy * -0.05 + k.cy));
        assert!(project(Vec3::new(0.0, 0.0, -1.0), &k, &id, 1e-4).is_none());
    }

    #[test]
    fn backproject_identity_and_translation() {
        let k = CameraIntrinsics::new(100.0, 100.0, 1.5, 1.5, 3, 3).unwrap();
        let depth = DepthMap::from_values(Grid::new(3, 3, 1.0));
        let v = backproject(&depth, &k, &CameraPose::identity());
        assert!((v.positions[(1, 1)] - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-15);
        let t = Vec3::new(1.0, 2.0, 3.0);
        let pose = CameraPose::new(Mat3::identity(), t).unwrap();
        let v = backproject(&depth, &k, &pose);
        assert!((v.positions[(1, 1)] - (t + Vec3::new(0.0, 0.0, 1.0))).norm() < 1e-15);
    }

    #[test]
    fn fronto_parallel_normals_face_camera() {
        let k = CameraIntrinsics::new(50.0, 50.0, 4.0, 4.0, 8, 8).unwrap();
        let pose = CameraPose::identity();
        let depth = DepthMap::from_values(Grid::from_fn(8, 8, |x, y| {
            let (u, v) = pixel_center::<f64>(x, y);
            2.0 / k.perspective_factor(u, v)
        }));
        let n = normals_from_depth(&backproject(&depth, &k, &pose));
        for y in 1..7 {
            for x in 1..7 {
                assert!(n.valid[(x, y)]);
                assert!((n.normals[(x, y)] - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
            }
        }
        assert!(!n.valid[(0, 3)]);
    }

    #[test]
    fn tilted_plane_normal_matches_gradient() {
        // Plane z = a·x + c seen on-axis has normal ∝ (−a, 0, 1), camera-facing sign.
        let (a, c) = (0.4, 3.0);
        let k = CameraIntrinsics::new(60.0, 60.0, 5.0, 5.0, 10, 10).unwrap();
        let depth = DepthMap::from_values(Grid::from_fn(10, 10, |x, y| {
            let (u, v) = pixel_center::<f64>(x, y);
            let r = ray_direction(u, v, &k);
            // Intersect ray t·r with z − a·x = c.
            c / (r.z - a * r.x)
        }));
        let n = normals_from_depth(&backproject(&depth, &k, &CameraPose::identity()));
        let expected = Vec3::new(a, 0.0, -1.0).normalize();
        for y in 1..9 {
            for x in 1..9 {
                assert!((n.normals[(x, y)] - expected).norm() < 1e-10, "{:?}", n.normals[(x, y)]);
            }
        }
    }

    #[test]
    fn collinear_neighbors_are_invalid() {
        let mut positions = Grid::new(3, 3, Vec3::<f64>::zero());
        for y in 0..3 {
            for x in 0..3 {
                positions[(x, y)] = Vec3::new(x as f64 + y as f64, 0.0, 1.0);
            }
        }
        let vm = VertexMap { positions, valid: Grid::new(3, 3, true), frame: Frame::Camera };
        assert!(!normals_from_depth(&vm).valid[(1, 1)]);
    }

    fn cam_with_axis(axis: Vec3<f64>, fx: f64) -> Camera<f64> {
        let pose = CameraPose::look_at(Vec3::zero(), axis, Vec3::new(0.0, 1.0, 0.0)).unwrap();
        Camera::new(CameraIntrinsics::new(fx, fx, 50.0, 50.0, 100, 100).unwrap(), pose)
    }

    #[test]
    fn context_selection_orders_by_alignment() {
        let target = cam_with_axis(Vec3::new(0.0, 0.0, 1.0), 100.0);
        let a = cam_with_axis(Vec3::new(0.9539392014169456, 0.0, 0.3), 100.0);
        let b = cam_with_axis(Vec3::new(0.4358898943540673, 0.0, 0.9), 100.0);
        let sel = select_context_views(&target, &[a, b], 1, 1.5);
        assert_eq!(sel.indices, vec![1]);
        let sel = select_context_views(&target, &[a, b], 2, 1.5);
        assert_eq!(sel.indices, vec![1, 0]);
        let sel = select_context_views(&target, &[b, b], 2, 1.5);
        assert_eq!(sel.indices, vec![0, 1]);
    }

    #[test]
    fn context_selection_filters_fov_and_reports_shortfall() {
        let target = cam_with_axis(Vec3::new(0.0, 0.0, 1.0), 100.0);
        let narrow = cam_with_axis(Vec3::new(0.0, 0.0, 1.0), 1000.0);
        let ok = cam_with_axis(Vec3::new(0.1, 0.0, 1.0), 110.0);
        let sel = select_context_views(&target, &[narrow, ok], 2, 1.5);
        assert_eq!(sel.indices, vec![1]);
        assert_eq!(sel.shortfall, 1);
    }

    proptest! {
        #[test]
        fn z_depth_inverts_and_is_monotone(d in 0.01f64..100.0, u in 0.0f64..640.0, v in 0.0f64..480.0) {
            let k = intr();
            let z = ray_depth_to_z(d, u, v, &k);
            prop_assert!(z > 0.0 && z <= d);
            let back = z / k.perspective_factor(u, v);
            prop_assert!((back - d).abs() <= 1e-12 * d);
            prop_assert!(ray_depth_to_z(d * 1.01, u, v, &k) > z);
        }

        #[test]
        fn scale_is_linear(z in 0.001f64..1e3) {
            let k = intr();
            let s1 = gaussian_scale(z, &k);
            prop_assert!((gaussian_scale(2.0 * z, &k) - 2.0 * s1).abs() <= 1e-12 * s1);
        }

        #[test]
        fn project_backproject_roundtrip(col in 0usize..640, row in 0usize..480, d in 0.1f64..50.0,
                                         ax in -1.0f64..1.0, ay in -1.0f64..1.0, angle in 0.0f64..3.0,
                                         tx in -5.0f64..5.0) {
            let k = intr();
            let rot = Mat3::from_axis_angle(Vec3::new(ax, ay, 0.5), angle);
            let pose = CameraPose::new(rot, Vec3::new(tx, 1.0, -2.0)).unwrap();
            let (u, v) = pixel_center::<f64>(col, row);
            let p = pose.center() + pose.rotation.mul_vec(ray_direction(u, v, &k)) * d;
            let pr = project(p, &k, &pose, 1e-4).unwrap();
            prop_assert!((pr.u - u).abs() < 1e-9 * u.abs().max(1.0));
            prop_assert!((pr.v - v).abs() < 1e-9 * v.abs().max(1.0));
            let z = ray_depth_to_z(d, u, v, &k);
            prop_assert!((pr.z - z).abs() < 1e-9 * z);
        }

        #[test]
        fn context_selection_permutation_invariant(axes in proptest::collection::vec((-0.5f64..0.5, -0.5f64..0.5), 2..8),
                                                   n in 1usize..8) {
            let target = cam_with_axis(Vec3::new(0.0, 0.0, 1.0), 100.0);
            let cams: Vec<_> = axes.iter().map(|&(x, y)| cam_with_axis(Vec3::new(x, y, 1.0), 100.0)).collect();
            let sel = select_context_views(&target, &cams, n, 1.5);
            let rev: Vec<_> = cams.iter().rev().cloned().collect();
            let sel_rev = select_context_views(&target, &rev, n, 1.5);
            let mapped: Vec<usize> = sel_rev.indices.iter().map(|&i| cams.len() - 1 - i).collect();
            // Equal dot products may reorder under permutation; compare scores instead of indices.
            let score = |i: usize| target.pose.optical_axis().dot(cams[i].pose.optical_axis());
            let a: Vec<f64> = sel.indices.iter().map(|&i| score(i)).collect();
            let b: Vec<f64> = mapped.iter().map(|&i| score(i)).collect();
            prop_assert_eq!(a, b);
        }
    }
}
