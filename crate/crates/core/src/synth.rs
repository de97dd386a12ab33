//! Procedural textured scenes with exact ray-cast color, depth and visibility.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{pixel_center, ray_direction, Camera, CameraIntrinsics, CameraPose};
use crate::grid::{ColorImage, DepthMap, Grid};
use crate::linalg::Vec3;

pub const PRESETS: [&str; 3] = ["plane-checker", "sphere-noise", "step-occluder"];

/// Band-limited procedural color.
#[derive(Clone, Debug, PartialEq)]
pub enum Texture {
    Constant([f64; 3]),
    /// Smooth checker of squares `period / 2` wide, modulated by value noise.
    Checker { period: f64, sharpness: f64, colors: [[f64; 3]; 2], noise: f64, seed: u64 },
    /// Octave value noise blending two colors.
    Noise { frequency: f64, octaves: u32, colors: [[f64; 3]; 2], seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Primitive {
    /// Rectangle `center + a·u_axis + b·v_axis`, `|a| ≤ half_u`, `|b| ≤ half_v`.
    Plane { center: Vec3<f64>, u_axis: Vec3<f64>, v_axis: Vec3<f64>, half_u: f64, half_v: f64 },
    Sphere { center: Vec3<f64>, radius: f64 },
    Box { min: Vec3<f64>, max: Vec3<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Surface {
    pub primitive: Primitive,
    pub texture: Texture,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub surface: usize,
    pub point: Vec3<f64>,
    /// Surface coordinates used by planar textures.
    pub uv: (f64, f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticScene {
    pub name: String,
    pub surfaces: Vec<Surface>,
    pub background: [f64; 3],
    /// Point the default rig looks at.
    pub focus: Vec3<f64>,
}

#[derive(Clone, Debug)]
pub struct RaycastResult {
    pub color: ColorImage<f64>,
    /// Ray-length depth; invalid where the ray misses.
    pub ray_depth: DepthMap<f64>,
    pub z_depth: DepthMap<f64>,
    /// Index of the surface hit at each pixel center.
    pub ids: Grid<Option<usize>>,
}

fn hash(seed: u64, i: i64, j: i64, k: i64) -> f64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for v in [i, j, k] {
        h ^= (v as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h = h.rotate_left(27).wrapping_mul(0x94d0_49bb_1331_11eb);
        h ^= h >> 31;
    }
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Trilinear value noise in `[0, 1]` with smoothstep interpolation.
pub fn value_noise(seed: u64, p: Vec3<f64>) -> f64 {
    let (fx, fy, fz) = (p.x.floor(), p.y.floor(), p.z.floor());
    let (ix, iy, iz) = (fx as i64, fy as i64, fz as i64);
    let (tx, ty, tz) = (smoothstep(p.x - fx), smoothstep(p.y - fy), smoothstep(p.z - fz));
    let c = |dx: i64, dy: i64, dz: i64| hash(seed, ix + dx, iy + dy, iz + dz);
    let x00 = lerp(c(0, 0, 0), c(1, 0, 0), tx);
    let x10 = lerp(c(0, 1, 0), c(1, 1, 0), tx);
    let x01 = lerp(c(0, 0, 1), c(1, 0, 1), tx);
    let x11 = lerp(c(0, 1, 1), c(1, 1, 1), tx);
    lerp(lerp(x00, x10, ty), lerp(x01, x11, ty), tz)
}

fn octave_noise(seed: u64, p: Vec3<f64>, octaves: u32) -> f64 {
    let mut sum = 0.0;
    let mut norm = 0.0;
    let mut amp = 1.0;
    let mut freq = 1.0;
    for o in 0..octaves.max(1) {
        sum += amp * value_noise(seed.wrapping_add(o as u64 * 7919), p * freq);
        norm += amp;
        amp *= 0.5;
        freq *= 2.0;
    }
    sum / norm
}

fn mix(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [lerp(a[0], b[0], t), lerp(a[1], b[1], t), lerp(a[2], b[2], t)]
}

impl Texture {
    /// Color at world point `p` with planar coordinates `uv` where applicable.
    pub fn eval(&self, p: Vec3<f64>, uv: Option<(f64, f64)>) -> [f64; 3] {
        match self {
            Texture::Constant(c) => *c,
            Texture::Checker { period, sharpness, colors, noise, seed } => {
                let k = std::f64::consts::TAU / period;
                let s = match uv {
                    Some((u, v)) => (k * u).sin() * (k * v).sin(),
                    None => (k * p.x).sin() * (k * p.y).sin() * (k * p.z).sin(),
                };
                let t = 0.5 + 0.5 * (sharpness * s).tanh();
                let q = match uv {
                    Some((u, v)) => Vec3::new(u, v, 0.5),
                    None => p,
                };
                let n = value_noise(*seed, q * (2.0 / period)) - 0.5;
                let c = mix(colors[0], colors[1], t);
                c.map(|v| (v + noise * n).clamp(0.0, 1.0))
            }
            Texture::Noise { frequency, octaves, colors, seed } => {
                let q = match uv {
                    Some((u, v)) => Vec3::new(u, v, 0.5),
                    None => p,
                } * *frequency;
                let mut out = [0.0; 3];
                for (ch, o) in out.iter_mut().enumerate() {
                    let n = octave_noise(seed.wrapping_add(ch as u64 * 104_729), q, *octaves);
                    *o = lerp(colors[0][ch], colors[1][ch], (1.5 * (n - 0.5) + 0.5).clamp(0.0, 1.0));
                }
                out
            }
        }
    }
}

impl Primitive {
    fn intersect(&self, o: Vec3<f64>, d: Vec3<f64>) -> Option<(f64, Option<(f64, f64)>)> {
        const EPS: f64 = 1e-12;
        match *self {
            Primitive::Plane { center, u_axis, v_axis, half_u, half_v } => {
                let n = u_axis.cross(v_axis);
                let den = n.dot(d);
                if den.abs() < EPS {
                    return None;
                }
                let t = n.dot(center - o) / den;
                if t <= EPS {
                    return None;
                }
                let rel = o + d * t - center;
                let (a, b) = (rel.dot(u_axis), rel.dot(v_axis));
                (a.abs() <= half_u && b.abs() <= half_v).then_some((t, Some((a, b))))
            }
            Primitive::Sphere { center, radius } => {
                let oc = o - center;
                let b = oc.dot(d);
                let c = oc.norm_squared() - radius * radius;
                let disc = b * b - c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                let t = if -b - sq > EPS { -b - sq } else { -b + sq };
                (t > EPS).then_some((t, None))
            }
            Primitive::Box { min, max } => {
                let mut t0 = f64::NEG_INFINITY;
                let mut t1 = f64::INFINITY;
                for a in 0..3 {
                    if d[a].abs() < EPS {
                        if o[a] < min[a] || o[a] > max[a] {
                            return None;
                        }
                        continue;
                    }
                    let (mut ta, mut tb) = ((min[a] - o[a]) / d[a], (max[a] - o[a]) / d[a]);
                    if ta > tb {
                        std::mem::swap(&mut ta, &mut tb);
                    }
                    t0 = t0.max(ta);
                    t1 = t1.min(tb);
                }
                if t0 > t1 {
                    return None;
                }
                let t = if t0 > EPS { t0 } else { t1 };
                (t > EPS).then_some((t, None))
            }
        }
    }
}

fn unit_axes(normal: Vec3<f64>) -> (Vec3<f64>, Vec3<f64>) {
    let n = normal.normalize();
    let helper = if n.x.abs() < 0.9 { Vec3::new(1.0, 0.0, 0.0) } else { Vec3::new(0.0, 1.0, 0.0) };
    let u = helper.cross(n).normalize();
    (u, n.cross(u))
}

impl SyntheticScene {
    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        match name {
            "plane-checker" => Ok(Self::plane_checker(seed)),
            "sphere-noise" => Ok(Self::sphere_noise(seed)),
            "step-occluder" => Ok(Self::step_occluder(seed)),
            _ => Err(Error::invalid(format!("unknown scene preset '{name}' (expected one of {})", PRESETS.join(", ")))),
        }
    }

    /// Tilted textured rectangle filling the default view.
    pub fn plane_checker(seed: u64) -> Self {
        let normal = Vec3::new(0.25, -0.35, -1.0);
        let (u_axis, v_axis) = unit_axes(normal);
        let center = Vec3::new(0.0, 0.0, 0.25);
        Self {
            name: "plane-checker".into(),
            surfaces: vec![Surface {
                primitive: Primitive::Plane { center, u_axis, v_axis, half_u: 0.4, half_v: 0.4 },
                texture: Texture::Checker {
                    period: 0.02,
                    sharpness: 3.0,
                    colors: [[0.15, 0.2, 0.3], [0.85, 0.8, 0.6]],
                    noise: 0.3,
                    seed,
                },
            }],
            background: [0.0; 3],
            focus: center,
        }
    }

    /// Noise-textured sphere in front of an empty background.
    pub fn sphere_noise(seed: u64) -> Self {
        let center = Vec3::new(0.0, 0.0, 0.3);
        Self {
            name: "sphere-noise".into(),
            surfaces: vec![Surface {
                primitive: Primitive::Sphere { center, radius: 0.1 },
                texture: Texture::Noise { frequency: 200.0, octaves: 1, colors: [[0.1, 0.15, 0.1], [0.95, 0.85, 0.7]], seed },
            }],
            background: [0.0; 3],
            focus: center - Vec3::new(0.0, 0.0, 0.1),
        }
    }

    /// Textured box in front of a textured wall.
    pub fn step_occluder(seed: u64) -> Self {
        Self {
            name: "step-occluder".into(),
            surfaces: vec![
                Surface {
                    primitive: Primitive::Plane {
                        center: Vec3::new(0.0, 0.0, 0.35),
                        u_axis: Vec3::new(1.0, 0.0, 0.0),
                        v_axis: Vec3::new(0.0, 1.0, 0.0),
                        half_u: 0.6,
                        half_v: 0.6,
                    },
                    texture: Texture::Noise { frequency: 50.0, octaves: 3, colors: [[0.1, 0.1, 0.3], [0.9, 0.9, 0.7]], seed },
                },
                Surface {
                    primitive: Primitive::Box { min: Vec3::new(-0.04, -0.04, 0.22), max: Vec3::new(0.04, 0.04, 0.26) },
                    texture: Texture::Checker {
                        period: 0.015,
                        sharpness: 3.0,
                        colors: [[0.7, 0.2, 0.1], [0.2, 0.8, 0.4]],
                        noise: 0.3,
                        seed: seed.wrapping_add(1),
                    },
                },
            ],
            background: [0.0; 3],
            focus: Vec3::new(0.0, 0.0, 0.3),
        }
    }

    /// Nearest hit along the unit ray `o + t·d`.
    pub fn intersect(&self, o: Vec3<f64>, d: Vec3<f64>) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        for (i, s) in self.surfaces.iter().enumerate() {
            if let Some((t, uv)) = s.primitive.intersect(o, d) {
                if best.is_none_or(|b| t < b.t) {
                    best = Some(Hit { t, surface: i, point: o + d * t, uv: uv.unwrap_or((0.0, 0.0)) });
                }
            }
        }
        best
    }

    pub fn shade(&self, hit: &Hit) -> [f64; 3] {
        let s = &self.surfaces[hit.surface];
        let uv = matches!(s.primitive, Primitive::Plane { .. }).then_some(hit.uv);
        s.texture.eval(hit.point, uv)
    }

    /// Renders `view` with `supersample²` color samples per pixel and exact center depths.
    pub fn raycast(&self, view: &Camera<f64>, supersample: usize) -> RaycastResult {
        let (w, h) = (view.width(), view.height());
        let ss = supersample.max(1);
        let origin = view.pose.center();
        let rows: Vec<Vec<([f64; 3], Option<Hit>, f64)>> = (0..h)
            .into_par_iter()
            .map(|y| {
                (0..w)
                    .map(|x| {
                        let (u, v) = pixel_center::<f64>(x, y);
                        let cam_dir = ray_direction(u, v, &view.intrinsics);
                        let hit = self.intersect(origin, view.pose.rotation.mul_vec(cam_dir));
                        let mut acc = [0.0; 3];
                        for sy in 0..ss {
                            for sx in 0..ss {
                                let su = x as f64 + (sx as f64 + 0.5) / ss as f64;
                                let sv = y as f64 + (sy as f64 + 0.5) / ss as f64;
                                let d = view.pose.rotation.mul_vec(ray_direction(su, sv, &view.intrinsics));
                                let c = self.intersect(origin, d).map(|h| self.shade(&h)).unwrap_or(self.background);
                                for ch in 0..3 {
                                    acc[ch] += c[ch];
                                }
                            }
                        }
                        let n = (ss * ss) as f64;
                        (acc.map(|c| c / n), hit, cam_dir.z)
                    })
                    .collect()
            })
            .collect();
        let mut color = Grid::new(w, h, self.background);
        let mut ray = Grid::new(w, h, 0.0);
        let mut z = Grid::new(w, h, 0.0);
        let mut valid = Grid::new(w, h, false);
        let mut ids = Grid::new(w, h, None);
        for (y, row) in rows.into_iter().enumerate() {
            for (x, (c, hit, cz)) in row.into_iter().enumerate() {
                color[(x, y)] = c;
                if let Some(hit) = hit {
                    ray[(x, y)] = hit.t;
                    z[(x, y)] = hit.t * cz;
                    valid[(x, y)] = true;
                    ids[(x, y)] = Some(hit.surface);
                }
            }
        }
        RaycastResult {
            color,
            ray_depth: DepthMap::new(ray, valid.clone()).expect("matching shapes"),
            z_depth: DepthMap::new(z, valid).expect("matching shapes"),
            ids,
        }
    }

    /// Whether `point` on a surface is directly seen by `view` inside its image.
    pub fn visible_from(&self, point: Vec3<f64>, view: &Camera<f64>) -> bool {
        let Some(p) = view.project(point) else { return false };
        if p.u < 0.0 || p.v < 0.0 || p.u >= view.width() as f64 || p.v >= view.height() as f64 {
            return false;
        }
        let o = view.pose.center();
        let to = point - o;
        let dist = to.norm();
        match self.intersect(o, to * (1.0 / dist)) {
            Some(h) => h.t >= dist * (1.0 - 1e-9) - 1e-12,
            None => false,
        }
    }
}

/// Intrinsics with a roughly 45° horizontal field of view.
pub fn default_intrinsics(width: usize, height: usize) -> CameraIntrinsics<f64> {
    let f = 1.2 * width as f64;
    CameraIntrinsics::new(f, f, width as f64 / 2.0, height as f64 / 2.0, width, height).expect("positive size")
}

/// A target camera at `eye` looking at `focus`, followed by `n_context` cameras
/// evenly spaced on a circle of radius `baseline` around it, all aimed at `focus`.
pub fn orbit_rig(
    intrinsics: CameraIntrinsics<f64>,
    eye: Vec3<f64>,
    focus: Vec3<f64>,
    baseline: f64,
    n_context: usize,
) -> Result<Vec<Camera<f64>>> {
    let down = Vec3::new(0.0, 1.0, 0.0);
    let target = CameraPose::look_at(eye, focus, down)?;
    let (ax, ay) = (target.rotation.column(0), target.rotation.column(1));
    let mut cams = vec![Camera::new(intrinsics, target)];
    for i in 0..n_context {
        let a = std::f64::consts::TAU * i as f64 / n_context as f64;
        let e = eye + ax * (baseline * a.cos()) + ay * (baseline * a.sin());
        cams.push(Camera::new(intrinsics, CameraPose::look_at(e, focus, down)?));
    }
    Ok(cams)
}

impl SyntheticScene {
    /// Default rig: target at the origin aimed at the scene focus.
    pub fn default_rig(&self, width: usize, height: usize, n_context: usize, baseline: f64) -> Result<Vec<Camera<f64>>> {
        orbit_rig(default_intrinsics(width, height), Vec3::zero(), self.focus, baseline, n_context)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PerturbMode {
    /// `d·(1 + m·N(0, 1))` independently per pixel.
    GaussianRelative,
    /// `d·(1 + m·f)` with a smooth field `f ∈ [−1, 1]`.
    LowFrequencyBias,
}

impl std::str::FromStr for PerturbMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian-relative" | "gaussian" => Ok(Self::GaussianRelative),
            "low-frequency-bias" | "low-frequency" => Ok(Self::LowFrequencyBias),
            _ => Err(Error::invalid(format!("unknown perturbation mode '{s}'"))),
        }
    }
}

/// Deterministically perturbs the valid entries of `depth`.
pub fn perturb_depth(depth: &DepthMap<f64>, mode: PerturbMode, magnitude: f64, seed: u64) -> Result<DepthMap<f64>> {
    if !(magnitude >= 0.0 && magnitude.is_finite()) {
        return Err(Error::invalid("perturbation magnitude must be a nonnegative number"));
    }
    if magnitude == 0.0 {
        return Ok(depth.clone());
    }
    let floor = |d: f64, v: f64| v.max(d * 1e-3);
    match mode {
        PerturbMode::GaussianRelative => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let normal = Normal::new(0.0, 1.0).expect("unit normal");
            Ok(depth.map_valid(|_, _, d| floor(d, d * (1.0 + magnitude * normal.sample(&mut rng)))))
        }
        PerturbMode::LowFrequencyBias => {
            let period = (depth.width().max(depth.height()) as f64 / 4.0).max(1.0);
            Ok(depth.map_valid(|x, y, d| {
                let p = Vec3::new(x as f64 / period, y as f64 / period, 0.5);
                let f = 2.0 * octave_noise(seed, p, 2) - 1.0;
                floor(d, d * (1.0 + magnitude * f))
            }))
        }
    }
}
