use std::collections::HashMap;

use crate::fusion::tables::{CORNERS, EDGES, TRIANGLES};
use crate::fusion::tsdf::TsdfVolume;
use crate::linalg::Vec3;
use crate::scalar::Real;

/// Indexed triangle mesh.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TriangleMesh<T> {
    pub vertices: Vec<Vec3<T>>,
    pub triangles: Vec<[u32; 3]>,
    pub colors: Option<Vec<[T; 3]>>,
}

impl<T: Real> TriangleMesh<T> {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Unnormalized face normal `(b − a) × (c − a)`.
    pub fn face_normal(&self, t: usize) -> Vec3<T> {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i as usize]);
        (b - a).cross(c - a)
    }
}

/// Extracts the `iso` level set of the volume.
///
/// Cells with a zero-weight corner are skipped. Faces are wound so that their normals
/// point toward positive distances, i.e. toward the observing cameras.
pub fn marching_cubes<T: Real>(volume: &TsdfVolume<T>, iso: T) -> TriangleMesh<T> {
    let [nx, ny, nz] = volume.dims();
    let tsdf = volume.tsdf();
    let weights = volume.weights();
    let colors = volume.colors();
    let mut mesh = TriangleMesh { colors: colors.map(|_| Vec::new()), ..TriangleMesh::default() };
    let mut edge_vertex: HashMap<usize, u32> = HashMap::new();
    let min_area = T::epsilon() * volume.voxel_size() * volume.voxel_size();
    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let corner_idx = CORNERS.map(|[dx, dy, dz]| volume.index(i + dx, j + dy, k + dz));
                if corner_idx.iter().any(|&c| weights[c] <= T::zero()) {
                    continue;
                }
                let values = corner_idx.map(|c| tsdf[c]);
                let mut case = 0usize;
                for (bit, &v) in values.iter().enumerate() {
                    if v < iso {
                        case |= 1 << bit;
                    }
                }
                if case == 0 || case == 255 {
                    continue;
                }
                let tri = &TRIANGLES[case];
                for t in tri.chunks(3).take_while(|t| t[0] >= 0) {
                    let mut ids = [0u32; 3];
                    for (slot, &e) in ids.iter_mut().zip(t) {
                        let [a, b] = EDGES[e as usize];
                        let (ca, cb) = (corner_idx[a], corner_idx[b]);
                        let axis = (0..3).find(|&ax| CORNERS[a][ax] != CORNERS[b][ax]).unwrap_or(0);
                        let key = ca.min(cb) * 3 + axis;
                        *slot = *edge_vertex.entry(key).or_insert_with(|| {
                            let (va, vb) = (values[a], values[b]);
                            let s = if (vb - va).abs() > T::zero() { ((iso - va) / (vb - va)).max(T::zero()).min(T::one()) } else { T::lit(0.5) };
                            let [ax, ay, az] = CORNERS[a];
                            let [bx, by, bz] = CORNERS[b];
                            let pa = volume.point(i + ax, j + ay, k + az);
                            let pb = volume.point(i + bx, j + by, k + bz);
                            mesh.vertices.push(pa + (pb - pa) * s);
                            if let (Some(out), Some(src)) = (mesh.colors.as_mut(), colors) {
                                let (qa, qb) = (src[ca], src[cb]);
                                out.push([0, 1, 2].map(|ch| qa[ch] + (qb[ch] - qa[ch]) * s));
                            }
                            (mesh.vertices.len() - 1) as u32
                        });
                    }
                    let face = [ids[0], ids[2], ids[1]];
                    if face[0] == face[1] || face[1] == face[2] || face[0] == face[2] {
                        continue;
                    }
                    let [a, b, c] = face.map(|v| mesh.vertices[v as usize]);
                    if (b - a).cross(c - a).norm() <= min_area {
                        continue;
                    }
                    mesh.triangles.push(face);
                }
            }
        }
    }
    mesh
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere_volume(r: f64, vs: f64) -> TsdfVolume<f64> {
        let n = (2.0 * (r + 0.2) / vs).ceil() as usize + 1;
        let o = Vec3::new(-(r + 0.2), -(r + 0.2), -(r + 0.2));
        TsdfVolume::from_sdf(o, vs, [n, n, n], 5.0 * vs, |p| p.norm() - r).unwrap()
    }

    #[test]
    fn sphere_vertices_lie_on_the_sphere() {
        let (r, vs) = (0.5, 0.02);
        let mesh = marching_cubes(&sphere_volume(r, vs), 0.0);
        assert!(mesh.triangles.len() > 1000);
        let rms = (mesh.vertices.iter().map(|p| (p.norm() - r).powi(2)).sum::<f64>() / mesh.vertices.len() as f64).sqrt();
        assert!(rms < 0.5 * vs, "rms {rms}");
    }

    #[test]
    fn faces_point_outward() {
        let mesh = marching_cubes(&sphere_volume(0.5, 0.05), 0.0);
        for t in 0..mesh.triangles.len() {
            let c = mesh.vertices[mesh.triangles[t][0] as usize];
            assert!(mesh.face_normal(t).dot(c) > 0.0);
        }
    }

    #[test]
    fn plane_is_flat() {
        let vs = 0.05;
        let n = Vec3::<f64>::new(0.3, -0.2, 1.0).normalize();
        let vol = TsdfVolume::from_sdf(Vec3::new(-0.5, -0.5, -0.5), vs, [21, 21, 21], 5.0 * vs, |p| p.dot(n) - 0.07).unwrap();
        let mesh = marching_cubes(&vol, 0.0);
        assert!(!mesh.is_empty());
        let worst = mesh.vertices.iter().map(|p| (p.dot(n) - 0.07).abs()).fold(0.0, f64::max);
        assert!(worst < 0.5 * vs, "max distance {worst}");
    }

    #[test]
    fn no_surface_gives_empty_mesh() {
        let vol = TsdfVolume::from_sdf(Vec3::zero(), 0.1, [5, 5, 5], 0.5, |_| 1.0).unwrap();
        assert!(marching_cubes(&vol, 0.0).is_empty());
        let unobserved = TsdfVolume::<f64>::new(Vec3::zero(), 0.1, [5, 5, 5], 0.5).unwrap();
        assert!(marching_cubes(&unobserved, 0.0).is_empty());
    }

    #[test]
    fn shared_edges_share_vertices() {
        let mesh = marching_cubes(&sphere_volume(0.4877, 0.05), 0.0);
        // Closed surface: every edge is shared by exactly two faces.
        let f = mesh.triangles.len();
        let mut edges = std::collections::HashSet::new();
        for t in &mesh.triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                edges.insert((a.min(b), a.max(b)));
            }
        }
        assert_eq!(2 * edges.len(), 3 * f);
    }
}
