//! Shape metrics: surface area, enclosed volume, sampled Hausdorff distance
//! and the sparse ratio.
//!
//! The Hausdorff estimate follows the Metro approach: every vertex plus
//! `floor(area * density)` low-discrepancy samples per face are projected
//! onto the other mesh with an exact point-to-triangle distance. Face sample
//! `k` does not depend on the density, so raising the density only adds
//! points and the estimate can only grow.

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::TriMesh;

/// Default face-sample density for Hausdorff estimates (samples per Å²).
pub const DEFAULT_SAMPLES_PER_AREA: f64 = 10.0;

/// Header matching [`ShapeReport::csv_row`].
pub const SHAPE_CSV_HEADER: &str = "molecule,area_orig,area_sparse,err_A,vol_orig,vol_sparse,err_V,hausdorff";

pub fn triangle_area(a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

/// Sum of triangle areas.
pub fn mesh_area(mesh: &TriMesh) -> f64 {
    (0..mesh.triangles.len())
        .map(|t| {
            let [a, b, c] = mesh.corners(t);
            triangle_area(&a, &b, &c)
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub volume: f64,
    /// False when the mesh has boundary or non-manifold edges; the value is
    /// then origin-dependent and should not be trusted.
    pub closed: bool,
}

/// Divergence-theorem volume: `|sum_t v0 . (v1 x v2)| / 6`.
pub fn mesh_volume(mesh: &TriMesh) -> VolumeEstimate {
    // Summing relative to a vertex of the mesh keeps the terms small when
    // the mesh sits far from the origin.
    let origin = mesh.vertices.first().copied().unwrap_or_else(Vector3::zeros);
    let signed: f64 = (0..mesh.triangles.len())
        .map(|t| {
            let [a, b, c] = mesh.corners(t);
            (a - origin).dot(&(b - origin).cross(&(c - origin)))
        })
        .sum();
    VolumeEstimate {
        volume: signed.abs() / 6.0,
        closed: mesh.is_closed(),
    }
}

/// Closest point on triangle `abc` to `p` (vertex / edge / face regions).
pub fn closest_point_on_triangle(
    p: &Vector3<f64>,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    c: &Vector3<f64>,
) -> Vector3<f64> {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

#[derive(Debug, Clone, Copy)]
struct Aabb {
    min: Vector3<f64>,
    max: Vector3<f64>,
}

impl Aabb {
    fn empty() -> Self {
        Aabb {
            min: Vector3::repeat(f64::INFINITY),
            max: Vector3::repeat(f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Vector3<f64>) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    fn distance_squared(&self, p: &Vector3<f64>) -> f64 {
        let d = (self.min - p).sup(&(p - self.max)).sup(&Vector3::zeros());
        d.norm_squared()
    }
}

enum Node {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

const LEAF_SIZE: usize = 4;

/// Bounding-volume hierarchy over a mesh's triangles for nearest-point
/// queries.
pub struct TriangleBvh<'a> {
    mesh: &'a TriMesh,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl<'a> TriangleBvh<'a> {
    pub fn new(mesh: &'a TriMesh) -> Self {
        let centroids: Vec<Vector3<f64>> = (0..mesh.triangles.len())
            .map(|t| {
                let [a, b, c] = mesh.corners(t);
                (a + b + c) / 3.0
            })
            .collect();
        let mut bvh = TriangleBvh {
            mesh,
            order: (0..mesh.triangles.len()).collect(),
            nodes: Vec::new(),
        };
        if !mesh.triangles.is_empty() {
            bvh.build(&centroids, 0, mesh.triangles.len());
        }
        bvh
    }

    fn build(&mut self, centroids: &[Vector3<f64>], start: usize, end: usize) -> usize {
        let mut bounds = Aabb::empty();
        let mut cbounds = Aabb::empty();
        for &t in &self.order[start..end] {
            for v in self.mesh.corners(t) {
                bounds.grow(&v);
            }
            cbounds.grow(&centroids[t]);
        }
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { bounds, start, end });
            return self.nodes.len() - 1;
        }
        let axis = (cbounds.max - cbounds.min).imax();
        let mid = (start + end) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&x, &y| {
            centroids[x][axis].total_cmp(&centroids[y][axis])
        });
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { bounds, start, end });
        let left = self.build(centroids, start, mid);
        let right = self.build(centroids, mid, end);
        self.nodes[slot] = Node::Inner {
            bounds,
            left,
            right,
        };
        slot
    }

    /// Distance from `p` to the nearest triangle; infinite for an empty mesh.
    pub fn distance(&self, p: &Vector3<f64>) -> f64 {
        if self.nodes.is_empty() {
            return f64::INFINITY;
        }
        let mut best = f64::INFINITY;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            if self.nodes[n].bounds().distance_squared(p) >= best {
                continue;
            }
            match self.nodes[n] {
                Node::Leaf { start, end, .. } => {
                    for &t in &self.order[start..end] {
                        let [a, b, c] = self.mesh.corners(t);
                        let q = closest_point_on_triangle(p, &a, &b, &c);
                        best = best.min((p - q).norm_squared());
                    }
                }
                Node::Inner { left, right, .. } => {
                    let dl = self.nodes[left].bounds().distance_squared(p);
                    let dr = self.nodes[right].bounds().distance_squared(p);
                    // Visit the nearer child first.
                    if dl < dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        best.sqrt()
    }
}

/// Additive-recurrence (R2) point `k` in the unit square.
fn r2_point(k: usize) -> (f64, f64) {
    // Plastic number based generators.
    const A1: f64 = 0.754_877_666_246_692_7;
    const A2: f64 = 0.569_840_290_998_053_2;
    let k = k as f64;
    ((0.5 + A1 * k).fract(), (0.5 + A2 * k).fract())
}

/// Every vertex plus `floor(area * density)` points per face.
pub fn surface_samples(mesh: &TriMesh, samples_per_area: f64) -> Vec<Vector3<f64>> {
    let mut points = mesh.vertices.clone();
    for t in 0..mesh.triangles.len() {
        let [a, b, c] = mesh.corners(t);
        let n = (triangle_area(&a, &b, &c) * samples_per_area).floor() as usize;
        for k in 0..n {
            let (mut u, mut v) = r2_point(k);
            if u + v > 1.0 {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            points.push(a + (b - a) * u + (c - a) * v);
        }
    }
    points
}

/// One-sided distance `max_{p in samples(a)} dist(p, b)`.
pub fn directed_hausdorff(a: &TriMesh, b: &TriMesh, samples_per_area: f64) -> f64 {
    let bvh = TriangleBvh::new(b);
    surface_samples(a, samples_per_area)
        .par_iter()
        .map(|p| bvh.distance(p))
        .reduce(|| 0.0, f64::max)
}

/// Symmetric sampled Hausdorff distance.
pub fn hausdorff(a: &TriMesh, b: &TriMesh, samples_per_area: f64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidConfig("Hausdorff distance needs two non-empty meshes".into()));
    }
    if !(samples_per_area >= 0.0) || !samples_per_area.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "samples per area must be finite and >= 0, got {samples_per_area}"
        )));
    }
    Ok(directed_hausdorff(a, b, samples_per_area).max(directed_hausdorff(b, a, samples_per_area)))
}

/// Area, volume and Hausdorff comparison of a reference mesh `a` and a
/// candidate `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeReport {
    pub area_a: f64,
    pub area_b: f64,
    pub volume_a: f64,
    pub volume_b: f64,
    pub error_area: f64,
    pub error_volume: f64,
    pub hausdorff: f64,
    pub closed_a: bool,
    pub closed_b: bool,
}

impl ShapeReport {
    pub fn csv_row(&self, molecule: &str) -> String {
        format!(
            "{molecule},{},{},{},{},{},{},{}",
            self.area_a,
            self.area_b,
            self.error_area,
            self.volume_a,
            self.volume_b,
            self.error_volume,
            self.hausdorff
        )
    }
}

pub fn compare_shapes(a: &TriMesh, b: &TriMesh, samples_per_area: f64) -> Result<ShapeReport> {
    let hausdorff = hausdorff(a, b, samples_per_area)?;
    let area_a = mesh_area(a);
    let area_b = mesh_area(b);
    let va = mesh_volume(a);
    let vb = mesh_volume(b);
    Ok(ShapeReport {
        area_a,
        area_b,
        volume_a: va.volume,
        volume_b: vb.volume,
        error_area: (area_b - area_a).abs() / area_a,
        error_volume: (vb.volume - va.volume).abs() / va.volume,
        hausdorff,
        closed_a: va.closed,
        closed_b: vb.closed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparseStats {
    pub n_atoms: usize,
    pub n_neurons: usize,
    pub ratio: f64,
}

impl SparseStats {
    pub fn new(n_atoms: usize, n_neurons: usize) -> Result<Self> {
        if n_atoms == 0 {
            return Err(Error::EmptyMolecule);
        }
        Ok(SparseStats {
            n_atoms,
            n_neurons,
            ratio: n_neurons as f64 / n_atoms as f64,
        })
    }
}
