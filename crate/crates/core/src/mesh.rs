//! Isosurface extraction and triangle-mesh I/O.
//!
//! Marching cubes runs on a [`ScalarField`] with a case table that is built
//! at first use rather than transcribed. For every one of the 256 corner
//! configurations the generator walks the six cube faces, emits one segment
//! per run of inside corners on each face (so ambiguous faces always
//! separate their inside corners), chains the segments into closed loops
//! and fans each loop into triangles. Neighbouring cells see the same
//! corner states on their shared face and therefore produce the same
//! boundary segments, which keeps the mesh watertight.
//!
//! "Inside" means `value > isovalue`; triangle normals point toward
//! decreasing field values.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::OnceLock;

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::density::{DensityMap, ScalarField, UniformGrid, DEFAULT_GRID_CAP};
use crate::erbf::ErbfParams;
use crate::error::{Error, Result};
use crate::pqr::BoundingBox;

/// Default lattice spacing (Å) for meshes used in shape comparisons.
pub const DEFAULT_MESH_SPACING: f64 = 0.5;

/// Indexed triangle mesh.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriMesh {
    /// Checks that every index is in range and every coordinate finite.
    pub fn new(vertices: Vec<Vector3<f64>>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if let Some(index) = vertices.iter().position(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidConfig(format!("vertex {index} is not finite")));
        }
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= vertices.len()) {
                return Err(Error::InvalidConfig(format!(
                    "triangle {t} references a vertex outside 0..{}",
                    vertices.len()
                )));
            }
        }
        Ok(TriMesh {
            vertices,
            triangles,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn corners(&self, t: usize) -> [Vector3<f64>; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Un-normalized normal `(v1 - v0) x (v2 - v0)`.
    pub fn face_normal(&self, t: usize) -> Vector3<f64> {
        let [a, b, c] = self.corners(t);
        (b - a).cross(&(c - a))
    }

    /// True when every undirected edge is used by exactly two triangles, in
    /// opposite directions.
    pub fn is_closed(&self) -> bool {
        let mut directed: HashMap<(usize, usize), u32> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                *directed.entry((tri[k], tri[(k + 1) % 3])).or_default() += 1;
            }
        }
        !self.triangles.is_empty()
            && directed
                .iter()
                .all(|(&(a, b), &n)| n == 1 && directed.get(&(b, a)) == Some(&1))
    }

    /// Applies `f` to every vertex.
    pub fn map_vertices(&self, f: impl Fn(&Vector3<f64>) -> Vector3<f64>) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(f).collect(),
            triangles: self.triangles.clone(),
        }
    }

    pub fn translated(&self, t: &Vector3<f64>) -> TriMesh {
        self.map_vertices(|v| v + t)
    }

    /// Reverses the winding of every triangle.
    pub fn flipped(&self) -> TriMesh {
        TriMesh {
            vertices: self.vertices.clone(),
            triangles: self.triangles.iter().map(|&[a, b, c]| [a, c, b]).collect(),
        }
    }

    /// Axis-aligned unit cube `[0,1]^3`, 8 vertices and 12 outward triangles.
    pub fn unit_cube() -> TriMesh {
        let vertices = (0..8)
            .map(|c| Vector3::new((c & 1) as f64, ((c >> 1) & 1) as f64, ((c >> 2) & 1) as f64))
            .collect();
        let quads = [
            [0, 4, 6, 2], // x = 0
            [1, 3, 7, 5], // x = 1
            [0, 1, 5, 4], // y = 0
            [2, 6, 7, 3], // y = 1
            [0, 2, 3, 1], // z = 0
            [4, 5, 7, 6], // z = 1
        ];
        let triangles = quads
            .iter()
            .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
            .collect();
        TriMesh {
            vertices,
            triangles,
        }
    }

    /// Icosahedron refined `subdivisions` times and projected onto the
    /// sphere of `radius` about `center`.
    pub fn icosphere(center: Vector3<f64>, radius: f64, subdivisions: u32) -> TriMesh {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut vertices: Vec<Vector3<f64>> = [
            [-1.0, t, 0.0],
            [1.0, t, 0.0],
            [-1.0, -t, 0.0],
            [1.0, -t, 0.0],
            [0.0, -1.0, t],
            [0.0, 1.0, t],
            [0.0, -1.0, -t],
            [0.0, 1.0, -t],
            [t, 0.0, -1.0],
            [t, 0.0, 1.0],
            [-t, 0.0, -1.0],
            [-t, 0.0, 1.0],
        ]
        .iter()
        .map(|p| Vector3::from(*p).normalize())
        .collect();
        let mut triangles: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..subdivisions {
            let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
            let mut mid = |a: usize, b: usize, verts: &mut Vec<Vector3<f64>>| {
                *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    verts.push(((verts[a] + verts[b]) / 2.0).normalize());
                    verts.len() - 1
                })
            };
            let mut next = Vec::with_capacity(triangles.len() * 4);
            for &[a, b, c] in &triangles {
                let ab = mid(a, b, &mut vertices);
                let bc = mid(b, c, &mut vertices);
                let ca = mid(c, a, &mut vertices);
                next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            triangles = next;
        }
        TriMesh {
            vertices: vertices.iter().map(|v| center + v * radius).collect(),
            triangles,
        }
    }

    pub fn to_obj(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let _ = writeln!(out, "v {:?} {:?} {:?}", v.x, v.y, v.z);
        }
        for t in &self.triangles {
            let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
        out
    }

    pub fn to_off(&self) -> String {
        let mut out = String::from("OFF\n");
        let _ = writeln!(out, "{} {} 0", self.vertices.len(), self.triangles.len());
        for v in &self.vertices {
            let _ = writeln!(out, "{:?} {:?} {:?}", v.x, v.y, v.z);
        }
        for t in &self.triangles {
            let _ = writeln!(out, "3 {} {} {}", t[0], t[1], t[2]);
        }
        out
    }

    /// Reads `v` and `f` records; polygonal faces are fanned into triangles
    /// and `v/vt/vn` index groups keep only the vertex index.
    pub fn from_obj(text: &str) -> Result<TriMesh> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let parse_err = |message: String| Error::Parse {
                line: lineno + 1,
                message,
            };
            let mut tokens = line.split_whitespace();
            match tokens.next() {
                Some("v") => {
                    let xyz = parse_floats(tokens.take(3), 3).map_err(parse_err)?;
                    vertices.push(Vector3::new(xyz[0], xyz[1], xyz[2]));
                }
                Some("f") => {
                    let mut idx = Vec::new();
                    for tok in tokens {
                        let head = tok.split('/').next().unwrap_or("");
                        let i: i64 = head
                            .parse()
                            .map_err(|_| parse_err(format!("bad face index {tok:?}")))?;
                        let resolved = if i < 0 { vertices.len() as i64 + i } else { i - 1 };
                        if resolved < 0 {
                            return Err(parse_err(format!("face index {i} out of range")));
                        }
                        idx.push(resolved as usize);
                    }
                    if idx.len() < 3 {
                        return Err(parse_err("face with fewer than 3 vertices".into()));
                    }
                    for k in 1..idx.len() - 1 {
                        triangles.push([idx[0], idx[k], idx[k + 1]]);
                    }
                }
                _ => {}
            }
        }
        TriMesh::new(vertices, triangles)
    }

    pub fn from_off(text: &str) -> Result<TriMesh> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(n, l)| (n + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let err = |line: usize, message: &str| Error::Parse {
            line,
            message: message.to_string(),
        };
        let (n, header) = lines.next().ok_or_else(|| err(1, "missing OFF header"))?;
        let counts_inline = header.strip_prefix("OFF").ok_or_else(|| err(n, "missing OFF header"))?;
        let (n, counts) = if counts_inline.trim().is_empty() {
            lines.next().ok_or_else(|| err(n, "missing element counts"))?
        } else {
            (n, counts_inline.trim())
        };
        let counts: Vec<usize> = counts
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| err(n, "bad element counts")))
            .collect::<Result<_>>()?;
        if counts.len() < 2 {
            return Err(err(n, "expected vertex and face counts"));
        }
        let mut vertices = Vec::with_capacity(counts[0]);
        for _ in 0..counts[0] {
            let (n, l) = lines.next().ok_or_else(|| err(n, "truncated vertex list"))?;
            let xyz = parse_floats(l.split_whitespace().take(3), 3).map_err(|m| err(n, &m))?;
            vertices.push(Vector3::new(xyz[0], xyz[1], xyz[2]));
        }
        let mut triangles = Vec::with_capacity(counts[1]);
        for _ in 0..counts[1] {
            let (n, l) = lines.next().ok_or_else(|| err(n, "truncated face list"))?;
            let vals: Vec<usize> = l
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| err(n, "bad face record")))
                .collect::<Result<_>>()?;
            let k = *vals.first().ok_or_else(|| err(n, "empty face record"))?;
            if k < 3 || vals.len() < k + 1 {
                return Err(err(n, "face record too short"));
            }
            for m in 1..k - 1 {
                triangles.push([vals[1], vals[1 + m], vals[2 + m]]);
            }
        }
        TriMesh::new(vertices, triangles)
    }

    /// Reads `.obj` or `.off`, chosen by extension.
    pub fn read(path: impl AsRef<Path>) -> Result<TriMesh> {
        let path = path.as_ref();
        let format = MeshFormat::from_path(path)?;
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        match format {
            MeshFormat::Obj => TriMesh::from_obj(&text),
            MeshFormat::Off => TriMesh::from_off(&text),
        }
    }

    /// Writes `.obj` or `.off`, chosen by extension.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = match MeshFormat::from_path(path)? {
            MeshFormat::Obj => self.to_obj(),
            MeshFormat::Off => self.to_off(),
        };
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

fn parse_floats<'a>(tokens: impl Iterator<Item = &'a str>, n: usize) -> std::result::Result<Vec<f64>, String> {
    let vals = tokens
        .map(|t| t.parse::<f64>().map_err(|_| format!("malformed number {t:?}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if vals.len() != n {
        return Err(format!("expected {n} coordinates, found {}", vals.len()));
    }
    Ok(vals)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Off,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<MeshFormat> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("obj") => Ok(MeshFormat::Obj),
            Some("off") => Ok(MeshFormat::Off),
            _ => Err(Error::InvalidConfig(format!(
                "{}: mesh files must end in .obj or .off",
                path.display()
            ))),
        }
    }
}

// ---------------------------------------------------------------------------
// Case table

/// Cube edges as corner pairs. Corner `c` sits at offset
/// `(c & 1, (c >> 1) & 1, (c >> 2) & 1)`; edge `4 * axis + m` runs along
/// `axis` from the m-th corner whose `axis` bit is clear.
fn cube_edges() -> [(usize, usize, usize); 12] {
    let mut edges = [(0, 0, 0); 12];
    for axis in 0..3 {
        let mut m = 0;
        for c in 0..8 {
            if c & (1 << axis) == 0 {
                edges[4 * axis + m] = (c, c | (1 << axis), axis);
                m += 1;
            }
        }
    }
    edges
}

fn corner_offset(c: usize) -> Vector3<f64> {
    Vector3::new((c & 1) as f64, ((c >> 1) & 1) as f64, ((c >> 2) & 1) as f64)
}

/// Corners of each face in counter-clockwise order seen from outside.
fn cube_faces() -> [[usize; 4]; 6] {
    let mut faces = [[0; 4]; 6];
    for axis in 0..3 {
        let u = 1 << ((axis + 1) % 3);
        let v = 1 << ((axis + 2) % 3);
        for side in 0..2 {
            let base = if side == 1 { 1 << axis } else { 0 };
            let ccw = [base, base | u, base | u | v, base | v];
            faces[2 * axis + side] = if side == 1 {
                ccw
            } else {
                [ccw[0], ccw[3], ccw[2], ccw[1]]
            };
        }
    }
    faces
}

type CaseTable = Vec<Vec<[u8; 3]>>;

fn build_case_table() -> CaseTable {
    let edges = cube_edges();
    let faces = cube_faces();
    let edge_of = |a: usize, b: usize| -> usize {
        edges
            .iter()
            .position(|&(p, q, _)| (p, q) == (a.min(b), a.max(b)))
            .expect("face corners share a cube edge")
    };
    let mut table: CaseTable = Vec::with_capacity(256);
    let mut unresolved = Vec::new();
    for case in 0..256usize {
        let inside = |c: usize| case & (1 << c) != 0;
        let mut next: [Option<usize>; 12] = [None; 12];
        for face in &faces {
            for k in 0..4 {
                let (a, b) = (face[k], face[(k + 1) % 4]);
                if !(inside(a) && !inside(b)) {
                    continue;
                }
                // Exit crossing; pair it with the nearest entry behind it.
                let mut m = (k + 3) % 4;
                loop {
                    let (p, q) = (face[m], face[(m + 1) % 4]);
                    if !inside(p) && inside(q) {
                        next[edge_of(p, q)] = Some(edge_of(a, b));
                        break;
                    }
                    m = (m + 3) % 4;
                }
            }
        }
        let mut visited = [false; 12];
        let mut tris = Vec::new();
        for start in 0..12 {
            if visited[start] || next[start].is_none() {
                continue;
            }
            let mut lp = vec![start];
            visited[start] = true;
            let mut e = next[start].expect("checked above");
            while e != start {
                visited[e] = true;
                lp.push(e);
                e = next[e].expect("crossing loops are closed");
            }
            let on_face = |a: usize, b: usize| {
                let ends = |e: usize| [edges[e].0, edges[e].1];
                faces.iter().any(|f| ends(a).iter().chain(&ends(b)).all(|c| f.contains(c)))
            };
            match triangulate_loop(&lp, &on_face) {
                Some(t) => tris.extend(t),
                None => unresolved.push((case, lp.clone())),
            }
        }
        table.push(tris);
    }
    assert!(unresolved.is_empty(), "loops without a face-safe triangulation: {unresolved:?}");
    // Orient so that normals leave the inside corners: check case 1.
    let mid = |e: u8| {
        let (a, b, _) = edges[e as usize];
        (corner_offset(a) + corner_offset(b)) / 2.0
    };
    let t = table[1][0];
    let (p, q, r) = (mid(t[0]), mid(t[1]), mid(t[2]));
    let normal = (q - p).cross(&(r - p));
    if normal.dot(&(p - corner_offset(0))) < 0.0 {
        for tris in &mut table {
            for tri in tris.iter_mut() {
                tri.swap(1, 2);
            }
        }
    }
    table
}

/// Triangulates a crossing loop without any diagonal joining two vertices
/// that lie on a common cube face: such a diagonal would lie in the face
/// plane and could coincide with one produced by the neighbouring cell.
fn triangulate_loop(lp: &[usize], on_face: &dyn Fn(usize, usize) -> bool) -> Option<Vec<[u8; 3]>> {
    fn rec(
        lp: &[usize],
        i: usize,
        j: usize,
        on_face: &dyn Fn(usize, usize) -> bool,
        out: &mut Vec<[u8; 3]>,
    ) -> bool {
        // Triangulate the sub-polygon lp[i..=j] whose closing edge (i, j) is given.
        if j - i < 2 {
            return true;
        }
        let mark = out.len();
        for k in i + 1..j {
            let ok = |a: usize, b: usize| b - a == 1 || (a == 0 && b == lp.len() - 1) || !on_face(lp[a], lp[b]);
            if !ok(i, k) || !ok(k, j) {
                continue;
            }
            out.push([lp[i] as u8, lp[k] as u8, lp[j] as u8]);
            if rec(lp, i, k, on_face, out) && rec(lp, k, j, on_face, out) {
                return true;
            }
            out.truncate(mark);
        }
        false
    }
    let mut out = Vec::new();
    rec(lp, 0, lp.len() - 1, on_face, &mut out).then_some(out)
}

fn case_table() -> &'static CaseTable {
    static TABLE: OnceLock<CaseTable> = OnceLock::new();
    TABLE.get_or_init(build_case_table)
}

/// Triangles (as cube-edge triples) for a corner configuration.
pub fn case_triangles(case: u8) -> &'static [[u8; 3]] {
    &case_table()[case as usize]
}

// ---------------------------------------------------------------------------
// Extraction

/// Vertex key: `4 * lattice_index + axis` for a crossing inside the lattice
/// edge along `axis`, `4 * lattice_index + 3` for a crossing exactly at a
/// lattice point (field equal to the isovalue there). Snapping such
/// crossings to one shared vertex keeps the mesh closed.
fn vertex_key(field: &ScalarField, lower: [usize; 3], axis: usize, isovalue: f64) -> u64 {
    let grid = &field.grid;
    let mut upper = lower;
    upper[axis] += 1;
    let a = grid.index(lower[0], lower[1], lower[2]);
    let b = grid.index(upper[0], upper[1], upper[2]);
    if field.values[a] == isovalue {
        a as u64 * 4 + 3
    } else if field.values[b] == isovalue {
        b as u64 * 4 + 3
    } else {
        a as u64 * 4 + axis as u64
    }
}

/// Triangulates `{x : field(x) = isovalue}`. Returns an empty mesh when the
/// isovalue is not strictly between the field's extremes.
pub fn marching_cubes(field: &ScalarField, isovalue: f64) -> TriMesh {
    let grid = field.grid;
    let (lo, hi) = field.min_max();
    if !(isovalue > lo && isovalue < hi) {
        return TriMesh::default();
    }
    let edges = cube_edges();
    let [nx, ny, nz] = grid.dims;

    let slabs: Vec<Vec<[u64; 3]>> = (0..nz - 1)
        .into_par_iter()
        .map(|k| {
            let mut out = Vec::new();
            for j in 0..ny - 1 {
                for i in 0..nx - 1 {
                    let mut case = 0usize;
                    for c in 0..8 {
                        let v = field.get(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
                        if v > isovalue {
                            case |= 1 << c;
                        }
                    }
                    for tri in &case_table()[case] {
                        out.push(tri.map(|e| {
                            let (a, _, axis) = edges[e as usize];
                            let lower = [i + (a & 1), j + ((a >> 1) & 1), k + ((a >> 2) & 1)];
                            vertex_key(field, lower, axis, isovalue)
                        }));
                    }
                }
            }
            out
        })
        .collect();

    let mut index_of: HashMap<u64, usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for tri in slabs.into_iter().flatten() {
        let ids = tri.map(|key| {
            *index_of.entry(key).or_insert_with(|| {
                vertices.push(edge_vertex(field, key, isovalue));
                vertices.len() - 1
            })
        });
        let [a, b, c] = ids.map(|i| vertices[i]);
        if ids[0] != ids[1] && ids[1] != ids[2] && ids[0] != ids[2] && (b - a).cross(&(c - a)).norm_squared() > 0.0 {
            triangles.push(ids);
        }
    }
    TriMesh {
        vertices,
        triangles,
    }
}

fn edge_vertex(field: &ScalarField, key: u64, isovalue: f64) -> Vector3<f64> {
    let grid = &field.grid;
    let axis = (key % 4) as usize;
    let [i, j, k] = grid.coords((key / 4) as usize);
    if axis == 3 {
        return grid.point(i, j, k);
    }
    let mut upper = [i, j, k];
    upper[axis] += 1;
    let va = field.get(i, j, k);
    let vb = field.get(upper[0], upper[1], upper[2]);
    let t = (isovalue - va) / (vb - va);
    let pa = grid.point(i, j, k);
    let pb = grid.point(upper[0], upper[1], upper[2]);
    pa + (pb - pa) * t
}

/// A scalar function that can be meshed.
pub trait DensityField: Sync {
    fn value(&self, x: &Vector3<f64>) -> f64;
}

impl DensityField for DensityMap {
    fn value(&self, x: &Vector3<f64>) -> f64 {
        self.phi(x)
    }
}

impl DensityField for ErbfParams {
    fn value(&self, x: &Vector3<f64>) -> f64 {
        self.forward(x)
    }
}

/// Samples `source` on the lattice of `bbox` at `spacing` and extracts the
/// level set. Map and model meshed with the same box and spacing share a
/// lattice, so their meshes are directly comparable.
pub fn mesh_from_model<F: DensityField + ?Sized>(
    source: &F,
    bbox: &BoundingBox,
    spacing: f64,
    isovalue: f64,
) -> Result<TriMesh> {
    let grid = UniformGrid::with_spacing(*bbox, spacing)?;
    let field = ScalarField::sample(&grid, DEFAULT_GRID_CAP, |p| source.value(p))?;
    Ok(marching_cubes(&field, isovalue))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field_from(dims: [usize; 3], bbox: BoundingBox, f: impl Fn(&Vector3<f64>) -> f64 + Sync) -> ScalarField {
        let grid = UniformGrid::new(bbox, dims).unwrap();
        ScalarField::sample(&grid, usize::MAX, f).unwrap()
    }

    fn unit_box() -> BoundingBox {
        BoundingBox::new(Vector3::zeros(), Vector3::repeat(1.0)).unwrap()
    }

    #[test]
    fn every_case_has_closed_crossing_loops() {
        let edges = cube_edges();
        for case in 0..256usize {
            let crossings = edges
                .iter()
                .filter(|&&(a, b, _)| ((case >> a) & 1) != ((case >> b) & 1))
                .count();
            let used: std::collections::BTreeSet<u8> =
                case_triangles(case as u8).iter().flatten().copied().collect();
            assert_eq!(used.len(), crossings, "case {case}");
        }
        assert!(case_triangles(0).is_empty());
        assert!(case_triangles(255).is_empty());
    }

    #[test]
    fn random_fields_give_closed_meshes() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let bbox = BoundingBox::new(Vector3::zeros(), Vector3::repeat(7.0)).unwrap();
        for _ in 0..20 {
            let grid = UniformGrid::new(bbox, [8, 8, 8]).unwrap();
            let mut values = vec![0.0; grid.len()];
            for (n, v) in values.iter_mut().enumerate() {
                let c = grid.coords(n);
                let border = c.iter().any(|&x| x == 0 || x == 7);
                *v = if border { 0.0 } else { rng.gen_range(0.0..2.0) };
            }
            let m = marching_cubes(&ScalarField { grid, values }, 1.0);
            assert!(m.is_closed());
        }
    }

    #[test]
    fn constant_field_gives_empty_mesh() {
        let f = field_from([3, 3, 3], unit_box(), |_| 0.2);
        assert!(marching_cubes(&f, 1.0).is_empty());
    }

    #[test]
    fn single_corner_above_gives_one_triangle() {
        let f = field_from([2, 2, 2], unit_box(), |p| if p.norm() == 0.0 { 2.0 } else { 0.0 });
        let m = marching_cubes(&f, 1.0);
        assert_eq!(m.triangles.len(), 1);
        assert_eq!(m.vertices.len(), 3);
        for v in &m.vertices {
            assert!((v.norm() - 0.5).abs() < 1e-15);
        }
        // Normal points away from the hot corner.
        let n = m.face_normal(0);
        assert!(n.dot(&m.vertices[0]) > 0.0);
    }

    #[test]
    fn sphere_field_is_closed_and_outward() {
        let bbox = BoundingBox::new(Vector3::repeat(-3.0), Vector3::repeat(3.0)).unwrap();
        let f = field_from([31, 31, 31], bbox, |p| 4.0 - p.norm_squared());
        let m = marching_cubes(&f, 0.0);
        assert!(m.is_closed());
        for t in 0..m.triangles.len() {
            let [a, b, c] = m.corners(t);
            assert!(m.face_normal(t).dot(&((a + b + c) / 3.0)) > 0.0);
        }
        for v in &m.vertices {
            assert!((v.norm() - 2.0).abs() < 0.05);
        }
    }

    #[test]
    fn vertices_interpolate_to_isovalue_along_edges() {
        let bbox = BoundingBox::new(Vector3::repeat(-2.0), Vector3::repeat(2.0)).unwrap();
        let f = field_from([9, 9, 9], bbox, |p| (p.x * 1.3).sin() + p.y * p.z);
        let m = marching_cubes(&f, 0.3);
        let h = f.grid.spacing();
        for v in &m.vertices {
            // Locate the edge the vertex lies on and interpolate linearly.
            let rel = (v - bbox.min).component_div(&h);
            let axis = (0..3)
                .find(|&a| (0..3).filter(|&b| b != a).all(|b| (rel[b] - rel[b].round()).abs() < 1e-9))
                .unwrap();
            let mut lo = [0usize; 3];
            for b in 0..3 {
                lo[b] = if b == axis { rel[b].floor() as usize } else { rel[b].round() as usize };
            }
            let mut hi = lo;
            hi[axis] += 1;
            let t = rel[axis] - lo[axis] as f64;
            let va = f.get(lo[0], lo[1], lo[2]);
            let vb = f.get(hi[0], hi[1], hi[2]);
            assert!((va + t * (vb - va) - 0.3).abs() < 1e-9);
        }
    }

    #[test]
    fn obj_and_off_round_trip() {
        let cube = TriMesh::unit_cube();
        assert_eq!(TriMesh::from_obj(&cube.to_obj()).unwrap(), cube);
        assert_eq!(TriMesh::from_off(&cube.to_off()).unwrap(), cube);
        assert!(cube.to_obj().starts_with("v "));
    }

    #[test]
    fn obj_reader_accepts_slash_groups_and_quads() {
        let text = "# q\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1/1 2/2/2 3/3/3 4/4/4\n";
        let m = TriMesh::from_obj(text).unwrap();
        assert_eq!(m.triangles, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn bad_face_index_is_rejected() {
        assert!(TriMesh::from_obj("v 0 0 0\nf 1 2 3\n").is_err());
        assert!(TriMesh::from_off("OFF\n1 1 0\n0 0 0\n3 0 0 x\n").is_err());
    }

    #[test]
    fn unit_cube_is_closed() {
        assert!(TriMesh::unit_cube().is_closed());
        assert!(TriMesh::icosphere(Vector3::zeros(), 1.0, 2).is_closed());
    }
}
