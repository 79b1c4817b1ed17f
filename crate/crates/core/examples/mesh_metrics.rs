//! Area, volume and Hausdorff distance on shapes with known answers.

use molsparse::mesh::TriMesh;
use molsparse::metrics::{hausdorff, mesh_area, mesh_volume};
use nalgebra::Vector3;
use std::f64::consts::PI;

fn main() -> molsparse::Result<()> {
    for sub in 1..=5 {
        let s = TriMesh::icosphere(Vector3::zeros(), 2.0, sub);
        println!(
            "icosphere r=2, {sub} subdivisions: {:>5} triangles, area {:.4} (exact {:.4}), volume {:.4} (exact {:.4})",
            s.triangles.len(),
            mesh_area(&s),
            16.0 * PI,
            mesh_volume(&s).volume,
            32.0 * PI / 3.0
        );
    }

    let inner = TriMesh::unit_cube().map_vertices(|v| (v - Vector3::repeat(0.5)) * 2.0);
    let outer = inner.map_vertices(|v| v * 1.5);
    println!(
        "cubes of half-width 1 and 1.5: hausdorff {:.6} (corner gap {:.6})",
        hausdorff(&inner, &outer, 10.0)?,
        0.5 * 3f64.sqrt()
    );
    Ok(())
}
