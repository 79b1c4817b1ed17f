//! Extracts the molecular surface with marching cubes and writes OBJ and OFF
//! files.
//!
//! cargo run --release --example mesh_isosurface -- [file.pqr] [spacing]

use molsparse::density::{DensityMap, DEFAULT_DECAY};
use molsparse::mesh::mesh_from_model;
use molsparse::metrics::{mesh_area, mesh_volume};
use molsparse::pqr::AtomSet;

fn main() -> molsparse::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let path = args
        .get(1)
        .cloned()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/adp.pqr").into());
    let spacing: f64 = args.get(2).map_or(0.5, |s| s.parse().expect("spacing"));

    let atoms = AtomSet::from_path(&path)?;
    let bbox = atoms.bounding_box(2.0)?;
    let map = DensityMap::new(atoms, DEFAULT_DECAY)?;
    let mesh = mesh_from_model(&map, &bbox, spacing, 1.0)?;
    let volume = mesh_volume(&mesh);
    println!(
        "{} vertices, {} triangles, closed: {}",
        mesh.vertices.len(),
        mesh.triangles.len(),
        volume.closed
    );
    println!("area {:.2} Å^2, volume {:.2} Å^3", mesh_area(&mesh), volume.volume);

    for name in ["surface.obj", "surface.off"] {
        let out = std::env::temp_dir().join(name);
        mesh.write(&out)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}
