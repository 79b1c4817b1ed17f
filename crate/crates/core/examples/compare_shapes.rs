//! Trains a sparse model and measures how well its surface matches the
//! original: relative area and volume errors and the Hausdorff distance.
//!
//! cargo run --release --example compare_shapes -- [file.pqr]

use molsparse::density::{DensityMap, DEFAULT_DECAY};
use molsparse::mesh::{mesh_from_model, DEFAULT_MESH_SPACING};
use molsparse::metrics::{compare_shapes, DEFAULT_SAMPLES_PER_AREA, SHAPE_CSV_HEADER};
use molsparse::pqr::AtomSet;
use molsparse::trainer::{train_default, TrainConfig};

fn main() -> molsparse::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/adp.pqr").into());
    let atoms = AtomSet::from_path(&path)?;
    let fit = train_default(&atoms, &TrainConfig::default())?;
    println!("{} atoms -> {} neurons", atoms.len(), fit.params.len());

    // Both surfaces on the same lattice.
    let bbox = atoms.bounding_box(2.0)?;
    let name = atoms.source_name.clone();
    let map = DensityMap::new(atoms, DEFAULT_DECAY)?;
    let original = mesh_from_model(&map, &bbox, DEFAULT_MESH_SPACING, 1.0)?;
    let sparse = mesh_from_model(&fit.params, &bbox, DEFAULT_MESH_SPACING, 1.0)?;
    let report = compare_shapes(&original, &sparse, DEFAULT_SAMPLES_PER_AREA)?;

    println!("{SHAPE_CSV_HEADER}\n{}", report.csv_row(&name));
    Ok(())
}
