//! Samples the Gaussian density of a molecule on a grid and writes it as a
//! plain-text volume.
//!
//! cargo run --example density_grid -- [file.pqr] [spacing] [out.vol]

use molsparse::density::{DensityMap, UniformGrid, DEFAULT_DECAY};
use molsparse::pqr::AtomSet;

fn main() -> molsparse::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let path = args
        .get(1)
        .cloned()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/adp.pqr").into());
    let spacing: f64 = args.get(2).map_or(0.5, |s| s.parse().expect("spacing"));
    let out = args
        .get(3)
        .cloned()
        .unwrap_or_else(|| std::env::temp_dir().join("density.vol").display().to_string());

    let atoms = AtomSet::from_path(&path)?;
    let bbox = atoms.bounding_box(2.0)?;
    let map = DensityMap::new(atoms, DEFAULT_DECAY)?;
    let grid = UniformGrid::with_spacing(bbox, spacing)?;
    let field = map.sample_grid(&grid)?;
    let (lo, hi) = field.min_max();
    let inside = field.values.iter().filter(|&&v| v >= 1.0).count();

    println!("grid {:?} ({} points), spacing {:.3?}", grid.dims, grid.len(), grid.spacing().as_slice());
    println!("phi range {lo:.3e} .. {hi:.3}");
    println!(
        "{inside} points inside the surface, about {:.1} Å^3",
        inside as f64 * grid.spacing().product()
    );
    field.write_volume(&out)?;
    println!("wrote {out}");
    Ok(())
}
