//! Builds the one-neuron-per-atom starting network and shows that it
//! reproduces the density exactly.
//!
//! cargo run --example init_network -- [file.pqr]

use molsparse::density::{DensityMap, DEFAULT_DECAY};
use molsparse::pqr::AtomSet;
use molsparse::trainer::initialize;
use rand::{Rng, SeedableRng};

fn main() -> molsparse::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/adp.pqr").into());
    let atoms = AtomSet::from_path(&path)?;
    let bbox = atoms.bounding_box(5.0)?;
    let map = DensityMap::new(atoms.clone(), DEFAULT_DECAY)?;
    let net = initialize(&atoms, DEFAULT_DECAY)?;
    println!("{} atoms -> {} neurons, {} parameters", atoms.len(), net.len(), net.param_count());

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let x = nalgebra::Vector3::from_fn(|i, _| rng.gen_range(bbox.min[i]..=bbox.max[i]));
        worst = worst.max((net.forward(&x) - map.phi(&x)).abs());
    }
    println!("max |Psi - phi| over 1000 random points: {worst:.2e}");
    Ok(())
}
