//! Sparsifies every PQR file in a directory and prints the neuron/atom
//! ratio table, smallest molecule first. Takes a few minutes for the
//! bundled data.
//!
//! cargo run --release --example sparse_ratio_table -- [dir]

use std::path::PathBuf;

use molsparse::metrics::SparseStats;
use molsparse::pqr::AtomSet;
use molsparse::trainer::{train_default, TrainConfig};

fn main() -> molsparse::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data")));
    let mut molecules: Vec<AtomSet> = std::fs::read_dir(&dir)
        .map_err(|e| molsparse::Error::io(&dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "pqr"))
        .map(AtomSet::from_path)
        .collect::<molsparse::Result<_>>()?;
    molecules.sort_by_key(AtomSet::len);

    println!("{:<24} {:>6} {:>8} {:>7}", "molecule", "atoms", "neurons", "ratio");
    for atoms in &molecules {
        let fit = train_default(atoms, &TrainConfig::default())?;
        let stats = SparseStats::new(atoms.len(), fit.params.len())?;
        println!(
            "{:<24} {:>6} {:>8} {:>7.4}",
            atoms.source_name, stats.n_atoms, stats.n_neurons, stats.ratio
        );
    }
    Ok(())
}
