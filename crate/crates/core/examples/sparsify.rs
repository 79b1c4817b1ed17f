//! Trains a sparse network for a molecule and writes the model and trace.
//!
//! cargo run --release --example sparsify -- [file.pqr] [seed]

use molsparse::cli::{sparsify, SparsifyArgs};

fn main() -> molsparse::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let input = args
        .get(1)
        .cloned()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/adp.pqr").into());
    let out = std::env::temp_dir().join("molsparse-model.json");
    let mut run = SparsifyArgs::new(&input, &out);
    if let Some(seed) = args.get(2) {
        run.seed = seed.parse().expect("seed");
    }

    let m = sparsify(&run)?;
    println!(
        "{}: {} atoms -> {} neurons (ratio {:.3}) from {} training points in {:.1} s",
        m.molecule, m.n_atoms, m.neuron_count, m.ratio, m.training_points, m.duration_seconds
    );

    // Neuron count at a few points of the trace.
    let trace = std::fs::read_to_string(&m.trace).map_err(|e| molsparse::Error::io(&m.trace, e))?;
    for line in trace.lines().skip(1).step_by(1000) {
        let cols: Vec<&str> = line.split(',').collect();
        let loss: f64 = cols[1].parse().expect("loss column");
        println!("  iter {:>5}  loss {loss:>10.2}  neurons {}", cols[0], cols[2]);
    }
    println!("model {}\ntrace {}", m.model.display(), m.trace.display());
    Ok(())
}
