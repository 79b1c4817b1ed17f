//! End-to-end acceptance checks. Each test prints one `criterion N:` line
//! with the measured values to stderr before asserting.
//!
//! The training runs are shared between criteria and computed once.

use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use molsparse::cli::{sparsify, SparsifyArgs, DEFAULT_MESH_PADDING};
use molsparse::density::{DensityMap, DEFAULT_DECAY};
use molsparse::erbf::{loss, loss_gradient, rotation_matrix, ErbfNeuron, ErbfParams, LossWeights, Sample};
use molsparse::mesh::{mesh_from_model, TriMesh, DEFAULT_MESH_SPACING};
use molsparse::metrics::{compare_shapes, hausdorff, mesh_area, mesh_volume, SparseStats, DEFAULT_SAMPLES_PER_AREA};
use molsparse::pqr::AtomSet;
use molsparse::trainer::{initialize, train, TrainConfig, TrainOutcome, DEFAULT_ISOVALUE};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn molecule(name: &str) -> AtomSet {
    AtomSet::from_path(data(name)).unwrap()
}

/// Written straight to stderr so the line shows up even when the harness
/// captures the output of passing tests.
fn report(n: u32, pass: bool, detail: String) {
    use std::io::Write;
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr().lock(), "criterion {n}: {verdict} {detail}");
}

struct Run {
    outcome: TrainOutcome,
    elapsed: Duration,
}

fn run(file: &str, seed: u64) -> Run {
    let atoms = molecule(file);
    let config = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let outcome = train(&atoms, &config, DEFAULT_DECAY, DEFAULT_ISOVALUE).unwrap();
    Run {
        outcome,
        elapsed: start.elapsed(),
    }
}

const ADP: &str = "adp.pqr";
const ADK: &str = "adk_10res.pqr";
const GRAMICIDIN: &str = "gramicidin_1grm.pqr";
const PEPTIDE: &str = "peptide_42res.pqr";
const ADP_SEEDS: [u64; 5] = [42, 43, 44, 45, 46];

fn adp_runs() -> &'static [Run] {
    static RUNS: OnceLock<Vec<Run>> = OnceLock::new();
    RUNS.get_or_init(|| ADP_SEEDS.par_iter().map(|&s| run(ADP, s)).collect())
}

fn adk_run() -> &'static Run {
    static RUN: OnceLock<Run> = OnceLock::new();
    RUN.get_or_init(|| run(ADK, 42))
}

fn gramicidin_run() -> &'static Run {
    static RUN: OnceLock<Run> = OnceLock::new();
    RUN.get_or_init(|| run(GRAMICIDIN, 42))
}

fn peptide_run() -> &'static Run {
    static RUN: OnceLock<Run> = OnceLock::new();
    RUN.get_or_init(|| run(PEPTIDE, 42))
}

#[test]
fn criterion_1_initialization_is_exact() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for file in [ADP, ADK, GRAMICIDIN, PEPTIDE] {
        let atoms = molecule(file);
        let bbox = atoms.bounding_box(TrainConfig::default().padding).unwrap();
        let map = DensityMap::new(atoms.clone(), DEFAULT_DECAY).unwrap();
        let params = initialize(&atoms, DEFAULT_DECAY).unwrap();
        for _ in 0..1000 {
            let x = Vector3::from_fn(|i, _| rng.gen_range(bbox.min[i]..=bbox.max[i]));
            worst = worst.max((params.forward(&x) - map.phi(&x)).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst < 1e-10 && secs < 1.0;
    report(1, pass, format!("max |psi - phi| = {worst:.2e} over 4 molecules, {secs:.2} s"));
    assert!(pass);
}

fn random_neuron(rng: &mut impl Rng) -> ErbfNeuron {
    ErbfNeuron {
        w_tilde: rng.gen_range(0.3..2.0),
        d_tilde: Vector3::from_fn(|_, _| rng.gen_range(0.4..1.2)),
        center: Vector3::from_fn(|_, _| rng.gen_range(-1.5..1.5)),
        angles: Vector3::from_fn(|_, _| rng.gen_range(-3.0..3.0)),
    }
}

#[test]
fn criterion_2_gradient_matches_finite_differences() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = 1e-5;
    let mut worst_rel: f64 = 0.0;
    let mut worst_abs: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.gen_range(1..=5);
        let params = ErbfParams::new((0..n).map(|_| random_neuron(&mut rng)).collect());
        let batch: Vec<Sample> = (0..rng.gen_range(1..=50))
            .map(|_| Sample {
                point: Vector3::from_fn(|_, _| rng.gen_range(-2.5..2.5)),
                target: rng.gen_range(0.0..2.0),
            })
            .collect();
        let weights = LossWeights::new(rng.gen_range(0.0..2.0), rng.gen_range(0.1..2.0)).unwrap();
        let analytic = loss_gradient(&params, &batch, &weights).unwrap();
        let flat = params.to_flat();
        for (k, &g) in analytic.iter().enumerate() {
            let at = |delta: f64| {
                let mut f = flat.clone();
                f[k] += delta;
                loss(&ErbfParams::from_flat(&f).unwrap(), &batch, &weights).unwrap()
            };
            let fd = (at(h) - at(-h)) / (2.0 * h);
            if g.abs() < 1e-6 {
                worst_abs = worst_abs.max((g - fd).abs());
            } else {
                worst_rel = worst_rel.max((g - fd).abs() / g.abs().max(fd.abs()));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst_rel < 1e-5 && worst_abs < 1e-8 && secs < 10.0;
    report(
        2,
        pass,
        format!("20 configs, max rel err {worst_rel:.2e}, max abs err (small components) {worst_abs:.2e}, {secs:.2} s"),
    );
    assert!(pass);
}

#[test]
fn criterion_3_adp_sparsity() {
    let runs = adp_runs();
    let counts: Vec<usize> = runs.iter().map(|r| r.outcome.params.len()).collect();
    let slowest = runs.iter().map(|r| r.elapsed.as_secs_f64()).fold(0.0, f64::max);
    let best = *counts.iter().min().unwrap();
    let pass = counts.iter().all(|&c| c <= 13) && best <= 8 && slowest < 600.0;
    report(
        3,
        pass,
        format!("ADP neuron counts {counts:?} for seeds {ADP_SEEDS:?}, best {best}, slowest run {slowest:.1} s"),
    );
    assert!(pass);
}

#[test]
fn criterion_4_sparse_ratio_band() {
    let mut pass = true;
    let mut parts = Vec::new();
    for (file, run) in [(ADK, adk_run()), (GRAMICIDIN, gramicidin_run()), (PEPTIDE, peptide_run())] {
        let atoms = molecule(file).len();
        let stats = SparseStats::new(atoms, run.outcome.params.len()).unwrap();
        pass &= stats.ratio > 0.031 && stats.ratio < 0.20;
        parts.push(format!("{file} {}/{} = {:.4}", stats.n_neurons, atoms, stats.ratio));
    }
    report(4, pass, parts.join(", "));
    assert!(pass);
}

#[test]
fn criterion_5_shape_preservation() {
    let mut pass = true;
    let mut parts = Vec::new();
    for (file, run) in [(ADP, &adp_runs()[0]), (ADK, adk_run())] {
        let atoms = molecule(file);
        let bbox = atoms.bounding_box(DEFAULT_MESH_PADDING).unwrap();
        let map = DensityMap::new(atoms, DEFAULT_DECAY).unwrap();
        let original = mesh_from_model(&map, &bbox, DEFAULT_MESH_SPACING, DEFAULT_ISOVALUE).unwrap();
        let sparse = mesh_from_model(&run.outcome.params, &bbox, DEFAULT_MESH_SPACING, DEFAULT_ISOVALUE).unwrap();
        let r = compare_shapes(&original, &sparse, DEFAULT_SAMPLES_PER_AREA).unwrap();
        let ok_a = r.error_area <= 0.05;
        let ok_v = r.error_volume <= 0.02;
        let ok_h = r.hausdorff <= 1.0;
        pass &= ok_a && ok_v && ok_h;
        let mark = |ok: bool| if ok { "ok" } else { "OVER" };
        parts.push(format!(
            "{file} ({} neurons): err_A {:.4} [{}], err_V {:.4} [{}], hausdorff {:.3} [{}]",
            run.outcome.params.len(),
            r.error_area,
            mark(ok_a),
            r.error_volume,
            mark(ok_v),
            r.hausdorff,
            mark(ok_h)
        ));
    }
    report(5, pass, parts.join("; "));
    assert!(pass);
}

fn max_edge(mesh: &TriMesh) -> f64 {
    (0..mesh.triangles.len())
        .flat_map(|t| {
            let [a, b, c] = mesh.corners(t);
            [(a - b).norm(), (b - c).norm(), (c - a).norm()]
        })
        .fold(0.0, f64::max)
}

#[test]
fn criterion_6_mesh_metric_oracles() {
    use std::f64::consts::PI;
    let sphere = TriMesh::icosphere(Vector3::zeros(), 2.0, 5);
    let edge = max_edge(&sphere);
    let area_err = (mesh_area(&sphere) - 16.0 * PI).abs() / (16.0 * PI);
    let vol = mesh_volume(&sphere);
    let vol_err = (vol.volume - 32.0 * PI / 3.0).abs() / (32.0 * PI / 3.0);

    let cube = TriMesh::unit_cube();
    let cube_area = mesh_area(&cube);
    let cube_vol = mesh_volume(&cube).volume;
    let self_h = hausdorff(&sphere, &sphere, DEFAULT_SAMPLES_PER_AREA)
        .unwrap()
        .max(hausdorff(&cube, &cube, DEFAULT_SAMPLES_PER_AREA).unwrap());

    let pass = edge <= 0.1
        && area_err < 0.01
        && vol_err < 0.01
        && vol.closed
        && (cube_area - 6.0).abs() <= 1e-9
        && (cube_vol - 1.0).abs() <= 1e-9
        && self_h < 1e-12;
    report(
        6,
        pass,
        format!(
            "sphere r=2 max edge {edge:.4}: area rel err {area_err:.2e}, volume rel err {vol_err:.2e}; \
             cube area {cube_area}, volume {cube_vol}; self-hausdorff {self_h:.1e}"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_7_training_trace() {
    let run = peptide_run();
    let records = &run.outcome.trace.records;
    let s = TrainConfig::default().sparse_iter;
    let counts: Vec<usize> = records.iter().map(|r| r.neuron_count).collect();
    let non_increasing = counts.windows(2).all(|w| w[1] <= w[0]);
    let constant_after = counts[s - 1..].iter().all(|&c| c == counts[s - 1]);

    // Records are 1-based: index s - 1 is the last sparse-phase step. The
    // batch loss is noisy, so the switch is detected as a level shift between
    // the windows on either side, measured against the spread inside them.
    let window = 100;
    let stats = |r: &[molsparse::trainer::TraceRecord]| {
        let n = r.len() as f64;
        let mean = r.iter().map(|x| x.loss).sum::<f64>() / n;
        let var = r.iter().map(|x| (x.loss - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var.sqrt())
    };
    let (mean_before, sd_before) = stats(&records[s - window..s]);
    let (mean_after, sd_after) = stats(&records[s..s + window]);
    let shift = mean_before - mean_after;
    let spread = sd_before.max(sd_after);
    let switched = records[s - 1].rho1 > 0.0 && records[s].rho1 == 0.0;
    let discontinuity = switched && shift > 3.0 * spread;

    let pass = non_increasing && constant_after && discontinuity;
    report(
        7,
        pass,
        format!(
            "{} atoms: count {} -> {} non-increasing={non_increasing}, constant after step {s}={constant_after}; \
             mean loss {mean_before:.1} -> {mean_after:.1} across the switch (within-window sd {spread:.1})",
            molecule(PEPTIDE).len(),
            counts[0],
            counts[counts.len() - 1],
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_8_sparsify_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let outputs: Vec<(Vec<u8>, Vec<u8>)> = ["a.json", "b.json"]
        .iter()
        .map(|name| {
            let args = SparsifyArgs::new(data(ADP), dir.path().join(name));
            let manifest = sparsify(&args).unwrap();
            (
                std::fs::read(&manifest.model).unwrap(),
                std::fs::read(&manifest.trace).unwrap(),
            )
        })
        .collect();
    let same_model = outputs[0].0 == outputs[1].0;
    let same_trace = outputs[0].1 == outputs[1].1;
    let pass = same_model && same_trace;
    report(
        8,
        pass,
        format!(
            "model files identical={same_model} ({} bytes), traces identical={same_trace} ({} bytes)",
            outputs[0].0.len(),
            outputs[0].1.len()
        ),
    );
    assert!(pass);
}

fn rx(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn ry(b: f64) -> Matrix3<f64> {
    let (s, c) = b.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

fn rz(g: f64) -> Matrix3<f64> {
    let (s, c) = g.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

#[test]
fn criterion_9_rotation_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut ortho, mut det, mut product): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..1000 {
        let angles = Vector3::from_fn(|_, _| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI));
        let r = rotation_matrix(&angles);
        ortho = ortho.max((r.transpose() * r - Matrix3::identity()).amax());
        det = det.max((r.determinant() - 1.0).abs());
        product = product.max((r - rz(angles.z) * ry(angles.y) * rx(angles.x)).amax());
    }
    let pass = ortho < 1e-12 && det < 1e-12 && product < 1e-14;
    report(
        9,
        pass,
        format!("1000 triples: orthogonality {ortho:.1e}, determinant {det:.1e}, closed form vs product {product:.1e}"),
    );
    assert!(pass);
}
