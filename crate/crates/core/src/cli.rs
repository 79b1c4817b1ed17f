//! Command-line front end: `sparsify`, `mesh`, `compare` and `report`.
//!
//! Each subcommand is also exposed as a function returning its result, so
//! the pipeline can be driven from code and tests without spawning a
//! process.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::density::{DensityMap, DEFAULT_DECAY};
use crate::error::{Error, Result};
use crate::mesh::{mesh_from_model, TriMesh, DEFAULT_MESH_SPACING};
use crate::metrics::{compare_shapes, ShapeReport, SparseStats, DEFAULT_SAMPLES_PER_AREA, SHAPE_CSV_HEADER};
use crate::model::{ModelDocument, ModelMetadata};
use crate::pqr::AtomSet;
use crate::trainer::{train, ErrorMetric, ErrorReduction, TrainConfig, DEFAULT_ISOVALUE};

/// Margin (Å) added around the molecule's atom spheres when meshing.
pub const DEFAULT_MESH_PADDING: f64 = 2.0;

#[derive(Debug, Parser)]
#[command(name = "molsparse", version, about = "Sparse ellipsoid-RBF molecular surfaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a sparse ERBF network to a PQR molecule.
    Sparsify(SparsifyArgs),
    /// Triangulate the isosurface of a molecule or a model.
    Mesh(MeshArgs),
    /// Compare two meshes by area, volume and Hausdorff distance.
    Compare(CompareArgs),
    /// Collect run manifests into a neuron-count table.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Rms,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReductionArg {
    Full,
    Sum,
    Mean,
}

#[derive(Debug, Clone, Args)]
pub struct SparsifyArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_DECAY)]
    pub decay: f64,
    #[arg(long, default_value_t = DEFAULT_ISOVALUE)]
    pub isovalue: f64,
    #[arg(long, default_value_t = 1.0)]
    pub grid_spacing: f64,
    #[arg(long, default_value_t = 5.0)]
    pub padding: f64,
    #[arg(long, default_value_t = 1.0)]
    pub band: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 6_000)]
    pub sparse_iter: usize,
    #[arg(long, default_value_t = 1_000)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub tol1: f64,
    #[arg(long, default_value_t = 0.2)]
    pub tol2: f64,
    #[arg(long, default_value_t = 20)]
    pub check_step: usize,
    #[arg(long, default_value_t = 0.002)]
    pub lr: f64,
    #[arg(long, default_value_t = 10.0)]
    pub rho1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub rho2: f64,
    /// Training error compared against --tol2.
    #[arg(long, value_enum, default_value_t = MetricArg::Rms)]
    pub error_metric: MetricArg,
    /// Scaling of the batch error term.
    #[arg(long, value_enum, default_value_t = ReductionArg::Full)]
    pub error_reduction: ReductionArg,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Trace CSV path (default: next to the model, `.trace.csv`).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Manifest path (default: next to the model, `.manifest.json`).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Initialize with the literal `d~ = 0.5`, `w~ = exp(r^2/4)`.
    #[arg(long)]
    pub legacy_init: bool,
}

impl SparsifyArgs {
    /// Arguments with every option at its default.
    pub fn new(input: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        let cli = Cli::parse_from([
            "molsparse".as_ref(),
            "sparsify".as_ref(),
            "--input".as_ref(),
            input.into().as_os_str(),
            "--out".as_ref(),
            out.into().as_os_str(),
        ]);
        match cli.command {
            Command::Sparsify(a) => a,
            _ => unreachable!("parsed a sparsify command"),
        }
    }

    pub fn config(&self) -> TrainConfig {
        TrainConfig {
            max_iter: self.max_iter,
            sparse_iter: self.sparse_iter,
            batch_size: self.batch_size,
            tol1: self.tol1,
            tol2: self.tol2,
            check_step: self.check_step,
            learning_rate: self.lr,
            rho1_initial: self.rho1,
            rho2_initial: self.rho2,
            error_metric: match self.error_metric {
                MetricArg::Rms => ErrorMetric::Rms,
                MetricArg::Max => ErrorMetric::Max,
            },
            error_reduction: match self.error_reduction {
                ReductionArg::Full => ErrorReduction::Full,
                ReductionArg::Sum => ErrorReduction::Sum,
                ReductionArg::Mean => ErrorReduction::Mean,
            },
            grid_spacing: self.grid_spacing,
            padding: self.padding,
            band: self.band,
            seed: self.seed,
            legacy_init: self.legacy_init,
            ..TrainConfig::default()
        }
    }

    pub fn trace_path(&self) -> PathBuf {
        self.trace.clone().unwrap_or_else(|| sibling(&self.out, "trace.csv"))
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.manifest.clone().unwrap_or_else(|| sibling(&self.out, "manifest.json"))
    }
}

/// `dir/model.json` -> `dir/model.<suffix>`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

#[derive(Debug, Clone, Args)]
pub struct MeshArgs {
    /// A `.pqr` molecule or a `.json` model.
    #[arg(long)]
    pub input: PathBuf,
    /// Output mesh, `.obj` or `.off`.
    #[arg(long)]
    pub out: PathBuf,
    /// Defaults to the model's isovalue, or 1.0 for PQR input.
    #[arg(long)]
    pub isovalue: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_MESH_SPACING)]
    pub spacing: f64,
    /// Decay rate for PQR input.
    #[arg(long, default_value_t = DEFAULT_DECAY)]
    pub decay: f64,
    #[arg(long, default_value_t = DEFAULT_MESH_PADDING)]
    pub padding: f64,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Reference mesh.
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Face samples per Å² for the Hausdorff estimate.
    #[arg(long, default_value_t = DEFAULT_SAMPLES_PER_AREA)]
    pub samples: f64,
    /// `.json` report, or `.csv` for a header plus one row.
    #[arg(long)]
    pub out: PathBuf,
    /// Label for the CSV row (default: stem of --a).
    #[arg(long)]
    pub molecule: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub manifests: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Record of one `sparsify` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub molecule: String,
    pub input: PathBuf,
    pub model: PathBuf,
    pub trace: PathBuf,
    pub decay: f64,
    pub isovalue: f64,
    pub config: TrainConfig,
    pub seed: u64,
    pub training_points: usize,
    pub n_atoms: usize,
    pub neuron_count: usize,
    pub ratio: f64,
    pub duration_seconds: f64,
}

impl RunManifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn sparsify(args: &SparsifyArgs) -> Result<RunManifest> {
    let start = Instant::now();
    let atoms = AtomSet::from_path(&args.input)?;
    let config = args.config();
    let outcome = train(&atoms, &config, args.decay, args.isovalue)?;
    let metadata = ModelMetadata {
        source: atoms.source_name.clone(),
        n_atoms: atoms.len(),
        decay: args.decay,
        isovalue: args.isovalue,
        iterations: config.max_iter,
        seed: config.seed,
        molecule_box: atoms.bounding_box(0.0)?,
    };
    ModelDocument::new(&outcome.params, metadata).write(&args.out)?;
    let trace = args.trace_path();
    outcome.trace.write_csv(&trace)?;
    let stats = SparseStats::new(atoms.len(), outcome.params.len())?;
    let manifest = RunManifest {
        molecule: atoms.source_name.clone(),
        input: args.input.clone(),
        model: args.out.clone(),
        trace,
        decay: args.decay,
        isovalue: args.isovalue,
        seed: config.seed,
        config,
        training_points: outcome.training_points,
        n_atoms: stats.n_atoms,
        neuron_count: stats.n_neurons,
        ratio: stats.ratio,
        duration_seconds: start.elapsed().as_secs_f64(),
    };
    let path = args.manifest_path();
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

fn is_model_path(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

pub fn mesh(args: &MeshArgs) -> Result<TriMesh> {
    let mesh = if is_model_path(&args.input) {
        let doc = ModelDocument::read(&args.input)?;
        let params = doc.params()?;
        let bbox = doc.metadata.molecule_box.padded(args.padding)?;
        let iso = args.isovalue.unwrap_or(doc.metadata.isovalue);
        mesh_from_model(&params, &bbox, args.spacing, iso)?
    } else {
        let atoms = AtomSet::from_path(&args.input)?;
        let bbox = atoms.bounding_box(args.padding)?;
        let map = DensityMap::new(atoms, args.decay)?;
        mesh_from_model(&map, &bbox, args.spacing, args.isovalue.unwrap_or(DEFAULT_ISOVALUE))?
    };
    if mesh.is_empty() {
        eprintln!("warning: empty level set, writing an empty mesh");
    }
    mesh.write(&args.out)?;
    Ok(mesh)
}

pub fn compare(args: &CompareArgs) -> Result<ShapeReport> {
    let a = TriMesh::read(&args.a)?;
    let b = TriMesh::read(&args.b)?;
    let report = compare_shapes(&a, &b, args.samples)?;
    let is_csv = args.out.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let text = if is_csv {
        let name = args.molecule.clone().unwrap_or_else(|| {
            args.a.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
        });
        format!("{SHAPE_CSV_HEADER}\n{}\n", report.csv_row(&name))
    } else {
        serde_json::to_string_pretty(&report)? + "\n"
    };
    std::fs::write(&args.out, text).map_err(|e| Error::io(&args.out, e))?;
    Ok(report)
}

pub const REPORT_CSV_HEADER: &str = "molecule,natom,neurons,ratio";

/// Reads every `*.json` manifest in the directory and writes one row per
/// run, sorted by atom count.
pub fn report(args: &ReportArgs) -> Result<Vec<RunManifest>> {
    let dir = &args.manifests;
    let mut manifests = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| is_model_path(p))
        .collect();
    paths.sort();
    for p in paths {
        // Model documents share the extension; skip anything that is not a manifest.
        if let Ok(m) = RunManifest::read(&p) {
            manifests.push(m);
        }
    }
    if manifests.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "no run manifests found in {}",
            dir.display()
        )));
    }
    manifests.sort_by(|a, b| a.n_atoms.cmp(&b.n_atoms).then_with(|| a.molecule.cmp(&b.molecule)));
    let mut out = format!("{REPORT_CSV_HEADER}\n");
    for m in &manifests {
        let _ = writeln!(out, "{},{},{},{}", m.molecule, m.n_atoms, m.neuron_count, m.ratio);
    }
    std::fs::write(&args.out, out).map_err(|e| Error::io(&args.out, e))?;
    Ok(manifests)
}

/// Runs a parsed command and prints a one-line summary.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sparsify(args) => {
            let m = sparsify(&args)?;
            println!(
                "{}: {} neurons from {} atoms, sparse ratio {:.4}",
                m.molecule, m.neuron_count, m.n_atoms, m.ratio
            );
        }
        Command::Mesh(args) => {
            let m = mesh(&args)?;
            println!("{} vertices, {} triangles", m.vertices.len(), m.triangles.len());
        }
        Command::Compare(args) => {
            let r = compare(&args)?;
            println!(
                "area error {:.4}, volume error {:.4}, Hausdorff {:.4}",
                r.error_area, r.error_volume, r.hausdorff
            );
        }
        Command::Report(args) => {
            let rows = report(&args)?;
            println!("{} runs", rows.len());
        }
    }
    Ok(())
}
