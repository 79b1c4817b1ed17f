//! Reference Gaussian density map and uniform-grid sampling.
//!
//! The map is `phi(x) = sum_i exp(-d (|x - x_i|^2 - r_i^2))`, one isotropic
//! Gaussian per atom. Grids index their values x-fastest:
//! `index = i + nx * (j + ny * k)`.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pqr::{AtomSet, BoundingBox};

/// Default decay rate `d` (Å⁻²).
pub const DEFAULT_DECAY: f64 = 0.5;

/// Terms whose exponent exceeds this are dropped when the cutoff is enabled.
pub const CUTOFF_EXPONENT: f64 = 40.0;

/// Upper bound on the number of lattice points sampled in one call.
pub const DEFAULT_GRID_CAP: usize = 1 << 27;

#[derive(Debug, Clone)]
pub struct DensityMap {
    atoms: AtomSet,
    decay: f64,
    cutoff: bool,
}

impl DensityMap {
    pub fn new(atoms: AtomSet, decay: f64) -> Result<Self> {
        if !(decay > 0.0) || !decay.is_finite() {
            return Err(Error::InvalidConfig(format!("decay must be > 0, got {decay}")));
        }
        Ok(DensityMap {
            atoms,
            decay,
            cutoff: false,
        })
    }

    /// Skip atoms whose term is below `exp(-CUTOFF_EXPONENT)`.
    pub fn with_cutoff(mut self, enabled: bool) -> Self {
        self.cutoff = enabled;
        self
    }

    pub fn atoms(&self) -> &AtomSet {
        &self.atoms
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn phi(&self, x: &Vector3<f64>) -> f64 {
        let d = self.decay;
        let mut sum = 0.0;
        for atom in self.atoms.atoms() {
            let arg = d * ((x - atom.center).norm_squared() - atom.radius * atom.radius);
            if self.cutoff && arg > CUTOFF_EXPONENT {
                continue;
            }
            sum += (-arg).exp();
        }
        sum
    }

    pub fn sample_grid(&self, grid: &UniformGrid) -> Result<ScalarField> {
        ScalarField::sample(grid, DEFAULT_GRID_CAP, |p| self.phi(p))
    }
}

/// Lattice over a box with `dims[k] >= 2` points per axis, both box faces
/// included: point `(i, j, k) = min + (i h_x, j h_y, k h_z)` with
/// `h = extent / (dims - 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    pub bbox: BoundingBox,
    pub dims: [usize; 3],
}

impl UniformGrid {
    pub fn new(bbox: BoundingBox, dims: [usize; 3]) -> Result<Self> {
        if dims.iter().any(|&n| n < 2) {
            return Err(Error::InvalidConfig(format!(
                "grid needs at least 2 points per axis, got {dims:?}"
            )));
        }
        Ok(UniformGrid { bbox, dims })
    }

    /// Splits each axis into `ceil(extent / spacing)` cells.
    pub fn with_spacing(bbox: BoundingBox, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "grid spacing must be > 0, got {spacing}"
            )));
        }
        let ext = bbox.extent();
        let mut dims = [0usize; 3];
        for k in 0..3 {
            let cells = (ext[k] / spacing).ceil();
            if cells > 1e9 {
                return Err(Error::GridTooLarge {
                    points: usize::MAX,
                    cap: DEFAULT_GRID_CAP,
                });
            }
            dims[k] = (cells as usize).max(1) + 1;
        }
        UniformGrid::new(bbox, dims)
    }

    pub fn spacing(&self) -> Vector3<f64> {
        let e = self.bbox.extent();
        Vector3::new(
            e.x / (self.dims[0] - 1) as f64,
            e.y / (self.dims[1] - 1) as f64,
            e.z / (self.dims[2] - 1) as f64,
        )
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn point(&self, i: usize, j: usize, k: usize) -> Vector3<f64> {
        let h = self.spacing();
        self.bbox.min + Vector3::new(i as f64 * h.x, j as f64 * h.y, k as f64 * h.z)
    }

    /// Inverse of [`index`](Self::index).
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: UniformGrid,
    pub values: Vec<f64>,
}

impl ScalarField {
    /// Evaluates `f` at every lattice point. Points are independent, so the
    /// parallel result equals the sequential one bit for bit.
    pub fn sample<F>(grid: &UniformGrid, cap: usize, f: F) -> Result<Self>
    where
        F: Fn(&Vector3<f64>) -> f64 + Sync,
    {
        let n = grid.len();
        if n > cap {
            return Err(Error::GridTooLarge { points: n, cap });
        }
        let slice = grid.dims[0] * grid.dims[1];
        let mut values = vec![0.0; n];
        values
            .par_chunks_mut(slice)
            .enumerate()
            .for_each(|(k, chunk)| {
                for j in 0..grid.dims[1] {
                    for i in 0..grid.dims[0] {
                        chunk[i + grid.dims[0] * j] = f(&grid.point(i, j, k));
                    }
                }
            });
        Ok(ScalarField { grid: *grid, values })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.grid.index(i, j, k)]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Plain-text volume dump: a five-line header followed by one value per
    /// line in x-fastest order.
    pub fn to_volume_text(&self) -> String {
        let g = &self.grid;
        let mut out = String::with_capacity(self.values.len() * 24 + 128);
        out.push_str("MOLSPARSE-VOLUME 1\n");
        let _ = writeln!(out, "dims {} {} {}", g.dims[0], g.dims[1], g.dims[2]);
        let _ = writeln!(out, "min {:?} {:?} {:?}", g.bbox.min.x, g.bbox.min.y, g.bbox.min.z);
        let _ = writeln!(out, "max {:?} {:?} {:?}", g.bbox.max.x, g.bbox.max.y, g.bbox.max.z);
        out.push_str("order x-fastest\n");
        for v in &self.values {
            let _ = writeln!(out, "{v:?}");
        }
        out
    }

    pub fn from_volume_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| Error::Parse {
                line: 0,
                message: format!("volume file truncated before {what}"),
            })
        };
        let (_, magic) = next("magic")?;
        if magic.trim() != "MOLSPARSE-VOLUME 1" {
            return Err(Error::Parse {
                line: 1,
                message: "not a volume file".into(),
            });
        }
        let nums = |(no, line): (usize, &str), key: &str| -> Result<Vec<f64>> {
            let mut toks = line.split_whitespace();
            if toks.next() != Some(key) {
                return Err(Error::Parse {
                    line: no + 1,
                    message: format!("expected {key}"),
                });
            }
            toks.map(|t| {
                t.parse::<f64>().map_err(|_| Error::Parse {
                    line: no + 1,
                    message: format!("bad number {t:?}"),
                })
            })
            .collect()
        };
        let dims = nums(next("dims")?, "dims")?;
        let min = nums(next("min")?, "min")?;
        let max = nums(next("max")?, "max")?;
        let _order = next("order")?;
        if dims.len() != 3 || min.len() != 3 || max.len() != 3 {
            return Err(Error::Parse {
                line: 2,
                message: "header needs three values per key".into(),
            });
        }
        let bbox = BoundingBox::new(
            Vector3::new(min[0], min[1], min[2]),
            Vector3::new(max[0], max[1], max[2]),
        )?;
        let grid = UniformGrid::new(bbox, [dims[0] as usize, dims[1] as usize, dims[2] as usize])?;
        let mut values = Vec::with_capacity(grid.len());
        for (no, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            values.push(line.trim().parse::<f64>().map_err(|_| Error::Parse {
                line: no + 1,
                message: format!("bad value {line:?}"),
            })?);
        }
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        Ok(ScalarField { grid, values })
    }

    pub fn write_volume(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_volume_text()).map_err(|e| Error::io(path, e))
    }
}
