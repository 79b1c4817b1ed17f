//! PQR molecule input.
//!
//! Records are split on whitespace. For every `ATOM`/`HETATM` line the last
//! five tokens are read as `x y z charge radius`; the intermediate columns
//! (serial, atom name, residue, chain) vary between writers and are skipped.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub center: Vector3<f64>,
    pub radius: f64,
    /// Partial charge. Carried along for round-tripping; the fit ignores it.
    pub charge: f64,
}

impl Atom {
    pub fn new(center: Vector3<f64>, radius: f64, charge: f64) -> Self {
        Atom {
            center,
            radius,
            charge,
        }
    }
}

/// Axis-aligned box `[min, max]` in Å.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl BoundingBox {
    pub fn new(min: Vector3<f64>, max: Vector3<f64>) -> Result<Self> {
        if (0..3).any(|k| !(max[k] > min[k]) || !min[k].is_finite() || !max[k].is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "bounding box max {max:?} must exceed min {min:?} on every axis"
            )));
        }
        Ok(BoundingBox { min, max })
    }

    pub fn extent(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    /// Grows the box by `padding` on every side.
    pub fn padded(&self, padding: f64) -> Result<BoundingBox> {
        if !(padding >= 0.0) || !padding.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "padding must be finite and >= 0, got {padding}"
            )));
        }
        let pad = Vector3::repeat(padding);
        BoundingBox::new(self.min - pad, self.max + pad)
    }
}

/// A parsed molecule: a non-empty, validated list of atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomSet {
    atoms: Vec<Atom>,
    pub source_name: String,
}

impl AtomSet {
    /// Validates radii, coordinates and non-emptiness.
    pub fn new(atoms: Vec<Atom>, source_name: impl Into<String>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyMolecule);
        }
        for (index, atom) in atoms.iter().enumerate() {
            if !atom.center.iter().all(|c| c.is_finite()) {
                return Err(Error::NonFiniteCoordinate { index });
            }
            if !(atom.radius > 0.0) || !atom.radius.is_finite() {
                return Err(Error::InvalidRadius {
                    index,
                    radius: atom.radius,
                });
            }
        }
        Ok(AtomSet {
            atoms,
            source_name: source_name.into(),
        })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        parse_pqr(&text, name)
    }

    /// Box enclosing every atom sphere, grown by `padding` on all sides.
    pub fn bounding_box(&self, padding: f64) -> Result<BoundingBox> {
        let mut min = Vector3::repeat(f64::INFINITY);
        let mut max = Vector3::repeat(f64::NEG_INFINITY);
        for atom in &self.atoms {
            let r = Vector3::repeat(atom.radius);
            min = min.inf(&(atom.center - r));
            max = max.sup(&(atom.center + r));
        }
        BoundingBox::new(min, max)?.padded(padding)
    }

    /// Serializes to PQR text. Floats use shortest round-trip formatting so
    /// re-parsing reproduces the coordinates exactly.
    pub fn to_pqr(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "REMARK   {}", self.source_name);
        for (i, a) in self.atoms.iter().enumerate() {
            let _ = writeln!(
                out,
                "ATOM  {:5} X    UNK     1 {:?} {:?} {:?} {:?} {:?}",
                i + 1,
                a.center.x,
                a.center.y,
                a.center.z,
                a.charge,
                a.radius
            );
        }
        out.push_str("END\n");
        out
    }
}

fn is_atom_record(first: &str) -> bool {
    first == "ATOM" || first == "HETATM"
}

/// Parses PQR text. Line numbers in errors are 1-based.
pub fn parse_pqr(text: &str, source_name: impl Into<String>) -> Result<AtomSet> {
    let mut atoms = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.first() {
            Some(first) if is_atom_record(first) => {}
            _ => continue,
        }
        if tokens.len() < 6 {
            return Err(Error::Parse {
                line: lineno + 1,
                message: format!("expected x y z charge radius, found {} tokens", tokens.len()),
            });
        }
        let tail = &tokens[tokens.len() - 5..];
        let mut vals = [0.0f64; 5];
        for (slot, tok) in vals.iter_mut().zip(tail) {
            *slot = tok.parse::<f64>().map_err(|_| Error::Parse {
                line: lineno + 1,
                message: format!("malformed numeric field {tok:?}"),
            })?;
        }
        let [x, y, z, charge, radius] = vals;
        atoms.push(Atom::new(Vector3::new(x, y, z), radius, charge));
    }
    AtomSet::new(atoms, source_name)
}
