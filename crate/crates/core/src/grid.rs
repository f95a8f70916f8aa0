//! Lattice windows and field samples, with a binary dump format.

use crate::error::{invalid, Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

/// Default cap on the number of lattice nodes of one grid.
pub const DEFAULT_NODE_CAP: usize = 1 << 26;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

fn mesh_de<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(h) => vec![h],
        OneOrMany::Many(v) => v,
    })
}

fn default_mesh() -> Vec<f64> {
    vec![1.0]
}

/// The box ∏[o_l, o_l + r_l] realized as a lattice of mesh h.
///
/// A single mesh value applies to all axes; an empty origin means 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub extents: Vec<f64>,
    #[serde(default = "default_mesh", deserialize_with = "mesh_de")]
    pub mesh: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub origin: Vec<f64>,
}

impl GridSpec {
    /// Unit-mesh grid with the given extents.
    pub fn unit(extents: &[f64]) -> Self {
        GridSpec {
            extents: extents.to_vec(),
            mesh: vec![1.0; extents.len()],
            origin: Vec::new(),
        }
    }

    pub fn with_mesh(extents: &[f64], mesh: &[f64]) -> Self {
        GridSpec {
            extents: extents.to_vec(),
            mesh: mesh.to_vec(),
            origin: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    /// Mesh on axis l (a single stored value applies to every axis).
    pub fn h(&self, l: usize) -> f64 {
        if self.mesh.len() == 1 {
            self.mesh[0]
        } else {
            self.mesh[l]
        }
    }

    pub fn origin_at(&self, l: usize) -> f64 {
        self.origin.get(l).copied().unwrap_or(0.0)
    }

    /// N_l = floor(r_l / h_l), tolerant to rounding in the ratio.
    pub fn node_counts(&self) -> Vec<usize> {
        (0..self.dim())
            .map(|l| (self.extents[l] / self.h(l) + 1e-9).floor() as usize)
            .collect()
    }

    pub fn total_nodes(&self) -> usize {
        self.node_counts().iter().product()
    }

    /// Volume represented by the lattice, ∏ N_l h_l.
    pub fn lattice_volume(&self) -> f64 {
        self.node_counts()
            .iter()
            .enumerate()
            .map(|(l, n)| *n as f64 * self.h(l))
            .product()
    }

    /// ∏ h_l.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|l| self.h(l)).product()
    }

    pub fn validate(&self, node_cap: usize) -> Result<()> {
        let d = self.dim();
        if d == 0 || d > 3 {
            return Err(invalid(format!("grid dimension must be 1..=3, got {d}")));
        }
        if self.mesh.len() != 1 && self.mesh.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: self.mesh.len(),
            });
        }
        if !self.origin.is_empty() && self.origin.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: self.origin.len(),
            });
        }
        for l in 0..d {
            if !(self.extents[l] > 0.0 && self.extents[l].is_finite()) {
                return Err(invalid(format!("extent {l} must be positive")));
            }
            if !(self.h(l) > 0.0 && self.h(l).is_finite()) {
                return Err(invalid(format!("mesh {l} must be positive")));
            }
        }
        if self.node_counts().iter().any(|&n| n < 2) {
            return Err(invalid("every axis needs at least 2 nodes"));
        }
        let total = self.node_counts().iter().try_fold(1usize, |acc, &n| acc.checked_mul(n));
        match total {
            Some(t) if t <= node_cap => Ok(()),
            _ => Err(Error::Resource(format!(
                "grid with {:?} nodes exceeds the cap of {node_cap}",
                self.node_counts()
            ))),
        }
    }

    /// Coordinates of the node with flat (row-major) index `idx`.
    pub fn node(&self, idx: usize) -> Vec<f64> {
        let counts = self.node_counts();
        let mut rem = idx;
        let mut out = vec![0.0; counts.len()];
        for l in (0..counts.len()).rev() {
            let i = rem % counts[l];
            rem /= counts[l];
            out[l] = self.origin_at(l) + i as f64 * self.h(l);
        }
        out
    }
}

/// Realized values on the nodes of a grid (row-major, last axis fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub seed: u64,
    pub replicate: u64,
    pub model: String,
    /// Set when the circulant embedding needed eigenvalue clipping.
    pub approximate: bool,
    /// Number of values saturated to ±MAX by a subordinator.
    pub saturated: usize,
}

const MAGIC: &[u8; 4] = b"LRDF";
const VERSION: u16 = 1;
/// Header: magic, version u16, d u16, N_1..N_3 u32, mesh 3×f64.
pub const HEADER_LEN: usize = 4 + 2 + 2 + 3 * 4 + 3 * 8;

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    format: String,
    version: u16,
    data_offset: usize,
    byte_order: String,
    grid: GridSpec,
    node_counts: Vec<usize>,
    seed: u64,
    replicate: u64,
    model: String,
    approximate: bool,
    saturated: usize,
}

impl FieldSample {
    /// Writes the binary dump at `path` and JSON metadata at `path.json`.
    pub fn write_dump(&self, path: &Path) -> Result<PathBuf> {
        let counts = self.grid.node_counts();
        let d = counts.len();
        let mut buf = Vec::with_capacity(HEADER_LEN + 8 * self.values.len());
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&(d as u16).to_le_bytes());
        for l in 0..3 {
            let n = if l < d { counts[l] as u32 } else { 1 };
            buf.extend_from_slice(&n.to_le_bytes());
        }
        for l in 0..3 {
            let h = if l < d { self.grid.h(l) } else { 0.0 };
            buf.extend_from_slice(&h.to_le_bytes());
        }
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::File::create(path)?.write_all(&buf)?;
        let side = Sidecar {
            format: "LRDF".into(),
            version: VERSION,
            data_offset: HEADER_LEN,
            byte_order: "little".into(),
            grid: self.grid.clone(),
            node_counts: counts,
            seed: self.seed,
            replicate: self.replicate,
            model: self.model.clone(),
            approximate: self.approximate,
            saturated: self.saturated,
        };
        let mut side_path = path.as_os_str().to_owned();
        side_path.push(".json");
        let side_path = PathBuf::from(side_path);
        std::fs::write(&side_path, serde_json::to_string_pretty(&side)?)?;
        Ok(side_path)
    }

    /// Reads a dump written by `write_dump` (binary plus sidecar).
    pub fn read_dump(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return Err(Error::Format("not an LRDF dump".into()));
        }
        let d = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
        let mut n = 1usize;
        for l in 0..d {
            let o = 8 + 4 * l;
            n *= u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
        }
        if bytes.len() != HEADER_LEN + 8 * n {
            return Err(Error::Format("dump length does not match header".into()));
        }
        let values = bytes[HEADER_LEN..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let mut side_path = path.as_os_str().to_owned();
        side_path.push(".json");
        let side: Sidecar = serde_json::from_str(&std::fs::read_to_string(PathBuf::from(side_path))?)?;
        Ok(FieldSample {
            grid: side.grid,
            values,
            seed: side.seed,
            replicate: side.replicate,
            model: side.model,
            approximate: side.approximate,
            saturated: side.saturated,
        })
    }
}
