//! Excursion-set volumes and integral functionals of lattice samples.

use crate::error::{Error, Result};
use crate::grid::{FieldSample, GridSpec};
use serde::{Deserialize, Serialize};

/// A realized functional over one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalResult {
    /// Volume units (mesh^d scaling).
    pub raw: f64,
    pub window_volume: f64,
    pub level: f64,
    pub replicate: u64,
}

/// Number of values ≥ u (ties count as inside).
pub fn count_at_least(values: &[f64], u: f64) -> usize {
    values.iter().filter(|&&v| v >= u).count()
}

/// (∏ h_l)·#{nodes with value ≥ u}.
pub fn excursion_volume(sample: &FieldSample, u: f64) -> FunctionalResult {
    excursion_volume_of(&sample.grid, &sample.values, u, sample.replicate)
}

/// `excursion_volume` on a bare value slice over `grid`.
pub fn excursion_volume_of(grid: &GridSpec, values: &[f64], u: f64, replicate: u64) -> FunctionalResult {
    FunctionalResult {
        raw: grid.cell_volume() * count_at_least(values, u) as f64,
        window_volume: grid.lattice_volume(),
        level: u,
        replicate,
    }
}

/// (∏ h_l)·Σ G(value); a non-finite G output reports its node index.
pub fn integral_functional<G: Fn(f64) -> f64>(sample: &FieldSample, g: G) -> Result<f64> {
    let mut acc = 0.0;
    for (i, &v) in sample.values.iter().enumerate() {
        let y = g(v);
        if !y.is_finite() {
            return Err(Error::NonFinite { index: i });
        }
        acc += y;
    }
    Ok(sample.grid.cell_volume() * acc)
}

/// (raw − centering)/scale.
pub fn standardized_statistic(result: &FunctionalResult, centering: f64, scale: f64) -> Result<f64> {
    standardize(result.raw, centering, scale)
}

pub fn standardize(raw: f64, centering: f64, scale: f64) -> Result<f64> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Precondition(format!("scale must be > 0, got {scale}")));
    }
    Ok((raw - centering) / scale)
}
