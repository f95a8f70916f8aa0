//! Fixtures shared by the criterion benches.

use sojourn::oracle::{OracleGrid, SpectralKernelGrid, WindowShape};
use sojourn::{CovarianceModel, GridSpec, SpectralDensity};

/// Long-range isotropic model on the line.
pub fn power_law_1d() -> CovarianceModel {
    CovarianceModel::PowerLawIso { eta: 0.4, dim: 1 }
}

/// Square window with unit mesh.
pub fn square(side: f64) -> GridSpec {
    GridSpec::unit(&[side, side])
}

/// Second-order kernel grid on [-R, R] with the given cells.
pub fn rosenblatt_kernel(cells: usize, truncation: f64) -> SpectralKernelGrid {
    let density = SpectralDensity::AnisotropicProduct { gammas: vec![0.3] };
    let grid = OracleGrid {
        cells: vec![cells],
        truncation: vec![truncation],
    };
    SpectralKernelGrid::new(2, &density, WindowShape::Box, &grid).expect("kernel grid")
}
