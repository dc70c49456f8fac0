//! Measured quantities: masses, norms, L1 errors, discrete relative entropy
//! with its production term, and convergence-order estimation.

use crate::gpc::GpcField;
use crate::grid::UniformGrid1D;
use crate::scheme::FluxWorkspace;
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("reference has no mass, relative error undefined")]
    ZeroReference,
    #[error("convergence order needs positive errors, got ({0}, {1})")]
    NonPositiveErrors(f64, f64),
}

/// Neumaier-compensated sum; keeps norm comparisons stable when errors drop
/// toward round-off.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Discrete mass `dv * sum_i row_i` of projection `h`.
pub fn discrete_mass(field: &GpcField, grid: &UniformGrid1D, h: usize) -> f64 {
    grid.dv() * compensated_sum(field.row(h).iter().copied())
}

pub fn row_mass(row: &[f64], dv: f64) -> f64 {
    dv * compensated_sum(row.iter().copied())
}

/// Discrete L2 norm of the coefficient vector,
/// `[dv sum_i sum_h f_h(v_i)^2]^{1/2}`; a no-blow-up monitor.
pub fn l2_coeff_norm(field: &GpcField, grid: &UniformGrid1D) -> f64 {
    let total = compensated_sum(
        field
            .rows()
            .iter()
            .flat_map(|row| row.iter().map(|&c| c * c)),
    );
    (grid.dv() * total).sqrt()
}

/// Relative L1 distance `sum |row - ref| / sum |ref|` (the cell width
/// cancels).
pub fn l1_relative_error(row: &[f64], reference: &[f64]) -> Result<f64, DiagnosticsError> {
    let denom = compensated_sum(reference.iter().map(|r| r.abs()));
    if denom == 0.0 {
        return Err(DiagnosticsError::ZeroReference);
    }
    let num = compensated_sum(row.iter().zip(reference).map(|(a, b)| (a - b).abs()));
    Ok(num / denom)
}

/// Positivity floor below which entropy quantities are flagged invalid.
const POSITIVITY_FLOOR: f64 = 1e-300;

/// Discrete relative Shannon entropy
/// `H = dv sum_i row_i log(row_i / ref_i)`; `valid` is false when either
/// array fails strict positivity, in which case `value` is meaningless.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct FlaggedValue {
    pub value: f64,
    pub valid: bool,
}

impl FlaggedValue {
    fn invalid() -> Self {
        Self {
            value: f64::NAN,
            valid: false,
        }
    }
}

fn strictly_positive(values: &[f64]) -> bool {
    values.iter().all(|&x| x > POSITIVITY_FLOOR)
}

pub fn relative_entropy(row: &[f64], reference: &[f64], grid: &UniformGrid1D) -> FlaggedValue {
    relative_entropy_vol(row, reference, grid.dv())
}

/// Relative entropy with an explicit cell volume (serves the 2D fields).
pub fn relative_entropy_vol(row: &[f64], reference: &[f64], cell_volume: f64) -> FlaggedValue {
    if !strictly_positive(row) || !strictly_positive(reference) {
        return FlaggedValue::invalid();
    }
    let sum = compensated_sum(row.iter().zip(reference).map(|(&f, &r)| f * (f / r).ln()));
    FlaggedValue {
        value: cell_volume * sum,
        valid: true,
    }
}

/// Logarithmic mean `x y log(x/y) / (x - y)` with the continuous limit when
/// the arguments agree to relative 1e-12.
pub fn logarithmic_mean(x: f64, y: f64) -> f64 {
    if (x - y).abs() <= 1e-12 * x.abs().max(y.abs()) {
        return 0.5 * (x + y);
    }
    x * y * (x / y).ln() / (x - y)
}

/// Discrete entropy production
///
/// ```text
/// I = (1/dv) sum_{interior interfaces}
///     [log r_{i+1} - log r_i] [r_{i+1} - r_i] fbar_{i+1/2} D_{i+1/2},
/// r_i = row_i / ref_i,  fbar = logarithmic mean of the reference pair
/// ```
///
/// The `1/dv` factor makes `dH/dt = -I` exact for the semi-discrete scheme
/// with steady-state weights. Every term is nonnegative.
pub fn entropy_production(
    row: &[f64],
    reference: &[f64],
    ws: &FluxWorkspace,
    grid: &UniformGrid1D,
) -> FlaggedValue {
    if !strictly_positive(row) || !strictly_positive(reference) {
        return FlaggedValue::invalid();
    }
    let n = row.len();
    let terms = (0..n - 1).map(|i| {
        let r_left = row[i] / reference[i];
        let r_right = row[i + 1] / reference[i + 1];
        let fbar = logarithmic_mean(reference[i + 1], reference[i]);
        ((r_right).ln() - (r_left).ln()) * (r_right - r_left) * fbar * ws.d_face()[i]
    });
    FlaggedValue {
        value: compensated_sum(terms) / grid.dv(),
        valid: true,
    }
}

/// `log2(e_coarse / e_fine)`, the observed order under one refinement.
pub fn convergence_order(e_coarse: f64, e_fine: f64) -> Result<f64, DiagnosticsError> {
    if !(e_coarse > 0.0 && e_fine > 0.0) {
        return Err(DiagnosticsError::NonPositiveErrors(e_coarse, e_fine));
    }
    Ok((e_coarse / e_fine).log2())
}
