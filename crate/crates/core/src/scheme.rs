//! The structure-preserving spatial discretization.
//!
//! Per interior interface the scheme stores the exponent `lambda`, the total
//! drift `C_tilde = D lambda / dv`, and the convex weight
//! `delta = 1/lambda + 1/(1 - e^lambda)`. The numerical flux
//!
//! ```text
//! F_{i+1/2} = C_tilde ((1 - delta) f_{i+1} + delta f_i) + D (f_{i+1} - f_i)/dv
//! ```
//!
//! vanishes exactly when neighboring values follow the quasi-steady ratio
//! `f_{i+1}/f_i = exp(-lambda)`. The same weights serve every projection of
//! the chaos expansion, because the drift does not depend on the projection
//! degree. Boundary fluxes are pinned to zero (no-flux).

use crate::grid::UniformGrid1D;
use crate::model::Diffusion;
use crate::quadrature::QuadRule;
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum SchemeError {
    #[error("steady-state weights need strictly positive values, got ({0}, {1})")]
    NonPositiveSteadyState(f64, f64),
    #[error("row length {got} does not match workspace cell count {expected}")]
    LengthMismatch { got: usize, expected: usize },
}

/// Exponential-fitting weight `delta(lambda) = 1/lambda + 1/(1 - e^lambda)`.
///
/// Evaluated as `1/lambda - 1/expm1(lambda)`, with a short series around the
/// removable singularity at zero. Strictly inside `(0, 1)` for finite input,
/// with `delta -> 0` as `lambda -> +inf` and `delta -> 1` as
/// `lambda -> -inf`.
pub fn compute_delta(lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 0.5;
    }
    if lambda.abs() < 1e-2 {
        // 1/x - 1/expm1(x) = 1/2 - x/12 + x^3/720 + O(x^5)
        return 0.5 - lambda / 12.0 + lambda.powi(3) / 720.0;
    }
    let e = lambda.exp_m1();
    if e.is_infinite() {
        return 1.0 / lambda;
    }
    1.0 / lambda - 1.0 / e
}

/// Weight built from a known positive steady-state pair, equal to
/// `compute_delta(ln(f_i / f_{i+1}))`.
pub fn delta_from_steady_state(f_i: f64, f_ip1: f64) -> Result<f64, SchemeError> {
    if !(f_i > 0.0 && f_ip1 > 0.0) {
        return Err(SchemeError::NonPositiveSteadyState(f_i, f_ip1));
    }
    Ok(compute_delta((f_i / f_ip1).ln()))
}

/// `lambda / expm1(lambda)`: nonnegative for every finite argument, equal to
/// one at zero. `D * phi(lambda)` and `D * phi(-lambda)` are the off-diagonal
/// transfer coefficients of the scheme, and evaluating them in this ratio
/// form keeps them nonnegative in floating point.
pub fn flux_transfer_factor(lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 1.0;
    }
    let e = lambda.exp_m1();
    if e.is_infinite() {
        return 0.0;
    }
    lambda / e
}

/// Per-interface coefficients of the spatial operator, shared by all
/// projections. Built once per background state; immutable afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxWorkspace {
    n_cells: usize,
    dv: f64,
    /// Diffusion at interior interfaces, `D(v_{i+1/2})`, length `n - 1`.
    d_face: Vec<f64>,
    /// Quadrature of `(B[g] + D')/D` over each cell pair, length `n - 1`.
    lambda: Vec<f64>,
    /// Total drift `C_tilde = D lambda / dv`, length `n - 1`.
    c_tilde: Vec<f64>,
    /// Convex weights `delta(lambda)`, length `n - 1`.
    delta: Vec<f64>,
    /// `D phi(lambda)`: transfer from the left cell through the interface.
    g_minus: Vec<f64>,
    /// `D phi(-lambda)`: transfer from the right cell through the interface.
    g_plus: Vec<f64>,
}

impl FluxWorkspace {
    /// Build weights from a drift field and diffusion law. `drift` is the
    /// advective part `B[g](v)` excluding the diffusion derivative, which is
    /// added analytically inside the exponent integrand.
    pub fn build<F: Fn(f64) -> f64>(
        grid: &UniformGrid1D,
        drift: F,
        diffusion: &Diffusion,
        rule: &QuadRule,
    ) -> Self {
        let n = grid.n();
        let mut d_face = Vec::with_capacity(n - 1);
        let mut lambda = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            let a = grid.center(i);
            let b = grid.center(i + 1);
            d_face.push(diffusion.value(grid.interface(i + 1)));
            lambda.push(rule.integrate(a, b, |v| {
                (drift(v) + diffusion.derivative(v)) / diffusion.value(v)
            }));
        }
        Self::from_lambda(grid, d_face, lambda)
    }

    /// Weights that reproduce a known positive steady state exactly:
    /// `lambda = ln(f_i / f_{i+1})` per interface.
    pub fn from_steady_state(
        grid: &UniformGrid1D,
        steady: &[f64],
        diffusion: &Diffusion,
    ) -> Result<Self, SchemeError> {
        let n = grid.n();
        if steady.len() != n {
            return Err(SchemeError::LengthMismatch {
                got: steady.len(),
                expected: n,
            });
        }
        let mut d_face = Vec::with_capacity(n - 1);
        let mut lambda = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            if !(steady[i] > 0.0 && steady[i + 1] > 0.0) {
                return Err(SchemeError::NonPositiveSteadyState(
                    steady[i],
                    steady[i + 1],
                ));
            }
            d_face.push(diffusion.value(grid.interface(i + 1)));
            lambda.push((steady[i] / steady[i + 1]).ln());
        }
        Ok(Self::from_lambda(grid, d_face, lambda))
    }

    fn from_lambda(grid: &UniformGrid1D, d_face: Vec<f64>, lambda: Vec<f64>) -> Self {
        let dv = grid.dv();
        let c_tilde: Vec<f64> = d_face
            .iter()
            .zip(&lambda)
            .map(|(&d, &l)| d * l / dv)
            .collect();
        let delta: Vec<f64> = lambda.iter().map(|&l| compute_delta(l)).collect();
        let g_minus: Vec<f64> = d_face
            .iter()
            .zip(&lambda)
            .map(|(&d, &l)| d * flux_transfer_factor(l))
            .collect();
        let g_plus: Vec<f64> = d_face
            .iter()
            .zip(&lambda)
            .map(|(&d, &l)| d * flux_transfer_factor(-l))
            .collect();
        Self {
            n_cells: grid.n(),
            dv,
            d_face,
            lambda,
            c_tilde,
            delta,
            g_minus,
            g_plus,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn dv(&self) -> f64 {
        self.dv
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn c_tilde(&self) -> &[f64] {
        &self.c_tilde
    }

    pub fn d_face(&self) -> &[f64] {
        &self.d_face
    }

    pub fn g_minus(&self) -> &[f64] {
        &self.g_minus
    }

    pub fn g_plus(&self) -> &[f64] {
        &self.g_plus
    }

    /// `max_i |C_tilde_{i+1/2}|`, the drift bound entering the step-size
    /// restrictions.
    pub fn max_drift(&self) -> f64 {
        self.c_tilde.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// `max_i D_{i+1/2}`.
    pub fn max_diffusion(&self) -> f64 {
        self.d_face.iter().fold(0.0, |m, d| m.max(*d))
    }

    /// Numerical fluxes for one projection row; entries `0` and `n` are the
    /// boundary fluxes, pinned to zero.
    pub fn assemble_fluxes(&self, row: &[f64]) -> Result<Vec<f64>, SchemeError> {
        if row.len() != self.n_cells {
            return Err(SchemeError::LengthMismatch {
                got: row.len(),
                expected: self.n_cells,
            });
        }
        let mut flux = vec![0.0; self.n_cells + 1];
        for i in 0..self.n_cells - 1 {
            let blended = (1.0 - self.delta[i]) * row[i + 1] + self.delta[i] * row[i];
            flux[i + 1] =
                self.c_tilde[i] * blended + self.d_face[i] * (row[i + 1] - row[i]) / self.dv;
        }
        Ok(flux)
    }

    /// Conservative divergence `(F_{i+1/2} - F_{i-1/2}) / dv`. With the
    /// boundary fluxes at zero the cell sum telescopes to zero exactly.
    pub fn divergence(&self, flux: &[f64]) -> Vec<f64> {
        debug_assert_eq!(flux.len(), self.n_cells + 1);
        (0..self.n_cells)
            .map(|i| (flux[i + 1] - flux[i]) / self.dv)
            .collect()
    }

    /// Right-hand side of the semi-discrete system for one row.
    pub fn rhs(&self, row: &[f64]) -> Result<Vec<f64>, SchemeError> {
        Ok(self.divergence(&self.assemble_fluxes(row)?))
    }
}
