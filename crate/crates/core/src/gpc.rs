//! Orthonormal Legendre chaos basis in the random variable and the projected
//! coefficient fields.
//!
//! The random input is uniform on `[-1, 1]` with density `1/2`. The basis is
//! normalized so `E[Phi_h^2] = 1`, which makes the variance of the truncated
//! expansion a plain sum of squared coefficients over `h >= 1` and turns the
//! vector L2 norm of the projections into the L2 norm of the reconstructed
//! solution.

use crate::quadrature::gauss_legendre;
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum GpcError {
    #[error("quadrature with {n_theta} nodes cannot certify orthonormality up to degree {order}; need at least order + 1 nodes")]
    TooFewNodes { order: usize, n_theta: usize },
    #[error("polynomial degree {h} exceeds basis order {order}")]
    DegreeOutOfRange { h: usize, order: usize },
}

/// Orthonormal Legendre basis `Phi_h = sqrt(2h+1) P_h` with a Gauss
/// quadrature rule in the random variable; weights are rescaled to the
/// uniform probability density, so they sum to one.
#[derive(Debug, Clone)]
pub struct GpcBasis {
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GpcBasis {
    /// Basis of degree `order` with `n_theta` Gauss nodes.
    pub fn new(order: usize, n_theta: usize) -> Result<Self, GpcError> {
        if n_theta < order + 1 {
            return Err(GpcError::TooFewNodes { order, n_theta });
        }
        let (nodes, raw) = gauss_legendre(n_theta);
        let weights = raw.iter().map(|w| 0.5 * w).collect();
        Ok(Self {
            order,
            nodes,
            weights,
        })
    }

    /// Default node count: `2 (order + 1)`, enough to integrate products of
    /// degree-`order` data exactly.
    pub fn with_default_nodes(order: usize) -> Self {
        Self::new(order, 2 * (order + 1)).expect("default node count is always sufficient")
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_theta(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Phi_h(theta)` by the three-term Legendre recurrence.
    pub fn eval(&self, h: usize, theta: f64) -> Result<f64, GpcError> {
        if h > self.order {
            return Err(GpcError::DegreeOutOfRange {
                h,
                order: self.order,
            });
        }
        Ok(orthonormal_legendre(h, theta))
    }

    /// Expectation of `f(theta)` under the stored quadrature.
    pub fn expectation<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .sum()
    }

    /// Projection coefficients `E[f(theta) Phi_h]` for `h = 0..=order` of a
    /// scalar function of theta.
    pub fn project_scalar<F: FnMut(f64) -> f64>(&self, mut f: F) -> Vec<f64> {
        let mut out = vec![0.0; self.order + 1];
        for (&t, &w) in self.nodes.iter().zip(&self.weights) {
            let ft = f(t);
            for (h, o) in out.iter_mut().enumerate() {
                *o += w * ft * orthonormal_legendre(h, t);
            }
        }
        out
    }

    /// Project uncertain cell data onto the basis: `coeffs[h][i] =
    /// sum_q w_q f(theta_q, i) Phi_h(theta_q)`, for any cell indexing.
    pub fn project_cells<F: FnMut(f64, usize) -> f64>(&self, n_cells: usize, mut f: F) -> GpcField {
        let mut coeffs = vec![vec![0.0; n_cells]; self.order + 1];
        for (&t, &w) in self.nodes.iter().zip(&self.weights) {
            let phis: Vec<f64> = (0..=self.order)
                .map(|h| orthonormal_legendre(h, t))
                .collect();
            #[allow(clippy::needless_range_loop)]
            for i in 0..n_cells {
                let ft = f(t, i);
                for (h, &phi) in phis.iter().enumerate() {
                    coeffs[h][i] += w * ft * phi;
                }
            }
        }
        GpcField { coeffs }
    }

    /// Project uncertain initial data given as a function of `(theta, v)`
    /// onto the basis over the cells of a 1D grid.
    pub fn project_function<F: FnMut(f64, f64) -> f64>(
        &self,
        mut f: F,
        grid: &crate::grid::UniformGrid1D,
    ) -> GpcField {
        let centers = grid.centers();
        self.project_cells(grid.n(), |theta, i| f(theta, centers[i]))
    }

    /// Evaluate the truncated expansion at a quadrature value of theta.
    pub fn reconstruct_at(&self, field: &GpcField, theta: f64, i: usize) -> f64 {
        (0..=self.order)
            .map(|h| field.coeffs[h][i] * orthonormal_legendre(h, theta))
            .sum()
    }

    /// Max deviation of the discrete Gram matrix from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for h in 0..=self.order {
            for k in 0..=self.order {
                let inner =
                    self.expectation(|t| orthonormal_legendre(h, t) * orthonormal_legendre(k, t));
                let target = if h == k { 1.0 } else { 0.0 };
                worst = worst.max((inner - target).abs());
            }
        }
        worst
    }
}

/// `sqrt(2h+1) P_h(theta)`, evaluated by the stable recurrence.
pub fn orthonormal_legendre(h: usize, theta: f64) -> f64 {
    let mut p_prev = 1.0;
    if h == 0 {
        return 1.0;
    }
    let mut p = theta;
    for k in 1..h {
        let kf = k as f64;
        let p_next = ((2.0 * kf + 1.0) * theta * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = p_next;
    }
    (2.0 * h as f64 + 1.0).sqrt() * p
}

/// Projection coefficients of the solution: row `h` holds the coefficient of
/// `Phi_h` on every grid cell. Row 0 is the expected solution.
#[derive(Debug, Clone, PartialEq)]
pub struct GpcField {
    coeffs: Vec<Vec<f64>>,
}

impl GpcField {
    pub fn from_rows(coeffs: Vec<Vec<f64>>) -> Self {
        assert!(!coeffs.is_empty(), "field needs at least the mean row");
        let n = coeffs[0].len();
        assert!(
            coeffs.iter().all(|r| r.len() == n),
            "ragged coefficient rows"
        );
        Self { coeffs }
    }

    pub fn zeros(n_rows: usize, n_cells: usize) -> Self {
        Self {
            coeffs: vec![vec![0.0; n_cells]; n_rows],
        }
    }

    /// Number of projections, `M + 1`.
    pub fn n_rows(&self) -> usize {
        self.coeffs.len()
    }

    pub fn n_cells(&self) -> usize {
        self.coeffs[0].len()
    }

    pub fn row(&self, h: usize) -> &[f64] {
        &self.coeffs[h]
    }

    pub fn row_mut(&mut self, h: usize) -> &mut [f64] {
        &mut self.coeffs[h]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.coeffs
    }

    /// Expected solution, the coefficient of `Phi_0`.
    pub fn mean(&self) -> Vec<f64> {
        self.coeffs[0].clone()
    }

    /// Pointwise variance of the truncated expansion: with an orthonormal
    /// basis the `h = 0` term cancels, leaving the sum of squares over
    /// `h >= 1`. Nonnegative by construction.
    pub fn variance(&self) -> Vec<f64> {
        let n = self.n_cells();
        let mut var = vec![0.0; n];
        for row in &self.coeffs[1..] {
            for (v, &c) in var.iter_mut().zip(row) {
                *v += c * c;
            }
        }
        var
    }

    /// Upper confidence band `mean + sqrt(variance)`.
    pub fn confidence_band(&self) -> Vec<f64> {
        self.mean()
            .iter()
            .zip(self.variance())
            .map(|(&m, v)| m + v.sqrt())
            .collect()
    }
}
