//! Quadrature rules for the per-interface weight integrals.
//!
//! The weight exponent of the scheme is an integral of `(B[g] + D')/D` over
//! one cell; its accuracy decides how well the discrete steady state matches
//! the analytic one. The rules offered here are the open Newton-Cotes rules
//! with 2, 3 and 5 nodes (design degrees 1, 3 and 5) and Gauss-Legendre with
//! a configurable node count. All rules are open: no node ever touches the
//! interval endpoints, so integrands singular at the domain boundary stay
//! evaluable.

use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("Gauss-Legendre rule needs at least 1 node, got {0}")]
    EmptyRule(usize),
}

/// Rule selector; the numeric suffix is the order of the method.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadKind {
    /// 2-node open Newton-Cotes, exact on linears.
    NC2,
    /// 3-node open Newton-Cotes, exact on cubics.
    NC4,
    /// 5-node open Newton-Cotes, exact on quintics.
    NC6,
    /// Gauss-Legendre with `n` nodes, exact up to degree `2n - 1`.
    GaussLegendre(usize),
}

impl QuadKind {
    pub fn label(&self) -> String {
        match self {
            QuadKind::NC2 => "2".to_string(),
            QuadKind::NC4 => "4".to_string(),
            QuadKind::NC6 => "6".to_string(),
            QuadKind::GaussLegendre(_) => "G".to_string(),
        }
    }
}

/// A quadrature rule stored on the reference interval `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    kind: QuadKind,
    /// Nodes in (0, 1), strictly interior.
    nodes: Vec<f64>,
    /// Weights summing to 1.
    weights: Vec<f64>,
}

impl QuadRule {
    pub fn new(kind: QuadKind) -> Result<Self, QuadratureError> {
        let (nodes, weights) = match kind {
            QuadKind::NC2 => (vec![1.0 / 3.0, 2.0 / 3.0], vec![0.5, 0.5]),
            QuadKind::NC4 => (
                vec![0.25, 0.5, 0.75],
                vec![2.0 / 3.0, -1.0 / 3.0, 2.0 / 3.0],
            ),
            QuadKind::NC6 => (
                vec![1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0, 4.0 / 6.0, 5.0 / 6.0],
                vec![
                    11.0 / 20.0,
                    -14.0 / 20.0,
                    26.0 / 20.0,
                    -14.0 / 20.0,
                    11.0 / 20.0,
                ],
            ),
            QuadKind::GaussLegendre(n) => {
                if n == 0 {
                    return Err(QuadratureError::EmptyRule(n));
                }
                let (x, w) = gauss_legendre(n);
                // map from [-1, 1] to [0, 1]
                let nodes = x.iter().map(|t| 0.5 * (t + 1.0)).collect();
                let weights = w.iter().map(|wi| 0.5 * wi).collect();
                (nodes, weights)
            }
        };
        Ok(Self {
            kind,
            nodes,
            weights,
        })
    }

    pub fn kind(&self) -> QuadKind {
        self.kind
    }

    /// Approximate the integral of `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let len = b - a;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(a + len * x))
            .sum::<f64>()
            * len
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
///
/// Newton iteration on the three-term recurrence; plenty accurate and fast
/// for the node counts used here (a few up to a few dozen).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for k in 0..m {
        // Tricomi-style initial guess for the k-th positive root
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * d * d);
        nodes[k] = -x;
        nodes[n - 1 - k] = x;
        weights[k] = w;
        weights[n - 1 - k] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
        let (_, d) = legendre_with_derivative(n, 0.0);
        weights[n / 2] = 2.0 / (d * d);
    }
    (nodes, weights)
}

/// Value and derivative of the Legendre polynomial `P_n` at `x`.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 1..n {
        let kf = k as f64;
        let p_next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = p_next;
    }
    let d = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, d)
}
