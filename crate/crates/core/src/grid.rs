//! Uniform cell-centered grids and the trapezoidal rule over grid samples.

use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs at least 2 cells, got {0}")]
    TooFewCells(usize),
    #[error("grid interval is empty: v_min = {0}, v_max = {1}")]
    EmptyInterval(f64, f64),
    #[error("sample count {got} does not match cell count {expected}")]
    LengthMismatch { got: usize, expected: usize },
}

/// Uniform 1D grid of `n` cells on `[v_min, v_max]`.
///
/// Cell centers sit at `v_min + (i + 1/2) dv`, strictly inside the interval,
/// so coefficients like `1/D(v)` with `D` vanishing at the boundary are never
/// evaluated at the boundary itself. Interfaces sit at `v_min + i dv` for
/// `i = 0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformGrid1D {
    v_min: f64,
    v_max: f64,
    n: usize,
    dv: f64,
}

impl UniformGrid1D {
    pub fn new(v_min: f64, v_max: f64, n: usize) -> Result<Self, GridError> {
        if n < 2 {
            return Err(GridError::TooFewCells(n));
        }
        if !(v_max > v_min) {
            return Err(GridError::EmptyInterval(v_min, v_max));
        }
        let dv = (v_max - v_min) / n as f64;
        Ok(Self {
            v_min,
            v_max,
            n,
            dv,
        })
    }

    pub fn v_min(&self) -> f64 {
        self.v_min
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    /// Number of cells.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dv(&self) -> f64 {
        self.dv
    }

    /// Center of cell `i`, `i = 0..n`.
    pub fn center(&self, i: usize) -> f64 {
        self.v_min + (i as f64 + 0.5) * self.dv
    }

    /// Interface `i`, `i = 0..=n`; interface `i` separates cells `i-1` and `i`.
    pub fn interface(&self, i: usize) -> f64 {
        self.v_min + i as f64 * self.dv
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.center(i)).collect()
    }

    /// Index of the cell containing `v` (clamped to the grid).
    pub fn cell_of(&self, v: f64) -> usize {
        let raw = ((v - self.v_min) / self.dv).floor() as isize;
        raw.clamp(0, self.n as isize - 1) as usize
    }

    /// Composite trapezoidal rule over the cell-center samples, i.e. an
    /// approximation of the integral over `[v_0, v_{n-1}]` (the span of the
    /// centers). This is the rule used for the nonlocal interaction integral.
    pub fn trapezoid(&self, samples: &[f64]) -> Result<f64, GridError> {
        if samples.len() != self.n {
            return Err(GridError::LengthMismatch {
                got: samples.len(),
                expected: self.n,
            });
        }
        let inner: f64 = samples[1..self.n - 1].iter().sum();
        Ok(self.dv * (inner + 0.5 * (samples[0] + samples[self.n - 1])))
    }

    /// Midpoint-rule mass of cell samples: `dv * sum`.
    pub fn cell_sum(&self, samples: &[f64]) -> f64 {
        self.dv * samples.iter().sum::<f64>()
    }
}

/// Tensor grid for the 2D problems; `x` varies along the first index.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformGrid2D {
    pub x: UniformGrid1D,
    pub y: UniformGrid1D,
}

impl UniformGrid2D {
    pub fn new(x: UniformGrid1D, y: UniformGrid1D) -> Self {
        Self { x, y }
    }

    pub fn square(v_min: f64, v_max: f64, n: usize) -> Result<Self, GridError> {
        let x = UniformGrid1D::new(v_min, v_max, n)?;
        let y = x.clone();
        Ok(Self { x, y })
    }

    pub fn n_cells(&self) -> usize {
        self.x.n() * self.y.n()
    }

    /// Flat index of cell `(ix, iy)`; x-major layout.
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        ix * self.y.n() + iy
    }

    pub fn center(&self, ix: usize, iy: usize) -> (f64, f64) {
        (self.x.center(ix), self.y.center(iy))
    }

    /// 2D trapezoidal rule over the cell-center samples (x-major layout).
    pub fn trapezoid(&self, samples: &[f64]) -> Result<f64, GridError> {
        let (nx, ny) = (self.x.n(), self.y.n());
        if samples.len() != nx * ny {
            return Err(GridError::LengthMismatch {
                got: samples.len(),
                expected: nx * ny,
            });
        }
        let mut per_row = Vec::with_capacity(nx);
        for ix in 0..nx {
            per_row.push(self.y.trapezoid(&samples[ix * ny..(ix + 1) * ny])?);
        }
        self.x.trapezoid(&per_row)
    }

    pub fn cell_sum(&self, samples: &[f64]) -> f64 {
        self.x.dv() * self.y.dv() * samples.iter().sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn four_cell_grid_centers() {
        let g = UniformGrid1D::new(-1.0, 1.0, 4).unwrap();
        assert_abs_diff_eq!(g.dv(), 0.5);
        assert_eq!(g.centers(), vec![-0.75, -0.25, 0.25, 0.75]);
        assert_eq!(g.interface(0), -1.0);
        assert_eq!(g.interface(4), 1.0);
    }

    #[test]
    fn paper_grids_spacing() {
        let g = UniformGrid1D::new(-1.0, 1.0, 41).unwrap();
        assert_abs_diff_eq!(g.dv(), 2.0 / 41.0);
        let g3 = UniformGrid1D::new(-4.0, 4.0, 51).unwrap();
        assert_abs_diff_eq!(g3.dv(), 8.0 / 51.0);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(UniformGrid1D::new(-1.0, 1.0, 1).is_err());
        assert!(UniformGrid1D::new(1.0, -1.0, 8).is_err());
    }

    #[test]
    fn centers_interior_and_interface_count() {
        let g = UniformGrid1D::new(-1.0, 1.0, 7).unwrap();
        for i in 0..g.n() {
            assert!(g.center(i) > g.v_min() && g.center(i) < g.v_max());
        }
        let interfaces: Vec<f64> = (0..=g.n()).map(|i| g.interface(i)).collect();
        assert_eq!(interfaces.len(), g.n() + 1);
    }

    #[test]
    fn refinement_nests_coarse_centers_on_fine_interfaces() {
        let coarse = UniformGrid1D::new(-1.0, 1.0, 10).unwrap();
        let fine = UniformGrid1D::new(-1.0, 1.0, 20).unwrap();
        assert_abs_diff_eq!(fine.dv() * 2.0, coarse.dv());
        for i in 0..coarse.n() {
            let c = coarse.center(i);
            assert_abs_diff_eq!(c, fine.interface(2 * i + 1), epsilon = 1e-15);
        }
    }

    #[test]
    fn trapezoid_constant_and_linear() {
        let g = UniformGrid1D::new(-1.0, 1.0, 41).unwrap();
        let ones = vec![1.0; 41];
        // spans [v_0, v_40], i.e. misses half a cell at each boundary
        let expected = g.center(40) - g.center(0);
        assert_abs_diff_eq!(g.trapezoid(&ones).unwrap(), expected, epsilon = 1e-14);

        let lin: Vec<f64> = g.centers().iter().map(|v| 3.0 * v - 0.5).collect();
        let a = g.center(0);
        let b = g.center(40);
        let exact = 1.5 * (b * b - a * a) - 0.5 * (b - a);
        assert_abs_diff_eq!(g.trapezoid(&lin).unwrap(), exact, epsilon = 1e-13);
    }

    #[test]
    fn trapezoid_normalized_gaussian_mass() {
        let g = UniformGrid1D::new(-1.0, 1.0, 41).unwrap();
        let sigma_g2 = 0.01;
        let raw: Vec<f64> = g
            .centers()
            .iter()
            .map(|v| (-(v - 0.25).powi(2) / (2.0 * sigma_g2)).exp())
            .collect();
        let beta = 1.0 / g.trapezoid(&raw).unwrap();
        let normalized: Vec<f64> = raw.iter().map(|x| beta * x).collect();
        assert_abs_diff_eq!(g.trapezoid(&normalized).unwrap(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn trapezoid_rejects_length_mismatch() {
        let g = UniformGrid1D::new(-1.0, 1.0, 8).unwrap();
        assert!(g.trapezoid(&[1.0; 7]).is_err());
    }

    #[test]
    fn grid2d_trapezoid_separable() {
        let g = UniformGrid2D::square(-1.0, 1.0, 16).unwrap();
        let mut samples = vec![0.0; g.n_cells()];
        for ix in 0..16 {
            for iy in 0..16 {
                let (x, y) = g.center(ix, iy);
                samples[g.index(ix, iy)] = (1.0 + x) * (2.0 - y);
            }
        }
        let fx: Vec<f64> = g.x.centers().iter().map(|x| 1.0 + x).collect();
        let fy: Vec<f64> = g.y.centers().iter().map(|y| 2.0 - y).collect();
        let expected = g.x.trapezoid(&fx).unwrap() * g.y.trapezoid(&fy).unwrap();
        assert_abs_diff_eq!(g.trapezoid(&samples).unwrap(), expected, epsilon = 1e-12);
    }
}
