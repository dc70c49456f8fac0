//! Model ingredients: interaction kernels, diffusion laws and background
//! distributions, plus the nonlocal drift they induce.

use crate::grid::UniformGrid1D;
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ModelError {
    #[error("background samples ({got}) do not match the grid ({expected})")]
    LengthMismatch { got: usize, expected: usize },
    #[error("Lax-Wendroff step violates the CFL condition: alpha dt / dv = {0} > 1")]
    CflViolation(f64),
}

/// Interaction kernel `P(v, v_*)` with range `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    /// `P = 1`: every pair interacts.
    Uniform,
    /// `P = 1` iff `|v - v_*| <= radius`.
    BoundedConfidence { radius: f64 },
}

impl Kernel {
    pub fn eval(&self, v: f64, v_star: f64) -> f64 {
        match self {
            Kernel::Uniform => 1.0,
            Kernel::BoundedConfidence { radius } => {
                if (v - v_star).abs() <= *radius {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Diffusion coefficient `D(v)` with its analytic derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Diffusion {
    Constant {
        value: f64,
    },
    /// `D(v) = sigma2/2 (1 - v^2)^2`, positive inside `(-1, 1)` and vanishing
    /// at the endpoints.
    QuarticWell {
        sigma2: f64,
    },
}

impl Diffusion {
    pub fn value(&self, v: f64) -> f64 {
        match self {
            Diffusion::Constant { value } => *value,
            Diffusion::QuarticWell { sigma2 } => {
                let w = 1.0 - v * v;
                0.5 * sigma2 * w * w
            }
        }
    }

    pub fn derivative(&self, v: f64) -> f64 {
        match self {
            Diffusion::Constant { .. } => 0.0,
            Diffusion::QuarticWell { sigma2 } => -2.0 * sigma2 * v * (1.0 - v * v),
        }
    }
}

/// How a background evolves in time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BackgroundEvolution {
    Frozen,
    /// Linear advection at speed `alpha` with periodic boundaries.
    Advected {
        alpha: f64,
    },
}

/// A background density sampled on grid centers. The drift it induces is the
/// nonlocal integral evaluated with the trapezoidal rule over the samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Background {
    samples: Vec<f64>,
    evolution: BackgroundEvolution,
    mass_at_construction: f64,
}

impl Background {
    pub fn new(
        samples: Vec<f64>,
        grid: &UniformGrid1D,
        evolution: BackgroundEvolution,
    ) -> Result<Self, ModelError> {
        if samples.len() != grid.n() {
            return Err(ModelError::LengthMismatch {
                got: samples.len(),
                expected: grid.n(),
            });
        }
        let mass_at_construction = grid.cell_sum(&samples);
        Ok(Self {
            samples,
            evolution,
            mass_at_construction,
        })
    }

    /// Gaussian background, discretely normalized so that the trapezoidal
    /// mass over the grid is exactly one (the analytic normalization differs
    /// on a truncated domain). With `bimodal` the density has symmetric peaks
    /// at `+-u_g`.
    pub fn gaussian(
        u_g: f64,
        sigma_g2: f64,
        grid: &UniformGrid1D,
        bimodal: bool,
        evolution: BackgroundEvolution,
    ) -> Self {
        let raw: Vec<f64> = grid
            .centers()
            .iter()
            .map(|&v| {
                let main = (-(v - u_g).powi(2) / (2.0 * sigma_g2)).exp();
                if bimodal {
                    main + (-(v + u_g).powi(2) / (2.0 * sigma_g2)).exp()
                } else {
                    main
                }
            })
            .collect();
        let beta = 1.0 / grid.trapezoid(&raw).expect("samples built on this grid");
        let samples = raw.into_iter().map(|x| beta * x).collect();
        Self::new(samples, grid, evolution).expect("samples built on this grid")
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn evolution(&self) -> BackgroundEvolution {
        self.evolution
    }

    pub fn mass_at_construction(&self) -> f64 {
        self.mass_at_construction
    }

    /// Trapezoidal mass of the current samples, the functional entering the
    /// nonlocal drift.
    pub fn trapezoid_mass(&self, grid: &UniformGrid1D) -> f64 {
        grid.trapezoid(&self.samples)
            .expect("length fixed at construction")
    }

    /// Trapezoidal first moment of the current samples.
    pub fn trapezoid_mean(&self, grid: &UniformGrid1D) -> f64 {
        let weighted: Vec<f64> = grid
            .centers()
            .iter()
            .zip(&self.samples)
            .map(|(&v, &g)| v * g)
            .collect();
        grid.trapezoid(&weighted)
            .expect("length fixed at construction")
    }

    /// One periodic Lax-Wendroff advection step, written in conservative
    /// (flux-difference) form so the plain cell sum telescopes exactly.
    pub fn lax_wendroff_step(
        &mut self,
        alpha: f64,
        dt: f64,
        grid: &UniformGrid1D,
    ) -> Result<(), ModelError> {
        let c = alpha * dt / grid.dv();
        if c > 1.0 {
            return Err(ModelError::CflViolation(c));
        }
        let n = self.samples.len();
        let g = &self.samples;
        // flux[i] approximates the advective flux through interface i+1/2
        let mut flux = vec![0.0; n];
        for i in 0..n {
            let right = g[(i + 1) % n];
            let left = g[i];
            flux[i] = 0.5 * c * (right + left) - 0.5 * c * c * (right - left);
        }
        let mut next = vec![0.0; n];
        for i in 0..n {
            let upstream = flux[(i + n - 1) % n];
            next[i] = g[i] - (flux[i] - upstream);
        }
        self.samples = next;
        Ok(())
    }
}

/// Nonlocal interaction drift `B[g](v)`: trapezoidal approximation of the
/// kernel-weighted first-moment integral at an arbitrary query point.
///
/// For a bounded-confidence kernel the window `[v - r, v + r]` usually cuts
/// through a cell; the integral is taken over the exact window, treating the
/// background as piecewise linear between samples. Putting the indicator
/// inside a full-domain trapezoid instead would make the drift jump each
/// time a window edge crosses a sample, and those jumps pollute measured
/// convergence orders.
pub fn interaction_drift(
    background: &Background,
    grid: &UniformGrid1D,
    kernel: &Kernel,
    v: f64,
) -> f64 {
    let centers = grid.centers();
    let g = background.samples();
    let lo = centers[0];
    let hi = centers[grid.n() - 1];
    let (a, b) = match kernel {
        Kernel::Uniform => (lo, hi),
        Kernel::BoundedConfidence { radius } => ((v - radius).max(lo), (v + radius).min(hi)),
    };
    if a >= b {
        return 0.0;
    }
    let integrand = |j: usize| (v - centers[j]) * g[j];
    // sample value of the integrand at an arbitrary point, with g piecewise
    // linear between cell centers
    let at = |x: f64| -> f64 {
        let j = ((x - lo) / grid.dv()).floor() as usize;
        let j = j.min(grid.n() - 2);
        let t = (x - centers[j]) / grid.dv();
        let gx = g[j] + t * (g[j + 1] - g[j]);
        (v - x) * gx
    };
    let j0 = ((a - lo) / grid.dv()).ceil() as usize;
    let j1 = ((b - lo) / grid.dv()).floor() as usize;
    if j0 > j1 {
        // the window lies inside one inter-sample gap
        return 0.5 * (at(a) + at(b)) * (b - a);
    }
    let mut total = 0.0;
    // composite trapezoid over the samples fully inside the window
    if j1 > j0 {
        let mut inner = 0.0;
        for j in j0 + 1..j1 {
            inner += integrand(j);
        }
        total += grid.dv() * (inner + 0.5 * (integrand(j0) + integrand(j1)));
    }
    // partial segments between the cuts and the first/last interior samples
    if a < centers[j0] {
        total += 0.5 * (at(a) + integrand(j0)) * (centers[j0] - a);
    }
    if b > centers[j1] {
        total += 0.5 * (integrand(j1) + at(b)) * (b - centers[j1]);
    }
    total
}

/// Total drift `C[g](v) = B[g](v) + D'(v)`.
pub fn total_drift(
    background: &Background,
    grid: &UniformGrid1D,
    kernel: &Kernel,
    diffusion: &Diffusion,
    v: f64,
) -> f64 {
    interaction_drift(background, grid, kernel, v) + diffusion.derivative(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid() -> UniformGrid1D {
        UniformGrid1D::new(-1.0, 1.0, 41).unwrap()
    }

    #[test]
    fn kernel_values() {
        let p = Kernel::BoundedConfidence { radius: 1.0 };
        assert_eq!(p.eval(0.1, 0.2), 1.0);
        assert_eq!(p.eval(-1.0, 1.0), 0.0);
        let sat = Kernel::BoundedConfidence { radius: 2.0 };
        for (v, vs) in [(-1.0, 1.0), (0.3, -0.9), (1.0, 1.0)] {
            assert_eq!(sat.eval(v, vs), 1.0);
        }
    }

    #[test]
    fn gaussian_background_is_normalized() {
        let g = grid();
        let bg = Background::gaussian(0.25, 0.01, &g, false, BackgroundEvolution::Frozen);
        assert_abs_diff_eq!(bg.trapezoid_mass(&g), 1.0, epsilon = 1e-13);
        let sym = Background::gaussian(0.0, 0.01, &g, false, BackgroundEvolution::Frozen);
        let s = sym.samples();
        for i in 0..g.n() {
            assert_abs_diff_eq!(s[i], s[g.n() - 1 - i], epsilon = 1e-13);
        }
    }

    #[test]
    fn bimodal_background_has_two_peaks() {
        let g = grid();
        let bg = Background::gaussian(0.5, 1e-2, &g, true, BackgroundEvolution::Frozen);
        let s = bg.samples();
        let peak_plus = g.cell_of(0.5);
        let peak_minus = g.cell_of(-0.5);
        for i in 0..g.n() {
            assert!(s[i] <= s[peak_plus].max(s[peak_minus]) + 1e-12);
        }
        assert!(s[peak_plus] > 10.0 * s[g.cell_of(0.0)]);
        assert!(s[peak_minus] > 10.0 * s[g.cell_of(0.0)]);
    }

    #[test]
    fn drift_moment_identity_for_uniform_kernel() {
        let g = grid();
        let bg = Background::gaussian(0.25, 0.01, &g, false, BackgroundEvolution::Frozen);
        let mass = bg.trapezoid_mass(&g);
        let mean = bg.trapezoid_mean(&g);
        for v in [-0.9, -0.2, 0.0, 0.4, 0.97] {
            let b = interaction_drift(&bg, &g, &Kernel::Uniform, v);
            assert_abs_diff_eq!(b, v * mass - mean, epsilon = 1e-10);
        }
    }

    #[test]
    fn zero_background_zero_drift() {
        let g = grid();
        let bg = Background::new(vec![0.0; g.n()], &g, BackgroundEvolution::Frozen).unwrap();
        assert_eq!(interaction_drift(&bg, &g, &Kernel::Uniform, 0.3), 0.0);
    }

    #[test]
    fn saturated_indicator_matches_uniform_kernel() {
        let g = grid();
        let bg = Background::gaussian(0.1, 0.05, &g, false, BackgroundEvolution::Frozen);
        let wide = Kernel::BoundedConfidence { radius: 2.0 };
        for v in [-0.8, 0.0, 0.5] {
            assert_abs_diff_eq!(
                interaction_drift(&bg, &g, &wide, v),
                interaction_drift(&bg, &g, &Kernel::Uniform, v),
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn total_drift_pieces() {
        let g = grid();
        let diff = Diffusion::QuarticWell { sigma2: 0.2 };
        let bg = Background::gaussian(0.25, 0.01, &g, false, BackgroundEvolution::Frozen);
        // D'(0) = 0 by symmetry
        assert_abs_diff_eq!(
            total_drift(&bg, &g, &Kernel::Uniform, &diff, 0.0),
            interaction_drift(&bg, &g, &Kernel::Uniform, 0.0),
            epsilon = 1e-15
        );
        // with no background the total drift is the analytic D'
        let zero = Background::new(vec![0.0; g.n()], &g, BackgroundEvolution::Frozen).unwrap();
        for v in [-0.6, 0.2, 0.9] {
            assert_abs_diff_eq!(
                total_drift(&zero, &g, &Kernel::Uniform, &diff, v),
                -2.0 * 0.2 * v * (1.0 - v * v),
                epsilon = 1e-15
            );
        }
        let const_diff = Diffusion::Constant { value: 0.7 };
        assert_abs_diff_eq!(
            total_drift(&bg, &g, &Kernel::Uniform, &const_diff, 0.4),
            interaction_drift(&bg, &g, &Kernel::Uniform, 0.4),
            epsilon = 1e-15
        );
    }

    #[test]
    fn lax_wendroff_constant_state_fixed() {
        let g = grid();
        let mut bg = Background::new(
            vec![0.7; g.n()],
            &g,
            BackgroundEvolution::Advected { alpha: 0.05 },
        )
        .unwrap();
        bg.lax_wendroff_step(0.05, 0.5 * g.dv() / 0.05, &g).unwrap();
        for &s in bg.samples() {
            assert_abs_diff_eq!(s, 0.7, epsilon = 1e-15);
        }
    }

    #[test]
    fn lax_wendroff_unit_cfl_shifts_one_cell() {
        let g = grid();
        let mut bg = Background::gaussian(
            -0.5,
            0.01,
            &g,
            false,
            BackgroundEvolution::Advected { alpha: 1.0 },
        );
        let before = bg.samples().to_vec();
        let dt = g.dv(); // CFL exactly 1
        bg.lax_wendroff_step(1.0, dt, &g).unwrap();
        let after = bg.samples();
        for (i, &value) in after.iter().enumerate() {
            let from = (i + g.n() - 1) % g.n();
            assert_abs_diff_eq!(value, before[from], epsilon = 1e-13);
        }
    }

    #[test]
    fn lax_wendroff_conserves_mass_over_many_steps() {
        let g = grid();
        let mut bg = Background::gaussian(
            -0.5,
            0.01,
            &g,
            false,
            BackgroundEvolution::Advected { alpha: 0.05 },
        );
        let mass0 = g.cell_sum(bg.samples());
        let dt = 0.5 * g.dv() / 0.05;
        for _ in 0..1000 {
            bg.lax_wendroff_step(0.05, dt, &g).unwrap();
        }
        let drift = (g.cell_sum(bg.samples()) - mass0).abs() / mass0.abs();
        assert!(drift <= 1e-12, "mass drift {drift}");
    }

    #[test]
    fn lax_wendroff_rejects_cfl_violation() {
        let g = grid();
        let mut bg = Background::gaussian(
            -0.5,
            0.01,
            &g,
            false,
            BackgroundEvolution::Advected { alpha: 1.0 },
        );
        assert!(bg.lax_wendroff_step(1.0, 1.5 * g.dv(), &g).is_err());
    }
}
