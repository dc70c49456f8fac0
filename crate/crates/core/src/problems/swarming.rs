//! 2D swarming model: self-propulsion, attraction toward the mean velocity
//! of a fixed background, and constant isotropic noise. Advanced by Strang
//! splitting with the 1D structure-preserving sweeps.

use crate::gpc::{GpcBasis, GpcField};
use crate::grid::UniformGrid2D;
use crate::model::Diffusion;
use crate::problems::{MassLaw, ProblemError};
use crate::quadrature::QuadRule;
use crate::scheme::FluxWorkspace;
use crate::stepping::{
    euler_row, PositivityMode, SemiImplicitOrder, SemiImplicitSolver, SteppingError,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwarmingConfig {
    /// Self-propulsion strength.
    pub alpha: f64,
    /// Noise intensity (constant diffusion).
    pub d: f64,
    /// Background mean position.
    pub mu_x: f64,
    pub mu_y: f64,
    /// Background spreads; the dynamics feel the background only through its
    /// mean, so these only shape the stored samples.
    pub sigma_x: f64,
    pub sigma_y: f64,
    /// Width of the isotropic initial bump.
    pub sigma02: f64,
    /// Initial mass law.
    pub rho: MassLaw,
}

impl Default for SwarmingConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            d: 0.2,
            mu_x: 0.0,
            mu_y: 0.0,
            sigma_x: 0.5,
            sigma_y: 0.5,
            sigma02: 0.5,
            rho: MassLaw {
                base: 1.0,
                slope: 0.5,
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct SwarmingProblem {
    pub config: SwarmingConfig,
    pub grid: UniformGrid2D,
    pub basis: GpcBasis,
    /// Background samples on the 2D grid, trapezoidally normalized to mass 1.
    pub background: Vec<f64>,
    /// Mean velocity of the background, computed by the 2D trapezoid.
    pub u_g: (f64, f64),
    pub diffusion: Diffusion,
}

impl SwarmingProblem {
    pub fn new(
        config: SwarmingConfig,
        grid: UniformGrid2D,
        basis: GpcBasis,
    ) -> Result<Self, ProblemError> {
        config.rho.validate()?;
        let (nx, ny) = (grid.x.n(), grid.y.n());
        let mut raw = vec![0.0; nx * ny];
        for ix in 0..nx {
            for iy in 0..ny {
                let (x, y) = grid.center(ix, iy);
                raw[grid.index(ix, iy)] = (-0.5
                    * ((x - config.mu_x).powi(2) / config.sigma_x.powi(2)
                        + (y - config.mu_y).powi(2) / config.sigma_y.powi(2)))
                .exp();
            }
        }
        let beta = 1.0 / grid.trapezoid(&raw)?;
        let background: Vec<f64> = raw.into_iter().map(|g| beta * g).collect();

        let mut wx = vec![0.0; nx * ny];
        let mut wy = vec![0.0; nx * ny];
        for ix in 0..nx {
            for iy in 0..ny {
                let (x, y) = grid.center(ix, iy);
                let idx = grid.index(ix, iy);
                wx[idx] = x * background[idx];
                wy[idx] = y * background[idx];
            }
        }
        let u_g = (grid.trapezoid(&wx)?, grid.trapezoid(&wy)?);
        let diffusion = Diffusion::Constant { value: config.d };
        Ok(Self {
            config,
            grid,
            basis,
            background,
            u_g,
            diffusion,
        })
    }

    /// Drift vector `alpha v (|v|^2 - 1) + (v - u_g)` at `v = (x, y)`.
    pub fn drift(&self, x: f64, y: f64) -> (f64, f64) {
        let speed2 = x * x + y * y;
        let propulsion = self.config.alpha * (speed2 - 1.0);
        (
            propulsion * x + (x - self.u_g.0),
            propulsion * y + (y - self.u_g.1),
        )
    }

    fn initial_shape(&self, x: f64, y: f64) -> f64 {
        (-(x * x + y * y) / (2.0 * self.config.sigma02)).exp()
    }

    pub fn project_initial(&self) -> GpcField {
        let (nx, ny) = (self.grid.x.n(), self.grid.y.n());
        let mut shape = vec![0.0; nx * ny];
        for ix in 0..nx {
            for iy in 0..ny {
                let (x, y) = self.grid.center(ix, iy);
                shape[self.grid.index(ix, iy)] = self.initial_shape(x, y);
            }
        }
        let shape_mass = self.grid.cell_sum(&shape);
        self.basis.project_cells(nx * ny, |theta, i| {
            self.config.rho.eval(theta) / shape_mass * shape[i]
        })
    }

    /// Log of the stationary shape: `-(alpha |v|^4/4 + (1-alpha) |v|^2/2 -
    /// u_g . v) / D` up to a constant.
    pub fn log_steady_shape(&self, x: f64, y: f64) -> f64 {
        let speed2 = x * x + y * y;
        let potential = self.config.alpha * speed2 * speed2 / 4.0
            + (1.0 - self.config.alpha) * speed2 / 2.0
            - (self.u_g.0 * x + self.u_g.1 * y);
        -potential / self.config.d
    }

    fn steady_shape(&self) -> Vec<f64> {
        let (nx, ny) = (self.grid.x.n(), self.grid.y.n());
        let mut shape = vec![0.0; nx * ny];
        // shift the exponent by its maximum before exponentiating
        let mut max_log = f64::NEG_INFINITY;
        let mut logs = vec![0.0; nx * ny];
        for ix in 0..nx {
            for iy in 0..ny {
                let (x, y) = self.grid.center(ix, iy);
                let l = self.log_steady_shape(x, y);
                logs[self.grid.index(ix, iy)] = l;
                max_log = max_log.max(l);
            }
        }
        for (s, l) in shape.iter_mut().zip(&logs) {
            *s = (l - max_log).exp();
        }
        shape
    }

    pub fn projected_mass(&self, h: usize) -> f64 {
        self.basis
            .expectation(|t| self.config.rho.eval(t) * crate::gpc::orthonormal_legendre(h, t))
    }

    /// Stationary state of projection `h`, discretely normalized to the
    /// conserved projected mass.
    pub fn steady_state_row(&self, h: usize) -> Vec<f64> {
        let shape = self.steady_shape();
        let c_h = self.projected_mass(h) / self.grid.cell_sum(&shape);
        shape.iter().map(|s| c_h * s).collect()
    }

    /// Maximizer of the analytic stationary state.
    pub fn steady_state_maximizer(&self) -> (f64, f64) {
        let (ux, uy) = self.u_g;
        let norm = (ux * ux + uy * uy).sqrt();
        let alpha = self.config.alpha;
        if norm == 0.0 {
            // potential alpha r^4/4 + (1-alpha) r^2/2: minimum at 0 when
            // alpha <= 1, else on the circle of radius sqrt(1 - 1/alpha)
            if alpha <= 1.0 {
                return (0.0, 0.0);
            }
            let r = (1.0 - 1.0 / alpha).sqrt();
            return (r, 0.0);
        }
        // along the direction of u_g, radius solves alpha r^3 + (1-alpha) r
        // = |u_g|; bisect on [0, ...]
        let f = |r: f64| alpha * r * r * r + (1.0 - alpha) * r - norm;
        let mut lo = 0.0;
        let mut hi = 1.0 + norm.max(1.0);
        while f(hi) < 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let r = 0.5 * (lo + hi);
        (r * ux / norm, r * uy / norm)
    }

    /// Workspaces for the x-sweeps (one per y line) and y-sweeps (one per
    /// x line). Frozen background, so these never change.
    pub fn sweep_workspaces(&self, rule: &QuadRule) -> (Vec<FluxWorkspace>, Vec<FluxWorkspace>) {
        let ws_x = (0..self.grid.y.n())
            .map(|iy| {
                let y = self.grid.y.center(iy);
                FluxWorkspace::build(&self.grid.x, |x| self.drift(x, y).0, &self.diffusion, rule)
            })
            .collect();
        let ws_y = (0..self.grid.x.n())
            .map(|ix| {
                let x = self.grid.x.center(ix);
                FluxWorkspace::build(&self.grid.y, |y| self.drift(x, y).1, &self.diffusion, rule)
            })
            .collect();
        (ws_x, ws_y)
    }
}

/// 1D scheme applied inside each sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepScheme {
    Euler,
    SemiImplicit(SemiImplicitOrder),
}

enum LineSolver {
    Euler { dt: f64 },
    SemiImplicit(Box<SemiImplicitSolver>),
}

impl LineSolver {
    fn new(
        ws: &FluxWorkspace,
        dt: f64,
        scheme: SweepScheme,
        mode: PositivityMode,
    ) -> Result<Self, SteppingError> {
        Ok(match scheme {
            SweepScheme::Euler => LineSolver::Euler { dt },
            SweepScheme::SemiImplicit(order) => {
                LineSolver::SemiImplicit(Box::new(SemiImplicitSolver::new(ws, dt, order, mode)?))
            }
        })
    }

    fn apply(&self, row: &[f64], ws: &FluxWorkspace) -> Vec<f64> {
        match self {
            LineSolver::Euler { dt } => euler_row(row, ws, *dt),
            LineSolver::SemiImplicit(solver) => solver.step_row(row),
        }
    }
}

/// Strang-split 2D stepper with per-line solvers prepared once (the
/// background is frozen, so the weights are time-independent). The x sweeps
/// run at half the step, the y sweep at the full step.
pub struct SplitStepper2D {
    grid: UniformGrid2D,
    ws_x: Vec<FluxWorkspace>,
    ws_y: Vec<FluxWorkspace>,
    solvers_x_half: Vec<LineSolver>,
    solvers_y_full: Vec<LineSolver>,
    dt: f64,
}

impl SplitStepper2D {
    pub fn new(
        grid: UniformGrid2D,
        ws_x: Vec<FluxWorkspace>,
        ws_y: Vec<FluxWorkspace>,
        dt: f64,
        scheme: SweepScheme,
        mode: PositivityMode,
    ) -> Result<Self, SteppingError> {
        let solvers_x_half = ws_x
            .iter()
            .map(|ws| LineSolver::new(ws, 0.5 * dt, scheme, mode))
            .collect::<Result<_, _>>()?;
        let solvers_y_full = ws_y
            .iter()
            .map(|ws| LineSolver::new(ws, dt, scheme, mode))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            grid,
            ws_x,
            ws_y,
            solvers_x_half,
            solvers_y_full,
            dt,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// The tightest semi-implicit positivity bound over all sweep lines.
    pub fn semiimplicit_bound(ws_x: &[FluxWorkspace], ws_y: &[FluxWorkspace]) -> f64 {
        ws_x.iter()
            .chain(ws_y)
            .map(crate::stepping::semiimplicit_dt_bound)
            .fold(f64::INFINITY, f64::min)
    }

    fn sweep_x(&self, field: &mut GpcField, half: bool) {
        let (nx, ny) = (self.grid.x.n(), self.grid.y.n());
        let mut line = vec![0.0; nx];
        for h in 0..field.n_rows() {
            for iy in 0..ny {
                let row = field.row_mut(h);
                for ix in 0..nx {
                    line[ix] = row[ix * ny + iy];
                }
                let solver = if half {
                    &self.solvers_x_half[iy]
                } else {
                    unreachable!("x sweeps always run at the half step")
                };
                let updated = solver.apply(&line, &self.ws_x[iy]);
                let row = field.row_mut(h);
                for ix in 0..nx {
                    row[ix * ny + iy] = updated[ix];
                }
            }
        }
    }

    fn sweep_y(&self, field: &mut GpcField) {
        let (nx, ny) = (self.grid.x.n(), self.grid.y.n());
        for h in 0..field.n_rows() {
            for ix in 0..nx {
                let row = field.row_mut(h);
                let line: Vec<f64> = row[ix * ny..(ix + 1) * ny].to_vec();
                let updated = self.solvers_y_full[ix].apply(&line, &self.ws_y[ix]);
                let row = field.row_mut(h);
                row[ix * ny..(ix + 1) * ny].copy_from_slice(&updated);
            }
        }
    }

    /// One Strang-ordered step: x half, y full, x half.
    pub fn step(&self, field: &mut GpcField) {
        self.sweep_x(field, true);
        self.sweep_y(field);
        self.sweep_x(field, true);
    }
}
