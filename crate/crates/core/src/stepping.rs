//! Time integrators for the projected system: explicit Euler and RK4, plus
//! semi-implicit solvers of order one and two built on a tridiagonal
//! factorization shared by all projections.
//!
//! Positivity comes with step-size restrictions. The explicit bound is
//! `dt <= dv^2 / (2 (M dv + D))` with `M = max |C_tilde|` and
//! `D = max D_{i+1/2}`; the semi-implicit one is `dt < dv / (2 M)`. The
//! explicit update is applied in transfer-coefficient form
//!
//! ```text
//! f_i' = nu G-_{i-1/2} f_{i-1} + (1 - nu (G+_{i-1/2} + G-_{i+1/2})) f_i
//!        + nu G+_{i+1/2} f_{i+1},        nu = dt / dv^2
//! ```
//!
//! whose off-diagonal coefficients are nonnegative by construction, so a
//! nonnegative row stays nonnegative in exact *and* floating-point
//! arithmetic once the diagonal is nonnegative under the bound.

use crate::gpc::GpcField;
use crate::scheme::FluxWorkspace;
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum SteppingError {
    #[error("dt = {dt} violates the {scheme} positivity bound {bound}")]
    BoundViolation {
        dt: f64,
        bound: f64,
        scheme: &'static str,
    },
    #[error("tridiagonal solver hit a zero pivot at row {0}")]
    ZeroPivot(usize),
    #[error("tridiagonal system is inconsistent: {0}")]
    BadSystem(String),
}

/// Explicit positivity bound `dv^2 / (2 (M dv + D))`.
pub fn explicit_dt_bound(ws: &FluxWorkspace) -> f64 {
    let dv = ws.dv();
    let m = ws.max_drift();
    let d = ws.max_diffusion();
    dv * dv / (2.0 * (m * dv + d))
}

/// Semi-implicit positivity bound `dv / (2 M)`; infinite for pure diffusion.
pub fn semiimplicit_dt_bound(ws: &FluxWorkspace) -> f64 {
    let m = ws.max_drift();
    if m == 0.0 {
        f64::INFINITY
    } else {
        ws.dv() / (2.0 * m)
    }
}

/// Which bound, if any, is enforced before a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositivityMode {
    Explicit,
    SemiImplicit,
    Manual,
}

fn check_bound(ws: &FluxWorkspace, dt: f64, mode: PositivityMode) -> Result<(), SteppingError> {
    match mode {
        PositivityMode::Explicit => {
            let bound = explicit_dt_bound(ws);
            if dt > bound * (1.0 + 1e-12) {
                return Err(SteppingError::BoundViolation {
                    dt,
                    bound,
                    scheme: "explicit",
                });
            }
        }
        PositivityMode::SemiImplicit => {
            let bound = semiimplicit_dt_bound(ws);
            if dt >= bound {
                return Err(SteppingError::BoundViolation {
                    dt,
                    bound,
                    scheme: "semi-implicit",
                });
            }
        }
        PositivityMode::Manual => {}
    }
    Ok(())
}

/// One forward Euler step of a single row, in transfer-coefficient form.
pub fn euler_row(row: &[f64], ws: &FluxWorkspace, dt: f64) -> Vec<f64> {
    let n = row.len();
    let nu = dt / (ws.dv() * ws.dv());
    let gm = ws.g_minus();
    let gp = ws.g_plus();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let from_left = if i > 0 {
            nu * gm[i - 1] * row[i - 1]
        } else {
            0.0
        };
        let from_right = if i + 1 < n {
            nu * gp[i] * row[i + 1]
        } else {
            0.0
        };
        let outflow =
            nu * (if i > 0 { gp[i - 1] } else { 0.0 } + if i + 1 < n { gm[i] } else { 0.0 });
        // under the explicit bound outflow <= 1, and 1 - x is exact in
        // floating point for x in [1/2, 2], so `stay` cannot round below
        // zero; beyond the bound the negative value must be kept as is or
        // the column sums (mass) break
        let stay = 1.0 - outflow;
        out[i] = from_left + stay * row[i] + from_right;
    }
    out
}

/// Forward Euler for every projection; weights are shared across rows.
pub fn step_euler(
    field: &GpcField,
    ws: &FluxWorkspace,
    dt: f64,
    mode: PositivityMode,
) -> Result<GpcField, SteppingError> {
    check_bound(ws, dt, mode)?;
    let rows = field
        .rows()
        .iter()
        .map(|row| euler_row(row, ws, dt))
        .collect();
    Ok(GpcField::from_rows(rows))
}

/// Classical RK4 where each stage re-evaluates background-dependent weights
/// through `workspace_at`. For a frozen background the provider returns the
/// same workspace at every stage time.
pub fn step_rk4<P>(
    field: &GpcField,
    mut workspace_at: P,
    t: f64,
    dt: f64,
    mode: PositivityMode,
) -> Result<GpcField, SteppingError>
where
    P: FnMut(f64) -> FluxWorkspace,
{
    let ws1 = workspace_at(t);
    check_bound(&ws1, dt, mode)?;
    let half = 0.5 * dt;
    let ws2 = workspace_at(t + half);
    let ws4 = workspace_at(t + dt);

    let k1 = apply_rhs(field, &ws1);
    let s2 = add_scaled(field, &k1, half);
    let k2 = apply_rhs(&s2, &ws2);
    let s3 = add_scaled(field, &k2, half);
    let k3 = apply_rhs(&s3, &ws2);
    let s4 = add_scaled(field, &k3, dt);
    let k4 = apply_rhs(&s4, &ws4);

    let mut rows = Vec::with_capacity(field.n_rows());
    for h in 0..field.n_rows() {
        let f = field.row(h);
        let row: Vec<f64> = (0..field.n_cells())
            .map(|i| {
                f[i] + dt / 6.0
                    * (k1.row(h)[i] + 2.0 * k2.row(h)[i] + 2.0 * k3.row(h)[i] + k4.row(h)[i])
            })
            .collect();
        rows.push(row);
    }
    Ok(GpcField::from_rows(rows))
}

fn apply_rhs(field: &GpcField, ws: &FluxWorkspace) -> GpcField {
    let rows = field
        .rows()
        .iter()
        .map(|row| ws.rhs(row).expect("row length fixed by the field"))
        .collect();
    GpcField::from_rows(rows)
}

fn add_scaled(base: &GpcField, delta: &GpcField, factor: f64) -> GpcField {
    let rows = base
        .rows()
        .iter()
        .zip(delta.rows())
        .map(|(b, d)| b.iter().zip(d).map(|(x, y)| x + factor * y).collect())
        .collect();
    GpcField::from_rows(rows)
}

/// LU factorization of a tridiagonal matrix, reusable across right-hand
/// sides. `lower` and `upper` have length `n - 1`.
#[derive(Debug, Clone)]
pub struct ThomasFactorization {
    /// Multipliers `l_i / pivot_{i-1}`.
    multipliers: Vec<f64>,
    /// Pivots after elimination.
    pivots: Vec<f64>,
    upper: Vec<f64>,
}

impl ThomasFactorization {
    pub fn new(lower: &[f64], diag: &[f64], upper: &[f64]) -> Result<Self, SteppingError> {
        let n = diag.len();
        if lower.len() != n - 1 || upper.len() != n - 1 {
            return Err(SteppingError::BadSystem(format!(
                "diag has {n} entries, off-diagonals must have {}",
                n - 1
            )));
        }
        let mut pivots = vec![0.0; n];
        let mut multipliers = vec![0.0; n - 1];
        pivots[0] = diag[0];
        if pivots[0] == 0.0 {
            return Err(SteppingError::ZeroPivot(0));
        }
        for i in 1..n {
            let m = lower[i - 1] / pivots[i - 1];
            multipliers[i - 1] = m;
            pivots[i] = diag[i] - m * upper[i - 1];
            if pivots[i] == 0.0 {
                return Err(SteppingError::ZeroPivot(i));
            }
        }
        Ok(Self {
            multipliers,
            pivots,
            upper: upper.to_vec(),
        })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.pivots.len();
        debug_assert_eq!(rhs.len(), n);
        let mut x = vec![0.0; n];
        x[0] = rhs[0];
        for i in 1..n {
            x[i] = rhs[i] - self.multipliers[i - 1] * x[i - 1];
        }
        x[n - 1] /= self.pivots[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = (x[i] - self.upper[i] * x[i + 1]) / self.pivots[i];
        }
        x
    }
}

/// Solve one tridiagonal system.
pub fn thomas_solve(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &[f64],
) -> Result<Vec<f64>, SteppingError> {
    Ok(ThomasFactorization::new(lower, diag, upper)?.solve(rhs))
}

/// Tridiagonal representation of `I - c L` where `L` is the semi-discrete
/// spatial operator of the workspace. Off-diagonals are nonpositive and every
/// column sums to one, so the matrix is an M-matrix and its inverse maps
/// nonnegative data to nonnegative data.
pub fn implicit_matrix(ws: &FluxWorkspace, c: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = ws.n_cells();
    let nu = c / (ws.dv() * ws.dv());
    let gm = ws.g_minus();
    let gp = ws.g_plus();
    let mut lower = vec![0.0; n - 1];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n - 1];
    for i in 0..n {
        let outflow =
            nu * (if i > 0 { gp[i - 1] } else { 0.0 } + if i + 1 < n { gm[i] } else { 0.0 });
        diag[i] = 1.0 + outflow;
        if i > 0 {
            lower[i - 1] = -nu * gm[i - 1];
        }
        if i + 1 < n {
            upper[i] = -nu * gp[i];
        }
    }
    (lower, diag, upper)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SemiImplicitOrder {
    First,
    Second,
}

/// Semi-implicit solver with the factorization shared by all projections.
///
/// Order one solves `(I - dt L) f' = f` with weights frozen at the current
/// time (coincides with backward Euler for a frozen background). Order two is
/// the trapezoidal update `(I - dt/2 L) f' = (I + dt/2 L) f` with the
/// workspace evaluated at the half step.
#[derive(Debug, Clone)]
pub struct SemiImplicitSolver {
    order: SemiImplicitOrder,
    dt: f64,
    factorization: ThomasFactorization,
    ws: FluxWorkspace,
}

impl SemiImplicitSolver {
    /// `ws` must be the workspace at `t^n` for order one and at `t^{n+1/2}`
    /// for order two.
    pub fn new(
        ws: &FluxWorkspace,
        dt: f64,
        order: SemiImplicitOrder,
        mode: PositivityMode,
    ) -> Result<Self, SteppingError> {
        check_bound(ws, dt, mode)?;
        let c = match order {
            SemiImplicitOrder::First => dt,
            SemiImplicitOrder::Second => 0.5 * dt,
        };
        let (lower, diag, upper) = implicit_matrix(ws, c);
        let factorization = ThomasFactorization::new(&lower, &diag, &upper)?;
        Ok(Self {
            order,
            dt,
            factorization,
            ws: ws.clone(),
        })
    }

    pub fn step_row(&self, row: &[f64]) -> Vec<f64> {
        match self.order {
            SemiImplicitOrder::First => self.factorization.solve(row),
            SemiImplicitOrder::Second => {
                let rhs = euler_row(row, &self.ws, 0.5 * self.dt);
                self.factorization.solve(&rhs)
            }
        }
    }

    pub fn step(&self, field: &GpcField) -> GpcField {
        let rows = field.rows().iter().map(|row| self.step_row(row)).collect();
        GpcField::from_rows(rows)
    }
}

/// Convenience wrapper building the solver and advancing the whole field.
pub fn step_semi_implicit(
    field: &GpcField,
    ws: &FluxWorkspace,
    dt: f64,
    order: SemiImplicitOrder,
    mode: PositivityMode,
) -> Result<GpcField, SteppingError> {
    let solver = SemiImplicitSolver::new(ws, dt, order, mode)?;
    Ok(solver.step(field))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::UniformGrid1D;
    use crate::model::{interaction_drift, Background, BackgroundEvolution, Diffusion, Kernel};
    use crate::quadrature::{QuadKind, QuadRule};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> UniformGrid1D {
        UniformGrid1D::new(-1.0, 1.0, 41).unwrap()
    }

    fn test1_workspace(g: &UniformGrid1D) -> FluxWorkspace {
        let diff = Diffusion::QuarticWell { sigma2: 0.2 };
        let bg = Background::gaussian(0.25, 0.01, g, false, BackgroundEvolution::Frozen);
        let rule = QuadRule::new(QuadKind::GaussLegendre(8)).unwrap();
        FluxWorkspace::build(
            g,
            |v| interaction_drift(&bg, g, &Kernel::Uniform, v),
            &diff,
            &rule,
        )
    }

    fn mass(row: &[f64], dv: f64) -> f64 {
        dv * row.iter().sum::<f64>()
    }

    #[test]
    fn explicit_bound_formula() {
        let g = UniformGrid1D::new(0.0, 1.0, 10).unwrap();
        let diff = Diffusion::Constant { value: 1.0 };
        let rule = QuadRule::new(QuadKind::NC2).unwrap();
        // constant drift so that C~ = 1 everywhere
        let ws = FluxWorkspace::build(&g, |_| 1.0, &diff, &rule);
        assert_abs_diff_eq!(ws.max_drift(), 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(explicit_dt_bound(&ws), 0.01 / 2.2, epsilon = 1e-15);
        // pure diffusion: dv^2 / (2 D)
        let ws0 = FluxWorkspace::build(&g, |_| 0.0, &diff, &rule);
        assert_abs_diff_eq!(explicit_dt_bound(&ws0), 0.005, epsilon = 1e-16);
        assert_eq!(semiimplicit_dt_bound(&ws0), f64::INFINITY);
        assert_abs_diff_eq!(semiimplicit_dt_bound(&ws), 0.05, epsilon = 1e-15);
    }

    #[test]
    fn semiimplicit_bound_test2_numbers() {
        let g = grid();
        let diff = Diffusion::Constant { value: 1.0 };
        let rule = QuadRule::new(QuadKind::NC2).unwrap();
        let ws = FluxWorkspace::build(&g, |_| 2.5, &diff, &rule);
        assert_abs_diff_eq!(
            semiimplicit_dt_bound(&ws),
            (2.0 / 41.0) / 5.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn explicit_bound_admits_parabolic_heuristic_step() {
        // the conventional parabolic step dv^2/(2 sigma^2) stays below the
        // positivity bound for this drift/diffusion balance
        let g = grid();
        let ws = test1_workspace(&g);
        let bound = explicit_dt_bound(&ws);
        let heuristic = g.dv() * g.dv() / (2.0 * 0.2);
        assert!(
            heuristic <= bound,
            "heuristic {heuristic} exceeds bound {bound}"
        );
    }

    #[test]
    fn euler_zero_dt_is_identity() {
        let g = grid();
        let ws = test1_workspace(&g);
        let row: Vec<f64> = g.centers().iter().map(|v| (1.0 - v * v).max(0.0)).collect();
        let field = GpcField::from_rows(vec![row.clone()]);
        let out = step_euler(&field, &ws, 0.0, PositivityMode::Explicit).unwrap();
        assert_eq!(out.row(0), row.as_slice());
    }

    #[test]
    fn euler_rejects_bound_violation() {
        let g = grid();
        let ws = test1_workspace(&g);
        let field = GpcField::from_rows(vec![vec![1.0; g.n()]]);
        let too_big = 2.0 * explicit_dt_bound(&ws);
        assert!(step_euler(&field, &ws, too_big, PositivityMode::Explicit).is_err());
        assert!(step_euler(&field, &ws, too_big, PositivityMode::Manual).is_ok());
    }

    #[test]
    fn euler_preserves_positivity_at_exact_bound() {
        let g = grid();
        let ws = test1_workspace(&g);
        let dt = explicit_dt_bound(&ws);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            let row: Vec<f64> = (0..g.n()).map(|_| rng.gen_range(0.0..2.0)).collect();
            let mut field = GpcField::from_rows(vec![row]);
            for _ in 0..50 {
                field = step_euler(&field, &ws, dt, PositivityMode::Explicit).unwrap();
            }
            assert!(field.row(0).iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn euler_conserves_mass() {
        let g = grid();
        let ws = test1_workspace(&g);
        let dt = explicit_dt_bound(&ws);
        let row: Vec<f64> = g.centers().iter().map(|v| 1.0 + 0.5 * v).collect();
        let m0 = mass(&row, g.dv());
        let mut field = GpcField::from_rows(vec![row]);
        for _ in 0..10_000 {
            field = step_euler(&field, &ws, dt, PositivityMode::Explicit).unwrap();
        }
        let m1 = mass(field.row(0), g.dv());
        assert!(
            ((m1 - m0) / m0).abs() <= 1e-13,
            "mass drift {}",
            (m1 - m0) / m0
        );
    }

    #[test]
    fn rk4_zero_dt_identity_and_mass() {
        let g = grid();
        let ws = test1_workspace(&g);
        let row: Vec<f64> = g.centers().iter().map(|v| (-v * v / 0.05).exp()).collect();
        let field = GpcField::from_rows(vec![row.clone()]);
        let out = step_rk4(&field, |_| ws.clone(), 0.0, 0.0, PositivityMode::Manual).unwrap();
        assert_eq!(out.row(0), row.as_slice());

        let dt = explicit_dt_bound(&ws);
        let m0 = mass(&row, g.dv());
        let mut f = field;
        for k in 0..2000 {
            f = step_rk4(
                &f,
                |_| ws.clone(),
                k as f64 * dt,
                dt,
                PositivityMode::Explicit,
            )
            .unwrap();
        }
        let m1 = mass(f.row(0), g.dv());
        assert!(((m1 - m0) / m0).abs() <= 1e-13);
    }

    #[test]
    fn rk4_fourth_order_on_diffusion_mode() {
        // pure diffusion with a discrete Neumann-Laplacian eigenvector: the
        // semi-discrete solution is exp(mu t) times the mode, so the time
        // order can be read off a dt-halving sweep
        let g = UniformGrid1D::new(0.0, 1.0, 16).unwrap();
        let d = 0.3;
        let diff = Diffusion::Constant { value: d };
        let rule = QuadRule::new(QuadKind::NC2).unwrap();
        let ws = FluxWorkspace::build(&g, |_| 0.0, &diff, &rule);
        let n = g.n();
        let k = 3.0;
        let mode: Vec<f64> = (0..n)
            .map(|i| (k * std::f64::consts::PI * (i as f64 + 0.5) / n as f64).cos())
            .collect();
        let mu = -2.0 * d / (g.dv() * g.dv()) * (1.0 - (k * std::f64::consts::PI / n as f64).cos());
        let t_final = 0.1;
        let err_at = |steps: usize| -> f64 {
            let dt = t_final / steps as f64;
            let mut f = GpcField::from_rows(vec![mode.clone()]);
            for s in 0..steps {
                f = step_rk4(
                    &f,
                    |_| ws.clone(),
                    s as f64 * dt,
                    dt,
                    PositivityMode::Manual,
                )
                .unwrap();
            }
            let exact: Vec<f64> = mode.iter().map(|m| m * (mu * t_final).exp()).collect();
            f.row(0)
                .iter()
                .zip(&exact)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max)
        };
        let e1 = err_at(20);
        let e2 = err_at(40);
        let order = (e1 / e2).log2();
        assert!((order - 4.0).abs() < 0.3, "observed order {order}");
    }

    #[test]
    fn thomas_identity_and_dense_oracle() {
        let rhs = vec![1.0, -2.0, 3.5, 0.25];
        let x = thomas_solve(&[0.0; 3], &[1.0; 4], &[0.0; 3], &rhs).unwrap();
        assert_eq!(x, rhs);

        // 3x3 with a known inverse: A = [[2,1,0],[1,2,1],[0,1,2]]
        let lower = [1.0, 1.0];
        let diag = [2.0, 2.0, 2.0];
        let upper = [1.0, 1.0];
        let b = [1.0, 0.0, 1.0];
        // det = 4; A^{-1} b computed by hand: x = (1/4)[3b0-2b1+b2, -2b0+4b1-2b2, b0-2b1+3b2]
        let expected = [1.0, -1.0, 1.0];
        let x = thomas_solve(&lower, &diag, &upper, &b).unwrap();
        for (a, e) in x.iter().zip(expected) {
            assert_abs_diff_eq!(*a, e, epsilon = 1e-14);
        }

        // Laplacian-like 20x20 vs a dense Gaussian elimination oracle
        let n = 20;
        let lower = vec![-1.0; n - 1];
        let upper = vec![-1.0; n - 1];
        let diag: Vec<f64> = (0..n).map(|i| 2.0 + 0.1 * i as f64).collect();
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let x = thomas_solve(&lower, &diag, &upper, &rhs).unwrap();
        let dense = dense_solve(&lower, &diag, &upper, &rhs);
        for (a, b) in x.iter().zip(&dense) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }

        assert!(thomas_solve(&[0.0], &[0.0, 1.0], &[0.0], &[1.0, 1.0]).is_err());
    }

    fn dense_solve(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
        let n = diag.len();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            a[i][i] = diag[i];
            if i > 0 {
                a[i][i - 1] = lower[i - 1];
            }
            if i + 1 < n {
                a[i][i + 1] = upper[i];
            }
        }
        let mut b = rhs.to_vec();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            let pivot_row = a[col].clone();
            for r in col + 1..n {
                let m = a[r][col] / pivot_row[col];
                for (c, &pv) in pivot_row.iter().enumerate().skip(col) {
                    a[r][c] -= m * pv;
                }
                b[r] -= m * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..n {
                s -= a[i][j] * x[j];
            }
            x[i] = s / a[i][i];
        }
        x
    }

    #[test]
    fn semi_implicit_zero_dt_identity() {
        let g = grid();
        let ws = test1_workspace(&g);
        let row: Vec<f64> = g.centers().iter().map(|v| 1.0 + v).collect();
        let field = GpcField::from_rows(vec![row.clone()]);
        for order in [SemiImplicitOrder::First, SemiImplicitOrder::Second] {
            let out = step_semi_implicit(&field, &ws, 0.0, order, PositivityMode::Manual).unwrap();
            for (a, b) in out.row(0).iter().zip(&row) {
                assert_abs_diff_eq!(*a, *b, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn semi_implicit_conserves_mass_and_positivity() {
        let g = grid();
        let ws = test1_workspace(&g);
        let dt = 0.99 * semiimplicit_dt_bound(&ws);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let row: Vec<f64> = (0..g.n()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let m0 = mass(&row, g.dv());
        let mut field = GpcField::from_rows(vec![row]);
        for _ in 0..1000 {
            field = step_semi_implicit(
                &field,
                &ws,
                dt,
                SemiImplicitOrder::First,
                PositivityMode::SemiImplicit,
            )
            .unwrap();
            assert!(field.row(0).iter().all(|&x| x >= 0.0));
        }
        let m1 = mass(field.row(0), g.dv());
        assert!(((m1 - m0) / m0).abs() <= 1e-12);
    }

    #[test]
    fn semi_implicit_rejects_bound_violation() {
        let g = grid();
        let ws = test1_workspace(&g);
        let field = GpcField::from_rows(vec![vec![1.0; g.n()]]);
        let dt = 1.01 * semiimplicit_dt_bound(&ws);
        assert!(step_semi_implicit(
            &field,
            &ws,
            dt,
            SemiImplicitOrder::First,
            PositivityMode::SemiImplicit
        )
        .is_err());
    }

    #[test]
    fn factorization_shared_across_rows_matches_per_row_solve() {
        let g = grid();
        let ws = test1_workspace(&g);
        let dt = 0.5 * semiimplicit_dt_bound(&ws);
        let rows: Vec<Vec<f64>> = (0..4)
            .map(|h: i32| g.centers().iter().map(|v| (1.0 + v).powi(h + 1)).collect())
            .collect();
        let field = GpcField::from_rows(rows.clone());
        let solver =
            SemiImplicitSolver::new(&ws, dt, SemiImplicitOrder::First, PositivityMode::Manual)
                .unwrap();
        let stepped = solver.step(&field);
        for (h, row) in rows.iter().enumerate() {
            let single = solver.step_row(row);
            assert_eq!(stepped.row(h), single.as_slice());
        }
    }
}
