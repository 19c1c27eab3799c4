//! Sparse SPD and non-negative QP solvers.
//!
//! [`solve_spd`] is a Jacobi-preconditioned conjugate gradient.
//!
//! [`solve_nnqp`] minimizes `1/2 x'Qx + c'x` subject to `x >= 0` with an
//! augmented Lagrangian on the bound constraints. Each outer iteration
//! minimizes the augmented Lagrangian
//!
//! ```text
//! 1/2 x'Qx + c'x + 1/(2 rho) * |max(0, mu - rho x)|^2
//! ```
//!
//! with semismooth Newton steps (each one a shifted SPD solve by the same
//! conjugate gradient), updates the multipliers `mu <- max(0, mu - rho x)`
//! and then refines the predicted active set with exact reduced solves until
//! the KKT conditions hold. The iterate is projected onto `x >= 0` before it
//! is scored, so every recorded objective belongs to a feasible point.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::SolverError;
use crate::graph::{dot, SparseQuadratic, SparseSymmetric};

/// Iteration and tolerance settings shared by both solvers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Relative residual target `|Mt - r| <= cg_tol |r|`. The SPD solve also
    /// requires `|(Mt - r)_i / M_ii| <= cg_tol` on every row.
    pub cg_tol: f64,
    /// Iteration cap; `None` means `max(500, 10 sqrt(n))`.
    pub cg_max_iter: Option<usize>,
    /// Initial penalty, relative to the mean diagonal of `Q`.
    pub al_penalty_init: f64,
    pub al_penalty_growth: f64,
    pub al_outer_max: usize,
    pub kkt_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cg_tol: 1e-6,
            cg_max_iter: None,
            al_penalty_init: 10.0,
            al_penalty_growth: 10.0,
            al_outer_max: 30,
            kkt_tol: 1e-5,
        }
    }
}

impl SolverConfig {
    pub fn max_iter(&self, n: usize) -> usize {
        self.cg_max_iter
            .unwrap_or_else(|| ((10.0 * (n as f64).sqrt()).ceil() as usize).max(500))
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.cg_tol > 0.0) {
            return Err(format!("cg_tol must be positive, got {}", self.cg_tol));
        }
        if !(self.kkt_tol > 0.0) {
            return Err(format!("kkt_tol must be positive, got {}", self.kkt_tol));
        }
        if !(self.al_penalty_init > 0.0) {
            return Err(format!(
                "al_penalty_init must be positive, got {}",
                self.al_penalty_init
            ));
        }
        if !(self.al_penalty_growth > 1.0) {
            return Err(format!(
                "al_penalty_growth must exceed 1, got {}",
                self.al_penalty_growth
            ));
        }
        if self.al_outer_max == 0 {
            return Err("al_outer_max must be at least 1".into());
        }
        if self.cg_max_iter == Some(0) {
            return Err("cg_max_iter must be at least 1".into());
        }
        Ok(())
    }
}

/// One convergence sample.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRecord {
    pub stage: String,
    pub iteration: usize,
    pub residual: f64,
    pub objective: f64,
}

/// Optional convergence log. Disabled traces record nothing.
#[derive(Clone, Debug, Default)]
pub struct Trace {
    enabled: bool,
    records: Vec<TraceRecord>,
}

impl Trace {
    pub fn enabled() -> Self {
        Self {
            enabled: true,
            records: Vec::new(),
        }
    }

    pub fn disabled() -> Self {
        Self::default()
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    pub fn push(&mut self, stage: &str, iteration: usize, residual: f64, objective: f64) {
        if self.enabled {
            self.records.push(TraceRecord {
                stage: stage.to_string(),
                iteration,
                residual,
                objective,
            });
        }
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "stage,iteration,residual,objective")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{:e},{:e}",
                r.stage, r.iteration, r.residual, r.objective
            )?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Result of an SPD solve.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `|Mx - r| / |r|`, computed from the true residual.
    pub relative_residual: f64,
}

/// Result of the non-negative QP.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub outer_iters: usize,
    /// Conjugate gradient iterations summed over every inner solve.
    pub inner_iters: usize,
    /// Best feasible objective after each outer iteration.
    pub outer_objectives: Vec<f64>,
}

trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    fn diagonal(&self) -> Vec<f64>;
}

impl LinearOperator for SparseSymmetric {
    fn dim(&self) -> usize {
        SparseSymmetric::dim(self)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec_into(x, y)
    }

    fn diagonal(&self) -> Vec<f64> {
        SparseSymmetric::diagonal(self)
    }
}

/// `Q + diag(shift)` restricted to the free variables; fixed rows act as identity.
///
/// Callers keep fixed components of every vector at zero, which the
/// conjugate gradient preserves because the matching residuals stay zero.
struct Reduced<'a> {
    q: &'a SparseSymmetric,
    shift: &'a [f64],
    fixed: &'a [bool],
}

impl LinearOperator for Reduced<'_> {
    fn dim(&self) -> usize {
        self.q.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.q.mul_vec_into(x, y);
        for i in 0..y.len() {
            if self.fixed[i] {
                y[i] = x[i];
            } else {
                y[i] += self.shift[i] * x[i];
            }
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let mut d = self.q.diagonal();
        for (i, di) in d.iter_mut().enumerate() {
            *di = if self.fixed[i] {
                1.0
            } else {
                *di + self.shift[i]
            };
        }
        d
    }
}

#[derive(Clone, Copy, Debug)]
enum Stop {
    /// Euclidean residual norm at or below the threshold.
    Two(f64),
    /// Largest residual component at or below the threshold.
    Inf(f64),
    /// Euclidean residual at or below the first threshold and every
    /// diagonally scaled component `|r_i / M_ii|` at or below the second.
    /// The scaled test keeps rows with a tiny diagonal from being ignored.
    TwoAndJacobi(f64, f64),
}

impl Stop {
    fn met(self, r: &[f64], inv_diag: &[f64]) -> bool {
        match self {
            Stop::Two(t) => norm2(r) <= t,
            Stop::Inf(t) => norm_inf(r) <= t,
            Stop::TwoAndJacobi(t, j) => {
                norm2(r) <= t && r.iter().zip(inv_diag).all(|(ri, di)| (ri * di).abs() <= j)
            }
        }
    }
}

fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct CgOutcome {
    iterations: usize,
    converged: bool,
}

fn true_residual(op: &dyn LinearOperator, rhs: &[f64], x: &[f64], r: &mut [f64]) {
    op.apply(x, r);
    for i in 0..r.len() {
        r[i] = rhs[i] - r[i];
    }
}

/// Preconditioned conjugate gradient from the warm start in `x`.
///
/// Convergence detected on the recursive residual is confirmed on the true
/// residual; if the two disagree the iteration restarts from the true one.
fn pcg(
    op: &dyn LinearOperator,
    rhs: &[f64],
    x: &mut [f64],
    stop: Stop,
    max_iter: usize,
    trace: &mut Trace,
    stage: &str,
) -> Result<CgOutcome, SolverError> {
    let n = op.dim();
    let inv_diag: Vec<f64> = op
        .diagonal()
        .into_iter()
        .map(|d| {
            if d > 0.0 && d.is_finite() {
                1.0 / d
            } else {
                1.0
            }
        })
        .collect();
    let mut r = vec![0.0; n];
    true_residual(op, rhs, x, &mut r);
    if stop.met(&r, &inv_diag) {
        return Ok(CgOutcome {
            iterations: 0,
            converged: true,
        });
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];

    for k in 1..=max_iter {
        op.apply(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if !(curvature > 0.0) {
            if norm_inf(&p) == 0.0 {
                break;
            }
            return Err(SolverError::NotPositiveDefinite {
                iteration: k,
                curvature,
            });
        }
        let alpha = rz / curvature;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if trace.is_enabled() {
            // 1/2 x'Ax - rhs'x == -1/2 x'(rhs + r)
            let obj = -0.5
                * x.iter()
                    .zip(rhs.iter().zip(&r))
                    .map(|(xi, (b, ri))| xi * (b + ri))
                    .sum::<f64>();
            trace.push(stage, k, norm2(&r), obj);
        }
        if stop.met(&r, &inv_diag) {
            true_residual(op, rhs, x, &mut r);
            if stop.met(&r, &inv_diag) {
                return Ok(CgOutcome {
                    iterations: k,
                    converged: true,
                });
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            continue;
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    true_residual(op, rhs, x, &mut r);
    Ok(CgOutcome {
        iterations: max_iter,
        converged: stop.met(&r, &inv_diag),
    })
}

/// Solves `M t = r` for symmetric positive definite `M`.
pub fn solve_spd(
    m: &SparseSymmetric,
    r: &[f64],
    cfg: &SolverConfig,
) -> Result<SpdSolution, SolverError> {
    solve_spd_traced(m, r, cfg, &mut Trace::disabled())
}

pub fn solve_spd_traced(
    m: &SparseSymmetric,
    r: &[f64],
    cfg: &SolverConfig,
    trace: &mut Trace,
) -> Result<SpdSolution, SolverError> {
    let n = m.dim();
    if r.len() != n {
        return Err(SolverError::Dimension {
            matrix: n,
            vector: r.len(),
        });
    }
    let rhs_norm = norm2(r);
    let mut x = vec![0.0; n];
    if rhs_norm == 0.0 {
        return Ok(SpdSolution {
            x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let max_iter = cfg.max_iter(n);
    let stop = Stop::TwoAndJacobi(cfg.cg_tol * rhs_norm, cfg.cg_tol);
    let out = pcg(m, r, &mut x, stop, max_iter, trace, "cg")?;
    let mut res = vec![0.0; n];
    true_residual(m, r, &x, &mut res);
    let relative_residual = norm2(&res) / rhs_norm;
    if !out.converged {
        return Err(SolverError::NotConverged {
            iterations: out.iterations,
            residual: relative_residual,
        });
    }
    Ok(SpdSolution {
        x,
        iterations: out.iterations,
        relative_residual,
    })
}

/// Largest violation of the approximate KKT conditions for `x >= 0`.
///
/// Combines primal infeasibility, sign of the gradient on (near) active
/// components, stationarity on free components, and complementarity scaled
/// by `1 + |c|_inf`.
pub fn kkt_residual(qp: &SparseQuadratic, x: &[f64], tol: f64) -> f64 {
    let g = qp.gradient(x);
    let c_scale = 1.0 + norm_inf(&qp.c);
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        worst = worst.max((-x[i]).max(0.0));
        let dual = if x[i] <= tol {
            (-g[i]).max(0.0)
        } else {
            g[i].abs()
        };
        worst = worst.max(dual);
        worst = worst.max(x[i].max(0.0) * g[i].abs() / c_scale);
    }
    worst
}

fn project(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

/// Minimizes `1/2 x'Qx + c'x` over `x >= 0`.
pub fn solve_nnqp(qp: &SparseQuadratic, cfg: &SolverConfig) -> Result<QpSolution, SolverError> {
    solve_nnqp_traced(qp, cfg, &mut Trace::disabled())
}

const NEWTON_STEPS: usize = 20;
const ACTIVE_SET_STEPS: usize = 50;

pub fn solve_nnqp_traced(
    qp: &SparseQuadratic,
    cfg: &SolverConfig,
    trace: &mut Trace,
) -> Result<QpSolution, SolverError> {
    let n = qp.dim();
    let q = &qp.q;
    let c = &qp.c;
    let max_iter = cfg.max_iter(n);
    let mean_diag = q.diagonal().iter().sum::<f64>() / n.max(1) as f64;
    let mut rho = cfg.al_penalty_init * mean_diag.max(f64::MIN_POSITIVE);

    let mut x = vec![0.0; n];
    let mut mu: Vec<f64> = c.iter().map(|&v| v.max(0.0)).collect();
    let mut best = QpSolution {
        x: vec![0.0; n],
        objective: 0.0,
        kkt_residual: kkt_residual(qp, &x, cfg.kkt_tol),
        outer_iters: 0,
        inner_iters: 0,
        outer_objectives: Vec::new(),
    };
    if best.kkt_residual <= cfg.kkt_tol {
        return Ok(best);
    }

    let mut shift = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let no_fixed = vec![false; n];
    let mut inner_iters = 0;

    for outer in 1..=cfg.al_outer_max {
        // semismooth Newton on the augmented Lagrangian
        let mut active: Vec<bool> = (0..n).map(|i| mu[i] - rho * x[i] > 0.0).collect();
        for _ in 0..NEWTON_STEPS {
            for i in 0..n {
                shift[i] = if active[i] { rho } else { 0.0 };
                rhs[i] = -c[i] + if active[i] { mu[i] } else { 0.0 };
            }
            let op = Reduced {
                q,
                shift: &shift,
                fixed: &no_fixed,
            };
            let tol = cfg.cg_tol * norm2(&rhs).max(f64::MIN_POSITIVE);
            inner_iters += pcg(
                &op,
                &rhs,
                &mut x,
                Stop::Two(tol),
                max_iter,
                trace,
                "al_inner",
            )?
            .iterations;
            let next: Vec<bool> = (0..n).map(|i| mu[i] - rho * x[i] > 0.0).collect();
            if next == active {
                break;
            }
            active = next;
        }
        for i in 0..n {
            mu[i] = (mu[i] - rho * x[i]).max(0.0);
        }

        // refine the predicted active set with exact reduced solves
        let fixed: Vec<bool> = (0..n).map(|i| mu[i] > 0.0 && x[i] <= 0.0).collect();
        let (candidate, iters) = active_set_refine(qp, fixed, &x, cfg, max_iter, trace)?;
        inner_iters += iters;
        let candidate = project(&candidate);
        let objective = qp.objective(&candidate);
        let kkt = kkt_residual(qp, &candidate, cfg.kkt_tol);
        if objective < best.objective
            || (kkt <= cfg.kkt_tol && objective <= best.objective + 1e-12 * (1.0 + objective.abs()))
        {
            best.x = candidate;
            best.objective = objective;
            best.kkt_residual = kkt;
        }
        best.outer_iters = outer;
        best.inner_iters = inner_iters;
        best.outer_objectives.push(best.objective);
        trace.push("al_outer", outer, kkt, best.objective);
        if best.kkt_residual <= cfg.kkt_tol {
            return Ok(best);
        }
        rho *= cfg.al_penalty_growth;
    }
    Err(SolverError::QpNotConverged {
        best: Box::new(best),
    })
}

/// Primal-dual active set iterations from an initial fixed set.
///
/// Fixed variables are held at zero and the remaining ones solve the reduced
/// system exactly. Fixed variables with negative gradient are released and
/// free variables that went negative are fixed, until the set is stable.
fn active_set_refine(
    qp: &SparseQuadratic,
    mut fixed: Vec<bool>,
    warm: &[f64],
    cfg: &SolverConfig,
    max_iter: usize,
    trace: &mut Trace,
) -> Result<(Vec<f64>, usize), SolverError> {
    let n = qp.dim();
    let zero_shift = vec![0.0; n];
    let mut x: Vec<f64> = (0..n)
        .map(|i| if fixed[i] { 0.0 } else { warm[i] })
        .collect();
    let mut rhs = vec![0.0; n];
    let mut iters = 0;
    let release_tol = 0.1 * cfg.kkt_tol;
    for _ in 0..ACTIVE_SET_STEPS {
        for i in 0..n {
            if fixed[i] {
                x[i] = 0.0;
                rhs[i] = 0.0;
            } else {
                rhs[i] = -qp.c[i];
            }
        }
        let op = Reduced {
            q: &qp.q,
            shift: &zero_shift,
            fixed: &fixed,
        };
        iters += pcg(
            &op,
            &rhs,
            &mut x,
            Stop::Inf(release_tol),
            max_iter,
            trace,
            "active_set",
        )?
        .iterations;
        let g = qp.gradient(&x);
        let mut changed = false;
        for i in 0..n {
            if fixed[i] && g[i] < -release_tol {
                fixed[i] = false;
                changed = true;
            } else if !fixed[i] && x[i] < 0.0 {
                fixed[i] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok((x, iters))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_returns_rhs() {
        let m = SparseSymmetric::identity(4);
        let r = vec![1.0, -2.0, 3.5, 0.0];
        let s = solve_spd(&m, &r, &SolverConfig::default()).unwrap();
        assert_eq!(s.x, r);
        assert!(s.iterations <= 1);
    }

    #[test]
    fn two_by_two_system() {
        let m = SparseSymmetric::from_upper_triplets(2, &[(0, 0, 2.0), (0, 1, -1.0), (1, 1, 2.0)])
            .unwrap();
        let s = solve_spd(&m, &[0.0, 1.0], &SolverConfig::default()).unwrap();
        assert!((s.x[0] - 1.0 / 3.0).abs() < 1e-6);
        assert!((s.x[1] - 2.0 / 3.0).abs() < 1e-6);
        assert!(s.relative_residual <= 1e-6);
    }

    #[test]
    fn zero_rhs_and_dimension_errors() {
        let m = SparseSymmetric::identity(3);
        assert_eq!(
            solve_spd(&m, &[0.0; 3], &SolverConfig::default())
                .unwrap()
                .x,
            vec![0.0; 3]
        );
        assert!(matches!(
            solve_spd(&m, &[1.0; 2], &SolverConfig::default()),
            Err(SolverError::Dimension { .. })
        ));
    }

    #[test]
    fn indefinite_matrix_is_reported() {
        let m = SparseSymmetric::from_diagonal(&[1.0, -1.0]);
        assert!(matches!(
            solve_spd(&m, &[1.0, 1.0], &SolverConfig::default()),
            Err(SolverError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn iteration_cap_reports_residual() {
        // 1-D Laplacian chain plus tiny diagonal needs many iterations
        let n = 200;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + 1e-6));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        let m = SparseSymmetric::from_upper_triplets(n, &t).unwrap();
        let cfg = SolverConfig {
            cg_max_iter: Some(3),
            ..SolverConfig::default()
        };
        match solve_spd(&m, &vec![1.0; n], &cfg) {
            Err(SolverError::NotConverged {
                iterations,
                residual,
            }) => {
                assert_eq!(iterations, 3);
                assert!(residual > 1e-6);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn scalar_nnqp_active_bound() {
        let qp = SparseQuadratic::new(SparseSymmetric::from_diagonal(&[2.0]), vec![1.0]).unwrap();
        let s = solve_nnqp(&qp, &SolverConfig::default()).unwrap();
        assert_eq!(s.x, vec![0.0]);
        assert!((qp.gradient(&s.x)[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn scalar_nnqp_inactive_bound() {
        let qp = SparseQuadratic::new(SparseSymmetric::from_diagonal(&[2.0]), vec![-0.6]).unwrap();
        let s = solve_nnqp(&qp, &SolverConfig::default()).unwrap();
        assert!((s.x[0] - 0.3).abs() < 1e-9);
        assert!(s.kkt_residual <= 1e-5);
    }

    #[test]
    fn trace_records_and_serializes() {
        let m = SparseSymmetric::from_upper_triplets(2, &[(0, 0, 2.0), (0, 1, -1.0), (1, 1, 2.0)])
            .unwrap();
        let mut trace = Trace::enabled();
        solve_spd_traced(&m, &[1.0, 1.0], &SolverConfig::default(), &mut trace).unwrap();
        assert!(!trace.records().is_empty());
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("stage,iteration,residual,objective\ncg,1,"));

        let mut off = Trace::disabled();
        solve_spd_traced(&m, &[1.0, 1.0], &SolverConfig::default(), &mut off).unwrap();
        assert!(off.records().is_empty());
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig {
            al_penalty_growth: 1.0,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!(SolverConfig::default().max_iter(100), 500);
        assert_eq!(SolverConfig::default().max_iter(1_000_000), 10_000);
    }
}
