//! Independent verdicts on candidate solution fields: central-difference PDE
//! residuals, side-condition residuals for orthogonal frames, rank and
//! catastrophe scans over grids.
//!
//! Residuals here deliberately use finite differences of the field rather
//! than the analytic Jacobian, so the check does not share a code path with
//! the formulas it certifies. The analytic route is reported separately where
//! available so disagreement localizes bugs.

use serde::Serialize;

use crate::engine::{fd_jacobian, EvalOptions, ImplicitSolution};
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix, Vector, DEFAULT_RANK_TOL};
use crate::system::QuasilinearSystem;
use crate::wave::{xi_from_pi, OrthogonalFrame};

/// One grid axis: n points from min to max inclusive (a single point when
/// n = 1).
#[derive(Debug, Clone, Serialize)]
pub struct GridAxis {
    pub label: String,
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl GridAxis {
    pub fn value(&self, index: usize) -> f64 {
        if self.n <= 1 {
            self.min
        } else {
            self.min + (self.max - self.min) * index as f64 / (self.n - 1) as f64
        }
    }
}

/// Rectangular evaluation grid, iterated in row-major order (first axis
/// slowest).
#[derive(Debug, Clone, Serialize)]
pub struct GridSpec {
    pub axes: Vec<GridAxis>,
}

impl GridSpec {
    pub fn new(axes: Vec<GridAxis>) -> Result<GridSpec> {
        if axes.is_empty() {
            return Err(Error::InvalidInput("empty grid".into()));
        }
        for ax in &axes {
            if ax.n < 1 {
                return Err(Error::InvalidInput(format!(
                    "axis {} needs at least one point",
                    ax.label
                )));
            }
            if !(ax.min <= ax.max) {
                return Err(Error::InvalidInput(format!(
                    "axis {} has min > max",
                    ax.label
                )));
            }
        }
        Ok(GridSpec { axes })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn total_points(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn point(&self, flat: usize) -> Vector {
        let mut idx = flat;
        let mut out = vec![0.0; self.axes.len()];
        for (i, ax) in self.axes.iter().enumerate().rev() {
            out[i] = ax.value(idx % ax.n);
            idx /= ax.n;
        }
        out
    }

    pub fn points(&self) -> impl Iterator<Item = Vector> + '_ {
        (0..self.total_points()).map(move |i| self.point(i))
    }

    /// Bounding box of the grid.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.axes.iter().map(|a| (a.min, a.max)).collect()
    }
}

/// Per-point outcome recorded by grid verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Ok,
    DomainError,
    NoConvergence,
    Phi1Singular,
    StencilError,
}

impl PointStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            PointStatus::Ok => "ok",
            PointStatus::DomainError => "domain_error",
            PointStatus::NoConvergence => "no_convergence",
            PointStatus::Phi1Singular => "phi1_singular",
            PointStatus::StencilError => "stencil_error",
        }
    }

    pub fn from_error(err: &Error) -> PointStatus {
        match err {
            Error::Domain(_) => PointStatus::DomainError,
            Error::Phi1Singular { .. } => PointStatus::Phi1Singular,
            Error::Stencil { source, .. } => match source.as_ref() {
                Error::Domain(_) => PointStatus::DomainError,
                _ => PointStatus::StencilError,
            },
            _ => PointStatus::NoConvergence,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PointRecord {
    pub x: Vector,
    pub u: Option<Vector>,
    pub r: Option<Vector>,
    /// One PDE residual per equation, from central differences.
    pub residual: Option<Vector>,
    /// Side-condition residuals, flattened (frame slot major, component minor).
    pub constraint: Option<Vector>,
    pub rank: Option<usize>,
    pub det_phi1: Option<f64>,
    pub status: PointStatus,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ReportAggregates {
    pub points: usize,
    pub failed: usize,
    pub max_residual: f64,
    pub mean_residual: f64,
    pub max_constraint: f64,
    pub max_rank: usize,
    /// Largest per-equation residual over the grid.
    pub max_residual_per_eq: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub records: Vec<PointRecord>,
    pub aggregates: ReportAggregates,
}

impl VerificationReport {
    pub fn from_records(records: Vec<PointRecord>) -> VerificationReport {
        let aggregates = recompute_aggregates(&records);
        VerificationReport {
            records,
            aggregates,
        }
    }
}

/// Aggregates recomputed from scratch; the stored aggregates must equal this.
pub fn recompute_aggregates(records: &[PointRecord]) -> ReportAggregates {
    let mut agg = ReportAggregates {
        points: records.len(),
        ..Default::default()
    };
    let mut residual_sum = 0.0;
    let mut residual_count = 0usize;
    for rec in records {
        if rec.status != PointStatus::Ok {
            agg.failed += 1;
        }
        if let Some(res) = &rec.residual {
            if agg.max_residual_per_eq.len() < res.len() {
                agg.max_residual_per_eq.resize(res.len(), 0.0);
            }
            for (mu, v) in res.iter().enumerate() {
                agg.max_residual_per_eq[mu] = agg.max_residual_per_eq[mu].max(v.abs());
                agg.max_residual = agg.max_residual.max(v.abs());
            }
            residual_sum += res.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            residual_count += 1;
        }
        if let Some(con) = &rec.constraint {
            for v in con {
                agg.max_constraint = agg.max_constraint.max(v.abs());
            }
        }
        if let Some(rank) = rec.rank {
            agg.max_rank = agg.max_rank.max(rank);
        }
    }
    if residual_count > 0 {
        agg.mean_residual = residual_sum / residual_count as f64;
    }
    agg
}

/// PDE residual of an arbitrary field at x:
/// `residual[mu] = sum_{i, alpha} Delta^{mu i}_alpha(u(x)) du^alpha/dx^i`
/// with derivatives by central differences of the given step.
pub fn pde_residual<F>(
    sys: &QuasilinearSystem,
    u_field: F,
    x: &[f64],
    fd_step: f64,
) -> Result<Vector>
where
    F: Fn(&[f64]) -> Result<Vector>,
{
    let u0 = u_field(x).map_err(|e| Error::Stencil {
        x: x.to_vec(),
        source: Box::new(e),
    })?;
    let du = fd_jacobian(&u_field, x, sys.dependent_vars(), fd_step)?;
    residual_from_jacobian(sys, &u0, &du)
}

/// PDE residual assembled from a precomputed q-by-p derivative matrix.
pub fn residual_from_jacobian(
    sys: &QuasilinearSystem,
    u0: &[f64],
    du: &Matrix,
) -> Result<Vector> {
    let deltas = sys.delta(u0)?;
    let mut out = Vec::with_capacity(sys.equations());
    for d in &deltas {
        let mut s = 0.0;
        for i in 0..sys.independent_vars() {
            for alpha in 0..sys.dependent_vars() {
                s += d.get(i, alpha) * du.get(alpha, i);
            }
        }
        out.push(s);
    }
    Ok(out)
}

/// Side-condition residuals `sum_i xi^i_a(u(x)) du^alpha/dx^i` as a
/// (p - k)-by-q matrix, derivatives by central differences.
pub fn constraint_residual<F>(
    frame: &OrthogonalFrame,
    u_field: F,
    x: &[f64],
    fd_step: f64,
) -> Result<Matrix>
where
    F: Fn(&[f64]) -> Result<Vector>,
{
    let u0 = u_field(x).map_err(|e| Error::Stencil {
        x: x.to_vec(),
        source: Box::new(e),
    })?;
    let du = fd_jacobian(&u_field, x, u0.len(), fd_step)?;
    constraint_from_jacobian(frame, &u0, &du)
}

/// Side-condition residuals from a precomputed derivative matrix.
pub fn constraint_from_jacobian(
    frame: &OrthogonalFrame,
    u0: &[f64],
    du: &Matrix,
) -> Result<Matrix> {
    let xis = frame.vectors(u0)?;
    let q = du.rows();
    let mut out = Matrix::zeros(xis.len(), q);
    for (a, xi) in xis.iter().enumerate() {
        for alpha in 0..q {
            let mut s = 0.0;
            for (i, xi_i) in xi.iter().enumerate() {
                s += xi_i * du.get(alpha, i);
            }
            out.set(a, alpha, s);
        }
    }
    Ok(out)
}

/// Options for grid verification.
#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub fd_step: f64,
    pub eval: EvalOptions,
    pub rank_tol: f64,
    /// Hard cap on grid size (overridable by the CLI via environment).
    pub point_cap: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            fd_step: 1e-5,
            eval: EvalOptions::default(),
            rank_tol: DEFAULT_RANK_TOL,
            point_cap: 1_000_000,
        }
    }
}

/// Grid verification of an implicit solution: per-point evaluation, PDE and
/// side-condition residuals, analytic rank and det Phi1. Points that fail to
/// evaluate are recorded with a status, never fatal.
pub fn verify_solution(
    sol: &ImplicitSolution,
    grid: &GridSpec,
    opts: &VerifyOptions,
) -> Result<VerificationReport> {
    if grid.dim() != sol.system().independent_vars() {
        return Err(Error::InvalidInput(format!(
            "grid has {} axes, system has p = {}",
            grid.dim(),
            sol.system().independent_vars()
        )));
    }
    if grid.total_points() > opts.point_cap {
        return Err(Error::InvalidInput(format!(
            "grid has {} points, cap is {}",
            grid.total_points(),
            opts.point_cap
        )));
    }
    let q = sol.system().dependent_vars();
    let (anchor_x, _) = sol.anchor();
    let anchor_u = sol.reference_u0().to_vec();
    let frame = xi_from_pi(sol.family(), &anchor_u, DEFAULT_RANK_TOL)
        .ok()
        .filter(|f| !f.is_empty());
    let field = |y: &[f64]| sol.evaluate(y, &opts.eval).map(|e| e.u);
    let _ = anchor_x;

    let mut records = Vec::with_capacity(grid.total_points());
    for x in grid.points() {
        let eval = match sol.evaluate(&x, &opts.eval) {
            Ok(e) => e,
            Err(err) => {
                records.push(PointRecord {
                    x,
                    u: None,
                    r: None,
                    residual: None,
                    constraint: None,
                    rank: None,
                    det_phi1: None,
                    status: PointStatus::from_error(&err),
                });
                continue;
            }
        };
        let du = match fd_jacobian(&field, &x, q, opts.fd_step) {
            Ok(j) => j,
            Err(err) => {
                records.push(PointRecord {
                    x,
                    u: Some(eval.u),
                    r: Some(eval.r),
                    residual: None,
                    constraint: None,
                    rank: None,
                    det_phi1: Some(eval.phi1_det),
                    status: PointStatus::from_error(&err),
                });
                continue;
            }
        };
        let residual = residual_from_jacobian(sol.system(), &eval.u, &du)?;
        let constraint = match &frame {
            Some(fr) => Some(
                constraint_from_jacobian(fr, &eval.u, &du)?
                    .as_slice()
                    .to_vec(),
            ),
            None => None,
        };
        let rank = sol
            .analytic_jacobian(&x, &eval.u)?
            .rank_with_tolerance(opts.rank_tol)?;
        records.push(PointRecord {
            x,
            u: Some(eval.u),
            r: Some(eval.r),
            residual: Some(residual),
            constraint,
            rank: Some(rank),
            det_phi1: Some(eval.phi1_det),
            status: PointStatus::Ok,
        });
    }
    Ok(VerificationReport::from_records(records))
}

/// Grid verification of an arbitrary field given as a callable: residuals by
/// central differences, optional side conditions against a frame, rank from
/// the finite-difference Jacobian (which floors the rank decision near the
/// stencil accuracy). Used for closed-form solution fields, which carry no
/// Phi1 data.
pub fn verify_field<F>(
    sys: &QuasilinearSystem,
    field: F,
    frame: Option<&OrthogonalFrame>,
    grid: &GridSpec,
    opts: &VerifyOptions,
) -> Result<VerificationReport>
where
    F: Fn(&[f64]) -> Result<Vector>,
{
    if grid.dim() != sys.independent_vars() {
        return Err(Error::InvalidInput(format!(
            "grid has {} axes, system has p = {}",
            grid.dim(),
            sys.independent_vars()
        )));
    }
    if grid.total_points() > opts.point_cap {
        return Err(Error::InvalidInput(format!(
            "grid has {} points, cap is {}",
            grid.total_points(),
            opts.point_cap
        )));
    }
    let q = sys.dependent_vars();
    let mut records = Vec::with_capacity(grid.total_points());
    for x in grid.points() {
        let u = match field(&x) {
            Ok(u) => u,
            Err(err) => {
                records.push(PointRecord {
                    x,
                    u: None,
                    r: None,
                    residual: None,
                    constraint: None,
                    rank: None,
                    det_phi1: None,
                    status: PointStatus::from_error(&err),
                });
                continue;
            }
        };
        let du = match fd_jacobian(&field, &x, q, opts.fd_step) {
            Ok(j) => j,
            Err(err) => {
                records.push(PointRecord {
                    x,
                    u: Some(u),
                    r: None,
                    residual: None,
                    constraint: None,
                    rank: None,
                    det_phi1: None,
                    status: PointStatus::from_error(&err),
                });
                continue;
            }
        };
        let residual = residual_from_jacobian(sys, &u, &du)?;
        let constraint = match frame {
            Some(fr) => constraint_from_jacobian(fr, &u, &du)
                .ok()
                .map(|m| m.as_slice().to_vec()),
            None => None,
        };
        let rank = du.rank_with_tolerance(1e-6)?;
        records.push(PointRecord {
            x,
            u: Some(u),
            r: None,
            residual: Some(residual),
            constraint,
            rank: Some(rank),
            det_phi1: None,
            status: PointStatus::Ok,
        });
    }
    Ok(VerificationReport::from_records(records))
}

/// Earliest catastrophe crossing found by a monotone scan.
#[derive(Debug, Clone, Serialize)]
pub struct CatastropheCrossing {
    /// First scanned parameter with |det Phi1| below threshold (or a sign
    /// change against the previous sample).
    pub s: f64,
    /// Bracketing parameter values around the crossing.
    pub bracket: (f64, f64),
    /// det Phi1 at the bracket ends (the right end is absent when the
    /// evaluation itself failed with a singular Phi1).
    pub det_before: f64,
    pub det_at: Option<f64>,
}

/// Scans `x(s) = from + s * direction` for s in [0, s_max] at n + 1 samples
/// and reports the earliest point where |det Phi1| drops below `threshold`
/// or det Phi1 changes sign. Returns `None` when no crossing occurs before
/// the scan ends or leaves the solution's domain.
pub fn catastrophe_scan(
    sol: &ImplicitSolution,
    from: &[f64],
    direction: &[f64],
    s_max: f64,
    n: usize,
    opts: &EvalOptions,
    threshold: f64,
) -> Result<Option<CatastropheCrossing>> {
    let p = sol.system().independent_vars();
    if from.len() != p || direction.len() != p {
        return Err(Error::InvalidInput(
            "scan point and direction must have length p".into(),
        ));
    }
    if dot(direction, direction) == 0.0 {
        return Err(Error::InvalidInput("scan direction must be nonzero".into()));
    }
    if n == 0 || !(s_max > 0.0) {
        return Err(Error::InvalidInput("need n >= 1 and s_max > 0".into()));
    }
    let mut prev: Option<(f64, f64)> = None; // (s, det)
    for i in 0..=n {
        let s = s_max * i as f64 / n as f64;
        let x: Vector = from
            .iter()
            .zip(direction)
            .map(|(f, d)| f + s * d)
            .collect();
        match sol.evaluate(&x, opts) {
            Ok(eval) => {
                let det = eval.phi1_det;
                let crossed_threshold = det.abs() < threshold;
                let crossed_sign = prev.map(|(_, d)| d * det < 0.0).unwrap_or(false);
                if crossed_threshold || crossed_sign {
                    let (s_prev, det_prev) = prev.unwrap_or((s, det));
                    return Ok(Some(CatastropheCrossing {
                        s,
                        bracket: (s_prev, s),
                        det_before: det_prev,
                        det_at: Some(det),
                    }));
                }
                prev = Some((s, det));
            }
            Err(Error::Phi1Singular { det }) => {
                let (s_prev, det_prev) = prev.unwrap_or((s, det));
                return Ok(Some(CatastropheCrossing {
                    s,
                    bracket: (s_prev, s),
                    det_before: det_prev,
                    det_at: None,
                }));
            }
            Err(_) => return Ok(None), // left the domain or lost convergence
        }
    }
    Ok(None)
}
