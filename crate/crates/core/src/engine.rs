//! Construction and pointwise evaluation of rank-k solutions.
//!
//! An [`ImplicitSolution`] pairs a system, a wave-vector family and a profile
//! `f: R^k -> R^q`; the field it defines satisfies `u = f(lambda(u) . x)`.
//! [`evaluate`] solves that fixed-point equation with Newton's method on
//! `G(u) = u - f(r(x, u))`, seeded by continuation along the straight segment
//! from the solution's anchor point (the coordinate origin unless the profile
//! is singular there), which tracks a single branch deterministically.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{norm_inf, sub, Matrix, Vector, DEFAULT_RANK_TOL};
use crate::system::{DomainBox, QuasilinearSystem};
use crate::wave::{riemann_invariants, WaveVectorFamily};

pub type ValueFn = Arc<dyn Fn(&[f64]) -> Result<Vector> + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(&[f64]) -> Result<Matrix> + Send + Sync>;

/// Differentiable map from Riemann-invariant space to dependent variables.
#[derive(Clone)]
pub struct Profile {
    k_in: usize,
    q_out: usize,
    value: ValueFn,
    jacobian: JacobianFn,
    domain: DomainBox,
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Profile")
            .field("k_in", &self.k_in)
            .field("q_out", &self.q_out)
            .finish()
    }
}

impl Profile {
    pub fn new(
        k_in: usize,
        q_out: usize,
        value: ValueFn,
        jacobian: JacobianFn,
        domain: DomainBox,
    ) -> Result<Profile> {
        if k_in == 0 || q_out == 0 {
            return Err(Error::InvalidInput("profile dimensions must be >= 1".into()));
        }
        if domain.dim() != k_in {
            return Err(Error::InvalidInput(
                "profile domain dimension does not match k".into(),
            ));
        }
        Ok(Profile {
            k_in,
            q_out,
            value,
            jacobian,
            domain,
        })
    }

    /// Profile with the Jacobian supplied by central finite differences with
    /// step `1e-6 * (1 + |r_A|)` per component.
    pub fn with_fd_jacobian(
        k_in: usize,
        q_out: usize,
        value: ValueFn,
        domain: DomainBox,
    ) -> Result<Profile> {
        let inner = value.clone();
        let jacobian: JacobianFn = Arc::new(move |r: &[f64]| {
            let mut jac = Matrix::zeros(q_out, k_in);
            for a in 0..k_in {
                let h = 1e-6 * (1.0 + r[a].abs());
                let mut up = r.to_vec();
                let mut dn = r.to_vec();
                up[a] += h;
                dn[a] -= h;
                let plus = inner(&up)?;
                let minus = inner(&dn)?;
                for alpha in 0..q_out {
                    jac.set(alpha, a, (plus[alpha] - minus[alpha]) / (2.0 * h));
                }
            }
            Ok(jac)
        });
        Profile::new(k_in, q_out, value, jacobian, domain)
    }

    /// Constant profile; its Jacobian vanishes identically.
    pub fn constant(values: Vector, k_in: usize) -> Profile {
        let q_out = values.len();
        Profile {
            k_in,
            q_out,
            value: Arc::new(move |_r: &[f64]| Ok(values.clone())),
            jacobian: Arc::new(move |_r: &[f64]| Ok(Matrix::zeros(q_out, k_in))),
            domain: DomainBox::unbounded(k_in),
        }
    }

    pub fn invariants_in(&self) -> usize {
        self.k_in
    }

    pub fn components_out(&self) -> usize {
        self.q_out
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn value(&self, r: &[f64]) -> Result<Vector> {
        if r.len() != self.k_in {
            return Err(Error::InvalidInput(format!(
                "profile argument has length {}, expected k = {}",
                r.len(),
                self.k_in
            )));
        }
        self.domain.check(r, "profile")?;
        let v = (self.value)(r)?;
        if v.len() != self.q_out {
            return Err(Error::InvalidInput(
                "profile value callable returned wrong length".into(),
            ));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("profile value not finite at r = {r:?}")));
        }
        Ok(v)
    }

    /// The q-by-k Jacobian of the profile at r.
    pub fn jacobian(&self, r: &[f64]) -> Result<Matrix> {
        if r.len() != self.k_in {
            return Err(Error::InvalidInput(
                "profile Jacobian argument has wrong length".into(),
            ));
        }
        self.domain.check(r, "profile jacobian")?;
        let jac = (self.jacobian)(r)?;
        if jac.rows() != self.q_out || jac.cols() != self.k_in {
            return Err(Error::InvalidInput(
                "profile Jacobian callable returned wrong shape".into(),
            ));
        }
        Ok(jac)
    }

    /// Largest relative deviation between the registered Jacobian and a
    /// central finite difference at the given interior samples.
    pub fn validate_jacobian(&self, samples: &[Vector]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for r in samples {
            let jac = self.jacobian(r)?;
            let mut fd = Matrix::zeros(self.q_out, self.k_in);
            for a in 0..self.k_in {
                let h = 1e-6 * (1.0 + r[a].abs());
                let mut up = r.clone();
                let mut dn = r.clone();
                up[a] += h;
                dn[a] -= h;
                let plus = self.value(&up)?;
                let minus = self.value(&dn)?;
                for alpha in 0..self.q_out {
                    fd.set(alpha, a, (plus[alpha] - minus[alpha]) / (2.0 * h));
                }
            }
            let scale = jac.max_abs().max(1.0);
            worst = worst.max(jac.sub(&fd)?.max_abs() / scale);
        }
        Ok(worst)
    }
}

/// Options for Newton continuation.
#[derive(Debug, Clone)]
pub struct EvalOptions {
    /// Convergence threshold on the residual `u - f(r(x, u))` (inf-norm).
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    /// Relative determinant threshold below which Phi1 counts as singular.
    pub catastrophe_tol: f64,
    /// Smallest continuation sub-step before giving up.
    pub min_step: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            newton_tol: 1e-12,
            max_newton_iters: 50,
            catastrophe_tol: 1e-8,
            min_step: 1e-6,
        }
    }
}

impl EvalOptions {
    pub fn with_newton_tol(mut self, tol: f64) -> Self {
        self.newton_tol = tol;
        self
    }
}

/// Outcome of one implicit evaluation.
#[derive(Debug, Clone)]
pub struct EvaluationResult {
    pub u: Vector,
    pub r: Vector,
    pub phi1_det: f64,
    pub newton_iters: usize,
    pub converged: bool,
}

/// A rank-k solution in implicit form.
#[derive(Clone)]
pub struct ImplicitSolution {
    system: QuasilinearSystem,
    family: WaveVectorFamily,
    profile: Profile,
    anchor_x: Vector,
    anchor_u: Vector,
}

impl fmt::Debug for ImplicitSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImplicitSolution")
            .field("system", &self.system.name())
            .field("k", &self.family.waves())
            .field("anchor_x", &self.anchor_x)
            .finish()
    }
}

impl ImplicitSolution {
    /// Solution anchored at the coordinate origin, where `r(0, u) = 0` and
    /// the field takes the value `f(0)` exactly.
    pub fn new(
        system: QuasilinearSystem,
        family: WaveVectorFamily,
        profile: Profile,
    ) -> Result<ImplicitSolution> {
        let p = system.independent_vars();
        let u0 = profile.value(&vec![0.0; profile.invariants_in()])?;
        ImplicitSolution::with_anchor(system, family, profile, vec![0.0; p], u0)
    }

    /// Solution anchored at an arbitrary reference point with known value.
    /// The anchor is polished by Newton so that slightly inexact reference
    /// values are accepted; an anchor that cannot be polished is rejected.
    pub fn with_anchor(
        system: QuasilinearSystem,
        family: WaveVectorFamily,
        profile: Profile,
        anchor_x: Vector,
        anchor_u: Vector,
    ) -> Result<ImplicitSolution> {
        if family.independent_vars() != system.independent_vars()
            || family.dependent_vars() != system.dependent_vars()
        {
            return Err(Error::InvalidInput(
                "family dimensions do not match the system".into(),
            ));
        }
        if profile.invariants_in() != family.waves()
            || profile.components_out() != system.dependent_vars()
        {
            return Err(Error::InvalidInput(
                "profile dimensions do not match family and system".into(),
            ));
        }
        if anchor_x.len() != system.independent_vars() {
            return Err(Error::InvalidInput("anchor point has wrong length".into()));
        }
        let mut sol = ImplicitSolution {
            system,
            family,
            profile,
            anchor_x,
            anchor_u,
        };
        let opts = EvalOptions::default();
        let anchor_x = sol.anchor_x.clone();
        let (u, _, _) = sol.newton_at(&anchor_x, &sol.anchor_u.clone(), &opts)?;
        sol.anchor_u = u;
        Ok(sol)
    }

    pub fn system(&self) -> &QuasilinearSystem {
        &self.system
    }

    pub fn family(&self) -> &WaveVectorFamily {
        &self.family
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn anchor(&self) -> (&[f64], &[f64]) {
        (&self.anchor_x, &self.anchor_u)
    }

    /// The field value at the anchor (equals `f(0)` for origin anchors).
    pub fn reference_u0(&self) -> &[f64] {
        &self.anchor_u
    }

    /// Both local-invertibility matrices at (x, u):
    /// `Phi1 = I_q - (df/dr)(dr/du)` and `Phi2 = I_k - (dr/du)(df/dr)`.
    pub fn phi_matrices(&self, x: &[f64], u: &[f64]) -> Result<(Matrix, Matrix)> {
        let r = riemann_invariants(&self.family, u, x)?;
        let jac = self.profile.jacobian(&r)?; // q x k
        let dr_du = self.family.dr_du(u, x)?; // k x q
        let q = self.system.dependent_vars();
        let k = self.family.waves();
        let phi1 = Matrix::identity(q).sub(&jac.matmul(&dr_du)?)?;
        let phi2 = Matrix::identity(k).sub(&dr_du.matmul(&jac)?)?;
        Ok((phi1, phi2))
    }

    /// Analytic Jacobian `du/dx = Phi1^{-1} (df/dr) lambda` at a converged
    /// point (q-by-p).
    pub fn analytic_jacobian(&self, x: &[f64], u: &[f64]) -> Result<Matrix> {
        let r = riemann_invariants(&self.family, u, x)?;
        let jac = self.profile.jacobian(&r)?;
        let lam = self.family.lambda_matrix(u)?;
        let (phi1, _) = self.phi_matrices(x, u)?;
        let phi1_inv = phi1.inverse().map_err(|_| Error::Phi1Singular {
            det: phi1.det().unwrap_or(0.0),
        })?;
        phi1_inv.matmul(&jac)?.matmul(&lam)
    }

    /// The algebraically equivalent route `du/dx = (df/dr) Phi2^{-1} lambda`;
    /// kept separate so disagreement localizes assembly bugs.
    pub fn analytic_jacobian_via_phi2(&self, x: &[f64], u: &[f64]) -> Result<Matrix> {
        let r = riemann_invariants(&self.family, u, x)?;
        let jac = self.profile.jacobian(&r)?;
        let lam = self.family.lambda_matrix(u)?;
        let (_, phi2) = self.phi_matrices(x, u)?;
        let phi2_inv = phi2.inverse().map_err(|_| Error::Phi1Singular {
            det: phi2.det().unwrap_or(0.0),
        })?;
        jac.matmul(&phi2_inv)?.matmul(&lam)
    }

    /// Numerical rank of the analytic Jacobian at x; at most k by
    /// construction.
    pub fn solution_rank(&self, x: &[f64], tol: f64, opts: &EvalOptions) -> Result<usize> {
        let eval = self.evaluate(x, opts)?;
        let jac = self.analytic_jacobian(x, &eval.u)?;
        jac.rank_with_tolerance(tol)
    }

    /// One Newton solve of `u = f(lambda(u) . x)` from the given seed.
    /// Returns (u, iterations, det Phi1).
    fn newton_at(&self, x: &[f64], seed: &[f64], opts: &EvalOptions) -> Result<(Vector, usize, f64)> {
        let mut u = seed.to_vec();
        for iter in 0..=opts.max_newton_iters {
            let r = riemann_invariants(&self.family, &u, x)?;
            let fu = self.profile.value(&r)?;
            let g = sub(&u, &fu);
            let (phi1, _) = self.phi_matrices(x, &u)?;
            let det = phi1.det()?;
            if norm_inf(&g) <= opts.newton_tol {
                if det.abs() < opts.catastrophe_tol * (1.0 + phi1.max_abs()) {
                    return Err(Error::Phi1Singular { det });
                }
                return Ok((u, iter, det));
            }
            if det.abs() < opts.catastrophe_tol * (1.0 + phi1.max_abs()) {
                return Err(Error::Phi1Singular { det });
            }
            let delta = phi1.solve(&g)?;
            for (ui, di) in u.iter_mut().zip(&delta) {
                *ui -= di;
            }
            if u.iter().any(|v| !v.is_finite()) {
                return Err(Error::NoConvergence {
                    trail: format!("iterate diverged at x = {x:?}"),
                });
            }
        }
        Err(Error::NoConvergence {
            trail: format!(
                "{} Newton iterations without reaching {:.1e} at x = {:?}",
                opts.max_newton_iters, opts.newton_tol, x
            ),
        })
    }

    /// Evaluates the field at x by continuation from the anchor.
    pub fn evaluate(&self, x: &[f64], opts: &EvalOptions) -> Result<EvaluationResult> {
        let p = self.system.independent_vars();
        if x.len() != p {
            return Err(Error::InvalidInput(format!(
                "x has length {}, expected p = {}",
                x.len(),
                p
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("x must be finite".into()));
        }
        let dx = sub(x, &self.anchor_x);
        let mut u = self.anchor_u.clone();
        let mut s = 0.0;
        let mut step: f64 = 1.0;
        let mut iters_total = 0;
        let mut trail: Vec<String> = Vec::new();
        let mut all_domain = true;
        while s < 1.0 {
            let s_next = (s + step).min(1.0);
            let x_cur: Vector = self
                .anchor_x
                .iter()
                .zip(&dx)
                .map(|(a, d)| a + s_next * d)
                .collect();
            match self.newton_at(&x_cur, &u, opts) {
                Ok((u_new, iters, _det)) => {
                    u = u_new;
                    s = s_next;
                    iters_total += iters;
                    step = (step * 2.0).min(1.0 - s).max(opts.min_step).min(1.0);
                    if s >= 1.0 {
                        break;
                    }
                }
                Err(err) => {
                    all_domain &= matches!(err, Error::Domain(_));
                    trail.push(format!("s = {s_next:.6}: {err}"));
                    step *= 0.5;
                    if step < opts.min_step {
                        // a catastrophe or domain wall that persists down to
                        // the smallest step is genuine; everything else is
                        // non-convergence
                        return Err(match err {
                            Error::Phi1Singular { det } => Error::Phi1Singular { det },
                            Error::Domain(msg) if all_domain => Error::Domain(msg),
                            _ => Error::NoConvergence {
                                trail: trail.join("; "),
                            },
                        });
                    }
                }
            }
        }
        let r = riemann_invariants(&self.family, &u, x)?;
        let (phi1, _) = self.phi_matrices(x, &u)?;
        let phi1_det = phi1.det()?;
        Ok(EvaluationResult {
            u,
            r,
            phi1_det,
            newton_iters: iters_total,
            converged: true,
        })
    }
}

/// Picks a kernel element (direction, sign and scale) from the wave-relation
/// kernel basis at the current profile point; `None` refuses the choice.
pub type GammaSelector =
    Arc<dyn Fn(&[Vector], &[f64], f64) -> Option<Vector> + Send + Sync>;

struct ProfileGrid {
    rs: Vec<f64>,
    values: Vec<Vector>,
    derivs: Vec<Vector>,
}

impl ProfileGrid {
    fn locate(&self, r: f64) -> Result<usize> {
        if r < self.rs[0] - 1e-12 || r > *self.rs.last().unwrap() + 1e-12 {
            return Err(Error::Domain(format!(
                "r = {r} outside integrated span [{}, {}]",
                self.rs[0],
                self.rs.last().unwrap()
            )));
        }
        // rs is sorted ascending
        let mut i = match self
            .rs
            .binary_search_by(|v| v.partial_cmp(&r).unwrap())
        {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        };
        if i + 1 >= self.rs.len() {
            i = self.rs.len() - 2;
        }
        Ok(i)
    }

    fn hermite(&self, r: f64) -> Result<(Vector, Vector)> {
        let i = self.locate(r)?;
        let (r0, r1) = (self.rs[i], self.rs[i + 1]);
        let h = r1 - r0;
        let tau = ((r - r0) / h).clamp(0.0, 1.0);
        let t2 = tau * tau;
        let t3 = t2 * tau;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + tau;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let dh00 = (6.0 * t2 - 6.0 * tau) / h;
        let dh10 = 3.0 * t2 - 4.0 * tau + 1.0;
        let dh01 = (6.0 * tau - 6.0 * t2) / h;
        let dh11 = 3.0 * t2 - 2.0 * tau;
        let q = self.values[i].len();
        let mut val = vec![0.0; q];
        let mut der = vec![0.0; q];
        for a in 0..q {
            let (f0, f1) = (self.values[i][a], self.values[i + 1][a]);
            let (d0, d1) = (self.derivs[i][a], self.derivs[i + 1][a]);
            val[a] = h00 * f0 + h10 * h * d0 + h01 * f1 + h11 * h * d1;
            der[a] = dh00 * f0 + dh10 * d0 + dh01 * f1 + dh11 * d1;
        }
        Ok((val, der))
    }
}

/// Integrates the rank-1 profile ODE `f'(r) = gamma(f(r))` with the classic
/// fourth-order Runge-Kutta scheme from `f(0) = f0` over `r_span` (which must
/// contain zero), selecting gamma from the wave-relation kernel at each
/// stage. Dense output is cubic Hermite interpolation between nodes.
pub fn integrate_rank1_profile(
    sys: &QuasilinearSystem,
    lambda_field: Arc<dyn Fn(&[f64]) -> Vector + Send + Sync>,
    f0: Vector,
    r_span: (f64, f64),
    step: f64,
    selector: GammaSelector,
) -> Result<Profile> {
    let q = sys.dependent_vars();
    if f0.len() != q {
        return Err(Error::InvalidInput("f0 must have length q".into()));
    }
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidInput("step must be positive".into()));
    }
    if r_span.0 > 0.0 || r_span.1 < 0.0 || r_span.0 >= r_span.1 {
        return Err(Error::InvalidInput(
            "r_span must be a nondegenerate interval containing 0".into(),
        ));
    }

    let gamma_at = |f: &[f64], r: f64| -> Result<Vector> {
        let lambda = lambda_field(f);
        let kernel =
            crate::system::wave_relation_kernel(sys, f, &lambda, DEFAULT_RANK_TOL)?;
        if kernel.is_empty() {
            return Err(Error::KernelLost { r });
        }
        let dim = kernel.len();
        let gamma = selector(&kernel, f, r).ok_or(Error::AmbiguousKernel { r, dim })?;
        if gamma.len() != q || gamma.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "selector returned a malformed gamma".into(),
            ));
        }
        Ok(gamma)
    };

    let rk4_sweep = |dir: f64, r_end: f64| -> Result<(Vec<f64>, Vec<Vector>)> {
        let mut rs = vec![0.0];
        let mut fs = vec![f0.clone()];
        let mut r = 0.0;
        let mut f = f0.clone();
        while (r_end - r) * dir > 1e-14 {
            let h = dir * step.min((r_end - r) * dir);
            let k1 = gamma_at(&f, r)?;
            let f2: Vector = f.iter().zip(&k1).map(|(a, b)| a + 0.5 * h * b).collect();
            let k2 = gamma_at(&f2, r + 0.5 * h)?;
            let f3: Vector = f.iter().zip(&k2).map(|(a, b)| a + 0.5 * h * b).collect();
            let k3 = gamma_at(&f3, r + 0.5 * h)?;
            let f4: Vector = f.iter().zip(&k3).map(|(a, b)| a + h * b).collect();
            let k4 = gamma_at(&f4, r + h)?;
            for a in 0..q {
                f[a] += h / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
            }
            r += h;
            rs.push(r);
            fs.push(f.clone());
        }
        Ok((rs, fs))
    };

    let (rs_fwd, fs_fwd) = rk4_sweep(1.0, r_span.1)?;
    let (rs_bwd, fs_bwd) = rk4_sweep(-1.0, r_span.0)?;

    let mut rs: Vec<f64> = rs_bwd.iter().skip(1).rev().copied().collect();
    let mut values: Vec<Vector> = fs_bwd.into_iter().skip(1).rev().collect();
    rs.extend(rs_fwd);
    values.extend(fs_fwd);
    let derivs: Vec<Vector> = rs
        .iter()
        .zip(&values)
        .map(|(&r, f)| gamma_at(f, r))
        .collect::<Result<_>>()?;

    let grid = Arc::new(ProfileGrid { rs, values, derivs });
    let g_value = grid.clone();
    let g_jac = grid.clone();
    Profile::new(
        1,
        q,
        Arc::new(move |r: &[f64]| Ok(g_value.hermite(r[0])?.0)),
        Arc::new(move |r: &[f64]| {
            let (_, der) = g_jac.hermite(r[0])?;
            let mut jac = Matrix::zeros(der.len(), 1);
            for (a, d) in der.iter().enumerate() {
                jac.set(a, 0, *d);
            }
            Ok(jac)
        }),
        DomainBox::new(vec![r_span])?,
    )
}

/// Convenience: inf-norm of the implicit residual `u - f(lambda(u) . x)`.
pub fn implicit_residual(sol: &ImplicitSolution, x: &[f64], u: &[f64]) -> Result<f64> {
    let r = riemann_invariants(sol.family(), u, x)?;
    let fu = sol.profile().value(&r)?;
    Ok(norm_inf(&sub(u, &fu)))
}

/// Central-difference Jacobian of an arbitrary field x -> u(x), q-by-p.
pub fn fd_jacobian<F>(field: F, x: &[f64], q: usize, fd_step: f64) -> Result<Matrix>
where
    F: Fn(&[f64]) -> Result<Vector>,
{
    let p = x.len();
    let mut jac = Matrix::zeros(q, p);
    for i in 0..p {
        let mut up = x.to_vec();
        let mut dn = x.to_vec();
        up[i] += fd_step;
        dn[i] -= fd_step;
        let plus = field(&up).map_err(|e| Error::Stencil {
            x: up.clone(),
            source: Box::new(e),
        })?;
        let minus = field(&dn).map_err(|e| Error::Stencil {
            x: dn.clone(),
            source: Box::new(e),
        })?;
        if plus.len() != q || minus.len() != q {
            return Err(Error::InvalidInput("field returned wrong length".into()));
        }
        for alpha in 0..q {
            jac.set(alpha, i, (plus[alpha] - minus[alpha]) / (2.0 * fd_step));
        }
    }
    Ok(jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm2;
    use crate::rng::SplitMix64;
    use crate::system::test_systems::{pressureless_2d, scalar_evolution};
    use crate::wave::{CoordinateSplit, LambdaFn, WaveVectorFamily};

    fn advective_family_q2() -> WaveVectorFamily {
        let lambdas: LambdaFn = Arc::new(|u: &[f64]| {
            Matrix::from_rows(&[vec![-u[0], 1.0, 0.0], vec![-u[1], 0.0, 1.0]]).unwrap()
        });
        WaveVectorFamily::with_fd_derivatives(
            2,
            3,
            2,
            lambdas,
            CoordinateSplit::new(vec![1, 2], vec![0]).unwrap(),
        )
        .unwrap()
    }

    fn linear_profile() -> Profile {
        Profile::new(
            2,
            2,
            Arc::new(|r: &[f64]| Ok(vec![0.3 * r[0] + 0.1 * r[1], -0.2 * r[0] + 0.4 * r[1]])),
            Arc::new(|_r: &[f64]| Matrix::from_rows(&[vec![0.3, 0.1], vec![-0.2, 0.4]])),
            crate::system::DomainBox::unbounded(2),
        )
        .unwrap()
    }

    fn sample_solution() -> ImplicitSolution {
        ImplicitSolution::new(pressureless_2d(), advective_family_q2(), linear_profile())
            .unwrap()
    }

    #[test]
    fn profile_jacobian_validation() {
        let profile = linear_profile();
        let worst = profile
            .validate_jacobian(&[vec![0.0, 0.0], vec![0.5, -0.3]])
            .unwrap();
        assert!(worst < 1e-9);
    }

    #[test]
    fn evaluate_at_origin_returns_profile_value() {
        let sol = sample_solution();
        let res = sol.evaluate(&[0.0, 0.0, 0.0], &EvalOptions::default()).unwrap();
        assert_eq!(res.u, vec![0.0, 0.0]);
        assert_eq!(res.newton_iters, 0, "seed already converged at the anchor");
        assert!(res.converged);
    }

    #[test]
    fn evaluate_satisfies_the_defining_equation() {
        let sol = sample_solution();
        let opts = EvalOptions::default();
        let mut rng = SplitMix64::new(23);
        for _ in 0..30 {
            let x = vec![
                rng.uniform(0.0, 0.5),
                rng.uniform(-0.5, 0.5),
                rng.uniform(-0.5, 0.5),
            ];
            let res = sol.evaluate(&x, &opts).unwrap();
            assert!(implicit_residual(&sol, &x, &res.u).unwrap() <= opts.newton_tol);
        }
    }

    #[test]
    fn scalar_advection_closed_form() {
        // du/dt + u du/dx = 0 with Cauchy data f(r) = r gives u = x / (1 + t).
        let sys = scalar_evolution(1, 1, Arc::new(|u: &[f64]| vec![u[0]]));
        let lambdas: LambdaFn =
            Arc::new(|u: &[f64]| Matrix::from_rows(&[vec![-u[0], 1.0]]).unwrap());
        let family = WaveVectorFamily::with_fd_derivatives(
            1,
            2,
            1,
            lambdas,
            CoordinateSplit::new(vec![1], vec![0]).unwrap(),
        )
        .unwrap();
        let profile = Profile::new(
            1,
            1,
            Arc::new(|r: &[f64]| Ok(vec![r[0]])),
            Arc::new(|_r: &[f64]| Matrix::from_rows(&[vec![1.0]])),
            crate::system::DomainBox::unbounded(1),
        )
        .unwrap();
        let sol = ImplicitSolution::new(sys, family, profile).unwrap();
        let opts = EvalOptions::default();
        for (t, x) in [(0.0, 0.3), (1.0, 1.0), (0.5, -0.4), (2.0, 0.9)] {
            let res = sol.evaluate(&[t, x], &opts).unwrap();
            assert!(
                (res.u[0] - x / (1.0 + t)).abs() < 1e-11,
                "u({t},{x}) = {}",
                res.u[0]
            );
        }
    }

    #[test]
    fn phi_matrices_identity_cases() {
        let sol = sample_solution();
        let u0 = vec![0.0, 0.0];
        let (phi1, phi2) = sol.phi_matrices(&[0.0, 0.0, 0.0], &u0).unwrap();
        assert!(phi1.sub(&Matrix::identity(2)).unwrap().max_abs() < 1e-14);
        assert!(phi2.sub(&Matrix::identity(2)).unwrap().max_abs() < 1e-14);
        // dets agree when q = k
        let x = [0.4, 0.2, -0.1];
        let res = sol.evaluate(&x, &EvalOptions::default()).unwrap();
        let (phi1, phi2) = sol.phi_matrices(&x, &res.u).unwrap();
        assert!((phi1.det().unwrap() - phi2.det().unwrap()).abs() < 1e-10);
    }

    #[test]
    fn analytic_jacobian_matches_fd_and_alternative_route() {
        let sol = sample_solution();
        let opts = EvalOptions::default().with_newton_tol(1e-13);
        let mut rng = SplitMix64::new(31);
        for _ in 0..10 {
            let x = vec![
                rng.uniform(0.0, 0.4),
                rng.uniform(-0.4, 0.4),
                rng.uniform(-0.4, 0.4),
            ];
            let res = sol.evaluate(&x, &opts).unwrap();
            let analytic = sol.analytic_jacobian(&x, &res.u).unwrap();
            let alt = sol.analytic_jacobian_via_phi2(&x, &res.u).unwrap();
            assert!(analytic.sub(&alt).unwrap().max_abs() < 1e-10);
            let fd = fd_jacobian(
                |y| sol.evaluate(y, &opts).map(|e| e.u),
                &x,
                2,
                1e-6,
            )
            .unwrap();
            assert!(
                analytic.sub(&fd).unwrap().max_abs() < 1e-6,
                "analytic vs fd mismatch"
            );
        }
    }

    #[test]
    fn jacobian_at_origin_is_profile_slope_times_lambda() {
        let sol = sample_solution();
        let u0 = vec![0.0, 0.0];
        let jac = sol.analytic_jacobian(&[0.0, 0.0, 0.0], &u0).unwrap();
        let expected = sol
            .profile()
            .jacobian(&[0.0, 0.0])
            .unwrap()
            .matmul(&sol.family().lambda_matrix(&u0).unwrap())
            .unwrap();
        assert!(jac.sub(&expected).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn phi1_det_matches_fd_jacobian_of_the_residual_map() {
        // Phi1 is the u-Jacobian of G(u) = u - f(lambda(u) x); cross-check
        // its determinant against plain finite differences of G.
        let sol = sample_solution();
        let opts = EvalOptions::default().with_newton_tol(1e-13);
        let x = [0.45, 0.3, -0.2];
        let res = sol.evaluate(&x, &opts).unwrap();
        let g = |u: &[f64]| -> Vector {
            let r = riemann_invariants(sol.family(), u, &x).unwrap();
            let fu = sol.profile().value(&r).unwrap();
            sub(u, &fu)
        };
        let h = 1e-6;
        let mut fd = Matrix::zeros(2, 2);
        for alpha in 0..2 {
            let mut up = res.u.clone();
            let mut dn = res.u.clone();
            up[alpha] += h;
            dn[alpha] -= h;
            let (gp, gm) = (g(&up), g(&dn));
            for row in 0..2 {
                fd.set(row, alpha, (gp[row] - gm[row]) / (2.0 * h));
            }
        }
        assert!(
            (fd.det().unwrap() - res.phi1_det).abs() < 1e-6,
            "fd det {} vs phi1 det {}",
            fd.det().unwrap(),
            res.phi1_det
        );
    }

    #[test]
    fn rank_is_bounded_by_k() {
        let sol = sample_solution();
        let opts = EvalOptions::default();
        let rank = sol
            .solution_rank(&[0.3, 0.2, 0.1], DEFAULT_RANK_TOL, &opts)
            .unwrap();
        assert!(rank <= 2);
        assert_eq!(rank, 2, "generic linear profile has full profile rank");
        // constant profile gives rank 0
        let sol0 = ImplicitSolution::new(
            pressureless_2d(),
            advective_family_q2(),
            Profile::constant(vec![0.5, 0.5], 2),
        )
        .unwrap();
        assert_eq!(
            sol0.solution_rank(&[0.3, 0.2, 0.1], DEFAULT_RANK_TOL, &opts)
                .unwrap(),
            0
        );
    }

    #[test]
    fn rank1_k_equals_one_reduces_to_scalar_formula() {
        // For k = 1 the analytic Jacobian is (df/dr) lambda / (1 - (dr/du)(df/dr)).
        let sys = scalar_evolution(1, 1, Arc::new(|u: &[f64]| vec![u[0]]));
        let lambdas: LambdaFn =
            Arc::new(|u: &[f64]| Matrix::from_rows(&[vec![-u[0], 1.0]]).unwrap());
        let family = WaveVectorFamily::with_fd_derivatives(
            1,
            2,
            1,
            lambdas,
            CoordinateSplit::new(vec![1], vec![0]).unwrap(),
        )
        .unwrap();
        let profile = Profile::new(
            1,
            1,
            Arc::new(|r: &[f64]| Ok(vec![0.4 * r[0]])),
            Arc::new(|_r: &[f64]| Matrix::from_rows(&[vec![0.4]])),
            crate::system::DomainBox::unbounded(1),
        )
        .unwrap();
        let sol = ImplicitSolution::new(sys, family, profile).unwrap();
        let x = [0.7, 0.3];
        let res = sol.evaluate(&x, &EvalOptions::default()).unwrap();
        let jac = sol.analytic_jacobian(&x, &res.u).unwrap();
        // scalar route
        let dr_du = -0.7; // d(x - u t)/du = -t
        let scale = 0.4 / (1.0 - dr_du * 0.4);
        let expected = [scale * -res.u[0], scale * 1.0];
        assert!((jac.get(0, 0) - expected[0]).abs() < 1e-12);
        assert!((jac.get(0, 1) - expected[1]).abs() < 1e-12);
    }

    #[test]
    fn integrate_zero_selector_gives_constant_profile() {
        let sys = pressureless_2d();
        let lambda_field = Arc::new(|u: &[f64]| vec![-u[0], 1.0, 0.0]);
        let selector: GammaSelector =
            Arc::new(|_kernel: &[Vector], _f: &[f64], _r: f64| Some(vec![0.0, 0.0]));
        let profile = integrate_rank1_profile(
            &sys,
            lambda_field,
            vec![0.7, -0.2],
            (-1.0, 1.0),
            0.1,
            selector,
        )
        .unwrap();
        for r in [-0.95, -0.3, 0.0, 0.42, 1.0] {
            let v = profile.value(&[r]).unwrap();
            assert!((v[0] - 0.7).abs() < 1e-14);
            assert!((v[1] + 0.2).abs() < 1e-14);
        }
    }

    #[test]
    fn integrate_constant_selector_gives_linear_profile() {
        // kernel of the characteristic family spans all of u-space, so the
        // selector may return (1, 0); the profile is then f(r) = (r, 0).
        let sys = pressureless_2d();
        let lambda_field = Arc::new(|u: &[f64]| vec![-u[0], 1.0, 0.0]);
        let selector: GammaSelector =
            Arc::new(|_kernel: &[Vector], _f: &[f64], _r: f64| Some(vec![1.0, 0.0]));
        let profile = integrate_rank1_profile(
            &sys,
            lambda_field,
            vec![0.0, 0.0],
            (-1.0, 1.0),
            0.05,
            selector,
        )
        .unwrap();
        for r in [-0.9, -0.25, 0.3, 0.77] {
            let v = profile.value(&[r]).unwrap();
            assert!((v[0] - r).abs() < 1e-12, "f1({r}) = {}", v[0]);
            assert!(v[1].abs() < 1e-12);
        }
        let jac = profile.jacobian(&[0.4]).unwrap();
        assert!((jac.get(0, 0) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn integrate_nonlinear_selector_matches_fine_step_oracle() {
        // gamma(f) = (f2, -f1^2): a smooth nonlinear flow inside the
        // all-of-U kernel of the characteristic family.
        let sys = pressureless_2d();
        let lambda_field = Arc::new(|u: &[f64]| vec![-u[0], 1.0, 0.0]);
        let selector: GammaSelector = Arc::new(|_kernel: &[Vector], f: &[f64], _r: f64| {
            Some(vec![f[1], -f[0] * f[0]])
        });
        let f0 = vec![0.3, 1.0];
        let coarse = integrate_rank1_profile(
            &sys,
            lambda_field.clone(),
            f0.clone(),
            (-1.0, 1.0),
            0.0125,
            selector.clone(),
        )
        .unwrap();
        let fine = integrate_rank1_profile(
            &sys,
            lambda_field,
            f0,
            (-1.0, 1.0),
            0.001,
            selector,
        )
        .unwrap();
        for i in 0..=20 {
            let r = -1.0 + i as f64 * 0.1;
            let a = coarse.value(&[r]).unwrap();
            let b = fine.value(&[r]).unwrap();
            let d = norm2(&sub(&a, &b));
            assert!(d < 1e-8, "step-halving oracle violated at r = {r}: {d}");
        }
    }

    #[test]
    fn integrate_reports_empty_kernel() {
        let sys = pressureless_2d();
        // lambda = (1, 0, 0) has a full-rank contraction: kernel is empty.
        let lambda_field = Arc::new(|_u: &[f64]| vec![1.0, 0.0, 0.0]);
        let selector: GammaSelector =
            Arc::new(|_kernel: &[Vector], _f: &[f64], _r: f64| Some(vec![0.0, 0.0]));
        let res = integrate_rank1_profile(
            &sys,
            lambda_field,
            vec![0.0, 0.0],
            (-1.0, 1.0),
            0.1,
            selector,
        );
        assert!(matches!(res, Err(Error::KernelLost { .. })));
    }

    #[test]
    fn integrate_reports_undecided_selector() {
        let sys = pressureless_2d();
        let lambda_field = Arc::new(|u: &[f64]| vec![-u[0], 1.0, 0.0]);
        let selector: GammaSelector =
            Arc::new(|kernel: &[Vector], _f: &[f64], _r: f64| {
                if kernel.len() > 1 {
                    None
                } else {
                    Some(kernel[0].clone())
                }
            });
        let res = integrate_rank1_profile(
            &sys,
            lambda_field,
            vec![0.0, 0.0],
            (-1.0, 1.0),
            0.1,
            selector,
        );
        assert!(matches!(res, Err(Error::AmbiguousKernel { dim: 2, .. })));
    }
}
