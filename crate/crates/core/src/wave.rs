//! Wave-vector families, Riemann invariants, the orthogonal frames they
//! annihilate, and the numeric trace conditions that certify a (family,
//! profile) pair as a rank-k solution of its system.
//!
//! A family stores k covector fields `lambda^A(u)` in R^p, normalized so the
//! k columns named by the coordinate split carry an invertible pivot block
//! (identity for every built-in family). Riemann invariants are the
//! contractions `r^A = lambda^A_i(u) x^i`; the frame vectors `xi_a` span the
//! directions all covectors annihilate, and the trace conditions below are
//! the algebraic tests that the overdetermined system obtained by adjoining
//! `xi^i_a du^alpha/dx^i = 0` stays compatible.

use std::fmt;
use std::sync::Arc;

use crate::engine::Profile;
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix, Vector};
use crate::system::QuasilinearSystem;

/// Partition of the p coordinate slots into k pivot slots (where the family
/// has its invertible block) and p-k free slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoordinateSplit {
    pivots: Vec<usize>,
    frees: Vec<usize>,
}

impl CoordinateSplit {
    pub fn new(pivots: Vec<usize>, frees: Vec<usize>) -> Result<CoordinateSplit> {
        let p = pivots.len() + frees.len();
        let mut seen = vec![false; p];
        for &i in pivots.iter().chain(&frees) {
            if i >= p || seen[i] {
                return Err(Error::InvalidInput(format!(
                    "coordinate split must be a permutation of 0..{p}"
                )));
            }
            seen[i] = true;
        }
        Ok(CoordinateSplit { pivots, frees })
    }

    /// Pivot slots first 0..k, free slots k..p.
    pub fn leading(k: usize, p: usize) -> CoordinateSplit {
        CoordinateSplit {
            pivots: (0..k).collect(),
            frees: (k..p).collect(),
        }
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    pub fn frees(&self) -> &[usize] {
        &self.frees
    }

    pub fn k(&self) -> usize {
        self.pivots.len()
    }

    pub fn p(&self) -> usize {
        self.pivots.len() + self.frees.len()
    }
}

/// Callable returning the k-by-p matrix of covector rows at u.
pub type LambdaFn = Arc<dyn Fn(&[f64]) -> Matrix + Send + Sync>;
/// Callable returning, for each dependent variable alpha, the k-by-p matrix
/// of partial derivatives of the covector rows with respect to u^alpha.
pub type DLambdaFn = Arc<dyn Fn(&[f64]) -> Vec<Matrix> + Send + Sync>;

/// A family of k wave covector fields on u-space.
#[derive(Clone)]
pub struct WaveVectorFamily {
    k: usize,
    p: usize,
    q: usize,
    lambdas: LambdaFn,
    dlambdas: DLambdaFn,
    split: CoordinateSplit,
}

impl fmt::Debug for WaveVectorFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WaveVectorFamily")
            .field("k", &self.k)
            .field("p", &self.p)
            .field("q", &self.q)
            .field("split", &self.split)
            .finish()
    }
}

impl WaveVectorFamily {
    /// Family with analytically supplied derivatives.
    pub fn new(
        k: usize,
        p: usize,
        q: usize,
        lambdas: LambdaFn,
        dlambdas: DLambdaFn,
        split: CoordinateSplit,
    ) -> Result<WaveVectorFamily> {
        if k == 0 || k >= p {
            return Err(Error::InvalidInput(format!(
                "need 1 <= k < p; got k={k}, p={p}"
            )));
        }
        if split.k() != k || split.p() != p {
            return Err(Error::InvalidInput(
                "coordinate split inconsistent with family shape".into(),
            ));
        }
        Ok(WaveVectorFamily {
            k,
            p,
            q,
            lambdas,
            dlambdas,
            split,
        })
    }

    /// Family with derivatives by central finite differences with step
    /// `1e-6 * (1 + |u_alpha|)`.
    pub fn with_fd_derivatives(
        k: usize,
        p: usize,
        q: usize,
        lambdas: LambdaFn,
        split: CoordinateSplit,
    ) -> Result<WaveVectorFamily> {
        let inner = lambdas.clone();
        let dlambdas: DLambdaFn = Arc::new(move |u: &[f64]| {
            (0..u.len())
                .map(|alpha| {
                    let h = 1e-6 * (1.0 + u[alpha].abs());
                    let mut up = u.to_vec();
                    let mut dn = u.to_vec();
                    up[alpha] += h;
                    dn[alpha] -= h;
                    let plus = inner(&up);
                    let minus = inner(&dn);
                    plus.sub(&minus)
                        .map(|d| d.scale(1.0 / (2.0 * h)))
                        .unwrap_or_else(|_| Matrix::zeros(k, p))
                })
                .collect()
        });
        WaveVectorFamily::new(k, p, q, lambdas, dlambdas, split)
    }

    pub fn waves(&self) -> usize {
        self.k
    }

    pub fn independent_vars(&self) -> usize {
        self.p
    }

    pub fn dependent_vars(&self) -> usize {
        self.q
    }

    pub fn split(&self) -> &CoordinateSplit {
        &self.split
    }

    /// The k-by-p matrix of covector rows at u, shape- and finiteness-checked.
    pub fn lambda_matrix(&self, u: &[f64]) -> Result<Matrix> {
        if u.len() != self.q {
            return Err(Error::InvalidInput(format!(
                "u has length {}, expected q = {}",
                u.len(),
                self.q
            )));
        }
        let m = (self.lambdas)(u);
        if m.rows() != self.k || m.cols() != self.p {
            return Err(Error::InvalidInput(format!(
                "lambda callable returned {}x{}, expected {}x{}",
                m.rows(),
                m.cols(),
                self.k,
                self.p
            )));
        }
        if !m.max_abs().is_finite() {
            return Err(Error::InvalidInput("lambda rows must be finite".into()));
        }
        Ok(m)
    }

    /// Derivative tensor at u as one k-by-p matrix per dependent variable.
    pub fn dlambda(&self, u: &[f64]) -> Result<Vec<Matrix>> {
        let mats = (self.dlambdas)(u);
        if mats.len() != self.q {
            return Err(Error::InvalidInput(format!(
                "dlambda callable returned {} matrices, expected q = {}",
                mats.len(),
                self.q
            )));
        }
        for m in &mats {
            if m.rows() != self.k || m.cols() != self.p {
                return Err(Error::InvalidInput(
                    "dlambda matrix has wrong shape".into(),
                ));
            }
        }
        Ok(mats)
    }

    /// The k-by-k pivot block of the covector rows at u.
    pub fn pivot_block(&self, u: &[f64]) -> Result<Matrix> {
        let lam = self.lambda_matrix(u)?;
        let mut pi = Matrix::zeros(self.k, self.k);
        for a in 0..self.k {
            for (j, &col) in self.split.pivots().iter().enumerate() {
                pi.set(a, j, lam.get(a, col));
            }
        }
        Ok(pi)
    }

    /// Contraction `dr^A/du^alpha = sum_i dlambda^A_i/du^alpha x^i` (k-by-q).
    pub fn dr_du(&self, u: &[f64], x: &[f64]) -> Result<Matrix> {
        if x.len() != self.p {
            return Err(Error::InvalidInput(format!(
                "x has length {}, expected p = {}",
                x.len(),
                self.p
            )));
        }
        let dl = self.dlambda(u)?;
        let mut out = Matrix::zeros(self.k, self.q);
        for (alpha, mat) in dl.iter().enumerate() {
            for row in 0..self.k {
                out.set(row, alpha, dot(mat.row(row), x));
            }
        }
        Ok(out)
    }
}

/// Riemann invariants `r^A = lambda^A_i(u) x^i`.
pub fn riemann_invariants(fam: &WaveVectorFamily, u: &[f64], x: &[f64]) -> Result<Vector> {
    if x.len() != fam.independent_vars() {
        return Err(Error::InvalidInput(format!(
            "x has length {}, expected p = {}",
            x.len(),
            fam.independent_vars()
        )));
    }
    fam.lambda_matrix(u)?.matvec(x)
}

/// Frame of p-k vector fields annihilated by every covector of the family.
#[derive(Clone)]
pub struct OrthogonalFrame {
    family: WaveVectorFamily,
}

impl OrthogonalFrame {
    pub fn len(&self) -> usize {
        self.family.independent_vars() - self.family.waves()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The frame vectors at u. The a-th vector carries 1 in the a-th free
    /// slot and minus the pivot-block solve of the corresponding free column
    /// in the pivot slots, so orthogonality to every row is an algebraic
    /// identity.
    pub fn vectors(&self, u: &[f64]) -> Result<Vec<Vector>> {
        let fam = &self.family;
        let k = fam.waves();
        let p = fam.independent_vars();
        let lam = fam.lambda_matrix(u)?;
        let pi = fam.pivot_block(u)?;
        let pi_inv = pi.inverse().map_err(|_| Error::SingularPi)?;
        let mut out = Vec::with_capacity(p - k);
        for &free in fam.split().frees() {
            let col: Vector = (0..k).map(|row| lam.get(row, free)).collect();
            let coeffs = pi_inv.matvec(&col)?;
            let mut xi = vec![0.0; p];
            xi[free] = 1.0;
            for (j, &pivot) in fam.split().pivots().iter().enumerate() {
                xi[pivot] = -coeffs[j];
            }
            out.push(xi);
        }
        Ok(out)
    }
}

/// Builds the orthogonal frame from the pivot block, verifying that the
/// block is invertible at u (numerical rank k at the given tolerance).
/// Callers hitting `SingularPi` may permute coordinates and retry.
pub fn xi_from_pi(fam: &WaveVectorFamily, u: &[f64], tol: f64) -> Result<OrthogonalFrame> {
    let pi = fam.pivot_block(u)?;
    if pi.rank_with_tolerance(tol)? < fam.waves() {
        return Err(Error::SingularPi);
    }
    Ok(OrthogonalFrame {
        family: fam.clone(),
    })
}

#[derive(Debug, Clone)]
pub struct OrthogonalityReport {
    pub max_abs: f64,
    pub pass: bool,
}

/// Largest |lambda^A . xi_a| over the samples.
pub fn check_orthogonality(
    fam: &WaveVectorFamily,
    frame: &OrthogonalFrame,
    u_samples: &[Vector],
    tol: f64,
) -> Result<OrthogonalityReport> {
    let mut max_abs: f64 = 0.0;
    for u in u_samples {
        let lam = fam.lambda_matrix(u)?;
        for xi in frame.vectors(u)? {
            for row in 0..fam.waves() {
                max_abs = max_abs.max(dot(lam.row(row), &xi).abs());
            }
        }
    }
    Ok(OrthogonalityReport {
        max_abs,
        pass: max_abs <= tol,
    })
}

/// One matrix per free slot: `eta_a = (d lambda^A_{i_a} / d u^alpha)`,
/// k rows by q columns.
pub fn eta_matrices(
    fam: &WaveVectorFamily,
    u: &[f64],
    split: &CoordinateSplit,
) -> Result<Vec<Matrix>> {
    if split.k() != fam.waves() || split.p() != fam.independent_vars() {
        return Err(Error::InvalidInput(
            "coordinate split inconsistent with family shape".into(),
        ));
    }
    let dl = fam.dlambda(u)?;
    let k = fam.waves();
    let q = fam.dependent_vars();
    let mut out = Vec::with_capacity(split.frees().len());
    for &free in split.frees() {
        let mut eta = Matrix::zeros(k, q);
        for row in 0..k {
            for alpha in 0..q {
                eta.set(row, alpha, dl[alpha].get(row, free));
            }
        }
        out.push(eta);
    }
    Ok(out)
}

/// A single trace residual, tagged by equation index and the (possibly
/// empty) multiset of free slots it involves.
#[derive(Debug, Clone)]
pub struct TraceResidual {
    pub mu: usize,
    pub slots: Vec<usize>,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct TraceReport {
    pub residuals: Vec<TraceResidual>,
    pub max_abs: f64,
    pub pass: bool,
}

impl TraceReport {
    fn from_residuals(residuals: Vec<TraceResidual>, tol: f64) -> TraceReport {
        let max_abs = residuals
            .iter()
            .fold(0.0_f64, |m, r| m.max(r.value.abs()));
        TraceReport {
            residuals,
            max_abs,
            pass: max_abs <= tol,
        }
    }
}

/// Triple contraction `sum Delta^{mu i}_alpha M^alpha_A lambda^A_i` for all mu.
fn traces_of(
    deltas: &[Matrix],
    middle: &Matrix, // q x k
    lam: &Matrix,    // k x p
) -> Vec<f64> {
    let p = lam.cols();
    let k = lam.rows();
    let q = middle.rows();
    deltas
        .iter()
        .map(|d| {
            let mut t = 0.0;
            for i in 0..p {
                for alpha in 0..q {
                    let dval = d.get(i, alpha);
                    if dval == 0.0 {
                        continue;
                    }
                    for a in 0..k {
                        t += dval * middle.get(alpha, a) * lam.get(a, i);
                    }
                }
            }
            t
        })
        .collect()
}

/// Initial-value trace condition: `Tr(Delta^mu (df/dr) lambda) = 0` at the
/// profile point f(r), one residual per equation.
pub fn trace_condition_initial(
    sys: &QuasilinearSystem,
    fam: &WaveVectorFamily,
    profile: &Profile,
    r: &[f64],
    tol: f64,
) -> Result<TraceReport> {
    let f = profile.value(r)?;
    let jac = profile.jacobian(r)?; // q x k
    let lam = fam.lambda_matrix(&f)?;
    let deltas = sys.delta(&f)?;
    let residuals = traces_of(&deltas, &jac, &lam)
        .into_iter()
        .enumerate()
        .map(|(mu, value)| TraceResidual {
            mu,
            slots: vec![],
            value,
        })
        .collect();
    Ok(TraceReport::from_residuals(residuals, tol))
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for (i, &head) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(i);
        for mut tail in permutations(&rest) {
            let mut perm = vec![head];
            perm.append(&mut tail);
            out.push(perm);
        }
    }
    out
}

fn multisets(n_slots: usize, s: usize) -> Vec<Vec<usize>> {
    // non-decreasing index tuples of length s over 0..n_slots
    let mut out = Vec::new();
    let mut current = vec![0usize; s];
    loop {
        out.push(current.clone());
        let mut pos = s;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            if current[pos] + 1 < n_slots {
                let v = current[pos] + 1;
                for c in current.iter_mut().skip(pos) {
                    *c = v;
                }
                break;
            }
        }
    }
}

/// Symmetrized trace conditions
/// `Tr(Delta^mu (df/dr) eta_(a1) (df/dr) ... eta_(as) (df/dr) lambda) = 0`
/// for s = 1..=s_max, averaged over permutations of each slot multiset.
pub fn trace_condition_symmetrized(
    sys: &QuasilinearSystem,
    fam: &WaveVectorFamily,
    profile: &Profile,
    r: &[f64],
    s_max: usize,
    tol: f64,
) -> Result<TraceReport> {
    let f = profile.value(r)?;
    let jac = profile.jacobian(r)?; // q x k
    let lam = fam.lambda_matrix(&f)?;
    let deltas = sys.delta(&f)?;
    let etas = eta_matrices(fam, &f, fam.split())?;
    let n_slots = etas.len();
    let mut residuals = Vec::new();
    if n_slots == 0 {
        return Ok(TraceReport::from_residuals(residuals, tol));
    }
    for s in 1..=s_max {
        for slots in multisets(n_slots, s) {
            let perms = permutations(&slots);
            let mut accum: Option<Vec<f64>> = None;
            for perm in &perms {
                // chain = F * eta_{a1} * F * ... * eta_{as} * F  (q x k)
                let mut chain = jac.clone();
                for &a in perm {
                    chain = chain.matmul(&etas[a])?.matmul(&jac)?;
                }
                let traces = traces_of(&deltas, &chain, &lam);
                accum = Some(match accum {
                    None => traces,
                    Some(prev) => prev.iter().zip(&traces).map(|(a, b)| a + b).collect(),
                });
            }
            let n_perms = perms.len() as f64;
            for (mu, value) in accum.unwrap().iter().enumerate() {
                residuals.push(TraceResidual {
                    mu,
                    slots: slots.clone(),
                    value: value / n_perms,
                });
            }
        }
    }
    Ok(TraceReport::from_residuals(residuals, tol))
}

/// Profile-independent rank-2 compatibility condition for q = k = 2:
/// `Tr[Delta^mu (eta_a - I Tr eta_a) lambda] = 0` per equation and free slot.
///
/// In index form the residual is the Frobenius pairing of the per-wave
/// characteristic contraction `D^mu[alpha][A] = sum_i Delta^{mu i}_alpha
/// lambda^A_i` with the deviator `eta_a - I Tr(eta_a)`; the
/// `dets_and_traces` identity test pins the index orientation.
pub fn rank2_q2_condition(
    sys: &QuasilinearSystem,
    fam: &WaveVectorFamily,
    u: &[f64],
    tol: f64,
) -> Result<TraceReport> {
    if fam.dependent_vars() != 2 || fam.waves() != 2 {
        return Err(Error::InvalidInput(
            "rank-2 condition requires q = 2 and k = 2".into(),
        ));
    }
    let lam = fam.lambda_matrix(u)?;
    let deltas = sys.delta(u)?;
    let etas = eta_matrices(fam, u, fam.split())?;
    let p = fam.independent_vars();
    let mut residuals = Vec::new();
    for (slot, eta) in etas.iter().enumerate() {
        let eta_trace = eta.trace()?;
        for (mu, d) in deltas.iter().enumerate() {
            // D[alpha][A] = sum_i Delta^{mu i}_alpha lambda^A_i
            let mut value = 0.0;
            for alpha in 0..2 {
                for a in 0..2 {
                    let mut dval = 0.0;
                    for i in 0..p {
                        dval += d.get(i, alpha) * lam.get(a, i);
                    }
                    let m = eta.get(alpha, a) - if alpha == a { eta_trace } else { 0.0 };
                    value += dval * m;
                }
            }
            residuals.push(TraceResidual {
                mu,
                slots: vec![slot],
                value,
            });
        }
    }
    Ok(TraceReport::from_residuals(residuals, tol))
}

/// True when the pivot-block solve of the free columns,
/// `Pi^{-1} (lambda^B_i)_{i free}`, is the same matrix at every sample:
/// the reduced system then does not depend on the free coordinates.
pub fn check_reduced_independence(
    fam: &WaveVectorFamily,
    u_samples: &[Vector],
    tol: f64,
) -> Result<bool> {
    let mut reference: Option<Matrix> = None;
    for u in u_samples {
        let lam = fam.lambda_matrix(u)?;
        let pi = fam.pivot_block(u)?;
        let pi_inv = pi.inverse().map_err(|_| Error::SingularPi)?;
        let k = fam.waves();
        let frees = fam.split().frees();
        let mut free_block = Matrix::zeros(k, frees.len());
        for row in 0..k {
            for (j, &col) in frees.iter().enumerate() {
                free_block.set(row, j, lam.get(row, col));
            }
        }
        let x = pi_inv.matmul(&free_block)?;
        match &reference {
            None => reference = Some(x),
            Some(r0) => {
                if x.sub(r0)?.max_abs() > tol {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Profile;
    use crate::rng::SplitMix64;
    use crate::system::test_systems::pressureless_2d;
    use crate::system::DomainBox;

    /// lambda^1 = (-u1, 1, 0), lambda^2 = (-u2, 0, 1) in (t, x, y) ordering,
    /// with analytic derivatives.
    pub(crate) fn advective_family() -> WaveVectorFamily {
        let lambdas: LambdaFn = Arc::new(|u: &[f64]| {
            Matrix::from_rows(&[vec![-u[0], 1.0, 0.0], vec![-u[1], 0.0, 1.0]]).unwrap()
        });
        let dlambdas: DLambdaFn = Arc::new(|_u: &[f64]| {
            let mut d1 = Matrix::zeros(2, 3);
            d1.set(0, 0, -1.0);
            let mut d2 = Matrix::zeros(2, 3);
            d2.set(1, 0, -1.0);
            vec![d1, d2]
        });
        WaveVectorFamily::new(
            2,
            3,
            2,
            lambdas,
            dlambdas,
            CoordinateSplit::new(vec![1, 2], vec![0]).unwrap(),
        )
        .unwrap()
    }

    fn constant_family() -> WaveVectorFamily {
        let lambdas: LambdaFn = Arc::new(|_u: &[f64]| {
            Matrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap()
        });
        WaveVectorFamily::with_fd_derivatives(
            2,
            3,
            2,
            lambdas,
            CoordinateSplit::leading(2, 3),
        )
        .unwrap()
    }

    #[test]
    fn riemann_invariants_examples() {
        let fam = advective_family();
        let u = [0.3, -0.7];
        assert_eq!(
            riemann_invariants(&fam, &u, &[0.0, 0.0, 0.0]).unwrap(),
            vec![0.0, 0.0]
        );
        // r = (x - u1 t, y - u2 t)
        let r = riemann_invariants(&fam, &u, &[2.0, 1.0, -1.0]).unwrap();
        assert!((r[0] - (1.0 - 0.3 * 2.0)).abs() < 1e-15);
        assert!((r[1] - (-1.0 + 0.7 * 2.0)).abs() < 1e-15);
        // constant unit rows pick out coordinates
        let cf = constant_family();
        let r = riemann_invariants(&cf, &u, &[5.0, 6.0, 7.0]).unwrap();
        assert_eq!(r, vec![5.0, 6.0]);
    }

    #[test]
    fn xi_from_pi_constant_rows() {
        let frame = xi_from_pi(&constant_family(), &[0.0, 0.0], 1e-10).unwrap();
        let xis = frame.vectors(&[0.0, 0.0]).unwrap();
        assert_eq!(xis, vec![vec![0.0, 0.0, 1.0]]);
    }

    #[test]
    fn xi_from_pi_velocity_rows() {
        // rows (1, 0, -u1), (0, 1, -u2) in (x, y, t) ordering -> xi = (u1, u2, 1)
        let lambdas: LambdaFn = Arc::new(|u: &[f64]| {
            Matrix::from_rows(&[vec![1.0, 0.0, -u[0]], vec![0.0, 1.0, -u[1]]]).unwrap()
        });
        let fam = WaveVectorFamily::with_fd_derivatives(
            2,
            3,
            2,
            lambdas,
            CoordinateSplit::leading(2, 3),
        )
        .unwrap();
        let u = [0.8, -0.4];
        let xis = xi_from_pi(&fam, &u, 1e-10)
            .unwrap()
            .vectors(&u)
            .unwrap();
        assert_eq!(xis.len(), 1);
        assert!((xis[0][0] - 0.8).abs() < 1e-14);
        assert!((xis[0][1] + 0.4).abs() < 1e-14);
        assert!((xis[0][2] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn xi_from_pi_hand_example() {
        // rows (2, 0, 1), (0, 1, 1) -> xi = (-1/2, -1, 1)
        let lambdas: LambdaFn = Arc::new(|_u: &[f64]| {
            Matrix::from_rows(&[vec![2.0, 0.0, 1.0], vec![0.0, 1.0, 1.0]]).unwrap()
        });
        let fam = WaveVectorFamily::with_fd_derivatives(
            2,
            3,
            2,
            lambdas,
            CoordinateSplit::leading(2, 3),
        )
        .unwrap();
        let xis = xi_from_pi(&fam, &[0.0, 0.0], 1e-10)
            .unwrap()
            .vectors(&[0.0, 0.0])
            .unwrap();
        assert!((xis[0][0] + 0.5).abs() < 1e-14);
        assert!((xis[0][1] + 1.0).abs() < 1e-14);
        assert!((xis[0][2] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn orthogonality_holds_at_machine_precision() {
        let mut rng = SplitMix64::new(5);
        for fam in [advective_family(), constant_family()] {
            let frame = xi_from_pi(&fam, &[0.1, 0.2], 1e-10).unwrap();
            let samples: Vec<Vec<f64>> = (0..20)
                .map(|_| vec![rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)])
                .collect();
            let report = check_orthogonality(&fam, &frame, &samples, 1e-12).unwrap();
            assert!(report.pass, "max |lambda.xi| = {}", report.max_abs);
        }
    }

    #[test]
    fn singular_pivot_block_is_reported() {
        let lambdas: LambdaFn = Arc::new(|_u: &[f64]| {
            Matrix::from_rows(&[vec![1.0, 1.0, 0.0], vec![1.0, 1.0, 1.0]]).unwrap()
        });
        let fam = WaveVectorFamily::with_fd_derivatives(
            2,
            3,
            2,
            lambdas,
            CoordinateSplit::leading(2, 3),
        )
        .unwrap();
        assert!(matches!(
            xi_from_pi(&fam, &[0.0, 0.0], 1e-10),
            Err(Error::SingularPi)
        ));
    }

    #[test]
    fn eta_matrices_cases() {
        // constant family: all eta vanish
        let etas = eta_matrices(&constant_family(), &[0.3, 0.4], constant_family().split())
            .unwrap();
        assert_eq!(etas.len(), 1);
        assert!(etas[0].max_abs() < 1e-9);

        // advective family: eta_t = -I
        let fam = advective_family();
        let etas = eta_matrices(&fam, &[0.3, 0.4], fam.split()).unwrap();
        assert_eq!(etas.len(), 1);
        let expected = Matrix::from_rows(&[vec![-1.0, 0.0], vec![0.0, -1.0]]).unwrap();
        assert!(etas[0].sub(&expected).unwrap().max_abs() < 1e-12);

        // family depending on u1 only: second eta column vanishes
        let lambdas: LambdaFn = Arc::new(|u: &[f64]| {
            Matrix::from_rows(&[vec![u[0] * u[0], 1.0, 0.0], vec![2.0 * u[0], 0.0, 1.0]])
                .unwrap()
        });
        let fam = WaveVectorFamily::with_fd_derivatives(
            2,
            3,
            2,
            lambdas,
            CoordinateSplit::new(vec![1, 2], vec![0]).unwrap(),
        )
        .unwrap();
        let etas = eta_matrices(&fam, &[0.5, 0.7], fam.split()).unwrap();
        for row in 0..2 {
            assert!(etas[0].get(row, 1).abs() < 1e-9, "u2 column should vanish");
        }
    }

    fn linear_profile() -> Profile {
        Profile::new(
            2,
            2,
            Arc::new(|r: &[f64]| Ok(vec![0.3 * r[0] + 0.1 * r[1], -0.2 * r[0] + 0.4 * r[1]])),
            Arc::new(|_r: &[f64]| {
                Matrix::from_rows(&[vec![0.3, 0.1], vec![-0.2, 0.4]])
            }),
            DomainBox::unbounded(2),
        )
        .unwrap()
    }

    #[test]
    fn initial_trace_condition_vanishes_for_characteristic_family() {
        let sys = pressureless_2d();
        let fam = advective_family();
        let profile = linear_profile();
        let report =
            trace_condition_initial(&sys, &fam, &profile, &[0.4, -0.2], 1e-12).unwrap();
        assert!(report.pass, "max residual {}", report.max_abs);
        // constant profile: residual is exactly zero
        let constant = Profile::constant(vec![0.7, -0.1], 2);
        let report =
            trace_condition_initial(&sys, &fam, &constant, &[0.4, -0.2], 0.0).unwrap();
        assert_eq!(report.max_abs, 0.0);
    }

    #[test]
    fn initial_trace_condition_scales_linearly_in_lambda() {
        let sys = pressureless_2d();
        let profile = linear_profile();
        let r = [0.3, 0.2];
        // deliberately non-characteristic rows so residuals are nonzero
        let make = |c: f64| {
            let lambdas: LambdaFn = Arc::new(move |u: &[f64]| {
                Matrix::from_rows(&[
                    vec![c * (-u[0] + 0.1), c * 1.0, 0.0],
                    vec![c * -u[1], 0.0, c * 1.0],
                ])
                .unwrap()
            });
            WaveVectorFamily::with_fd_derivatives(
                2,
                3,
                2,
                lambdas,
                CoordinateSplit::new(vec![1, 2], vec![0]).unwrap(),
            )
            .unwrap()
        };
        let base = trace_condition_initial(&sys, &make(1.0), &profile, &r, 1e30).unwrap();
        let scaled = trace_condition_initial(&sys, &make(3.0), &profile, &r, 1e30).unwrap();
        assert!(base.max_abs > 1e-3, "control must be nonzero");
        for (b, s) in base.residuals.iter().zip(&scaled.residuals) {
            assert!(
                (3.0 * b.value - s.value).abs() <= 1e-12 * (1.0 + s.value.abs()),
                "expected linear scaling"
            );
        }
    }

    #[test]
    fn symmetrized_traces_vanish_for_constant_wave_vectors() {
        let sys = pressureless_2d();
        let fam = constant_family();
        let profile = linear_profile();
        let report =
            trace_condition_symmetrized(&sys, &fam, &profile, &[0.1, 0.2], 1, 0.0).unwrap();
        for r in &report.residuals {
            assert_eq!(r.value, 0.0, "eta = 0 must give exact zeros");
        }
    }

    #[test]
    fn symmetrized_s1_matches_direct_formula() {
        // hand-rolled Tr(Delta F eta F lambda) for q = k = 2, one free slot
        let sys = pressureless_2d();
        let fam = advective_family();
        let profile = linear_profile();
        let r = [0.25, -0.15];
        let report =
            trace_condition_symmetrized(&sys, &fam, &profile, &r, 1, 1e30).unwrap();
        let f = profile.value(&r).unwrap();
        let jac = profile.jacobian(&r).unwrap();
        let lam = fam.lambda_matrix(&f).unwrap();
        let deltas = sys.delta(&f).unwrap();
        let etas = eta_matrices(&fam, &f, fam.split()).unwrap();
        for (mu, d) in deltas.iter().enumerate() {
            let mut direct = 0.0;
            for i in 0..3 {
                for alpha in 0..2 {
                    for a1 in 0..2 {
                        for beta in 0..2 {
                            for b in 0..2 {
                                direct += d.get(i, alpha)
                                    * jac.get(alpha, a1)
                                    * etas[0].get(a1, beta)
                                    * jac.get(beta, b)
                                    * lam.get(b, i);
                            }
                        }
                    }
                }
            }
            let got = report
                .residuals
                .iter()
                .find(|t| t.mu == mu && t.slots == vec![0])
                .unwrap()
                .value;
            assert!((got - direct).abs() < 1e-12);
        }
    }

    /// Unconditional identity pinning the index orientation used by
    /// `rank2_q2_condition`: for arbitrary 2x2 data
    /// `Tr(D F eta F L) = det(F) * R + Tr(eta F) * Tr(D F L)`
    /// where R is the rank-2 residual pairing.
    #[test]
    fn dets_and_traces() {
        let mut rng = SplitMix64::new(99);
        for _ in 0..50 {
            let rnd = |rng: &mut SplitMix64| rng.uniform(-1.5, 1.5);
            let f = Matrix::from_rows(&[
                vec![rnd(&mut rng), rnd(&mut rng)],
                vec![rnd(&mut rng), rnd(&mut rng)],
            ])
            .unwrap();
            let eta = Matrix::from_rows(&[
                vec![rnd(&mut rng), rnd(&mut rng)],
                vec![rnd(&mut rng), rnd(&mut rng)],
            ])
            .unwrap();
            let lam = Matrix::from_rows(&[
                vec![rnd(&mut rng), rnd(&mut rng), rnd(&mut rng)],
                vec![rnd(&mut rng), rnd(&mut rng), rnd(&mut rng)],
            ])
            .unwrap();
            let delta = Matrix::from_rows(&[
                vec![rnd(&mut rng), rnd(&mut rng)],
                vec![rnd(&mut rng), rnd(&mut rng)],
                vec![rnd(&mut rng), rnd(&mut rng)],
            ])
            .unwrap();

            let chain = f.matmul(&eta).unwrap().matmul(&f).unwrap();
            let lhs = traces_of(std::slice::from_ref(&delta), &chain, &lam)[0];

            let det_f = f.det().unwrap();
            let tr_eta_f = eta.matmul(&f).unwrap().trace().unwrap();
            let tr_dfl = traces_of(std::slice::from_ref(&delta), &f, &lam)[0];
            // R = <D, eta - I tr(eta)> with D[alpha][A] = sum_i Delta^i_alpha lambda^A_i
            let eta_trace = eta.trace().unwrap();
            let mut r_pair = 0.0;
            for alpha in 0..2 {
                for a in 0..2 {
                    let mut dval = 0.0;
                    for i in 0..3 {
                        dval += delta.get(i, alpha) * lam.get(a, i);
                    }
                    r_pair += dval
                        * (eta.get(alpha, a) - if alpha == a { eta_trace } else { 0.0 });
                }
            }
            let rhs = det_f * r_pair + tr_eta_f * tr_dfl;
            assert!(
                (lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()),
                "identity violated: lhs={lhs}, rhs={rhs}"
            );
        }
    }

    #[test]
    fn rank2_condition_examples() {
        let sys = pressureless_2d();
        // constant family: all eta vanish, residual exactly zero
        let report = rank2_q2_condition(&sys, &constant_family(), &[0.2, 0.4], 0.0).unwrap();
        assert_eq!(report.max_abs, 0.0);
        // advective family solves the condition at every sampled u
        let mut rng = SplitMix64::new(17);
        for _ in 0..20 {
            let u = [rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)];
            let report = rank2_q2_condition(&sys, &advective_family(), &u, 1e-10).unwrap();
            assert!(report.pass, "residual {}", report.max_abs);
        }
        // perturbed covector is a negative control
        let lambdas: LambdaFn = Arc::new(|u: &[f64]| {
            Matrix::from_rows(&[vec![-u[0] + 0.1 * u[1], 1.0, 0.0], vec![-u[1], 0.0, 1.0]])
                .unwrap()
        });
        let bad = WaveVectorFamily::with_fd_derivatives(
            2,
            3,
            2,
            lambdas,
            CoordinateSplit::new(vec![1, 2], vec![0]).unwrap(),
        )
        .unwrap();
        let report = rank2_q2_condition(&sys, &bad, &[0.9, 1.1], 1e-3).unwrap();
        assert!(report.max_abs > 1e-3, "control residual {}", report.max_abs);
    }

    #[test]
    fn rank2_condition_rejects_wrong_shape() {
        let sys = pressureless_2d();
        let lambdas: LambdaFn =
            Arc::new(|_u: &[f64]| Matrix::from_rows(&[vec![1.0, 0.0, 0.0]]).unwrap());
        let fam = WaveVectorFamily::with_fd_derivatives(
            1,
            3,
            2,
            lambdas,
            CoordinateSplit::new(vec![0], vec![1, 2]).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            rank2_q2_condition(&sys, &fam, &[0.0, 0.0], 1e-8),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn reduced_independence_cases() {
        let samples: Vec<Vec<f64>> = vec![vec![0.1, 0.2], vec![0.5, -0.3], vec![-0.7, 0.9]];
        assert!(check_reduced_independence(&constant_family(), &samples, 1e-10).unwrap());
        // free-column solve (u1, u2)^T varies with u
        let lambdas: LambdaFn = Arc::new(|u: &[f64]| {
            Matrix::from_rows(&[vec![1.0, 0.0, -u[0]], vec![0.0, 1.0, -u[1]]]).unwrap()
        });
        let varying = WaveVectorFamily::with_fd_derivatives(
            2,
            3,
            2,
            lambdas,
            CoordinateSplit::leading(2, 3),
        )
        .unwrap();
        assert!(!check_reduced_independence(&varying, &samples, 1e-10).unwrap());
        // free block equal to Pi * C for constant C stays independent
        let lambdas: LambdaFn = Arc::new(|u: &[f64]| {
            let pi = [[1.0 + u[0] * u[0], 0.3 * u[1]], [0.0, 1.0 + u[1] * u[1]]];
            let c = [1.0, 2.0];
            Matrix::from_rows(&[
                vec![pi[0][0], pi[0][1], pi[0][0] * c[0] + pi[0][1] * c[1]],
                vec![pi[1][0], pi[1][1], pi[1][0] * c[0] + pi[1][1] * c[1]],
            ])
            .unwrap()
        });
        let constructed = WaveVectorFamily::with_fd_derivatives(
            2,
            3,
            2,
            lambdas,
            CoordinateSplit::leading(2, 3),
        )
        .unwrap();
        assert!(check_reduced_independence(&constructed, &samples, 1e-8).unwrap());
    }
}
