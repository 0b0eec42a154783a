//! Quasilinear first-order systems `sum_i Delta^{mu i}_alpha(u) du^alpha/dx^i = 0`
//! and their pointwise characteristic algebra: contractions with wave
//! covectors, wave-relation kernels and rank-deficiency tests.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

/// Axis-aligned box used to declare where coefficient functions and profiles
/// are valid. Unbounded sides are expressed with infinities.
#[derive(Debug, Clone)]
pub struct DomainBox {
    bounds: Vec<(f64, f64)>,
}

impl DomainBox {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<DomainBox> {
        if bounds.iter().any(|&(lo, hi)| lo > hi) {
            return Err(Error::InvalidInput("domain box with min > max".into()));
        }
        Ok(DomainBox { bounds })
    }

    /// The whole of R^n.
    pub fn unbounded(n: usize) -> DomainBox {
        DomainBox {
            bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); n],
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.bounds.len()
            && point
                .iter()
                .zip(&self.bounds)
                .all(|(v, &(lo, hi))| *v >= lo && *v <= hi)
    }

    pub fn check(&self, point: &[f64], what: &str) -> Result<()> {
        if !self.contains(point) {
            return Err(Error::Domain(format!("{what} at {point:?}")));
        }
        Ok(())
    }
}

/// Coefficient callable: maps u to the l matrices Delta^mu, each p-by-q
/// (row = independent-variable slot i, column = dependent-variable slot alpha).
pub type CoeffFn = Arc<dyn Fn(&[f64]) -> Vec<Matrix> + Send + Sync>;

/// A quasilinear first-order system described by its coefficient tensor.
#[derive(Clone)]
pub struct QuasilinearSystem {
    name: String,
    l: usize,
    p: usize,
    q: usize,
    variable_names: Vec<String>,
    coeff: CoeffFn,
    u_domain: DomainBox,
}

impl fmt::Debug for QuasilinearSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QuasilinearSystem")
            .field("name", &self.name)
            .field("l", &self.l)
            .field("p", &self.p)
            .field("q", &self.q)
            .finish()
    }
}

impl QuasilinearSystem {
    /// `variable_names` lists the p independent then the q dependent labels.
    pub fn new(
        name: impl Into<String>,
        l: usize,
        p: usize,
        q: usize,
        variable_names: Vec<String>,
        coeff: CoeffFn,
        u_domain: DomainBox,
    ) -> Result<QuasilinearSystem> {
        if l < 1 || q < 1 || p < 2 {
            return Err(Error::InvalidInput(format!(
                "need l >= 1, q >= 1, p >= 2; got l={l}, p={p}, q={q}"
            )));
        }
        if variable_names.len() != p + q {
            return Err(Error::InvalidInput(format!(
                "expected {} variable names, got {}",
                p + q,
                variable_names.len()
            )));
        }
        if u_domain.dim() != q {
            return Err(Error::InvalidInput(
                "u-domain dimension does not match q".into(),
            ));
        }
        Ok(QuasilinearSystem {
            name: name.into(),
            l,
            p,
            q,
            variable_names,
            coeff,
            u_domain,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn equations(&self) -> usize {
        self.l
    }

    pub fn independent_vars(&self) -> usize {
        self.p
    }

    pub fn dependent_vars(&self) -> usize {
        self.q
    }

    pub fn variable_names(&self) -> &[String] {
        &self.variable_names
    }

    /// Labels of the p independent variables.
    pub fn x_names(&self) -> &[String] {
        &self.variable_names[..self.p]
    }

    pub fn u_domain(&self) -> &DomainBox {
        &self.u_domain
    }

    /// Evaluates the coefficient tensor at u, enforcing the declared domain
    /// and checking shapes and finiteness.
    pub fn delta(&self, u: &[f64]) -> Result<Vec<Matrix>> {
        if u.len() != self.q {
            return Err(Error::InvalidInput(format!(
                "u has length {}, expected q = {}",
                u.len(),
                self.q
            )));
        }
        self.u_domain.check(u, "system coefficients")?;
        let mats = (self.coeff)(u);
        if mats.len() != self.l {
            return Err(Error::InvalidInput(format!(
                "coefficient callable returned {} matrices, expected l = {}",
                mats.len(),
                self.l
            )));
        }
        for m in &mats {
            if m.rows() != self.p || m.cols() != self.q {
                return Err(Error::InvalidInput(format!(
                    "coefficient matrix is {}x{}, expected {}x{}",
                    m.rows(),
                    m.cols(),
                    self.p,
                    self.q
                )));
            }
            if !m.max_abs().is_finite() {
                return Err(Error::InvalidInput(
                    "coefficient matrix has non-finite entries".into(),
                ));
            }
        }
        Ok(mats)
    }
}

/// The l-by-q contraction of the coefficient tensor with a wave covector.
#[derive(Debug, Clone)]
pub struct CharacteristicMatrix {
    pub entries: Matrix,
    pub at_u: Vector,
    pub lambda: Vector,
}

/// Assembles `sum_i Delta^{mu i}_alpha(u) lambda_i` as an l-by-q matrix.
pub fn characteristic_matrix(
    sys: &QuasilinearSystem,
    u: &[f64],
    lambda: &[f64],
) -> Result<CharacteristicMatrix> {
    if lambda.len() != sys.independent_vars() {
        return Err(Error::InvalidInput(format!(
            "lambda has length {}, expected p = {}",
            lambda.len(),
            sys.independent_vars()
        )));
    }
    if lambda.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("lambda entries must be finite".into()));
    }
    let deltas = sys.delta(u)?;
    let mut cm = Matrix::zeros(sys.equations(), sys.dependent_vars());
    for (mu, d) in deltas.iter().enumerate() {
        for alpha in 0..sys.dependent_vars() {
            let mut s = 0.0;
            for i in 0..sys.independent_vars() {
                s += d.get(i, alpha) * lambda[i];
            }
            cm.set(mu, alpha, s);
        }
    }
    Ok(CharacteristicMatrix {
        entries: cm,
        at_u: u.to_vec(),
        lambda: lambda.to_vec(),
    })
}

/// Orthonormal basis of the kernel of the characteristic matrix: the
/// admissible profile tangents gamma at (u, lambda).
pub fn wave_relation_kernel(
    sys: &QuasilinearSystem,
    u: &[f64],
    lambda: &[f64],
    tol: f64,
) -> Result<Vec<Vector>> {
    characteristic_matrix(sys, u, lambda)?.entries.null_space(tol)
}

/// True when the characteristic matrix has rank below the equation count,
/// i.e. lambda is a wave covector at u.
pub fn is_rank_deficient(
    sys: &QuasilinearSystem,
    u: &[f64],
    lambda: &[f64],
    tol: f64,
) -> Result<bool> {
    let cm = characteristic_matrix(sys, u, lambda)?;
    Ok(cm.entries.rank_with_tolerance(tol)? < sys.equations())
}

/// Basis of wave covectors compatible with a given profile point: the kernel
/// of `M^mu_i = sum_alpha Delta^{mu i}_alpha(f) f'^alpha`, nonempty whenever
/// l < p.
pub fn solve_wavevector_for_profile(
    sys: &QuasilinearSystem,
    f_value: &[f64],
    f_prime: &[f64],
    tol: f64,
) -> Result<Vec<Vector>> {
    if f_value.len() != sys.dependent_vars() || f_prime.len() != sys.dependent_vars() {
        return Err(Error::InvalidInput(
            "profile value and derivative must have length q".into(),
        ));
    }
    let deltas = sys.delta(f_value)?;
    let mut m = Matrix::zeros(sys.equations(), sys.independent_vars());
    for (mu, d) in deltas.iter().enumerate() {
        for i in 0..sys.independent_vars() {
            let mut s = 0.0;
            for alpha in 0..sys.dependent_vars() {
                s += d.get(i, alpha) * f_prime[alpha];
            }
            m.set(mu, i, s);
        }
    }
    m.null_space(tol)
}

/// Checks that the eigenvalues of the q-by-q contraction are real at u, via
/// the discriminant of the characteristic polynomial (closed forms, q <= 3).
/// Requires a determined system (l = q).
pub fn contraction_eigenvalues_real(
    sys: &QuasilinearSystem,
    u: &[f64],
    lambda: &[f64],
) -> Result<bool> {
    let q = sys.dependent_vars();
    if sys.equations() != q {
        return Err(Error::InvalidInput(
            "real-eigenvalue check needs a determined system (l = q)".into(),
        ));
    }
    if q > 3 {
        return Err(Error::InvalidInput(
            "real-eigenvalue check implemented for q <= 3".into(),
        ));
    }
    let cm = characteristic_matrix(sys, u, lambda)?.entries;
    let scale = cm.max_abs().max(1.0);
    let slop = 1e-12;
    match q {
        1 => Ok(true),
        2 => {
            // eigenvalues of M are roots of e^2 - tr(M) e + det(M)
            let tr = cm.trace()?;
            let det = cm.det()?;
            Ok(tr * tr - 4.0 * det >= -slop * scale * scale)
        }
        _ => {
            // char_poly gives det(eI + M) = e^3 + p2 e^2 + p1 e + p0; the
            // roots are the negated eigenvalues, which are real iff the
            // eigenvalues are. All roots real iff discriminant >= 0.
            let p = cm.char_poly()?;
            let (b, c, d) = (p[2], p[1], p[0]);
            let disc = 18.0 * b * c * d - 4.0 * b * b * b * d + b * b * c * c
                - 4.0 * c * c * c
                - 27.0 * d * d;
            Ok(disc >= -slop * scale.powi(6))
        }
    }
}

#[cfg(test)]
pub(crate) mod test_systems {
    use super::*;

    /// Scalar-coefficient evolution system: du/dt + sum a^i(u) du/dx^i = 0
    /// with u in R^q, p = n + 1, l = q.
    pub fn scalar_evolution(
        q: usize,
        n: usize,
        a: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
    ) -> QuasilinearSystem {
        let p = n + 1;
        let names: Vec<String> = (0..p + q)
            .map(|i| {
                if i == 0 {
                    "t".into()
                } else if i < p {
                    format!("x{}", i)
                } else {
                    format!("u{}", i - p + 1)
                }
            })
            .collect();
        let coeff: CoeffFn = Arc::new(move |u: &[f64]| {
            let avals = a(u);
            (0..q)
                .map(|mu| {
                    let mut d = Matrix::zeros(p, q);
                    d.set(0, mu, 1.0);
                    for i in 0..n {
                        d.set(1 + i, mu, avals[i]);
                    }
                    d
                })
                .collect()
        });
        QuasilinearSystem::new("scalar-evolution", q, p, q, names, coeff, DomainBox::unbounded(q))
            .unwrap()
    }

    /// 2D pressureless flow: u^a_t + u^1 u^a_x + u^2 u^a_y = 0, a = 1, 2.
    pub fn pressureless_2d() -> QuasilinearSystem {
        scalar_evolution(2, 2, Arc::new(|u: &[f64]| vec![u[0], u[1]]))
    }
}
