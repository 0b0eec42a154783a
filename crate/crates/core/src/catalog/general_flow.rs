//! n-dimensional isentropic flow with a linear Cauchy datum: the velocity is
//! `u(x, t) = (I + t alpha)^{-1} (beta + alpha x)` and the sound speed is
//! `a(t) = gamma det(I + alpha t)^{-1/k}`. The Cauchy Jacobian is the
//! constant matrix alpha, so the shifted characteristic polynomial
//! `det(eps I + Df)` has x-independent coefficients; when alpha is nilpotent
//! the determinant is identically one and the sound speed is constant.

use std::sync::Arc;

use crate::engine::{ImplicitSolution, Profile};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::system::{CoeffFn, DomainBox, QuasilinearSystem};
use crate::verify::{GridAxis, GridSpec};
use crate::wave::{CoordinateSplit, DLambdaFn, LambdaFn, WaveVectorFamily};

use super::{
    take_matrix, take_real, CatalogEntry, EntryTolerances, ExtraCheck, NamedSolution, ParamDoc,
    ParamSet, SolutionField,
};

/// n-dimensional analogue of the isentropic system: n momentum equations,
/// one continuity equation and n gradient constraints on the sound speed.
pub fn isentropic_nd_system(n: usize, k: f64) -> QuasilinearSystem {
    let p = n + 1;
    let q = n + 1;
    let l = 2 * n + 1;
    let mut names: Vec<String> = vec!["t".into()];
    names.extend((1..=n).map(|i| format!("x{i}")));
    names.extend((1..=n).map(|i| format!("u{i}")));
    names.push("a".into());
    let coeff: CoeffFn = Arc::new(move |u: &[f64]| {
        let a = u[n];
        let mut out = Vec::with_capacity(l);
        for j in 0..n {
            let mut d = Matrix::zeros(p, q);
            d.set(0, j, 1.0);
            for i in 0..n {
                d.set(1 + i, j, u[i]);
            }
            d.set(1 + j, n, k * a);
            out.push(d);
        }
        let mut cont = Matrix::zeros(p, q);
        cont.set(0, n, 1.0);
        for i in 0..n {
            cont.set(1 + i, n, u[i]);
            cont.set(1 + i, i, a / k);
        }
        out.push(cont);
        for j in 0..n {
            let mut d = Matrix::zeros(p, q);
            d.set(1 + j, n, 1.0);
            out.push(d);
        }
        out
    });
    let mut domain = vec![(f64::NEG_INFINITY, f64::INFINITY); q];
    domain[n] = (0.0, f64::INFINITY);
    QuasilinearSystem::new(
        "isentropic-nd",
        l,
        p,
        q,
        names,
        coeff,
        DomainBox::new(domain).unwrap(),
    )
    .unwrap()
}

fn velocity_family(n: usize, perturb: f64) -> Result<WaveVectorFamily> {
    let p = n + 1;
    let q = n + 1;
    let lambdas: LambdaFn = Arc::new(move |u: &[f64]| {
        let mut m = Matrix::zeros(n, p);
        for row in 0..n {
            m.set(row, 0, -u[row]);
            m.set(row, 1 + row, 1.0);
        }
        m
    });
    let dlambdas: DLambdaFn = Arc::new(move |_u: &[f64]| {
        (0..q)
            .map(|alpha| {
                let mut m = Matrix::zeros(n, p);
                if alpha < n {
                    m.set(alpha, 0, -1.0);
                }
                m
            })
            .collect()
    });
    WaveVectorFamily::new(
        n,
        p,
        q,
        super::perturb_lambdas(lambdas, perturb),
        dlambdas,
        CoordinateSplit::new((1..p).collect(), vec![0])?,
    )
}

/// Closed-form field (t, xs) -> (velocity, sound speed).
pub fn linear_flow_field(
    alpha: Matrix,
    beta: Vector,
    gamma: f64,
    k: f64,
) -> Arc<dyn Fn(&[f64]) -> Result<Vector> + Send + Sync> {
    let n = alpha.rows();
    Arc::new(move |x: &[f64]| -> Result<Vector> {
        let t = x[0];
        let xs = &x[1..];
        let mut m = Matrix::identity(n);
        for r in 0..n {
            for c in 0..n {
                m.set(r, c, m.get(r, c) + t * alpha.get(r, c));
            }
        }
        let det = m.det()?;
        if det.abs() < 1e-12 {
            return Err(Error::Domain(format!("I + t alpha singular at t = {t}")));
        }
        if det <= 0.0 {
            return Err(Error::Domain(format!(
                "det(I + t alpha) = {det} <= 0 at t = {t}"
            )));
        }
        let rhs: Vector = (0..n)
            .map(|r| beta[r] + (0..n).map(|c| alpha.get(r, c) * xs[c]).sum::<f64>())
            .collect();
        let mut u = m.solve(&rhs)?;
        u.push(gamma * det.powf(-1.0 / k));
        Ok(u)
    })
}

/// Shifted characteristic-polynomial coefficients of the Cauchy Jacobian,
/// extracted by central differences of the time-zero velocity field at each
/// sample: one coefficient vector `[p0, ..., p_{n-1}]` per sample.
pub fn cauchy_char_poly<F>(
    field: F,
    n: usize,
    x_samples: &[Vector],
    fd_step: f64,
) -> Result<Vec<Vector>>
where
    F: Fn(&[f64]) -> Result<Vector>,
{
    let mut out = Vec::with_capacity(x_samples.len());
    for xs in x_samples {
        if xs.len() != n {
            return Err(Error::InvalidInput(
                "char-poly sample has wrong spatial dimension".into(),
            ));
        }
        let mut df = Matrix::zeros(n, n);
        for i in 0..n {
            let mut up = vec![0.0; n + 1];
            let mut dn = vec![0.0; n + 1];
            up[1..].copy_from_slice(xs);
            dn[1..].copy_from_slice(xs);
            up[1 + i] += fd_step;
            dn[1 + i] -= fd_step;
            let plus = field(&up)?;
            let minus = field(&dn)?;
            for alpha in 0..n {
                df.set(alpha, i, (plus[alpha] - minus[alpha]) / (2.0 * fd_step));
            }
        }
        out.push(df.char_poly()?);
    }
    Ok(out)
}

/// Implicit form of the same flow: profile `f(r) = (beta + alpha r, gamma)`,
/// valid when alpha is nilpotent so the sound speed is constant.
pub fn example5_general_implicit(
    alpha: Matrix,
    beta: Vector,
    gamma: f64,
    k: f64,
    perturb: f64,
) -> Result<ImplicitSolution> {
    let n = alpha.rows();
    let system = isentropic_nd_system(n, k);
    let family = velocity_family(n, perturb)?;
    let alpha_v = alpha.clone();
    let beta_v = beta.clone();
    let value = Arc::new(move |r: &[f64]| -> Result<Vector> {
        let mut u: Vector = (0..n)
            .map(|row| beta_v[row] + (0..n).map(|c| alpha_v.get(row, c) * r[c]).sum::<f64>())
            .collect();
        u.push(gamma);
        Ok(u)
    });
    let jac = {
        let mut m = Matrix::zeros(n + 1, n);
        for r in 0..n {
            for c in 0..n {
                m.set(r, c, alpha.get(r, c));
            }
        }
        m
    };
    let jacobian = Arc::new(move |_r: &[f64]| Ok(jac.clone()));
    let profile = Profile::new(n, n + 1, value, jacobian, DomainBox::unbounded(n))?;
    ImplicitSolution::new(system, family, profile)
}

pub(super) fn build(params: &ParamSet, perturb: f64) -> Result<CatalogEntry> {
    let alpha = take_matrix(params, "alpha", &[&[0.0, 1.0], &[0.0, 0.0]])?;
    if alpha.rows() != alpha.cols() || alpha.rows() == 0 {
        return Err(Error::InvalidInput("alpha must be square".into()));
    }
    let n = alpha.rows();
    let beta_m = take_matrix(params, "beta", &[&[0.0, 0.0]])?;
    let beta: Vector = beta_m.as_slice().to_vec();
    if beta.len() != n {
        return Err(Error::InvalidInput(format!(
            "beta must have {n} entries to match alpha"
        )));
    }
    let gamma = take_real(params, "gamma", 1.0)?;
    let k = take_real(params, "k", 2.0)?;
    if !(gamma > 0.0) || !(k > 0.0) {
        return Err(Error::InvalidInput("need gamma > 0 and k > 0".into()));
    }

    let system = isentropic_nd_system(n, k);
    let nilpotent = alpha
        .char_poly()?
        .iter()
        .all(|c| c.abs() <= 1e-12);

    let mut solutions = Vec::new();
    if nilpotent {
        let sol =
            example5_general_implicit(alpha.clone(), beta.clone(), gamma, k, perturb)?;
        let sound_check = ExtraCheck {
            name: "sound_speed_constant",
            tol: 1e-12,
            residual: {
                let field = linear_flow_field(alpha.clone(), beta.clone(), gamma, k);
                Arc::new(move |x: &[f64]| Ok((field(x)?[n] - gamma).abs()))
            },
        };
        solutions.push(NamedSolution {
            name: "implicit",
            field: SolutionField::Implicit(sol),
            extra_checks: vec![sound_check],
            r_sample_box: Some(DomainBox::new(vec![(-1.0, 1.0); n])?),
        });
    }
    solutions.push(NamedSolution {
        name: "closed_form",
        field: SolutionField::Explicit {
            q: n + 1,
            eval: linear_flow_field(alpha.clone(), beta.clone(), gamma, k),
        },
        extra_checks: vec![],
        r_sample_box: None,
    });

    let mut axes = vec![GridAxis { label: "t".into(), min: 0.0, max: 0.5, n: 5 }];
    for i in 1..=n {
        axes.push(GridAxis { label: format!("x{i}"), min: -1.0, max: 1.0, n: 5 });
    }
    let grid = GridSpec::new(axes)?;

    Ok(CatalogEntry {
        id: "example5_general",
        title: "n-dimensional flow with linear Cauchy datum",
        system,
        families: vec![("advective", velocity_family(n, perturb)?)],
        solutions,
        grid,
        tol: EntryTolerances::default(),
        params: vec![
            ParamDoc { name: "alpha", default: "[[0,1],[0,0]]", doc: "Cauchy Jacobian (n x n matrix literal)" },
            ParamDoc { name: "beta", default: "[[0,0]]", doc: "Cauchy offset (1 x n matrix literal)" },
            ParamDoc { name: "gamma", default: "1", doc: "reference sound speed" },
            ParamDoc { name: "k", default: "2", doc: "polytropic index" },
        ],
        notes: "The implicit form is registered only when alpha is \
                nilpotent (constant sound speed); the closed form holds for \
                any alpha on the span where I + t alpha stays invertible.",
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn scalar_case_reduces_to_rational_wave() {
        // n = 1, alpha = 1, beta = 0: u = x / (1 + t), a = gamma (1+t)^{-1/k}.
        let field = linear_flow_field(
            Matrix::from_rows(&[vec![1.0]]).unwrap(),
            vec![0.0],
            1.0,
            2.0,
        );
        for (t, x) in [(0.0, 0.4), (0.5, -0.2), (1.5, 1.0)] {
            let u = field(&[t, x]).unwrap();
            assert!((u[0] - x / (1.0 + t)).abs() < 1e-13);
            assert!((u[1] - (1.0 + t).powf(-0.5)).abs() < 1e-13);
        }
    }

    #[test]
    fn nilpotent_alpha_keeps_unit_determinant_and_constant_sound_speed() {
        let entry = build(&ParamSet::new(), 0.0).unwrap();
        let closed = entry.solution("closed_form").unwrap();
        for t in [0.0, 0.5, 1.0] {
            let u = closed.field.value(&[t, 0.3, -0.7]).unwrap();
            assert_eq!(u[2], 1.0, "sound speed must be exactly constant");
        }
        // strictly upper-triangular alpha: det(I + t alpha) = 1 exactly
        let alpha = Matrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        for t in [0.0_f64, 0.5, 1.0] {
            let mut m = Matrix::identity(2);
            m.set(0, 1, t * alpha.get(0, 1));
            assert_eq!(m.det().unwrap(), 1.0);
        }
    }

    #[test]
    fn char_poly_coefficients_are_constant_over_space() {
        let mut rng = SplitMix64::new(12);
        // a well-conditioned random 2x2 alpha
        let alpha = Matrix::from_rows(&[
            vec![rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)],
            vec![rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)],
        ])
        .unwrap();
        let field = linear_flow_field(alpha.clone(), vec![0.1, -0.2], 1.0, 2.0);
        let samples: Vec<Vec<f64>> = (0..10)
            .map(|_| vec![rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)])
            .collect();
        let coeffs = cauchy_char_poly(|x| field(x), 2, &samples, 1e-4).unwrap();
        let expected = alpha.char_poly().unwrap();
        for c in &coeffs {
            for (a, b) in c.iter().zip(&expected) {
                assert!((a - b).abs() < 1e-10, "coefficient drift: {a} vs {b}");
            }
        }
    }

    #[test]
    fn implicit_and_closed_form_agree_for_the_default_entry() {
        let entry = build(&ParamSet::new(), 0.0).unwrap();
        let implicit = entry.solution("implicit").unwrap();
        let closed = entry.solution("closed_form").unwrap();
        for x in [[0.3, 0.5, -0.4], [0.0, 1.0, 1.0], [0.5, -1.0, 0.2]] {
            let a = implicit.field.value(&x).unwrap();
            let b = closed.field.value(&x).unwrap();
            for (ai, bi) in a.iter().zip(&b) {
                assert!((ai - bi).abs() < 1e-10);
            }
        }
    }
}
