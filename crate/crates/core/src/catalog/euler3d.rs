//! Divergence-free three-dimensional Euler flow built from two arbitrary
//! functions: `u1 = f1(x2 - t f2(s), x3 - t f2(s))`, `u2 = u3 = f2(s)` with
//! `s = x2 - x3`. The Cauchy Jacobian is nilpotent (its shifted
//! characteristic polynomial is a pure power), the matrix
//! `B = I + t Df` has unit determinant along trajectories, and the field is
//! divergence free for any choice of f1 and f2.

use std::sync::Arc;

use crate::engine::{ImplicitSolution, Profile};
use crate::error::Result;
use crate::linalg::{Matrix, Vector};
use crate::system::{CoeffFn, DomainBox, QuasilinearSystem};
use crate::verify::{GridAxis, GridSpec};
use crate::wave::{CoordinateSplit, DLambdaFn, LambdaFn, WaveVectorFamily};

use super::{
    take_real, CatalogEntry, EntryTolerances, ExtraCheck, NamedSolution, ParamDoc, ParamSet,
    SolutionField,
};

/// Scalar function of one variable with one derivative.
#[derive(Clone)]
pub struct Fn1 {
    pub value: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub d1: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

/// Scalar function of two variables with both partials.
#[derive(Clone)]
pub struct Fn2 {
    pub value: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub d1: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub d2: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

/// 3D incompressible Euler: material transport plus the divergence
/// constraint. l = 4, p = 4, q = 3.
pub fn euler3d_system() -> QuasilinearSystem {
    let coeff: CoeffFn = Arc::new(|u: &[f64]| {
        let mut out = Vec::with_capacity(4);
        for j in 0..3 {
            let mut d = Matrix::zeros(4, 3);
            d.set(0, j, 1.0);
            for i in 0..3 {
                d.set(1 + i, j, u[i]);
            }
            out.push(d);
        }
        let mut div = Matrix::zeros(4, 3);
        for i in 0..3 {
            div.set(1 + i, i, 1.0);
        }
        out.push(div);
        out
    });
    QuasilinearSystem::new(
        "euler-3d-incompressible",
        4,
        4,
        3,
        vec![
            "t".into(),
            "x1".into(),
            "x2".into(),
            "x3".into(),
            "u1".into(),
            "u2".into(),
            "u3".into(),
        ],
        coeff,
        DomainBox::unbounded(3),
    )
    .unwrap()
}

fn velocity_family(perturb: f64) -> Result<WaveVectorFamily> {
    let lambdas: LambdaFn = Arc::new(|u: &[f64]| {
        let mut m = Matrix::zeros(3, 4);
        for row in 0..3 {
            m.set(row, 0, -u[row]);
            m.set(row, 1 + row, 1.0);
        }
        m
    });
    let dlambdas: DLambdaFn = Arc::new(|_u: &[f64]| {
        (0..3)
            .map(|alpha| {
                let mut m = Matrix::zeros(3, 4);
                m.set(alpha, 0, -1.0);
                m
            })
            .collect()
    });
    WaveVectorFamily::new(
        3,
        4,
        3,
        super::perturb_lambdas(lambdas, perturb),
        dlambdas,
        CoordinateSplit::new(vec![1, 2, 3], vec![0])?,
    )
}

/// Implicit form: profile `F(r) = (f1(r2, r3), f2(r2 - r3), f2(r2 - r3))`.
pub fn example5_euler3d(f1: Fn2, f2: Fn1, perturb: f64) -> Result<ImplicitSolution> {
    let f1v = f1.clone();
    let f2v = f2.clone();
    let value = Arc::new(move |r: &[f64]| -> Result<Vector> {
        let w = (f2v.value)(r[1] - r[2]);
        Ok(vec![(f1v.value)(r[1], r[2]), w, w])
    });
    let jacobian = Arc::new(move |r: &[f64]| -> Result<Matrix> {
        let fp = (f2.d1)(r[1] - r[2]);
        Matrix::from_rows(&[
            vec![0.0, (f1.d1)(r[1], r[2]), (f1.d2)(r[1], r[2])],
            vec![0.0, fp, -fp],
            vec![0.0, fp, -fp],
        ])
    });
    let profile = Profile::new(3, 3, value, jacobian, DomainBox::unbounded(3))?;
    ImplicitSolution::new(euler3d_system(), velocity_family(perturb)?, profile)
}

/// Closed-form field of the same flow.
pub fn euler3d_field(f1: Fn2, f2: Fn1) -> Arc<dyn Fn(&[f64]) -> Result<Vector> + Send + Sync> {
    Arc::new(move |x: &[f64]| -> Result<Vector> {
        let s = x[2] - x[3];
        let w = (f2.value)(s);
        let u1 = (f1.value)(x[2] - x[0] * w, x[3] - x[0] * w);
        Ok(vec![u1, w, w])
    })
}

/// Entry from arbitrary differentiable f1, f2 with registered structure
/// checks: det(B) = 1 with `B = I + t Df` along trajectories, and the
/// shifted characteristic polynomial of the Cauchy Jacobian reducing to a
/// pure power (nilpotency).
pub fn euler3d_entry_with(f1: Fn2, f2: Fn1, perturb: f64) -> Result<CatalogEntry> {
    let sol = example5_euler3d(f1.clone(), f2.clone(), perturb)?;
    let system = sol.system().clone();
    let family = sol.family().clone();

    let b_matrix = {
        let f1 = f1.clone();
        let f2 = f2.clone();
        move |x: &[f64]| -> Result<Matrix> {
            let t = x[0];
            let s = x[2] - x[3];
            let w = (f2.value)(s);
            let fp = (f2.d1)(s);
            let (a, b) = (x[2] - t * w, x[3] - t * w);
            Matrix::from_rows(&[
                vec![1.0, t * (f1.d1)(a, b), t * (f1.d2)(a, b)],
                vec![0.0, 1.0 + t * fp, -t * fp],
                vec![0.0, t * fp, 1.0 - t * fp],
            ])
        }
    };
    let det_b_check = ExtraCheck {
        name: "det_b_minus_one",
        tol: 1e-10,
        residual: {
            let b_matrix = b_matrix.clone();
            Arc::new(move |x: &[f64]| Ok((b_matrix(x)?.det()? - 1.0).abs()))
        },
    };
    let nilpotency_check = ExtraCheck {
        name: "cauchy_jacobian_nilpotent",
        tol: 1e-10,
        residual: {
            let f1 = f1.clone();
            let f2 = f2.clone();
            Arc::new(move |x: &[f64]| {
                let s = x[2] - x[3];
                let fp = (f2.d1)(s);
                let df = Matrix::from_rows(&[
                    vec![0.0, (f1.d1)(x[2], x[3]), (f1.d2)(x[2], x[3])],
                    vec![0.0, fp, -fp],
                    vec![0.0, fp, -fp],
                ])?;
                let coeffs = df.char_poly()?;
                Ok(coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs())))
            })
        },
    };

    let grid = GridSpec::new(vec![
        GridAxis { label: "t".into(), min: 0.1, max: 0.6, n: 4 },
        GridAxis { label: "x1".into(), min: -0.5, max: 0.5, n: 3 },
        GridAxis { label: "x2".into(), min: -0.8, max: 0.8, n: 4 },
        GridAxis { label: "x3".into(), min: -0.8, max: 0.8, n: 4 },
    ])?;

    Ok(CatalogEntry {
        id: "example5_euler3d",
        title: "divergence-free 3D Euler flow from two arbitrary functions",
        system,
        families: vec![("advective", family)],
        solutions: vec![
            NamedSolution {
                name: "implicit",
                field: SolutionField::Implicit(sol),
                extra_checks: vec![det_b_check.clone(), nilpotency_check.clone()],
                r_sample_box: Some(DomainBox::new(vec![(-1.0, 1.0); 3])?),
            },
            NamedSolution {
                name: "closed_form",
                field: SolutionField::Explicit {
                    q: 3,
                    eval: euler3d_field(f1, f2),
                },
                extra_checks: vec![det_b_check, nilpotency_check],
                r_sample_box: None,
            },
        ],
        grid,
        tol: EntryTolerances {
            eq_bounds: vec![(3, 1e-7)], // |div u| stays an order tighter
            ..EntryTolerances::default()
        },
        params: vec![
            ParamDoc { name: "c1", default: "1", doc: "scale of f1(a, b) = c1 a b" },
            ParamDoc { name: "c2", default: "1", doc: "scale of f2(s) = c2 s" },
        ],
        notes: "The second and third velocity components coincide and depend \
                on x2 - x3 only, which makes the Cauchy Jacobian nilpotent \
                and the flow divergence free for arbitrary f1, f2.",
    })
}

pub(super) fn build(params: &ParamSet, perturb: f64) -> Result<CatalogEntry> {
    let c1 = take_real(params, "c1", 1.0)?;
    let c2 = take_real(params, "c2", 1.0)?;
    let f1 = Fn2 {
        value: Arc::new(move |a, b| c1 * a * b),
        d1: Arc::new(move |_a, b| c1 * b),
        d2: Arc::new(move |a, _b| c1 * a),
    };
    let f2 = Fn1 {
        value: Arc::new(move |s| c2 * s),
        d1: Arc::new(move |_s| c2),
    };
    euler3d_entry_with(f1, f2, perturb)
}
