//! Evolution systems with scalar coefficient matrices,
//! `du/dt + sum_i a^i(u) du/dx^i = 0`, and their solutions by arbitrary
//! Cauchy data: the field is `u = f(x^1 - a^1(u) t, ..., x^n - a^n(u) t)`
//! and f is exactly the initial datum on {t = 0}.

use std::sync::Arc;

use crate::engine::{ImplicitSolution, Profile};
use crate::error::Result;
use crate::linalg::Matrix;
use crate::system::{CoeffFn, DomainBox, QuasilinearSystem};
use crate::verify::{GridAxis, GridSpec};
use crate::wave::{CoordinateSplit, DLambdaFn, LambdaFn, WaveVectorFamily};

use super::{
    perturb_lambdas, take_real, CatalogEntry, EntryTolerances, NamedSolution, ParamDoc,
    ParamSet, SolutionField,
};

/// Advection coefficients as a callable u -> (a^1, ..., a^n) with its
/// q-by-n derivative matrix.
#[derive(Clone)]
pub struct AdvectionCoeffs {
    pub n: usize,
    pub value: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
    /// d a^i / d u^alpha, indexed (i, alpha), n-by-q.
    pub derivative: Arc<dyn Fn(&[f64]) -> Matrix + Send + Sync>,
}

impl AdvectionCoeffs {
    /// The velocity field itself: a^i(u) = u^i (requires n <= q).
    pub fn velocity(n: usize, q: usize) -> AdvectionCoeffs {
        AdvectionCoeffs {
            n,
            value: Arc::new(move |u: &[f64]| u[..n].to_vec()),
            derivative: Arc::new(move |_u: &[f64]| {
                let mut d = Matrix::zeros(n, q);
                for i in 0..n {
                    d.set(i, i, 1.0);
                }
                d
            }),
        }
    }
}

/// The system `du^mu/dt + sum_i a^i(u) du^mu/dx^i = 0`, mu = 1..q.
pub fn scalar_evolution_system(q: usize, a: &AdvectionCoeffs) -> QuasilinearSystem {
    let n = a.n;
    let p = n + 1;
    let mut names: Vec<String> = vec!["t".into()];
    if n == 2 && q <= 2 {
        names.push("x".into());
        names.push("y".into());
    } else {
        names.extend((1..=n).map(|i| format!("x{i}")));
    }
    names.extend((1..=q).map(|i| format!("u{i}")));
    let value = a.value.clone();
    let coeff: CoeffFn = Arc::new(move |u: &[f64]| {
        let avals = value(u);
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
    QuasilinearSystem::new(
        "scalar-evolution",
        q,
        p,
        q,
        names,
        coeff,
        DomainBox::unbounded(q),
    )
    .unwrap()
}

/// The characteristic covector family `lambda^A = (-a^A(u), e_A)`,
/// A = 1..n, in (t, x^1, ..., x^n) ordering.
pub fn evolution_family(
    q: usize,
    a: &AdvectionCoeffs,
    perturb: f64,
) -> Result<WaveVectorFamily> {
    let n = a.n;
    let p = n + 1;
    let value = a.value.clone();
    let lambdas: LambdaFn = Arc::new(move |u: &[f64]| {
        let avals = value(u);
        let mut m = Matrix::zeros(n, p);
        for row in 0..n {
            m.set(row, 0, -avals[row]);
            m.set(row, 1 + row, 1.0);
        }
        m
    });
    let deriv = a.derivative.clone();
    let dlambdas: DLambdaFn = Arc::new(move |u: &[f64]| {
        let da = deriv(u); // n x q
        (0..q)
            .map(|alpha| {
                let mut m = Matrix::zeros(n, p);
                for row in 0..n {
                    m.set(row, 0, -da.get(row, alpha));
                }
                m
            })
            .collect()
    });
    WaveVectorFamily::new(
        n,
        p,
        q,
        perturb_lambdas(lambdas, perturb),
        dlambdas,
        CoordinateSplit::new((1..p).collect(), vec![0])?,
    )
}

/// Implicit solution of a scalar-coefficient evolution system from an
/// arbitrary differentiable Cauchy profile.
pub fn example1_scalar_evolution(
    q: usize,
    a: &AdvectionCoeffs,
    profile: Profile,
    perturb: f64,
) -> Result<ImplicitSolution> {
    let system = scalar_evolution_system(q, a);
    let family = evolution_family(q, a, perturb)?;
    ImplicitSolution::new(system, family, profile)
}

pub(super) fn build(params: &ParamSet, perturb: f64) -> Result<CatalogEntry> {
    let f11 = take_real(params, "f11", 0.25)?;
    let f12 = take_real(params, "f12", 0.1)?;
    let f21 = take_real(params, "f21", -0.1)?;
    let f22 = take_real(params, "f22", 0.2)?;
    let f01 = take_real(params, "f01", 0.0)?;
    let f02 = take_real(params, "f02", 0.0)?;

    let a = AdvectionCoeffs::velocity(2, 2);
    let jac = Matrix::from_rows(&[vec![f11, f12], vec![f21, f22]])?;
    let jac_for_profile = jac.clone();
    let profile = Profile::new(
        2,
        2,
        Arc::new(move |r: &[f64]| {
            Ok(vec![
                f01 + f11 * r[0] + f12 * r[1],
                f02 + f21 * r[0] + f22 * r[1],
            ])
        }),
        Arc::new(move |_r: &[f64]| Ok(jac_for_profile.clone())),
        DomainBox::unbounded(2),
    )?;
    let rank2 = example1_scalar_evolution(2, &a, profile, perturb)?;
    let family = rank2.family().clone();

    // rank-1 simple wave riding the first characteristic field: the Cauchy
    // datum f(s) = (s, s/2) gives u = (x, x/2) / (1 + t).
    let wave_profile = Profile::new(
        1,
        2,
        Arc::new(|r: &[f64]| Ok(vec![r[0], 0.5 * r[0]])),
        Arc::new(|_r: &[f64]| Matrix::from_rows(&[vec![1.0], vec![0.5]])),
        DomainBox::unbounded(1),
    )?;
    let wave_lambdas: LambdaFn = Arc::new(|u: &[f64]| {
        Matrix::from_rows(&[vec![-u[0], 1.0, 0.0]]).unwrap()
    });
    let wave_dlambdas: DLambdaFn = Arc::new(|_u: &[f64]| {
        let mut d1 = Matrix::zeros(1, 3);
        d1.set(0, 0, -1.0);
        vec![d1, Matrix::zeros(1, 3)]
    });
    let wave_family = WaveVectorFamily::new(
        1,
        3,
        2,
        perturb_lambdas(wave_lambdas, perturb),
        wave_dlambdas,
        CoordinateSplit::new(vec![1], vec![0, 2])?,
    )?;
    let simple_wave = ImplicitSolution::new(
        scalar_evolution_system(2, &a),
        wave_family,
        wave_profile,
    )?;

    let grid = GridSpec::new(vec![
        GridAxis { label: "t".into(), min: 0.0, max: 0.5, n: 5 },
        GridAxis { label: "x".into(), min: -0.4, max: 0.4, n: 5 },
        GridAxis { label: "y".into(), min: -0.4, max: 0.4, n: 5 },
    ])?;

    Ok(CatalogEntry {
        id: "example1_scalar_evolution",
        title: "2D velocity-advected pair with arbitrary Cauchy data",
        system: rank2.system().clone(),
        families: vec![("advective", family), ("simple_wave", simple_wave.family().clone())],
        solutions: vec![
            NamedSolution {
                name: "rank2",
                field: SolutionField::Implicit(rank2),
                extra_checks: vec![],
                r_sample_box: Some(DomainBox::new(vec![(-0.5, 0.5), (-0.5, 0.5)])?),
            },
            NamedSolution {
                name: "rank1_simple_wave",
                field: SolutionField::Implicit(simple_wave),
                extra_checks: vec![],
                r_sample_box: Some(DomainBox::new(vec![(-0.5, 0.5)])?),
            },
        ],
        grid,
        tol: EntryTolerances::default(),
        params: vec![
            ParamDoc { name: "f11", default: "0.25", doc: "Cauchy profile slope du1/dr1" },
            ParamDoc { name: "f12", default: "0.1", doc: "Cauchy profile slope du1/dr2" },
            ParamDoc { name: "f21", default: "-0.1", doc: "Cauchy profile slope du2/dr1" },
            ParamDoc { name: "f22", default: "0.2", doc: "Cauchy profile slope du2/dr2" },
            ParamDoc { name: "f01", default: "0", doc: "Cauchy profile offset for u1" },
            ParamDoc { name: "f02", default: "0", doc: "Cauchy profile offset for u2" },
        ],
        notes: "Both unknowns are advected by the velocity (u1, u2); any \
                differentiable Cauchy datum yields a solution, so the trace \
                conditions hold identically. Includes a rank-1 simple wave \
                riding the first characteristic field.",
    })
}
