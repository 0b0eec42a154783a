//! Nonstationary isentropic planar flow with time-only sound speed.
//!
//! The construction takes a potential h(r1, r2) whose Hessian determinant is
//! a constant C (a Monge-Ampere relation) and builds the velocity field from
//! `u1 = C1 r1 + h_{r2}`, `u2 = C1 r2 - h_{r1}` in the invariants
//! r1 = x - u1 t, r2 = y - u2 t, with sound speed
//! `a(t) = a0 ((1 + C1 t)^2 + C t^2)^{-1/k}`. Supplied potentials are gated
//! numerically: an h whose Hessian determinant strays from its declared C is
//! rejected.

use std::sync::Arc;

use crate::engine::{EvalOptions, ImplicitSolution, Profile};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::SplitMix64;
use crate::system::{CoeffFn, DomainBox, QuasilinearSystem};
use crate::verify::{GridAxis, GridSpec};

use super::scalar_evolution::AdvectionCoeffs;
use super::{
    real_pow, take_real, CatalogEntry, EntryTolerances, NamedSolution, ParamDoc, ParamSet,
    SolutionField,
};

/// A potential h(r1, r2) with first and second derivatives.
#[derive(Clone)]
pub struct SurfaceFn {
    pub value: Arc<dyn Fn(f64, f64) -> Result<f64> + Send + Sync>,
    pub d1: Arc<dyn Fn(f64, f64) -> Result<f64> + Send + Sync>,
    pub d2: Arc<dyn Fn(f64, f64) -> Result<f64> + Send + Sync>,
    pub d11: Arc<dyn Fn(f64, f64) -> Result<f64> + Send + Sync>,
    pub d12: Arc<dyn Fn(f64, f64) -> Result<f64> + Send + Sync>,
    pub d22: Arc<dyn Fn(f64, f64) -> Result<f64> + Send + Sync>,
}

/// `h = r1^m r2^(1-m)`: the Hessian determinant vanishes identically, so the
/// declared constant is C = 0. Defined for r1, r2 > 0 (negative bases with
/// fractional exponents are domain errors).
pub fn power_family_h(m: f64) -> SurfaceFn {
    let pow = move |a: f64, ea: f64, b: f64, eb: f64| -> Result<f64> {
        Ok(real_pow(a, ea)? * real_pow(b, eb)?)
    };
    SurfaceFn {
        value: Arc::new(move |r1, r2| pow(r1, m, r2, 1.0 - m)),
        d1: Arc::new(move |r1, r2| Ok(m * pow(r1, m - 1.0, r2, 1.0 - m)?)),
        d2: Arc::new(move |r1, r2| Ok((1.0 - m) * pow(r1, m, r2, -m)?)),
        d11: Arc::new(move |r1, r2| Ok(m * (m - 1.0) * pow(r1, m - 2.0, r2, 1.0 - m)?)),
        d12: Arc::new(move |r1, r2| Ok(m * (1.0 - m) * pow(r1, m - 1.0, r2, -m)?)),
        d22: Arc::new(move |r1, r2| Ok((1.0 - m) * (-m) * pow(r1, m, r2, -m - 1.0)?)),
    }
}

/// `h = r1 r2`, whose Hessian determinant is -1 everywhere.
pub fn bilinear_h() -> SurfaceFn {
    SurfaceFn {
        value: Arc::new(|r1, r2| Ok(r1 * r2)),
        d1: Arc::new(|_r1, r2| Ok(r2)),
        d2: Arc::new(|r1, _r2| Ok(r1)),
        d11: Arc::new(|_r1, _r2| Ok(0.0)),
        d12: Arc::new(|_r1, _r2| Ok(1.0)),
        d22: Arc::new(|_r1, _r2| Ok(0.0)),
    }
}

/// Largest deviation of `h11 h22 - h12^2` from the declared constant over
/// seeded samples in the box.
pub fn monge_ampere_residual(
    h: &SurfaceFn,
    declared_c: f64,
    sample_box: &[(f64, f64)],
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = SplitMix64::new(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n_samples {
        let r1 = rng.uniform(sample_box[0].0, sample_box[0].1);
        let r2 = rng.uniform(sample_box[1].0, sample_box[1].1);
        let det = (h.d11)(r1, r2)? * (h.d22)(r1, r2)? - (h.d12)(r1, r2)?.powi(2);
        worst = worst.max((det - declared_c).abs());
    }
    Ok(worst)
}

/// Largest disagreement between the declared curvature profile
/// `K = C / (1 + h1^2 + h2^2)` and the Gaussian curvature of the graph
/// {t = h(r1, r2)} computed from its first and second fundamental forms.
pub fn gaussian_curvature_mismatch(
    h: &SurfaceFn,
    declared_c: f64,
    sample_box: &[(f64, f64)],
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = SplitMix64::new(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n_samples {
        let r1 = rng.uniform(sample_box[0].0, sample_box[0].1);
        let r2 = rng.uniform(sample_box[1].0, sample_box[1].1);
        let (h1, h2) = ((h.d1)(r1, r2)?, (h.d2)(r1, r2)?);
        let grad2 = 1.0 + h1 * h1 + h2 * h2;
        let det_hess = (h.d11)(r1, r2)? * (h.d22)(r1, r2)? - (h.d12)(r1, r2)?.powi(2);
        let k_graph = det_hess / (grad2 * grad2);
        let k_declared = declared_c / grad2;
        worst = worst.max((k_graph - k_declared).abs());
    }
    Ok(worst)
}

/// `a(t) = a0 ((1 + c1 t)^2 + c t^2)^{-1/k}`.
pub fn sound_speed(c1: f64, c: f64, a0: f64, k: f64) -> impl Fn(f64) -> Result<f64> {
    move |t: f64| {
        let base = (1.0 + c1 * t).powi(2) + c * t * t;
        if base <= 0.0 {
            return Err(Error::Domain(format!(
                "sound-speed base {base} <= 0 at t = {t}"
            )));
        }
        Ok(a0 * base.powf(-1.0 / k))
    }
}

/// Isentropic planar flow with velocity (u1, u2) and sound speed a as the
/// third dependent variable: two momentum equations, one continuity
/// equation and the two constraints da/dx = da/dy = 0.
pub fn isentropic_system(k: f64) -> QuasilinearSystem {
    let coeff: CoeffFn = Arc::new(move |u: &[f64]| {
        let a = u[2];
        let d1 = Matrix::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![u[0], 0.0, k * a],
            vec![u[1], 0.0, 0.0],
        ])
        .unwrap();
        let d2 = Matrix::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![0.0, u[0], 0.0],
            vec![0.0, u[1], k * a],
        ])
        .unwrap();
        let cont = Matrix::from_rows(&[
            vec![0.0, 0.0, 1.0],
            vec![a / k, 0.0, u[0]],
            vec![0.0, a / k, u[1]],
        ])
        .unwrap();
        let ax = Matrix::from_rows(&[
            vec![0.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 0.0, 0.0],
        ])
        .unwrap();
        let ay = Matrix::from_rows(&[
            vec![0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        vec![d1, d2, cont, ax, ay]
    });
    QuasilinearSystem::new(
        "isentropic-2plus1",
        5,
        3,
        3,
        vec![
            "t".into(),
            "x".into(),
            "y".into(),
            "u1".into(),
            "u2".into(),
            "a".into(),
        ],
        coeff,
        DomainBox::new(vec![
            (f64::NEG_INFINITY, f64::INFINITY),
            (f64::NEG_INFINITY, f64::INFINITY),
            (0.0, f64::INFINITY),
        ])
        .unwrap(),
    )
    .unwrap()
}

/// Covector family (-u1, 1, 0), (-u2, 0, 1) acting on (u1, u2, a)-space.
fn advective_family_q3(perturb: f64) -> Result<crate::wave::WaveVectorFamily> {
    use crate::wave::{CoordinateSplit, DLambdaFn, LambdaFn, WaveVectorFamily};
    let lambdas: LambdaFn = Arc::new(|u: &[f64]| {
        Matrix::from_rows(&[vec![-u[0], 1.0, 0.0], vec![-u[1], 0.0, 1.0]]).unwrap()
    });
    let dlambdas: DLambdaFn = Arc::new(|_u: &[f64]| {
        let mut d1 = Matrix::zeros(2, 3);
        d1.set(0, 0, -1.0);
        let mut d2 = Matrix::zeros(2, 3);
        d2.set(1, 0, -1.0);
        vec![d1, d2, Matrix::zeros(2, 3)]
    });
    WaveVectorFamily::new(
        2,
        3,
        3,
        super::perturb_lambdas(lambdas, perturb),
        dlambdas,
        CoordinateSplit::new(vec![1, 2], vec![0])?,
    )
}

fn velocity_profile(c1: f64, h: &SurfaceFn, q_out: usize, a0: f64) -> Result<Profile> {
    let hv = h.clone();
    let value = Arc::new(move |r: &[f64]| -> Result<Vec<f64>> {
        let mut u = vec![
            c1 * r[0] + (hv.d2)(r[0], r[1])?,
            c1 * r[1] - (hv.d1)(r[0], r[1])?,
        ];
        if q_out == 3 {
            u.push(a0);
        }
        Ok(u)
    });
    let hj = h.clone();
    let jacobian = Arc::new(move |r: &[f64]| -> Result<Matrix> {
        let h11 = (hj.d11)(r[0], r[1])?;
        let h12 = (hj.d12)(r[0], r[1])?;
        let h22 = (hj.d22)(r[0], r[1])?;
        let mut rows = vec![vec![c1 + h12, h22], vec![-h11, c1 - h12]];
        if q_out == 3 {
            rows.push(vec![0.0, 0.0]);
        }
        Matrix::from_rows(&rows)
    });
    Profile::new(2, q_out, value, jacobian, DomainBox::unbounded(2))
}

/// Builds the isentropic entry from an arbitrary gated potential.
///
/// `anchor_hint` supplies a reference point and velocity for potentials that
/// are singular at the invariant origin; when absent the origin anchor is
/// used. The potential is rejected (`InconsistentH`) when its Hessian
/// determinant deviates from `declared_c` by more than `gate_tol` anywhere in
/// `gate_box`.
#[allow(clippy::too_many_arguments)]
pub fn isentropic_entry_with_h(
    c1: f64,
    h: SurfaceFn,
    declared_c: f64,
    a0: f64,
    k: f64,
    gate_box: &[(f64, f64)],
    gate_tol: f64,
    anchor_hint: Option<(Vec<f64>, Vec<f64>)>,
    perturb: f64,
) -> Result<CatalogEntry> {
    if !(k > 0.0) || !(a0 > 0.0) {
        return Err(Error::InvalidInput("need k > 0 and a0 > 0".into()));
    }
    let residual = monge_ampere_residual(&h, declared_c, gate_box, 100, 0xA11CE)?;
    if residual > gate_tol {
        return Err(Error::InconsistentH { residual });
    }

    let system = isentropic_system(k);
    let a_constant = c1 == 0.0 && declared_c == 0.0;

    let solutions = if a_constant {
        let profile = velocity_profile(c1, &h, 3, a0)?;
        let family = advective_family_q3(perturb)?;
        let sol = match &anchor_hint {
            None => ImplicitSolution::new(system.clone(), family, profile)?,
            Some((x_ref, u_vel)) => {
                let mut u_ref = u_vel.clone();
                u_ref.push(a0);
                ImplicitSolution::with_anchor(
                    system.clone(),
                    family,
                    profile,
                    x_ref.clone(),
                    u_ref,
                )?
            }
        };
        vec![NamedSolution {
            name: "implicit",
            field: SolutionField::Implicit(sol),
            extra_checks: vec![],
            r_sample_box: Some(DomainBox::new(vec![
                (gate_box[0].0, gate_box[0].1),
                (gate_box[1].0, gate_box[1].1),
            ])?),
        }]
    } else {
        // a(t) varies: the velocity block still evaluates through the
        // implicit engine against the pressureless pair, the sound speed is
        // appended in closed form.
        let velocity_system = super::scalar_evolution::scalar_evolution_system(
            2,
            &AdvectionCoeffs::velocity(2, 2),
        );
        let profile = velocity_profile(c1, &h, 2, a0)?;
        let family = super::scalar_evolution::evolution_family(
            2,
            &AdvectionCoeffs::velocity(2, 2),
            perturb,
        )?;
        let vel_sol = match &anchor_hint {
            None => ImplicitSolution::new(velocity_system, family, profile)?,
            Some((x_ref, u_vel)) => ImplicitSolution::with_anchor(
                velocity_system,
                family,
                profile,
                x_ref.clone(),
                u_vel.clone(),
            )?,
        };
        let a_of_t = sound_speed(c1, declared_c, a0, k);
        let eval = Arc::new(move |x: &[f64]| -> Result<Vec<f64>> {
            let mut u = vel_sol.evaluate(x, &EvalOptions::default())?.u;
            u.push(a_of_t(x[0])?);
            Ok(u)
        });
        vec![NamedSolution {
            name: "field",
            field: SolutionField::Explicit { q: 3, eval },
            extra_checks: vec![],
            r_sample_box: None,
        }]
    };

    let grid = GridSpec::new(vec![
        GridAxis { label: "t".into(), min: 0.5, max: 2.0, n: 5 },
        GridAxis { label: "x".into(), min: 0.1, max: 1.0, n: 5 },
        GridAxis { label: "y".into(), min: 0.1, max: 1.0, n: 5 },
    ])?;

    Ok(CatalogEntry {
        id: "example4_isentropic",
        title: "isentropic planar flow from a constant-Hessian potential",
        system,
        families: vec![("advective", advective_family_q3(perturb)?)],
        solutions,
        grid,
        tol: EntryTolerances::default(),
        params: vec![
            ParamDoc { name: "c1", default: "0", doc: "linear invariant coefficient C1" },
            ParamDoc { name: "m", default: "2", doc: "power-family exponent of the potential" },
            ParamDoc { name: "a0", default: "1", doc: "reference sound speed" },
            ParamDoc { name: "k", default: "2", doc: "polytropic index k = 2/(gamma - 1)" },
        ],
        notes: "The potential is gated numerically against its declared \
                Hessian constant. With c1 = 0 and a vanishing constant the \
                sound speed is constant and the full three-component field \
                is a single implicit solution; otherwise the sound speed \
                varies in time and only the velocity block is invariant.",
    })
}

pub(super) fn build(params: &ParamSet, perturb: f64) -> Result<CatalogEntry> {
    let c1 = take_real(params, "c1", 0.0)?;
    let m = take_real(params, "m", 2.0)?;
    let a0 = take_real(params, "a0", 1.0)?;
    let k = take_real(params, "k", 2.0)?;

    // reference anchor on the w >= 0 branch (the power potential is
    // singular at the invariant origin); exact for c1 = 0, polished by the
    // anchor Newton otherwise
    let (t0, x0, y0) = (1.0, 0.5, 0.5);
    let w = super::euler_m::positive_w_root(m, t0, x0, y0)?;
    let u_vel = vec![(1.0 - m) * real_pow(w, m)?, -m * real_pow(w, m - 1.0)?];
    isentropic_entry_with_h(
        c1,
        power_family_h(m),
        0.0,
        a0,
        k,
        &[(0.1, 2.0), (0.1, 2.0)],
        1e-8,
        Some((vec![t0, x0, y0], u_vel)),
        perturb,
    )
}
