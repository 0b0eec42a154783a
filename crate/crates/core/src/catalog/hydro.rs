//! (2+1)-dimensional hydrodynamic pair whose rank-2 solutions are defined by
//! the implicit relations
//!
//! ```text
//! x - u1 t = g(u1),        y - u2 t = a(u1) + u2 g'(u1)
//! ```
//!
//! for arbitrary differentiable g and a. Inverting the relations in the
//! Riemann invariants r1 = x - u1 t, r2 = y - u2 t yields the profile
//! `f(r) = (g^{-1}(r1), (r2 - a(g^{-1}(r1))) / g'(g^{-1}(r1)))`, so the field
//! evaluates through the ordinary implicit engine. The sign of the second
//! relation is fixed by requiring the residual of the governing system to
//! vanish, not by the orientation of the flow it was derived from.

use std::sync::Arc;

use crate::engine::{ImplicitSolution, Profile};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::system::{CoeffFn, DomainBox, QuasilinearSystem};
use crate::verify::{GridAxis, GridSpec};

use super::scalar_evolution::AdvectionCoeffs;
use super::{
    take_real, CatalogEntry, EntryTolerances, NamedSolution, ParamDoc, ParamSet, SolutionField,
};

/// A scalar function of one variable with two derivatives.
#[derive(Clone)]
pub struct Curve {
    pub value: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub d1: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub d2: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl Curve {
    pub fn poly2(c0: f64, c1: f64, c2: f64) -> Curve {
        Curve {
            value: Arc::new(move |s| c0 + c1 * s + c2 * s * s),
            d1: Arc::new(move |s| c1 + 2.0 * c2 * s),
            d2: Arc::new(move |_s| 2.0 * c2),
        }
    }
}

/// Newton inversion of g; the seed assumes g is a mild perturbation of a
/// linear map through the origin.
fn invert_curve(g: &Curve, r: f64, slope_hint: f64) -> Result<f64> {
    let mut v = r / slope_hint;
    for _ in 0..80 {
        let gv = (g.value)(v);
        let dv = (g.d1)(v);
        if dv.abs() < 1e-12 {
            return Err(Error::Domain(format!("g'({v}) ~ 0 while inverting g")));
        }
        let delta = (gv - r) / dv;
        v -= delta;
        if delta.abs() <= 1e-15 * (1.0 + v.abs()) {
            return Ok(v);
        }
    }
    let res = ((g.value)(v) - r).abs();
    if res <= 1e-12 * (1.0 + r.abs()) {
        Ok(v)
    } else {
        Err(Error::NoConvergence {
            trail: format!("inverting g at r = {r}: residual {res:.3e}"),
        })
    }
}

/// The governing pair: material transport of (u1, u2) plus the coupling
/// terms `A11 (u1_x - u2_y) + A12 u1_y` and `A21 (u1_x - u2_y) + A22 u1_y`.
pub fn hydro_system(a11: f64, a12: f64, a21: f64, a22: f64) -> QuasilinearSystem {
    let coeff: CoeffFn = Arc::new(move |u: &[f64]| {
        let d1 = Matrix::from_rows(&[
            vec![1.0, 0.0],
            vec![u[0] + a11, 0.0],
            vec![u[1] + a12, -a11],
        ])
        .unwrap();
        let d2 = Matrix::from_rows(&[
            vec![0.0, 1.0],
            vec![a21, u[0]],
            vec![a22, u[1] - a21],
        ])
        .unwrap();
        vec![d1, d2]
    });
    QuasilinearSystem::new(
        "hydro-2plus1",
        2,
        3,
        2,
        vec!["t".into(), "x".into(), "y".into(), "u1".into(), "u2".into()],
        coeff,
        DomainBox::unbounded(2),
    )
    .unwrap()
}

/// Rank-2 solution defined by `x - u1 t = g(u1)`, `y - u2 t = a(u1) + u2 g'(u1)`.
/// Requires g'(0) != 0 so the relations can be inverted near the origin.
pub fn example3_hydro_2plus1(
    system: QuasilinearSystem,
    g: Curve,
    a: Curve,
    perturb: f64,
) -> Result<ImplicitSolution> {
    let slope = (g.d1)(0.0);
    if slope.abs() < 1e-10 {
        return Err(Error::InvalidInput(
            "g must have a nonzero slope at the origin".into(),
        ));
    }
    let gv = g.clone();
    let av = a.clone();
    let value = Arc::new(move |r: &[f64]| -> Result<Vec<f64>> {
        let v = invert_curve(&gv, r[0], slope)?;
        let gp = (gv.d1)(v);
        if gp.abs() < 1e-12 {
            return Err(Error::Domain(format!("g'({v}) ~ 0")));
        }
        Ok(vec![v, (r[1] - (av.value)(v)) / gp])
    });
    let gj = g.clone();
    let aj = a.clone();
    let jacobian = Arc::new(move |r: &[f64]| -> Result<Matrix> {
        let v = invert_curve(&gj, r[0], slope)?;
        let gp = (gj.d1)(v);
        let gpp = (gj.d2)(v);
        let ap = (aj.d1)(v);
        let a_of_v = (aj.value)(v);
        if gp.abs() < 1e-12 {
            return Err(Error::Domain(format!("g'({v}) ~ 0")));
        }
        let dv = 1.0 / gp;
        let df2_dr1 = ((-ap) * gp - (r[1] - a_of_v) * gpp) / (gp * gp) * dv;
        Matrix::from_rows(&[vec![dv, 0.0], vec![df2_dr1, 1.0 / gp]])
    });
    let profile = Profile::new(2, 2, value, jacobian, DomainBox::unbounded(2))?;
    let family =
        super::scalar_evolution::evolution_family(2, &AdvectionCoeffs::velocity(2, 2), perturb)?;
    ImplicitSolution::new(system, family, profile)
}

pub(super) fn build(params: &ParamSet, perturb: f64) -> Result<CatalogEntry> {
    let g1 = take_real(params, "g1", 1.0)?;
    let g2 = take_real(params, "g2", 0.0)?;
    let a0 = take_real(params, "a0", 0.0)?;
    let a1 = take_real(params, "a1", 0.0)?;
    let a11 = take_real(params, "A11", 0.0)?;
    let a12 = take_real(params, "A12", 0.0)?;
    let a21 = take_real(params, "A21", 0.0)?;
    let a22 = take_real(params, "A22", 0.0)?;

    let system = hydro_system(a11, a12, a21, a22);
    let sol = example3_hydro_2plus1(
        system.clone(),
        Curve::poly2(0.0, g1, g2),
        Curve::poly2(a0, a1, 0.0),
        perturb,
    )?;
    let family = sol.family().clone();

    let grid = GridSpec::new(vec![
        GridAxis { label: "t".into(), min: 0.0, max: 0.5, n: 5 },
        GridAxis { label: "x".into(), min: -0.4, max: 0.4, n: 5 },
        GridAxis { label: "y".into(), min: -0.4, max: 0.4, n: 5 },
    ])?;

    Ok(CatalogEntry {
        id: "example3_hydro_2plus1",
        title: "(2+1) hydrodynamic pair with g/a-generated invariant relations",
        system,
        families: vec![("advective", family)],
        solutions: vec![NamedSolution {
            name: "invariant_relations",
            field: SolutionField::Implicit(sol),
            extra_checks: vec![],
            r_sample_box: Some(DomainBox::new(vec![(-0.5, 0.5), (-0.5, 0.5)])?),
        }],
        grid,
        tol: EntryTolerances::default(),
        params: vec![
            ParamDoc { name: "g1", default: "1", doc: "linear coefficient of g(u1)" },
            ParamDoc { name: "g2", default: "0", doc: "quadratic coefficient of g(u1)" },
            ParamDoc { name: "a0", default: "0", doc: "constant coefficient of a(u1)" },
            ParamDoc { name: "a1", default: "0", doc: "linear coefficient of a(u1)" },
            ParamDoc { name: "A11", default: "0", doc: "coupling coefficient" },
            ParamDoc { name: "A12", default: "0", doc: "coupling coefficient" },
            ParamDoc { name: "A21", default: "0", doc: "coupling coefficient" },
            ParamDoc { name: "A22", default: "0", doc: "coupling coefficient" },
        ],
        notes: "The relations hold for arbitrary coupling functions because \
                u1 depends on (t, x) only and the construction enforces \
                u1_x = u2_y; with zero couplings the system is the \
                pressureless pair.",
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::EvalOptions;

    #[test]
    fn read_off_at_initial_time() {
        // g(s) = s, a = 0: at t = 0 the relations read u1 = x, u2 = y.
        let entry = build(&ParamSet::new(), 0.0).unwrap();
        let u = entry.primary().field.value(&[0.0, 0.3, 0.4]).unwrap();
        assert!((u[0] - 0.3).abs() < 1e-12);
        assert!((u[1] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn linear_relations_match_hand_elimination() {
        // g(s) = s, a(s) = 0.2 s: the relations are linear in (u1, u2):
        // u1 = x / (1 + t), u2 = (y - 0.2 u1) / (1 + t).
        let mut params = ParamSet::new();
        params.insert("a1".into(), super::super::ParamValue::Real(0.2));
        let entry = build(&params, 0.0).unwrap();
        let (t, x, y) = (0.7, 0.4, -0.3);
        let u = entry.primary().field.value(&[t, x, y]).unwrap();
        let u1 = x / (1.0 + t);
        let u2 = (y - 0.2 * u1) / (1.0 + t);
        assert!((u[0] - u1).abs() < 1e-11);
        assert!((u[1] - u2).abs() < 1e-11);
    }

    #[test]
    fn nonlinear_g_still_satisfies_the_relations() {
        let mut params = ParamSet::new();
        params.insert("g2".into(), super::super::ParamValue::Real(0.15));
        params.insert("a1".into(), super::super::ParamValue::Real(0.1));
        params.insert("A11".into(), super::super::ParamValue::Real(0.3));
        params.insert("A21".into(), super::super::ParamValue::Real(-0.2));
        let entry = build(&params, 0.0).unwrap();
        let sol = match &entry.primary().field {
            SolutionField::Implicit(s) => s,
            _ => unreachable!(),
        };
        let (t, x, y) = (0.4, 0.25, -0.2);
        let res = sol.evaluate(&[t, x, y], &EvalOptions::default()).unwrap();
        let (u1, u2) = (res.u[0], res.u[1]);
        let g = |s: f64| s + 0.15 * s * s;
        let gp = |s: f64| 1.0 + 0.3 * s;
        let rel1 = x - u1 * t - g(u1);
        let rel2 = y - u2 * t - (0.1 * u1) - u2 * gp(u1);
        assert!(rel1.abs() < 1e-11, "first relation violated: {rel1}");
        assert!(rel2.abs() < 1e-11, "second relation violated: {rel2}");
    }
}
