//! Incompressible planar Euler flows generated by the one-parameter profile
//! family
//!
//! ```text
//! u1 = (1 - m) w^m,    u2 = -m w^(m-1),    w = r1 / r2,
//! ```
//!
//! with invariants r1 = x - u1 t, r2 = y - u2 t. The profile Jacobian is
//! traceless with zero determinant, so the field is divergence free and the
//! trace conditions hold for every m. For m = 2 the implicit pair reduces to
//! a quadratic in w and both closed-form branches are registered; branch
//! selection for the implicit route is by continuation from a registered
//! anchor, never by a formula sign.

use std::sync::Arc;

use crate::engine::{ImplicitSolution, Profile};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::system::{CoeffFn, DomainBox, QuasilinearSystem};
use crate::verify::{GridAxis, GridSpec};

use super::scalar_evolution::AdvectionCoeffs;
use super::{
    real_pow, take_real, CatalogEntry, EntryTolerances, NamedSolution, ParamDoc, ParamSet,
    SolutionField,
};

/// Planar incompressible Euler: material transport of both velocity
/// components plus the divergence constraint.
pub fn euler2d_system() -> QuasilinearSystem {
    let coeff: CoeffFn = Arc::new(|u: &[f64]| {
        let d1 = Matrix::from_rows(&[vec![1.0, 0.0], vec![u[0], 0.0], vec![u[1], 0.0]]).unwrap();
        let d2 = Matrix::from_rows(&[vec![0.0, 1.0], vec![0.0, u[0]], vec![0.0, u[1]]]).unwrap();
        let div = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        vec![d1, d2, div]
    });
    QuasilinearSystem::new(
        "euler-2d-incompressible",
        3,
        3,
        2,
        vec!["t".into(), "x".into(), "y".into(), "u1".into(), "u2".into()],
        coeff,
        DomainBox::unbounded(2),
    )
    .unwrap()
}

/// Branch label: -1 selects w >= 0, +1 selects w <= 0 (m = 2 only).
fn check_branch(w: f64, sigma: f64, r: &[f64]) -> Result<()> {
    if sigma < 0.0 && w < -1e-9 {
        return Err(Error::Domain(format!(
            "w = {w} left the w >= 0 branch at r = {r:?}"
        )));
    }
    if sigma > 0.0 && w > 1e-9 {
        return Err(Error::Domain(format!(
            "w = {w} left the w <= 0 branch at r = {r:?}"
        )));
    }
    Ok(())
}

/// Profile of the m-family on the branch selected by sigma.
pub fn euler_m_profile(m: f64, sigma: f64) -> Result<Profile> {
    if sigma > 0.0 && (m - 2.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(
            "branch sigma = +1 is exposed for m = 2 only".into(),
        ));
    }
    let value = Arc::new(move |r: &[f64]| -> Result<Vec<f64>> {
        if r[1].abs() <= 1e-12 * (1.0 + r[0].abs()) {
            return Err(Error::Domain(format!("r2 ~ 0 at r = {r:?}")));
        }
        let w = r[0] / r[1];
        check_branch(w, sigma, r)?;
        Ok(vec![(1.0 - m) * real_pow(w, m)?, -m * real_pow(w, m - 1.0)?])
    });
    let jacobian = Arc::new(move |r: &[f64]| -> Result<Matrix> {
        if r[1].abs() <= 1e-12 * (1.0 + r[0].abs()) {
            return Err(Error::Domain(format!("r2 ~ 0 at r = {r:?}")));
        }
        let w = r[0] / r[1];
        check_branch(w, sigma, r)?;
        let dw_dr1 = 1.0 / r[1];
        let dw_dr2 = -w / r[1];
        let df1_dw = (1.0 - m) * m * real_pow(w, m - 1.0)?;
        let df2_dw = -m * (m - 1.0) * real_pow(w, m - 2.0)?;
        Matrix::from_rows(&[
            vec![df1_dw * dw_dr1, df1_dw * dw_dr2],
            vec![df2_dw * dw_dr1, df2_dw * dw_dr2],
        ])
    });
    Profile::new(2, 2, value, jacobian, DomainBox::unbounded(2))
}

/// Positive root of `t w^m + y w - x = 0`, the w >= 0 branch value at
/// (t, x, y) with t, x, y > 0; bisection on a monotone function.
pub(super) fn positive_w_root(m: f64, t: f64, x: f64, y: f64) -> Result<f64> {
    let eval = |w: f64| -> Result<f64> { Ok(t * real_pow(w, m)? + y * w - x) };
    let mut lo = 0.0;
    let mut hi = 1.0;
    while eval(hi)? < 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::NoConvergence {
                trail: "anchor root bracket exceeded 1e12".into(),
            });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if eval(mid)? <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Implicit solution of the m-family on the chosen branch.
pub fn example4_euler_m(m: f64, sigma: f64, perturb: f64) -> Result<ImplicitSolution> {
    if !(m > 0.0) {
        return Err(Error::InvalidInput("m must be positive".into()));
    }
    let system = euler2d_system();
    let family = super::scalar_evolution::evolution_family(
        2,
        &AdvectionCoeffs::velocity(2, 2),
        perturb,
    )?;
    let profile = euler_m_profile(m, sigma)?;
    if sigma < 0.0 {
        // anchor on the w >= 0 branch at a reference point in the default box
        let (t0, x0, y0) = (1.0, 0.5, 0.5);
        let w = positive_w_root(m, t0, x0, y0)?;
        let u = vec![(1.0 - m) * real_pow(w, m)?, -m * real_pow(w, m - 1.0)?];
        ImplicitSolution::with_anchor(system, family, profile, vec![t0, x0, y0], u)
    } else {
        // m = 2, w <= 0 branch through ((1, 1, 0), (-1, 2)) where w = -1
        ImplicitSolution::with_anchor(
            system,
            family,
            profile,
            vec![1.0, 1.0, 0.0],
            vec![-1.0, 2.0],
        )
    }
}

/// Closed-form m = 2 branch: with D = y^2 + 4 t x,
/// `u2 = (y - sigma' sqrt(D)) / t` and `u1 = -((sqrt(D) - y) / (2t))^2` on
/// the w >= 0 branch (sigma = -1), mirrored for sigma = +1. Rationalized to
/// avoid cancellation where y > 0.
pub fn closed_form_euler_m2(sigma: f64, x: &[f64]) -> Result<Vector> {
    let (t, xx, y) = (x[0], x[1], x[2]);
    if t.abs() < 1e-12 {
        return Err(Error::Domain("closed form needs t != 0".into()));
    }
    let disc = y * y + 4.0 * t * xx;
    if disc < 0.0 {
        return Err(Error::Domain(format!(
            "y^2 + 4 t x = {disc} < 0 at x = {x:?}"
        )));
    }
    let root = disc.sqrt();
    let w = if sigma < 0.0 {
        if root + y > 1e-12 {
            2.0 * xx / (root + y)
        } else {
            (root - y) / (2.0 * t)
        }
    } else {
        -(root + y) / (2.0 * t)
    };
    Ok(vec![-w * w, -2.0 * w])
}

pub(super) fn build(params: &ParamSet, perturb: f64) -> Result<CatalogEntry> {
    let m = take_real(params, "m", 2.0)?;
    let sigma = take_real(params, "sigma", -1.0)?;
    if sigma != -1.0 && sigma != 1.0 {
        return Err(Error::InvalidInput("sigma must be -1 or 1".into()));
    }

    let sol = example4_euler_m(m, sigma, perturb)?;
    let system = sol.system().clone();
    let family = sol.family().clone();

    let mut solutions = vec![NamedSolution {
        name: "implicit",
        field: SolutionField::Implicit(sol),
        extra_checks: vec![],
        r_sample_box: Some(if sigma < 0.0 {
            DomainBox::new(vec![(0.05, 1.5), (0.3, 2.5)])?
        } else {
            DomainBox::new(vec![(0.05, 1.5), (-2.5, -0.3)])?
        }),
    }];
    if (m - 2.0).abs() < 1e-12 {
        solutions.push(NamedSolution {
            name: "closed_form",
            field: SolutionField::Explicit {
                q: 2,
                eval: Arc::new(move |x: &[f64]| closed_form_euler_m2(sigma, x)),
            },
            extra_checks: vec![],
            r_sample_box: None,
        });
    }

    let grid = GridSpec::new(vec![
        GridAxis { label: "t".into(), min: 0.5, max: 2.0, n: 10 },
        GridAxis { label: "x".into(), min: 0.1, max: 1.0, n: 10 },
        GridAxis { label: "y".into(), min: 0.1, max: 1.0, n: 10 },
    ])?;

    Ok(CatalogEntry {
        id: "example4_euler_m2",
        title: "divergence-free planar Euler flow from the w-power family",
        system,
        families: vec![("advective", family)],
        solutions,
        grid,
        tol: EntryTolerances {
            eq_bounds: vec![(2, 1e-7)], // |div u| stays an order tighter
            ..EntryTolerances::default()
        },
        params: vec![
            ParamDoc { name: "m", default: "2", doc: "power-family exponent" },
            ParamDoc {
                name: "sigma",
                default: "-1",
                doc: "branch: -1 follows w >= 0, +1 follows w <= 0 (m = 2 only)",
            },
        ],
        notes: "The field is constant along rays through the space-time \
                origin; the origin itself lies outside the domain (r2 = 0), \
                so the implicit branch is anchored at a reference point and \
                tracked by continuation.",
    })
}
