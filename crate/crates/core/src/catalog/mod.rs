//! Built-in systems, wave-vector families, profiles and solution fields,
//! each registered with the grid and tolerances it is expected to pass.
//!
//! Every entry is self-certifying: `verify` on its default grid at its
//! declared tolerances must succeed, and the conditional-symmetry trace
//! checks must pass for every implicit solution it registers.

mod euler3d;
mod euler_m;
mod general_flow;
mod hydro;
mod isentropic;
mod scalar_evolution;

pub use euler3d::{euler3d_entry_with, Fn1, Fn2};
pub use euler_m::closed_form_euler_m2;
pub use general_flow::{cauchy_char_poly, linear_flow_field};
pub use isentropic::{
    gaussian_curvature_mismatch, isentropic_entry_with_h, monge_ampere_residual, power_family_h,
    bilinear_h, sound_speed, SurfaceFn,
};

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::engine::ImplicitSolution;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::system::{DomainBox, QuasilinearSystem};
use crate::verify::GridSpec;
use crate::wave::{LambdaFn, WaveVectorFamily};

/// A parameter override: a real number or a nested-array matrix literal.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    Real(f64),
    Matrix(Vec<Vec<f64>>),
}

impl ParamValue {
    pub fn as_real(&self, name: &str) -> Result<f64> {
        match self {
            ParamValue::Real(v) => Ok(*v),
            ParamValue::Matrix(_) => Err(Error::InvalidInput(format!(
                "parameter `{name}` expects a real number"
            ))),
        }
    }

    pub fn as_matrix(&self, name: &str) -> Result<Matrix> {
        match self {
            ParamValue::Matrix(rows) => Matrix::from_rows(rows),
            ParamValue::Real(_) => Err(Error::InvalidInput(format!(
                "parameter `{name}` expects a matrix literal"
            ))),
        }
    }
}

/// Ordered name-to-value overrides for an entry build.
pub type ParamSet = BTreeMap<String, ParamValue>;

/// Documentation row for one tunable parameter.
#[derive(Debug, Clone)]
pub struct ParamDoc {
    pub name: &'static str,
    pub default: &'static str,
    pub doc: &'static str,
}

/// Expected tolerances for the entry's default grid.
#[derive(Debug, Clone)]
pub struct EntryTolerances {
    pub max_residual: f64,
    pub max_constraint: f64,
    pub max_trace: f64,
    pub fd_step: f64,
    pub newton_tol: f64,
    /// Tighter per-equation residual bounds (equation index, bound).
    pub eq_bounds: Vec<(usize, f64)>,
}

impl Default for EntryTolerances {
    fn default() -> Self {
        EntryTolerances {
            max_residual: 1e-6,
            max_constraint: 1e-6,
            max_trace: 1e-8,
            fd_step: 1e-5,
            newton_tol: 1e-13,
            eq_bounds: Vec::new(),
        }
    }
}

/// Pointwise scalar check attached to a solution (must stay below `tol`).
#[derive(Clone)]
pub struct ExtraCheck {
    pub name: &'static str,
    pub tol: f64,
    pub residual: Arc<dyn Fn(&[f64]) -> Result<f64> + Send + Sync>,
}

/// A solution field: fully implicit (engine-evaluated) or a closed form.
#[derive(Clone)]
pub enum SolutionField {
    Implicit(ImplicitSolution),
    Explicit {
        q: usize,
        eval: Arc<dyn Fn(&[f64]) -> Result<Vector> + Send + Sync>,
    },
}

impl SolutionField {
    pub fn components(&self) -> usize {
        match self {
            SolutionField::Implicit(sol) => sol.system().dependent_vars(),
            SolutionField::Explicit { q, .. } => *q,
        }
    }

    /// Plain field evaluation (implicit solutions use default options).
    pub fn value(&self, x: &[f64]) -> Result<Vector> {
        match self {
            SolutionField::Implicit(sol) => sol
                .evaluate(x, &crate::engine::EvalOptions::default())
                .map(|e| e.u),
            SolutionField::Explicit { eval, .. } => eval(x),
        }
    }
}

#[derive(Clone)]
pub struct NamedSolution {
    pub name: &'static str,
    pub field: SolutionField,
    pub extra_checks: Vec<ExtraCheck>,
    /// Sampling box in invariant space for trace checks (implicit only).
    pub r_sample_box: Option<DomainBox>,
}

/// One catalog entry: a system, its wave families, and registered solutions.
#[derive(Clone)]
pub struct CatalogEntry {
    pub id: &'static str,
    pub title: &'static str,
    pub system: QuasilinearSystem,
    pub families: Vec<(&'static str, WaveVectorFamily)>,
    pub solutions: Vec<NamedSolution>,
    pub grid: GridSpec,
    pub tol: EntryTolerances,
    pub params: Vec<ParamDoc>,
    pub notes: &'static str,
}

impl CatalogEntry {
    /// Wave count of the leading family.
    pub fn waves(&self) -> usize {
        self.families
            .first()
            .map(|(_, f)| f.waves())
            .unwrap_or(0)
    }

    pub fn primary(&self) -> &NamedSolution {
        &self.solutions[0]
    }

    pub fn solution(&self, name: &str) -> Result<&NamedSolution> {
        self.solutions
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::NotFound(format!("solution `{name}` in `{}`", self.id)))
    }
}

/// Wraps a lambda callable so its first entry is shifted by `eps`; used as a
/// negative control (the field then fails verification on purpose).
pub(crate) fn perturb_lambdas(lambdas: LambdaFn, eps: f64) -> LambdaFn {
    if eps == 0.0 {
        return lambdas;
    }
    Arc::new(move |u: &[f64]| {
        let mut m = lambdas(u);
        m.set(0, 0, m.get(0, 0) + eps);
        m
    })
}

/// Real power that treats a negative base as a domain error unless the
/// exponent is (numerically) an integer; never returns a complex branch.
pub(crate) fn real_pow(base: f64, expo: f64) -> Result<f64> {
    if base > 0.0 {
        return Ok(base.powf(expo));
    }
    let rounded = expo.round();
    let integral = (expo - rounded).abs() < 1e-12;
    if base == 0.0 {
        if expo > 0.0 {
            return Ok(0.0);
        }
        if expo == 0.0 {
            return Ok(1.0);
        }
        return Err(Error::Domain("zero base with negative exponent".into()));
    }
    if !integral {
        return Err(Error::Domain(format!(
            "negative base {base} with non-integer exponent {expo}"
        )));
    }
    let mag = (-base).powf(expo);
    Ok(if (rounded as i64) % 2 == 0 { mag } else { -mag })
}

pub(crate) fn take_real(params: &ParamSet, name: &str, default: f64) -> Result<f64> {
    match params.get(name) {
        Some(v) => v.as_real(name),
        None => Ok(default),
    }
}

pub(crate) fn take_matrix(params: &ParamSet, name: &str, default: &[&[f64]]) -> Result<Matrix> {
    match params.get(name) {
        Some(v) => v.as_matrix(name),
        None => Matrix::from_rows(
            &default
                .iter()
                .map(|r| r.to_vec())
                .collect::<Vec<_>>(),
        ),
    }
}

struct EntryDescriptor {
    id: &'static str,
    allowed: &'static [&'static str],
    build: fn(&ParamSet, f64) -> Result<CatalogEntry>,
}

const DESCRIPTORS: &[EntryDescriptor] = &[
    EntryDescriptor {
        id: "example1_scalar_evolution",
        allowed: &["f11", "f12", "f21", "f22", "f01", "f02"],
        build: scalar_evolution::build,
    },
    EntryDescriptor {
        id: "example3_hydro_2plus1",
        allowed: &["g1", "g2", "a0", "a1", "A11", "A12", "A21", "A22"],
        build: hydro::build,
    },
    EntryDescriptor {
        id: "example4_isentropic",
        allowed: &["c1", "m", "a0", "k"],
        build: isentropic::build,
    },
    EntryDescriptor {
        id: "example4_euler_m2",
        allowed: &["m", "sigma"],
        build: euler_m::build,
    },
    EntryDescriptor {
        id: "example5_general",
        allowed: &["alpha", "beta", "gamma", "k"],
        build: general_flow::build,
    },
    EntryDescriptor {
        id: "example5_euler3d",
        allowed: &["c1", "c2"],
        build: euler3d::build,
    },
];

/// Entry identifiers in their fixed catalog order.
pub fn list_catalog() -> Vec<&'static str> {
    DESCRIPTORS.iter().map(|d| d.id).collect()
}

/// Builds the entry with default parameters.
pub fn get_entry(id: &str) -> Result<CatalogEntry> {
    build_entry(id, &ParamSet::new(), 0.0)
}

/// Builds an entry with parameter overrides and an optional wave-vector
/// perturbation (negative control). Unknown parameter names are rejected
/// before any computation.
pub fn build_entry(id: &str, params: &ParamSet, perturb_lambda: f64) -> Result<CatalogEntry> {
    let desc = DESCRIPTORS
        .iter()
        .find(|d| d.id == id)
        .ok_or_else(|| Error::NotFound(format!("catalog entry `{id}`")))?;
    for key in params.keys() {
        if !desc.allowed.contains(&key.as_str()) {
            return Err(Error::InvalidInput(format!(
                "unknown parameter `{key}` for `{id}` (expected one of {:?})",
                desc.allowed
            )));
        }
    }
    (desc.build)(params, perturb_lambda)
}
