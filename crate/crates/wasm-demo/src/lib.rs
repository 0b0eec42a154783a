//! Browser bindings for the interactive demo page: evaluate a catalog
//! solution field over a 2D slice, trace det Phi1 along a ray, and run a
//! quick verification summary, all in the browser via WebAssembly.

use wasm_bindgen::prelude::*;

use rank_solutions::catalog::{
    build_entry, list_catalog, CatalogEntry, ParamSet, ParamValue, SolutionField,
};
use rank_solutions::engine::EvalOptions;
use rank_solutions::verify::{GridAxis, GridSpec};

fn err_js(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn parse_params(sets_json: &str) -> Result<ParamSet, JsValue> {
    let mut params = ParamSet::new();
    if sets_json.trim().is_empty() {
        return Ok(params);
    }
    let doc: serde_json::Value = serde_json::from_str(sets_json).map_err(err_js)?;
    let obj = doc
        .as_object()
        .ok_or_else(|| JsValue::from_str("parameter overrides must be a JSON object"))?;
    for (name, value) in obj {
        let parsed = if let Some(v) = value.as_f64() {
            ParamValue::Real(v)
        } else {
            let rows: Vec<Vec<f64>> =
                serde_json::from_value(value.clone()).map_err(err_js)?;
            ParamValue::Matrix(rows)
        };
        params.insert(name.clone(), parsed);
    }
    Ok(params)
}

fn build(entry_id: &str, sets_json: &str) -> Result<CatalogEntry, JsValue> {
    let params = parse_params(sets_json)?;
    build_entry(entry_id, &params, 0.0).map_err(err_js)
}

/// Catalog metadata as a JSON array: id, title, dimensions, axis labels,
/// solution names, tunable parameters and the default grid box.
#[wasm_bindgen]
pub fn list_entries() -> Result<String, JsValue> {
    let mut rows = Vec::new();
    for id in list_catalog() {
        let entry = rank_solutions::catalog::get_entry(id).map_err(err_js)?;
        rows.push(serde_json::json!({
            "id": entry.id,
            "title": entry.title,
            "equations": entry.system.equations(),
            "independent": entry.system.independent_vars(),
            "dependent": entry.system.dependent_vars(),
            "waves": entry.waves(),
            "axes": entry.system.x_names(),
            "solutions": entry.solutions.iter().map(|s| s.name).collect::<Vec<_>>(),
            "params": entry.params.iter().map(|p| serde_json::json!({
                "name": p.name, "default": p.default, "doc": p.doc,
            })).collect::<Vec<_>>(),
            "grid": entry.grid.axes.iter().map(|a| serde_json::json!({
                "label": a.label, "min": a.min, "max": a.max,
            })).collect::<Vec<_>>(),
        }));
    }
    serde_json::to_string(&rows).map_err(err_js)
}

/// One dependent component of the entry's primary solution on an n-by-n
/// slice spanned by two coordinate axes, remaining coordinates fixed.
/// Returns row-major values with NaN marking failed points.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn field_slice(
    entry_id: &str,
    sets_json: &str,
    fixed_json: &str,
    ax_u: usize,
    ax_v: usize,
    u_min: f64,
    u_max: f64,
    v_min: f64,
    v_max: f64,
    n: usize,
    component: usize,
) -> Result<Vec<f64>, JsValue> {
    let entry = build(entry_id, sets_json)?;
    let p = entry.system.independent_vars();
    if ax_u >= p || ax_v >= p || ax_u == ax_v {
        return Err(JsValue::from_str("slice axes out of range"));
    }
    if !(2..=512).contains(&n) {
        return Err(JsValue::from_str("slice resolution must be in 2..=512"));
    }
    let solution = entry.primary();
    if component >= solution.field.components() {
        return Err(JsValue::from_str("component out of range"));
    }
    let mut base = vec![0.0; p];
    if !fixed_json.trim().is_empty() {
        let fixed: std::collections::BTreeMap<String, f64> =
            serde_json::from_str(fixed_json).map_err(err_js)?;
        for (label, value) in fixed {
            match entry.system.x_names().iter().position(|l| *l == label) {
                Some(i) => base[i] = value,
                None => return Err(JsValue::from_str(&format!("unknown axis `{label}`"))),
            }
        }
    }
    let mut out = Vec::with_capacity(n * n);
    for iv in 0..n {
        let v = v_min + (v_max - v_min) * iv as f64 / (n - 1) as f64;
        for iu in 0..n {
            let u = u_min + (u_max - u_min) * iu as f64 / (n - 1) as f64;
            let mut x = base.clone();
            x[ax_u] = u;
            x[ax_v] = v;
            out.push(match solution.field.value(&x) {
                Ok(vals) => vals[component],
                Err(_) => f64::NAN,
            });
        }
    }
    Ok(out)
}

/// det Phi1 along the ray `from + s * direction`, n + 1 samples for
/// s in [0, s_max]; NaN where evaluation fails. Requires an implicit
/// primary solution.
#[wasm_bindgen]
pub fn catastrophe_curve(
    entry_id: &str,
    sets_json: &str,
    from_json: &str,
    dir_json: &str,
    s_max: f64,
    n: usize,
) -> Result<Vec<f64>, JsValue> {
    let entry = build(entry_id, sets_json)?;
    let sol = match &entry.primary().field {
        SolutionField::Implicit(s) => s.clone(),
        _ => {
            return Err(JsValue::from_str(
                "entry's primary solution is not implicit",
            ))
        }
    };
    let from: Vec<f64> = serde_json::from_str(from_json).map_err(err_js)?;
    let dir: Vec<f64> = serde_json::from_str(dir_json).map_err(err_js)?;
    let p = entry.system.independent_vars();
    if from.len() != p || dir.len() != p {
        return Err(JsValue::from_str("ray point/direction have wrong length"));
    }
    if !(1..=4096).contains(&n) {
        return Err(JsValue::from_str("sample count must be in 1..=4096"));
    }
    let opts = EvalOptions::default();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let s = s_max * i as f64 / n as f64;
        let x: Vec<f64> = from.iter().zip(&dir).map(|(f, d)| f + s * d).collect();
        out.push(match sol.evaluate(&x, &opts) {
            Ok(eval) => eval.phi1_det,
            Err(_) => f64::NAN,
        });
    }
    Ok(out)
}

/// Verification summary over a coarse grid derived from the entry's default
/// grid (each axis resampled to `per_axis` points), as a JSON array with one
/// object per registered solution.
#[wasm_bindgen]
pub fn verify_entry(entry_id: &str, sets_json: &str, per_axis: usize) -> Result<String, JsValue> {
    let entry = build(entry_id, sets_json)?;
    if !(1..=12).contains(&per_axis) {
        return Err(JsValue::from_str("per-axis resolution must be in 1..=12"));
    }
    let grid = GridSpec::new(
        entry
            .grid
            .axes
            .iter()
            .map(|a| GridAxis {
                label: a.label.clone(),
                min: a.min,
                max: a.max,
                n: per_axis,
            })
            .collect(),
    )
    .map_err(err_js)?;
    let mut rows = Vec::new();
    for solution in &entry.solutions {
        let report = summarize(&entry, solution, &grid).map_err(err_js)?;
        rows.push(report);
    }
    serde_json::to_string(&rows).map_err(err_js)
}

fn summarize(
    entry: &CatalogEntry,
    solution: &rank_solutions::catalog::NamedSolution,
    grid: &GridSpec,
) -> Result<serde_json::Value, rank_solutions::error::Error> {
    let opts = rank_solutions::verify::VerifyOptions {
        fd_step: entry.tol.fd_step,
        eval: EvalOptions::default().with_newton_tol(entry.tol.newton_tol),
        ..Default::default()
    };
    let report = match &solution.field {
        SolutionField::Implicit(sol) => {
            rank_solutions::verify::verify_solution(sol, grid, &opts)?
        }
        SolutionField::Explicit { eval, .. } => {
            rank_solutions::verify::verify_field(&entry.system, |y| eval(y), None, grid, &opts)?
        }
    };
    let agg = &report.aggregates;
    Ok(serde_json::json!({
        "solution": solution.name,
        "points": agg.points,
        "failed": agg.failed,
        "max_residual": agg.max_residual,
        "max_constraint": agg.max_constraint,
        "max_rank": agg.max_rank,
        "rank_ok": agg.max_rank <= entry.waves(),
    }))
}
