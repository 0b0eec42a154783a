//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//! Run with `cargo test -p rank-solutions-cli --test acceptance -- --nocapture`.

use std::process::Command;

use rank_solutions::catalog::{
    bilinear_h, cauchy_char_poly, closed_form_euler_m2, gaussian_curvature_mismatch, get_entry,
    isentropic_entry_with_h, list_catalog, monge_ampere_residual, power_family_h, SolutionField,
};
use rank_solutions::engine::{fd_jacobian, integrate_rank1_profile, EvalOptions, GammaSelector};
use rank_solutions::error::Error;
use rank_solutions::linalg::{singular_values_small, sub, Matrix, Vector};
use rank_solutions::rng::SplitMix64;
use rank_solutions::system::{CoeffFn, DomainBox, QuasilinearSystem};
use rank_solutions::verify::{verify_solution, VerifyOptions};
use rank_solutions::wave::{
    check_orthogonality, trace_condition_initial, trace_condition_symmetrized, xi_from_pi,
};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rank-solutions"))
}

struct Criterion {
    number: usize,
    name: &'static str,
}

impl Criterion {
    fn new(number: usize, name: &'static str) -> Criterion {
        Criterion { number, name }
    }

    fn gate(&self, pass: bool, detail: &str) {
        println!(
            "ACCEPTANCE {} ({}): {} [{detail}]",
            self.number,
            self.name,
            if pass { "PASS" } else { "FAIL" }
        );
        assert!(pass, "criterion {} failed: {detail}", self.number);
    }
}

#[test]
fn criterion_1_closed_form_agreement_euler_m2() {
    let c = Criterion::new(1, "closed-form agreement, planar Euler m=2");
    let entry = get_entry("example4_euler_m2").unwrap();
    let sol = match &entry.primary().field {
        SolutionField::Implicit(s) => s,
        _ => unreachable!(),
    };
    let opts = EvalOptions::default().with_newton_tol(1e-13);
    let mut worst: f64 = 0.0;
    let mut points = 0;
    for x in entry.grid.points() {
        let implicit = sol.evaluate(&x, &opts).unwrap();
        let closed = closed_form_euler_m2(-1.0, &x).unwrap();
        for (a, b) in implicit.u.iter().zip(&closed) {
            worst = worst.max((a - b).abs());
        }
        points += 1;
    }
    // anchor points, hand-solved
    let at = sol.evaluate(&[1.0, 0.0, 1.0], &opts).unwrap();
    worst = worst.max(at.u[0].abs()).max(at.u[1].abs());
    let at = sol.evaluate(&[1.0, 1.0, 0.0], &opts).unwrap();
    worst = worst.max((at.u[0] + 1.0).abs()).max((at.u[1] + 2.0).abs());
    c.gate(
        points == 1000 && worst <= 1e-10,
        &format!("{points} grid points, max |du| = {worst:.3e} (tol 1e-10)"),
    );
}

#[test]
fn criterion_2_pde_residuals_via_cmd_verify() {
    let c = Criterion::new(2, "PDE residuals on default grids via cmd_verify");
    let mut worst: f64 = 0.0;
    let mut worst_div: f64 = 0.0;
    let mut all_ok = true;
    for id in list_catalog() {
        let path = std::env::temp_dir().join(format!("acc2_{id}_{}.json", std::process::id()));
        let out = bin()
            .args([
                "verify",
                "--entry",
                id,
                "--format",
                "json",
                "--out",
                path.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        all_ok &= out.status.code() == Some(0);
        let doc: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        std::fs::remove_file(&path).ok();
        let div_row = match id {
            "example4_euler_m2" => Some(2),
            "example5_euler3d" => Some(3),
            _ => None,
        };
        for sol in doc["solutions"].as_array().unwrap() {
            let agg = &sol["aggregates"];
            let max_res = agg["max_residual"].as_f64().unwrap();
            worst = worst.max(max_res);
            all_ok &= agg["failed"].as_u64().unwrap() == 0;
            if let Some(row) = div_row {
                let div = agg["max_residual_per_eq"].as_array().unwrap()[row]
                    .as_f64()
                    .unwrap();
                worst_div = worst_div.max(div);
            }
        }
    }
    c.gate(
        all_ok && worst <= 1e-6 && worst_div <= 1e-7,
        &format!("max residual {worst:.3e} (tol 1e-6), max |div u| {worst_div:.3e} (tol 1e-7)"),
    );
}

#[test]
fn criterion_3_jacobian_identity_and_rank() {
    let c = Criterion::new(3, "analytic vs finite-difference Jacobian, rank bound");
    let mut rng = SplitMix64::new(0x3a11);
    let opts = EvalOptions::default().with_newton_tol(1e-13);
    let mut worst_fd: f64 = 0.0;
    let mut worst_alt: f64 = 0.0;
    let mut rank_ok = true;
    let mut rank1_sigma_ok = true;
    let mut checked = 0;
    for id in list_catalog() {
        let entry = get_entry(id).unwrap();
        let bounds = entry.grid.bounds();
        for named in &entry.solutions {
            let sol = match &named.field {
                SolutionField::Implicit(s) => s,
                _ => continue,
            };
            let k = sol.family().waves();
            let q = sol.system().dependent_vars();
            let mut ranks_seen = Vec::new();
            let mut accepted = 0;
            let mut attempts = 0;
            while accepted < 100 && attempts < 2000 {
                attempts += 1;
                let x = rng.point_in(&bounds);
                let eval = match sol.evaluate(&x, &opts) {
                    Ok(e) => e,
                    Err(_) => continue, // outside the solution's neighborhood
                };
                accepted += 1;
                let analytic = sol.analytic_jacobian(&x, &eval.u).unwrap();
                let alt = sol.analytic_jacobian_via_phi2(&x, &eval.u).unwrap();
                worst_alt = worst_alt.max(analytic.sub(&alt).unwrap().max_abs());
                let fd = fd_jacobian(|y| sol.evaluate(y, &opts).map(|e| e.u), &x, q, 1e-6)
                    .unwrap();
                worst_fd = worst_fd.max(analytic.sub(&fd).unwrap().max_abs());
                let rank = analytic.rank_with_tolerance(1e-10).unwrap();
                rank_ok &= rank <= k;
                ranks_seen.push(rank);
                if rank == 1 {
                    // decomposability: both the analytic and the
                    // finite-difference Jacobian are outer products
                    let sv = singular_values_small(&analytic).unwrap();
                    rank1_sigma_ok &= sv[1] <= 1e-6 * sv[0];
                    let sv_fd = singular_values_small(&fd).unwrap();
                    rank1_sigma_ok &= sv_fd[1] <= 1e-6 * sv_fd[0];
                }
            }
            assert_eq!(accepted, 100, "{id}/{}: not enough in-domain samples", named.name);
            checked += accepted;
        }
    }
    c.gate(
        worst_fd <= 1e-6 && worst_alt <= 1e-10 && rank_ok && rank1_sigma_ok && checked >= 700,
        &format!(
            "{checked} samples, max |J_fd - J| = {worst_fd:.3e} (tol 1e-6), \
             route mismatch {worst_alt:.3e} (tol 1e-10), rank bound {rank_ok}, \
             rank-1 decomposability {rank1_sigma_ok}"
        ),
    );
}

#[test]
fn criterion_4_constraint_residuals_and_orthogonality() {
    let c = Criterion::new(4, "side conditions gridwide, frame orthogonality");
    let mut worst_constraint: f64 = 0.0;
    let mut worst_analytic: f64 = 0.0;
    let mut worst_ortho: f64 = 0.0;
    let mut rng = SplitMix64::new(0xc4);
    for id in list_catalog() {
        let entry = get_entry(id).unwrap();
        for named in &entry.solutions {
            let sol = match &named.field {
                SolutionField::Implicit(s) => s,
                _ => continue,
            };
            let opts = VerifyOptions {
                eval: EvalOptions::default().with_newton_tol(entry.tol.newton_tol),
                fd_step: entry.tol.fd_step,
                point_cap: usize::MAX,
                ..VerifyOptions::default()
            };
            let report = verify_solution(sol, &entry.grid, &opts).unwrap();
            worst_constraint = worst_constraint.max(report.aggregates.max_constraint);
            // the same contraction through the analytic Jacobian is an
            // algebraic identity and must hold far below the grid bound
            let frame0 = xi_from_pi(sol.family(), sol.reference_u0(), 1e-10).unwrap();
            for rec in report.records.iter().step_by(17) {
                if let Some(u) = &rec.u {
                    let jac = sol.analytic_jacobian(&rec.x, u).unwrap();
                    let con = rank_solutions::verify::constraint_from_jacobian(
                        &frame0, u, &jac,
                    )
                    .unwrap();
                    worst_analytic = worst_analytic.max(con.max_abs());
                }
            }
            // orthogonality at sampled in-domain u
            let r_box = named.r_sample_box.as_ref().unwrap();
            let samples: Vec<Vector> = (0..25)
                .map(|_| sol.profile().value(&rng.point_in(r_box.bounds())).unwrap())
                .collect();
            let frame = xi_from_pi(sol.family(), &samples[0], 1e-10).unwrap();
            let ortho = check_orthogonality(sol.family(), &frame, &samples, 1e-12).unwrap();
            worst_ortho = worst_ortho.max(ortho.max_abs);
        }
    }
    c.gate(
        worst_constraint <= 1e-6 && worst_analytic <= 1e-6 && worst_ortho <= 1e-12,
        &format!(
            "max |xi^i du/dx^i| = {worst_constraint:.3e} fd / {worst_analytic:.3e} analytic \
             (tol 1e-6), max |lambda . xi| = {worst_ortho:.3e} (tol 1e-12)"
        ),
    );
}

#[test]
fn criterion_5_trace_conditions_with_negative_control() {
    let c = Criterion::new(5, "trace conditions at sampled invariants");
    let mut rng = SplitMix64::new(0x77ace);
    let mut worst: f64 = 0.0;
    for id in list_catalog() {
        let entry = get_entry(id).unwrap();
        for named in &entry.solutions {
            let sol = match &named.field {
                SolutionField::Implicit(s) => s,
                _ => continue,
            };
            let r_box = named.r_sample_box.as_ref().unwrap();
            let q = sol.system().dependent_vars();
            let k = sol.family().waves();
            let s_max = q.saturating_sub(1).min(k.saturating_sub(1)).max(1);
            for _ in 0..100 {
                let r = rng.point_in(r_box.bounds());
                let initial =
                    trace_condition_initial(sol.system(), sol.family(), sol.profile(), &r, 1e-8)
                        .unwrap();
                let sym = trace_condition_symmetrized(
                    sol.system(),
                    sol.family(),
                    sol.profile(),
                    &r,
                    s_max,
                    1e-8,
                )
                .unwrap();
                worst = worst.max(initial.max_abs).max(sym.max_abs);
            }
        }
    }
    // negative control through the CLI: perturbed covector exceeds 1e-3 and
    // exits with the verification-failure code
    let path = std::env::temp_dir().join(format!("acc5_{}.csv", std::process::id()));
    let out = bin()
        .args([
            "trace-check",
            "--entry",
            "example4_euler_m2",
            "--perturb-lambda",
            "0.1",
            "--out",
            path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    std::fs::remove_file(&path).ok();
    let control_exit = out.status.code();
    let control_max: f64 = String::from_utf8_lossy(&out.stdout)
        .split("max_trace=")
        .nth(1)
        .unwrap()
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap();
    c.gate(
        worst <= 1e-8 && control_exit == Some(3) && control_max > 1e-3,
        &format!(
            "max trace residual {worst:.3e} (tol 1e-8); control {control_max:.3e} > 1e-3 \
             with exit {control_exit:?}"
        ),
    );
}

#[test]
fn criterion_6_linear_flow_structure() {
    let c = Criterion::new(6, "nilpotent determinant and constant char-poly coefficients");
    // nilpotent alpha: det(I + t alpha) = 1 exactly, sound speed constant
    let alpha = Matrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
    let mut det_ok = true;
    for t in [0.0_f64, 0.5, 1.0] {
        let mut m = Matrix::identity(2);
        for r in 0..2 {
            for cc in 0..2 {
                m.set(r, cc, m.get(r, cc) + t * alpha.get(r, cc));
            }
        }
        det_ok &= (m.det().unwrap() - 1.0).abs() <= 1e-14;
    }
    let entry = get_entry("example5_general").unwrap();
    let closed = entry.solution("closed_form").unwrap();
    let mut sound_ok = true;
    for t in [0.0, 0.25, 0.5] {
        let u = closed.field.value(&[t, 0.4, -0.3]).unwrap();
        sound_ok &= u[2] == 1.0;
    }
    // random well-conditioned 2x2 alpha: p0, p1 constant over x-samples
    let mut rng = SplitMix64::new(0x6u64);
    let mut worst_drift: f64 = 0.0;
    for _ in 0..5 {
        let a = Matrix::from_rows(&[
            vec![rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)],
            vec![rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)],
        ])
        .unwrap();
        let field = rank_solutions::catalog::linear_flow_field(
            a.clone(),
            vec![0.1, -0.2],
            1.0,
            2.0,
        );
        let samples: Vec<Vector> = (0..20)
            .map(|_| vec![rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)])
            .collect();
        let coeffs = cauchy_char_poly(|x| field(x), 2, &samples, 1e-4).unwrap();
        let first = &coeffs[0];
        for cvec in &coeffs {
            for (a, b) in cvec.iter().zip(first) {
                worst_drift = worst_drift.max((a - b).abs());
            }
        }
    }
    c.gate(
        det_ok && sound_ok && worst_drift <= 1e-10,
        &format!(
            "unit determinant {det_ok}, constant sound speed {sound_ok}, \
             char-poly drift {worst_drift:.3e} (tol 1e-10)"
        ),
    );
}

#[test]
fn criterion_7_monge_ampere_gate_and_curvature() {
    let c = Criterion::new(7, "constant-Hessian gate and curvature cross-check");
    let gate_box = [(0.1, 2.0), (0.1, 2.0)];
    let power = power_family_h(2.0);
    let power_res = monge_ampere_residual(&power, 0.0, &gate_box, 100, 0xa11).unwrap();
    let accepted = isentropic_entry_with_h(
        0.0, power.clone(), 0.0, 1.0, 2.0, &gate_box, 1e-8,
        Some((vec![1.0, 0.5, 0.5], {
            // w root of t w^2 + y w - x at the reference point
            let w = (0.25_f64 + 4.0 * 0.5).sqrt() / 2.0 - 0.25;
            vec![-w * w, -2.0 * w]
        })),
        0.0,
    )
    .is_ok();
    let rejected = matches!(
        isentropic_entry_with_h(
            0.0, bilinear_h(), 0.0, 1.0, 2.0, &gate_box, 1e-8, None, 0.0
        ),
        Err(Error::InconsistentH { .. })
    );
    let accepted_true_c = isentropic_entry_with_h(
        0.0, bilinear_h(), -1.0, 1.0, 2.0, &gate_box, 1e-8, None, 0.0,
    )
    .is_ok();
    let curvature = gaussian_curvature_mismatch(&power, 0.0, &gate_box, 100, 0xa12).unwrap();
    c.gate(
        power_res <= 1e-10 && accepted && rejected && accepted_true_c && curvature <= 1e-8,
        &format!(
            "power-family residual {power_res:.3e} (tol 1e-10), accepted {accepted}, \
             mismatch rejected {rejected}, true constant accepted {accepted_true_c}, \
             curvature mismatch {curvature:.3e} (tol 1e-8)"
        ),
    );
}

#[test]
fn criterion_8_rank1_integrator_order() {
    let c = Criterion::new(8, "fourth-order convergence of the profile integrator");
    // all-of-U kernel with a nonlinear selector gamma(f) = (f2, -f1^2)
    let coeff: CoeffFn = std::sync::Arc::new(|u: &[f64]| {
        let d1 = Matrix::from_rows(&[vec![1.0, 0.0], vec![u[0], 0.0]]).unwrap();
        let d2 = Matrix::from_rows(&[vec![0.0, 1.0], vec![0.0, u[0]]]).unwrap();
        vec![d1, d2]
    });
    let sys = QuasilinearSystem::new(
        "advected-pair",
        2,
        2,
        2,
        vec!["t".into(), "x".into(), "u1".into(), "u2".into()],
        coeff,
        DomainBox::unbounded(2),
    )
    .unwrap();
    let lambda_field = std::sync::Arc::new(|u: &[f64]| vec![-u[0], 1.0]);
    let selector: GammaSelector = std::sync::Arc::new(|_kernel: &[Vector], f: &[f64], _r: f64| {
        Some(vec![f[1], -f[0] * f[0]])
    });
    let f0 = vec![0.3, 1.0];
    let span = (-1.0, 1.0);
    let profile_at = |step: f64| {
        integrate_rank1_profile(
            &sys,
            lambda_field.clone(),
            f0.clone(),
            span,
            step,
            selector.clone(),
        )
        .unwrap()
    };
    let deviation = |a: &rank_solutions::engine::Profile, b: &rank_solutions::engine::Profile| {
        let mut worst: f64 = 0.0;
        for i in 0..=40 {
            let r = -1.0 + i as f64 * 0.05;
            let va = a.value(&[r]).unwrap();
            let vb = b.value(&[r]).unwrap();
            worst = worst.max(sub(&va, &vb).iter().fold(0.0_f64, |m, v| m.max(v.abs())));
        }
        worst
    };
    let s = 0.05;
    let coarse = profile_at(s);
    let half = profile_at(s / 2.0);
    let quarter = profile_at(s / 4.0);
    let d1 = deviation(&coarse, &half);
    let d2 = deviation(&half, &quarter);
    // agreement within 16x the step^4 bound, and one halving shrinks the
    // deviation by at least 8 (order 4 gives 16)
    let bound = 16.0 * 10.0 * s.powi(4);
    c.gate(
        d1 <= bound && d2 <= d1 / 8.0,
        &format!(
            "|f_s - f_(s/2)| = {d1:.3e} (bound {bound:.3e}), halving ratio {:.1}",
            d1 / d2
        ),
    );
}

#[test]
fn criterion_9_byte_identical_reruns() {
    let c = Criterion::new(9, "identical configs give byte-identical outputs");
    let mut all_equal = true;
    for (name, args) in [
        (
            "eval",
            vec![
                "eval", "--entry", "example4_euler_m2",
                "--grid", "t=0.5:2:4,x=0.1:1:4,y=0.1:1:4",
                "--format", "json",
            ],
        ),
        (
            "verify",
            vec!["verify", "--entry", "example5_euler3d", "--format", "json"],
        ),
        (
            "trace",
            vec![
                "trace-check", "--entry", "example3_hydro_2plus1",
                "--seed", "17", "--format", "csv",
            ],
        ),
    ] {
        let p1 = std::env::temp_dir().join(format!("acc9_{name}_1_{}", std::process::id()));
        let p2 = std::env::temp_dir().join(format!("acc9_{name}_2_{}", std::process::id()));
        for p in [&p1, &p2] {
            let mut full = args.clone();
            full.extend(["--out", p.to_str().unwrap()]);
            bin().args(&full).output().unwrap();
        }
        all_equal &= std::fs::read(&p1).unwrap() == std::fs::read(&p2).unwrap();
        std::fs::remove_file(&p1).ok();
        std::fs::remove_file(&p2).ok();
    }
    c.gate(all_equal, "eval/verify/trace-check reruns compared bytewise");
}
