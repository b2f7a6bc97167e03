use s2wb_core::fd::{
    box_mode_boundary, hessian_oscillation, perturbed_boundary, quadratic_boundary, scaling_experiment, solve_dirichlet,
    superharmonicity_residual, ScalingTable, SolveOptions,
};
use s2wb_core::grid::write_s2grid;
use s2wb_core::jacobi::{default_shift, DEFAULT_EPSILON};
use s2wb_core::legendre::{transform_grid, TransformConfig};
use s2wb_core::tolerances::{OSC_QUADRATIC, OSC_REFINEMENT, PROPORTIONALITY, QUADRATIC_PIPELINE, QUADRATIC_REPRODUCTION};
use s2wb_core::verify::{
    run_jacobi_suite, run_remark_ratio, run_transform_suite, CheckStats, JacobiSuiteConfig, TransformSuiteConfig,
};
use s2wb_core::Error;
use serde_json::json;

use crate::report::{num, Report, Table};
use crate::{BoundaryKind, ExperimentArgs, JacobiArgs, SolveArgs, TransformArgs};

type Boundary = Box<dyn Fn(&[f64]) -> f64 + Sync + Send>;

fn boundary(kind: BoundaryKind, n: usize, extent: f64) -> Boundary {
    match kind {
        BoundaryKind::Quadratic => Box::new(quadratic_boundary(n)),
        BoundaryKind::Perturbed => Box::new(perturbed_boundary(n)),
        BoundaryKind::BoxMode => Box::new(box_mode_boundary(n, extent)),
    }
}

pub fn verify_jacobi(a: &JacobiArgs) -> Report {
    let epsilon = a.epsilon.unwrap_or(DEFAULT_EPSILON);
    let shift = a.j_override.unwrap_or_else(|| default_shift(a.n, a.k_semiconvex));
    let remark = a.n == 3 && shift == 0.0;
    let mode = if epsilon != DEFAULT_EPSILON {
        "exploratory"
    } else if remark {
        "remark"
    } else if a.j_override.is_none() {
        "certificate"
    } else {
        "shifted"
    };
    let config = json!({
        "n": a.n,
        "k_semiconvex": num(a.k_semiconvex),
        "j_override": a.j_override.map(num),
        "j": num(shift),
        "epsilon": num(epsilon),
        "samples": a.samples,
        "seed": a.seed,
        "mode": mode,
    });
    let mut report = Report::new("verify-jacobi", Some(a.seed), config);
    let cfg = JacobiSuiteConfig { n: a.n, k: a.k_semiconvex, j: a.j_override, epsilon, samples: a.samples, seed: a.seed };
    match run_jacobi_suite(&cfg) {
        Ok(suite) => report.absorb("", suite),
        Err(e) => report.errors.push(e.to_string()),
    }
    if remark && report.errors.is_empty() {
        match run_remark_ratio(a.samples, a.seed) {
            Ok(suite) => report.absorb("", suite),
            Err(e) => report.errors.push(e.to_string()),
        }
    }
    report
}

pub fn verify_transform(a: &TransformArgs) -> Report {
    let config = json!({
        "n": a.n,
        "k_semiconvex": num(a.k_semiconvex),
        "kbar": a.kbar.map(num),
        "samples": a.samples,
        "seed": a.seed,
        "ray": a.ray,
    });
    let mut report = Report::new("verify-transform", Some(a.seed), config);
    let cfg = TransformSuiteConfig { n: a.n, k: a.k_semiconvex, kbar: a.kbar, samples: a.samples, seed: a.seed, ray: a.ray };
    match run_transform_suite(&cfg) {
        Ok(suite) => report.absorb("", suite),
        Err(e) => report.errors.push(e.to_string()),
    }
    report
}

pub fn solve(a: &SolveArgs) -> Report {
    let config = json!({
        "n": a.n,
        "m": a.m,
        "extent": num(a.extent),
        "k_semiconvex": num(a.k_semiconvex),
        "boundary": a.boundary.name(),
        "tol": num(a.tol),
        "max_iter": a.max_iter,
    });
    let mut report = Report::new("solve", None, config);
    if let Err(e) = solve_into(a, &mut report) {
        if let Error::NonConvergence { history, .. } = &e {
            let mut t = Table::new(&["iteration", "residual"]);
            t.rows = history.iter().enumerate().map(|(i, r)| vec![i as f64, *r]).collect();
            report.tables.insert("newton_history".into(), t);
        }
        report.errors.push(e.to_string());
    }
    report
}

fn solve_into(a: &SolveArgs, report: &mut Report) -> Result<(), Error> {
    let cfg = TransformConfig::new(a.n, a.k_semiconvex, None)?;
    let opts = SolveOptions { n: a.n, m: a.m, extent: a.extent, k: a.k_semiconvex, tol: a.tol, max_iter: a.max_iter };
    let g = boundary(a.boundary, a.n, a.extent);
    let (u, rep) = solve_dirichlet(&*g, &opts)?;
    if let Some(dir) = &a.grid_dir {
        std::fs::create_dir_all(dir)?;
        write_s2grid(&u, &dir.join("u.s2grid"))?;
    }
    let mut t = Table::new(&["iteration", "residual"]);
    t.rows = rep.history.iter().enumerate().map(|(i, r)| vec![i as f64, *r]).collect();
    report.tables.insert("newton_history".into(), t);
    report.check("newton_residual", false, a.tol - rep.residual, "tolerance - residual");
    let d = &mut report.diagnostics;
    d.insert("iterations".into(), rep.iterations as f64);
    d.insert("residual".into(), rep.residual);
    d.insert("min_shifted_eigenvalue".into(), rep.min_shifted_eigenvalue);
    d.insert("projections".into(), rep.projections as f64);
    d.insert("monotonicity_violations".into(), rep.monotonicity_violations as f64);
    if let Some(b) = rep.backend {
        report.notes.insert("backend".into(), format!("{b:?}"));
    }
    report.notes.insert("branch".into(), format!("{:?}", rep.branch));
    if a.boundary == BoundaryKind::Quadratic {
        let err = (0..u.len()).map(|i| (u.values()[i] - g(&u.point(i))).abs()).fold(0.0, f64::max);
        report.check("quadratic_reproduction", false, QUADRATIC_REPRODUCTION - err, "max |u - g|");
    }

    let img = transform_grid(&u, &cfg)?;
    if let Some(dir) = &a.grid_dir {
        write_s2grid(&img.w, &dir.join("w.s2grid"))?;
    }
    let field = superharmonicity_residual(&img, &cfg)?;
    report.check("proportionality", false, PROPORTIONALITY - field.proportionality_gap(), "matrix vs eigen assembly");
    let osc = hessian_oscillation(&img, 0.5);
    let d = &mut report.diagnostics;
    d.insert("kbar".into(), cfg.kbar);
    d.insert("valid_nodes".into(), img.valid.iter().filter(|v| **v).count() as f64);
    d.insert("evaluated_nodes".into(), field.evaluated() as f64);
    d.insert("positive_part_half".into(), field.positive_part(&img, 0.5));
    d.insert("positive_part_full".into(), field.positive_part(&img, 1.0));
    d.insert("most_negative_half".into(), field.most_negative(&img, 0.5));
    d.insert("hessian_osc_half".into(), osc);
    if a.boundary == BoundaryKind::Quadratic {
        let vals: Vec<f64> = field.a.iter().flatten().copied().collect();
        let spread = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max) - vals.iter().copied().fold(f64::INFINITY, f64::min);
        report.check("quadratic_constant_a", false, QUADRATIC_PIPELINE - spread, "max a - min a");
        report.check("quadratic_osc", false, OSC_QUADRATIC - osc, "Hessian oscillation of w");
    }
    Ok(())
}

pub fn experiment(a: &ExperimentArgs) -> Report {
    let config = json!({
        "n": a.n,
        "m": a.m,
        "extents": a.extents.iter().map(|v| num(*v)).collect::<Vec<_>>(),
        "k_semiconvex": num(a.k_semiconvex),
        "boundary": a.boundary.name(),
    });
    let mut report = Report::new("experiment", None, config);
    if a.boundary == BoundaryKind::BoxMode {
        report.errors.push("the scaling experiment needs boundary data that is fixed across box sizes".into());
        return report;
    }
    let g = boundary(a.boundary, a.n, 1.0);
    let mut table = Table::new(&["m", "extent", "osc", "iterations", "residual", "nodes"]);
    let mut tables: Vec<ScalingTable> = Vec::new();
    for &m in &a.m {
        match scaling_experiment(&*g, a.n, &a.extents, m, a.k_semiconvex) {
            Ok(t) => {
                for r in &t.rows {
                    table.rows.push(vec![m as f64, r.extent, r.osc, r.iterations as f64, r.residual, r.nodes as f64]);
                }
                for (r, msg) in &t.failures {
                    report.errors.push(format!("m = {m}, R = {r}: {msg}"));
                }
                if let Some(alpha) = t.alpha_hat {
                    report.diagnostics.insert(format!("alpha_hat_m{m}"), alpha);
                }
                tables.push(t);
            }
            Err(e) => {
                report.errors.push(format!("m = {m}: {e}"));
                return report;
            }
        }
    }
    report.tables.insert("scaling".into(), table);

    for (m, t) in a.m.iter().zip(&tables) {
        if a.boundary == BoundaryKind::Quadratic {
            let mut c = CheckStats::new(&format!("quadratic_osc_m{m}"), true, false);
            for (i, r) in t.rows.iter().enumerate() {
                c.record(OSC_QUADRATIC - r.osc, i as u64, || (vec![r.extent, r.osc], "osc".into()));
            }
            report.checks.push(c);
            continue;
        }
        if !t.failures.is_empty() {
            continue;
        }
        let mut c = CheckStats::new(&format!("osc_decreasing_m{m}"), true, true);
        for (i, w) in t.rows.windows(2).enumerate() {
            c.record((w[0].osc - w[1].osc) / w[0].osc, i as u64, || {
                (vec![w[0].extent, w[0].osc, w[1].extent, w[1].osc], "relative drop".into())
            });
        }
        report.checks.push(c);
        report.check(&format!("alpha_positive_m{m}"), true, t.alpha_hat.unwrap_or(f64::NAN), "fitted decay exponent");
    }
    if a.boundary != BoundaryKind::Quadratic {
        for (pair, ms) in tables.windows(2).zip(a.m.windows(2)) {
            let mut c = CheckStats::new(&format!("refinement_m{}_m{}", ms[0], ms[1]), true, false);
            for (i, (x, y)) in pair[0].rows.iter().zip(&pair[1].rows).enumerate() {
                let rel = (x.osc - y.osc).abs() / x.osc.max(y.osc);
                c.record(OSC_REFINEMENT - rel, i as u64, || (vec![x.extent, x.osc, y.osc], "relative gap".into()));
            }
            report.checks.push(c);
        }
    }
    report
}
