//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::process::Command;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use warpcheck::campaign;
use warpcheck::config::RunConfig;
use warpcheck::report::to_json;
use warpcheck::with_threads;
use warpcheck_core::catalog::{
    pde_residual_all, sol1, sol2_from, ImmersionCase, PdeSolution, QuadraticPerturbation,
};
use warpcheck_core::geometry::{
    christoffel_numeric, connection_closed_form, mixed_curvature_gap, ClosedFormVariant, FiberModel, GeometryError,
    MetricField,
};
use warpcheck_core::linalg::max_abs;
use warpcheck_core::submanifold::*;

const SEED: u64 = 20240611;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn points(case: &ImmersionCase, n: usize) -> Vec<Vec<f64>> {
    (0..n).into_par_iter().filter_map(|i| case.sample(SEED, i).point).collect()
}

fn base_cases() -> [ImmersionCase; 3] {
    [ImmersionCase::case1_reference(), ImmersionCase::case2_reference(), ImmersionCase::case3_reference()]
}

fn minimal_cases() -> Vec<ImmersionCase> {
    let mut v = base_cases().to_vec();
    v.extend([0.5, 1.0, 2.0].map(ImmersionCase::case4_corrected));
    v
}

fn name(case: &ImmersionCase) -> String {
    if case.tag == warpcheck_core::catalog::CaseTag::Case4Corrected {
        format!("{}(c={})", case.tag.name(), case.c)
    } else {
        case.tag.name().to_string()
    }
}

/// Worst `value / bound` over samples, with the bound `abs + rel·scale`.
fn worst_ratio(items: impl IntoIterator<Item = (f64, f64)>, abs: f64, rel: f64) -> f64 {
    items.into_iter().fold(0.0, |m, (v, s)| {
        let r = v.abs() / (abs + rel * s.abs());
        if r.is_nan() {
            f64::INFINITY
        } else {
            m.max(r)
        }
    })
}

fn isometry() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for case in base_cases() {
        let wp = case.build().unwrap();
        let start = Instant::now();
        let pts: Vec<Vec<f64>> = (0..1000).filter_map(|i| case.sample(SEED, i).point).collect();
        let mut worst: f64 = 0.0;
        for pt in &pts {
            worst = match wp.frame(pt).and_then(|fp| isometry_residual(&fp, &wp.chart)) {
                Ok(r) => worst.max(if r.value.is_nan() { f64::INFINITY } else { r.value }),
                Err(_) => f64::INFINITY,
            };
        }
        let elapsed = start.elapsed();
        let ok = pts.len() == 1000 && worst <= 1e-9 && elapsed < Duration::from_secs(5);
        pass &= ok;
        parts.push(format!("{} n={} max={worst:.2e} t={:.2}s", name(&case), pts.len(), elapsed.as_secs_f64()));
    }
    outcome(pass, parts.join("; "))
}

fn equality() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for case in base_cases() {
        let wp = case.build().unwrap();
        let pts = points(&case, 1000);
        let rows: Vec<Result<(f64, f64, f64), GeometryError>> = pts
            .par_iter()
            .map(|pt| {
                let fp = wp.frame(pt)?;
                let sff = second_ff(&fp);
                let (d, f) = (&wp.split.invariant, &wp.split.anti_invariant);
                let blocks = sigma_block_max(&sff, d, d).max(sigma_block_max(&sff, f, f));
                let grad = wp.chart.warp_at(pt)?.psi.grad_padded(pt.len());
                let out = inequality_check(&fp, &sff, &wp.split, &grad, FiberSign::SpaceLike);
                let gap = out.lhs - (out.rhs - out.nu_term);
                Ok((blocks, gap, out.lhs))
            })
            .collect();
        let Ok(rows) = rows.into_iter().collect::<Result<Vec<_>, _>>() else {
            pass = false;
            parts.push(format!("{}: frame error", name(&case)));
            continue;
        };
        let blocks = max_abs(rows.iter().map(|r| r.0));
        let ratio = worst_ratio(rows.iter().map(|r| (r.1, r.2)), 1e-9, 1e-9);
        pass &= blocks <= 1e-9 && ratio <= 1.0;
        parts.push(format!("{} sigma={blocks:.2e} gap/bound={ratio:.2e}", name(&case)));
    }
    outcome(pass, parts.join("; "))
}

fn minimality() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for case in minimal_cases() {
        let wp = case.build().unwrap();
        let worst = points(&case, 200)
            .par_iter()
            .map(|pt| match wp.frame(pt) {
                Ok(fp) => max_abs(mean_curvature(&fp, &second_ff(&fp)).iter().copied()),
                Err(_) => f64::INFINITY,
            })
            .reduce(|| 0.0, f64::max);
        pass &= worst <= 1e-9;
        parts.push(format!("{} |H|={worst:.2e}", name(&case)));
    }
    outcome(pass, parts.join("; "))
}

fn quasi_minimal_leaf() -> Outcome {
    let case = ImmersionCase::case3_reference();
    let wp = case.build().unwrap();
    let rows: Vec<(f64, f64)> = points(&case, 200)
        .par_iter()
        .map(|pt| {
            let leaf = wp.fiber_leaf(pt);
            match FramedPoint::new(&leaf, &leaf.leaf_point()) {
                Ok(fp) => {
                    let h = mean_curvature(&fp, &second_ff(&fp));
                    (fp.ambient().dot(&h, &h).abs(), max_abs(h.iter().copied()))
                }
                Err(_) => (f64::INFINITY, 0.0),
            }
        })
        .collect();
    let null = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let size = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    outcome(null <= 1e-10 && size >= 1e-3, format!("max|g(H,H)|={null:.2e} min|H|={size:.2e}"))
}

fn gradient_norm() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (case, k) in base_cases().into_iter().zip([1.0, -1.0, 0.0]) {
        let wp = case.build().unwrap();
        let pts = points(&case, 100);
        let worst = pts
            .par_iter()
            .map(|pt| match leaf_checks(&wp, pt) {
                Ok(r) => (r.grad_norm_value - k).abs(),
                Err(_) => f64::INFINITY,
            })
            .reduce(|| 0.0, f64::max);
        pass &= pts.len() == 100 && worst <= 1e-12;
        parts.push(format!("{} k={k} max|gap|={worst:.2e}", name(&case)));
    }
    outcome(pass, parts.join("; "))
}

fn pde_solutions() -> Outcome {
    let mut configs: Vec<(String, PdeSolution)> = Vec::new();
    for h in 1..=3 {
        let mut v = vec![0.0; 2 * h];
        v[0] = 1.0;
        configs.push((format!("sol1 h={h} v=e1"), sol1(v, 0.0, 0.0).unwrap()));
        let mut v: Vec<f64> = (0..2 * h).map(|i| 0.3 + 0.2 * i as f64).collect();
        v[h] = 0.0;
        configs.push((format!("sol1 h={h} general"), sol1(v, 0.4, -0.7).unwrap()));
        let a: Vec<f64> = (0..h).map(|i| if i == 0 { 0.0 } else { 1.0 }).collect();
        let b: Vec<f64> = (0..h).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect();
        let c = if h == 1 { 1.0 } else { 0.0 };
        configs.push((format!("sol2 h={h} default"), sol2_from(&a, &b, 1, c, 0.0).unwrap()));
        let a: Vec<f64> = (0..h).map(|i| if i == 0 { 0.0 } else { 0.5 * i as f64 }).collect();
        let b: Vec<f64> = (0..h).map(|i| 1.0 - 0.3 * i as f64).collect();
        configs.push((format!("sol2 h={h} eps=-1"), sol2_from(&a, &b, -1, 0.6, -0.2).unwrap()));
    }
    let mut pass = true;
    let mut worst_all: f64 = 0.0;
    for (label, sol) in &configs {
        let h = sol.h();
        let z: Vec<Vec<f64>> = (0..500).into_par_iter().filter_map(|i| sol.sample(SEED, i).point).collect();
        let ratio = worst_ratio(
            z.par_iter()
                .map(|z| match sol.psi_at(z) {
                    Ok(psi) => pde_residual_all(&psi, h),
                    Err(_) => (f64::INFINITY, 0.0),
                })
                .collect::<Vec<_>>(),
            1e-10,
            1e-10,
        );
        if z.len() != 500 || ratio > 1.0 {
            pass = false;
            eprintln!("  {label}: n={} residual/bound={ratio:.2e}", z.len());
        }
        worst_all = worst_all.max(ratio);
    }
    outcome(pass, format!("{} configurations x 500 points, worst residual/bound={worst_all:.2e}", configs.len()))
}

fn connection_xcheck() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let kinds = [
        (FiberModel::Sphere, ImmersionCase::case1_reference()),
        (FiberModel::Hyperbolic, ImmersionCase::case2_reference()),
        (FiberModel::Flat, ImmersionCase::case3_reference()),
    ];
    for (model, case) in kinds {
        let wp = case.build().unwrap();
        let rows: Vec<((f64, f64), (f64, f64))> = points(&case, 100)
            .par_iter()
            .map(|pt| {
                let conn = match (
                    connection_closed_form(&wp.chart, pt, ClosedFormVariant::Standard),
                    christoffel_numeric(&wp.chart, pt),
                ) {
                    (Ok(a), Ok(b)) => (a.max_abs_diff(&b), b.max_abs()),
                    _ => (f64::INFINITY, 0.0),
                };
                let curv = mixed_curvature_gap(&wp.chart, pt).unwrap_or((f64::INFINITY, 0.0));
                (conn, curv)
            })
            .collect();
        let c = worst_ratio(rows.iter().map(|r| r.0), 1e-9, 1e-9);
        let k = worst_ratio(rows.iter().map(|r| r.1), 1e-8, 1e-8);
        pass &= c <= 1.0 && k <= 1.0;
        parts.push(format!("{model:?} connection/bound={c:.2e} curvature/bound={k:.2e}"));
    }
    outcome(pass, parts.join("; "))
}

fn structure_identities() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for case in minimal_cases() {
        let wp = case.build().unwrap();
        let rows: Vec<[Residual; 4]> = points(&case, 200)
            .par_iter()
            .map(|pt| {
                let bad = Residual::new(f64::INFINITY, 0.0);
                let Ok(fp) = wp.frame(pt) else { return [bad; 4] };
                let sff = second_ff(&fp);
                let g = wp.chart.metric_at(pt).unwrap();
                let conn = connection_closed_form(&wp.chart, pt, ClosedFormVariant::Standard).unwrap();
                let l = shape_operator_check(&fp, &sff, &wp.split, &conn, &g);
                let mu: Vec<f64> = wp.chart.warp_at(pt).unwrap().psi.grad_padded(pt.len()).iter().map(|x| -x).collect();
                let ch = warped_characterization_check(&fp, &sff, &wp.split, &mu);
                [check_fp_zero(&fp), l.a, l.b_symmetry.max(l.b_nu), ch]
            })
            .collect();
        let ratios: Vec<f64> =
            (0..4).map(|k| worst_ratio(rows.iter().map(|r| (r[k].value, r[k].scale)), 1e-9, 1e-9)).collect();
        pass &= ratios.iter().all(|&r| r <= 1.0);
        parts.push(format!(
            "{} fp={:.1e} shape_a={:.1e} shape_b={:.1e} char={:.1e}",
            name(&case),
            ratios[0],
            ratios[1],
            ratios[2],
            ratios[3]
        ));
    }
    outcome(pass, format!("residual/bound: {}", parts.join("; ")))
}

fn gauss_codazzi() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for case in minimal_cases() {
        let wp = case.build().unwrap();
        let rows: Vec<(Residual, Residual)> = points(&case, 50)
            .par_iter()
            .map(|pt| {
                let bad = Residual::new(f64::INFINITY, 0.0);
                let Ok(fp) = wp.frame(pt) else { return (bad, bad) };
                let sff = second_ff(&fp);
                let gauss = gauss_residual(&fp, &sff, &wp.chart).unwrap_or(bad);
                let w = wp.chart.warp_at(pt).unwrap().f_squared;
                let grad = w.grad().iter().map(|x| x * x).sum::<f64>().sqrt();
                let step = warpcheck::checks::CODAZZI_STEP * (w.value() / grad).min(1.0);
                (gauss, codazzi_residual(wp.immersion.as_ref(), pt, step).unwrap_or(bad))
            })
            .collect();
        let g = worst_ratio(rows.iter().map(|r| (r.0.value, r.0.scale)), 1e-8, 1e-8);
        let c = worst_ratio(rows.iter().map(|r| (r.1.value, r.1.scale)), 1e-7, 1e-7);
        pass &= g <= 1.0 && c <= 1.0;
        parts.push(format!("{} gauss={g:.1e} codazzi={c:.1e}", name(&case)));
    }
    outcome(pass, format!("residual/bound: {}", parts.join("; ")))
}

fn negative_controls() -> Outcome {
    let printed = ImmersionCase::case4_printed_reference();
    let wp = printed.build().unwrap();
    let pts = points(&printed, 200);
    let degenerate = pts
        .iter()
        .filter(|pt| matches!(wp.frame(pt), Err(GeometryError::Degenerate(d)) if d.det.abs() <= 1e-12))
        .count();

    let case = ImmersionCase::case1_reference();
    let wp = case.build().unwrap();
    let pert = QuadraticPerturbation::new(wp.immersion.clone(), 0.1, SEED);
    let mut fp_worst: f64 = 0.0;
    let mut margin_worst: f64 = 0.0;
    for pt in points(&case, 100) {
        let Ok(fp) = FramedPoint::new(&pert, &pt) else { continue };
        let sff = second_ff(&fp);
        fp_worst = fp_worst.max(check_fp_zero(&fp).value);
        let grad = wp.chart.warp_at(&pt).unwrap().psi.grad_padded(pt.len());
        let out = inequality_check(&fp, &sff, &wp.split, &grad, FiberSign::SpaceLike);
        let bound = 1e-9 * (1.0 + out.lhs.abs());
        margin_worst = margin_worst.max(out.margin.abs() - bound);
    }
    let pass = !pts.is_empty() && degenerate == pts.len() && fp_worst > 1e-3 && margin_worst > 0.0;
    outcome(
        pass,
        format!(
            "printed case 4 degenerate {degenerate}/{}; perturbed case 1 fp={fp_worst:.2e} equality violation={margin_worst:.2e}",
            pts.len()
        ),
    )
}

fn determinism() -> Outcome {
    let cfg = RunConfig {
        case: Some(warpcheck_core::catalog::CaseTag::Case2),
        samples: Some(64),
        seed: Some(SEED),
        ..Default::default()
    };
    let lib: Vec<String> = [Some(1), Some(4), None]
        .into_iter()
        .map(|t| to_json(&with_threads(t, || campaign::verify(&cfg)).unwrap().unwrap()))
        .collect();
    let lib_same = lib.windows(2).all(|w| w[0] == w[1]);

    let bin = env!("CARGO_BIN_EXE_warpcheck");
    let run = |threads: &str| {
        Command::new(bin)
            .args(["verify", "--case", "case3", "--samples", "48", "--seed", "11"])
            .env("WARPCHECK_THREADS", threads)
            .output()
            .map(|o| (o.status.code(), o.stdout))
    };
    let runs: Vec<_> = ["1", "3", "1"].into_iter().map(run).collect();
    let bin_same = runs.iter().all(|r| matches!(r, Ok((Some(0), _))))
        && runs.windows(2).all(|w| w[0].as_ref().ok().map(|r| &r.1) == w[1].as_ref().ok().map(|r| &r.1));
    outcome(lib_same && bin_same, format!("library across 1/4/default threads identical={lib_same}; binary across WARPCHECK_THREADS=1/3/1 identical={bin_same}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("isometry of cases 1-3", isometry),
        ("equality case", equality),
        ("minimality", minimality),
        ("quasi-minimal flat fiber leaf", quasi_minimal_leaf),
        ("gradient norm equals fiber curvature", gradient_norm),
        ("exact PDE solutions", pde_solutions),
        ("connection and curvature cross-check", connection_xcheck),
        ("structure identities", structure_identities),
        ("Gauss and Codazzi", gauss_codazzi),
        ("negative controls", negative_controls),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (title, f)) in criteria.iter().enumerate() {
        let out = f();
        let tag = if out.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} [{tag}] {title}: {}", i + 1, out.detail);
        failed += usize::from(!out.pass);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
