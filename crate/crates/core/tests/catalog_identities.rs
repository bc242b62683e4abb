//! Geometric identities of the catalog immersions at seeded domain points.

use std::sync::Arc;

use warpcheck_core::catalog::{
    pde_residual_all, solution_for, warp_matches_solution, ImmersionCase, QuadraticPerturbation,
    Reembedded,
};
use warpcheck_core::geometry::{
    connection_closed_form, christoffel_numeric, mixed_curvature_gap, Ambient, ClosedFormVariant, GeometryError,
    MetricField,
};
use warpcheck_core::jets::Jet2;
use warpcheck_core::linalg::max_abs;
use warpcheck_core::submanifold::*;

const SAMPLES: usize = 60;
const SEED: u64 = 2024;

fn equality_cases() -> Vec<ImmersionCase> {
    vec![
        ImmersionCase::case1_reference(),
        ImmersionCase::case2_reference(),
        ImmersionCase::case3_reference(),
        ImmersionCase::case4_corrected(0.5),
        ImmersionCase::case4_corrected(1.0),
        ImmersionCase::case4_corrected(2.0),
    ]
}

fn points(case: &ImmersionCase, n: usize) -> Vec<Vec<f64>> {
    (0..n).filter_map(|i| case.sample(SEED, i).point).collect()
}

fn ok(r: Residual, abs: f64, rel: f64) -> bool {
    r.within(Tolerance::new(abs, rel))
}

#[test]
fn pullback_matches_warped_metric() {
    for case in equality_cases() {
        let wp = case.build().unwrap();
        for pt in points(&case, SAMPLES) {
            let fp = wp.frame(&pt).unwrap();
            let r = isometry_residual(&fp, &wp.chart).unwrap();
            assert!(ok(r, 1e-9, 0.0), "{:?} at {pt:?}: {r:?}", case.tag);
        }
    }
}

#[test]
fn equality_case_holds() {
    for case in equality_cases() {
        let wp = case.build().unwrap();
        for pt in points(&case, SAMPLES) {
            let fp = wp.frame(&pt).unwrap();
            let sff = second_ff(&fp);
            let (d, dp) = (&wp.split.invariant, &wp.split.anti_invariant);
            assert!(sigma_block_max(&sff, d, d) <= 1e-9);
            assert!(sigma_block_max(&sff, dp, dp) <= 1e-9);
            let grad = wp.chart.warp_at(&pt).unwrap().psi.grad_padded(pt.len());
            let out = inequality_check(&fp, &sff, &wp.split, &grad, FiberSign::SpaceLike);
            assert_eq!(out.nu_term, 0.0);
            assert!(out.margin.abs() <= 1e-9 * (1.0 + out.lhs.abs()), "{:?}: {out:?}", case.tag);
            let mc = mean_curvature(&fp, &sff);
            assert!(is_minimal(&mc, 1e-9));
        }
    }
}

#[test]
fn structure_identities() {
    for case in equality_cases() {
        let wp = case.build().unwrap();
        for pt in points(&case, SAMPLES) {
            let fp = wp.frame(&pt).unwrap();
            let sff = second_ff(&fp);
            assert!(ok(check_fp_zero(&fp), 1e-9, 1e-9));
            let (inv, anti) = wp.split.residuals(&fp);
            assert!(inv <= 1e-9 && anti <= 1e-9, "{inv} {anti}");
            let g = wp.chart.metric_at(&pt).unwrap();
            let conn = connection_closed_form(&wp.chart, &pt, ClosedFormVariant::Standard).unwrap();
            let l = shape_operator_check(&fp, &sff, &wp.split, &conn, &g);
            for r in [l.a, l.b_symmetry, l.b_nu] {
                assert!(ok(r, 1e-9, 1e-9), "{:?}: {l:?}", case.tag);
            }
            let mu: Vec<f64> = wp.chart.warp_at(&pt).unwrap().psi.grad_padded(pt.len()).iter().map(|x| -x).collect();
            let r = warped_characterization_check(&fp, &sff, &wp.split, &mu);
            assert!(ok(r, 1e-9, 1e-9), "{:?}: {r:?}", case.tag);
            let split = split_checks(&fp, &sff, &wp.split);
            assert!(ok(split.integrability, 1e-9, 1e-9), "{:?}: {split:?}", case.tag);
            assert!(ok(split.invariant_pairing, 1e-9, 1e-9));
        }
    }
}

#[test]
fn characterization_rejects_plus_log_f() {
    let case = ImmersionCase::case1_reference();
    let wp = case.build().unwrap();
    let pt = points(&case, 1).remove(0);
    let fp = wp.frame(&pt).unwrap();
    let sff = second_ff(&fp);
    let plus = wp.chart.warp_at(&pt).unwrap().psi.grad_padded(pt.len());
    let r = warped_characterization_check(&fp, &sff, &wp.split, &plus);
    assert!(r.value > 1e-3);
}

#[test]
fn gauss_and_codazzi() {
    for case in equality_cases() {
        let wp = case.build().unwrap();
        for pt in points(&case, 20) {
            let fp = wp.frame(&pt).unwrap();
            let sff = second_ff(&fp);
            let r = gauss_residual(&fp, &sff, &wp.chart).unwrap();
            assert!(ok(r, 1e-8, 1e-8), "{:?}: {r:?}", case.tag);
            let w = wp.chart.warp_at(&pt).unwrap().f_squared;
            let step = 1e-3 * (w.value() / w.grad().iter().map(|x| x * x).sum::<f64>().sqrt()).min(1.0);
            let c = codazzi_residual(wp.immersion.as_ref(), &pt, step).unwrap();
            assert!(ok(c, 1e-7, 1e-7), "{:?}: {c:?}", case.tag);
        }
    }
}

#[test]
fn leaves_and_gradient_norm() {
    let expected = [1.0, -1.0, 0.0];
    let cases = [ImmersionCase::case1_reference(), ImmersionCase::case2_reference(), ImmersionCase::case3_reference()];
    for (case, k) in cases.iter().zip(expected) {
        let wp = case.build().unwrap();
        for pt in points(case, SAMPLES) {
            let r = leaf_checks(&wp, &pt).unwrap();
            assert!((r.grad_norm_value - k).abs() <= 1e-12, "{:?}: {r:?}", case.tag);
            assert!(ok(r.base_leaf_geodesic, 1e-9, 1e-9));
            assert!(ok(r.fiber_leaf_umbilic, 1e-9, 1e-9));
        }
    }
}

#[test]
fn flat_fiber_leaf_is_quasi_minimal() {
    let case = ImmersionCase::case3_reference();
    let wp = case.build().unwrap();
    for pt in points(&case, SAMPLES) {
        let leaf = wp.fiber_leaf(&pt);
        let fp = FramedPoint::new(&leaf, &leaf.leaf_point()).unwrap();
        let h = mean_curvature(&fp, &second_ff(&fp));
        assert!(fp.ambient().dot(&h, &h).abs() <= 1e-10);
        assert!(max_abs(h.iter().copied()) >= 1e-3);
        assert!(is_quasi_minimal(&h, fp.ambient(), 1e-10));
    }
}

#[test]
fn closed_form_connection_and_curvature() {
    for case in equality_cases() {
        let wp = case.build().unwrap();
        for pt in points(&case, 20) {
            let a = connection_closed_form(&wp.chart, &pt, ClosedFormVariant::Standard).unwrap();
            let b = christoffel_numeric(&wp.chart, &pt).unwrap();
            assert!(a.max_abs_diff(&b) <= 1e-9 * (1.0 + b.max_abs()));
            let (gap, scale) = mixed_curvature_gap(&wp.chart, &pt).unwrap();
            assert!(gap <= 1e-8 * (1.0 + scale), "{gap} {scale}");
        }
    }
}

#[test]
fn warping_functions_solve_the_pde() {
    for case in equality_cases() {
        let sol = solution_for(&case).unwrap();
        assert!(warp_matches_solution(&case, 50, SEED).unwrap() <= 1e-12);
        for pt in points(&case, 50) {
            let psi = case.build().unwrap().chart.warp_at(&pt).unwrap().psi;
            let z = &pt[..2 * case.h];
            let sub = sol.psi_at(z).unwrap();
            let (r, s) = pde_residual_all(&sub, case.h);
            assert!(r <= 1e-10 * (1.0 + s));
            assert!((psi.value() - sub.value()).abs() <= 1e-12);
        }
    }
}

#[test]
fn printed_case4_is_degenerate() {
    let case = ImmersionCase::case4_printed_reference();
    let wp = case.build().unwrap();
    for pt in points(&case, 100) {
        match wp.frame(&pt) {
            Err(GeometryError::Degenerate(d)) => assert!(d.det.abs() <= 1e-12),
            other => panic!("expected a degenerate metric, got {:?}", other.map(|f| f.gram_det())),
        }
    }
}

#[test]
fn perturbation_breaks_the_identities() {
    let case = ImmersionCase::case1_reference();
    let wp = case.build().unwrap();
    let pert = QuadraticPerturbation::new(wp.immersion.clone(), 0.1, 99);
    let mut fp_worst: f64 = 0.0;
    let mut margin_worst: f64 = 0.0;
    for pt in points(&case, 20) {
        let fp = FramedPoint::new(&pert, &pt).unwrap();
        let sff = second_ff(&fp);
        fp_worst = fp_worst.max(check_fp_zero(&fp).value);
        let grad = wp.chart.warp_at(&pt).unwrap().psi.grad_padded(pt.len());
        margin_worst = margin_worst.max(inequality_check(&fp, &sff, &wp.split, &grad, FiberSign::SpaceLike).margin.abs());
    }
    assert!(fp_worst > 1e-3);
    assert!(margin_worst > 1e-6);
}

#[test]
fn reembedding_is_harmless() {
    let case = ImmersionCase::case3_reference();
    let wp = case.build().unwrap();
    let big = Reembedded::new(wp.immersion.clone(), 2);
    for pt in points(&case, 10) {
        let fp = FramedPoint::new(&big, &pt).unwrap();
        let sff = second_ff(&fp);
        assert!(ok(isometry_residual(&fp, &wp.chart).unwrap(), 1e-9, 0.0));
        assert!(ok(check_fp_zero(&fp), 1e-9, 1e-9));
        let grad = wp.chart.warp_at(&pt).unwrap().psi.grad_padded(pt.len());
        let out = inequality_check(&fp, &sff, &wp.split, &grad, FiberSign::SpaceLike);
        assert_eq!(nu_spanning_set(&fp, &wp.split).1, 4);
        assert!(out.nu_term.abs() <= 1e-9);
        assert!(out.margin.abs() <= 1e-9 * (1.0 + out.lhs.abs()));
    }
}

/// `(x, y) ↦ (y, x)`: an anti-isometry of the ambient that commutes with the
/// structure, so the fiber becomes time-like.
struct Swapped(Arc<dyn Immersion>);

impl Immersion for Swapped {
    fn chart_dim(&self) -> usize {
        self.0.chart_dim()
    }
    fn ambient(&self) -> Ambient {
        self.0.ambient()
    }
    fn map(&self, xi: &[Jet2]) -> Result<Vec<Jet2>, GeometryError> {
        let v = self.0.map(xi)?;
        let m = v.len() / 2;
        Ok(v[m..].iter().chain(&v[..m]).cloned().collect())
    }
}

#[test]
fn time_like_fiber_keeps_the_equality() {
    let case = ImmersionCase::case1_reference();
    let wp = case.build().unwrap();
    let sw = Swapped(wp.immersion.clone());
    for pt in points(&case, 10) {
        let fp = FramedPoint::new(&sw, &pt).unwrap();
        let g = wp.chart.metric_at(&pt).unwrap();
        assert!((fp.gram() + &g).abs().max() <= 1e-9);
        let sff = second_ff(&fp);
        let grad = wp.chart.warp_at(&pt).unwrap().psi.grad_padded(pt.len());
        let space = inequality_check(&frame_of(&wp, &pt), &second_ff(&frame_of(&wp, &pt)), &wp.split, &grad, FiberSign::SpaceLike);
        let time = inequality_check(&fp, &sff, &wp.split, &grad, FiberSign::TimeLike);
        assert!((time.lhs + space.lhs).abs() <= 1e-9 * (1.0 + space.lhs.abs()));
        assert!(time.margin.abs() <= 1e-9 * (1.0 + time.lhs.abs()));
    }
}

fn frame_of(wp: &WarpedProduct, pt: &[f64]) -> FramedPoint {
    wp.frame(pt).unwrap()
}
