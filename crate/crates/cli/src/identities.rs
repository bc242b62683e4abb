//! Deterministic battery of closed-form values and reproducible findings.

use std::sync::Arc;

use warpcheck_core::catalog::{
    immerse, paracomplex_form, sol1, sol2_from, warp, ImmersionCase, WarpData, WarpForm,
};
use warpcheck_core::geometry::{
    christoffel_numeric, connection_closed_form, riemann, ClosedFormVariant, Fiber, FiberModel, GeometryError,
    MetricField, WarpedChart,
};
use warpcheck_core::paracomplex::{pseudo_dot, J};
use warpcheck_core::submanifold::{pullback_metric, FramedPoint, WarpedProduct};

use crate::report::{IdentitiesReport, IdentityRow, ENGINE};

#[derive(Debug, Clone, Copy)]
enum Relation {
    Equal(f64),
    Above,
}

fn row(name: &str, description: &str, value: f64, expected: f64, relation: Relation) -> IdentityRow {
    let (tolerance, pass) = match relation {
        Relation::Equal(tol) => (tol, (value - expected).abs() <= tol),
        Relation::Above => (0.0, value > expected),
    };
    IdentityRow { name: name.into(), description: description.into(), value, expected, tolerance, pass }
}

fn failed(name: &str, e: impl std::fmt::Display) -> IdentityRow {
    IdentityRow {
        name: name.into(),
        description: format!("evaluation failed: {e}"),
        value: f64::NAN,
        expected: 0.0,
        tolerance: 0.0,
        pass: false,
    }
}

fn flat_chart_f2_quadratic() -> WarpedChart {
    let warp = WarpData { a: vec![1.0], b: vec![0.0], form: WarpForm::Quadratic };
    WarpedChart::new(1, Fiber::new(FiberModel::Flat, 1), Arc::new(warp))
}

fn hyperbolic_chart() -> WarpedChart {
    let warp = WarpData { a: vec![1.0], b: vec![0.0], form: WarpForm::Quadratic };
    WarpedChart::new(1, Fiber::new(FiberModel::Hyperbolic, 2), Arc::new(warp))
}

fn sectional(model: FiberModel, pt: &[f64]) -> Result<f64, GeometryError> {
    let fiber = Fiber::new(model, 2);
    let r = riemann(&fiber, pt)?;
    Ok(r.sectional(&fiber.metric_at(pt)?, 0, 1))
}

fn case1_packaging() -> Result<(f64, f64), String> {
    let case = ImmersionCase::case1_reference();
    let pt = [1.0, 0.2, 0.1, 0.3, 0.6, -0.4];
    let a = immerse(&case, &pt).map_err(|e| e.to_string())?;
    let b = paracomplex_form(&case, &pt).map_err(|e| e.to_string())?;
    let m = 4;
    let mut printed: f64 = 0.0;
    let mut flipped: f64 = 0.0;
    for i in 0..2 {
        for (k, z) in [(i, pt[i]), (m + i, pt[2 + i])] {
            printed = printed.max((a[k] - b[k]).abs());
            flipped = flipped.max(((a[k] - z) + (b[k] - z)).abs());
        }
    }
    Ok((printed, flipped))
}

fn printed_case4_det() -> Result<f64, String> {
    let case = ImmersionCase::case4_printed_reference();
    let wp = case.build().map_err(|e| e.to_string())?;
    match wp.frame(&[2.0, 1.0, 0.5]) {
        Err(GeometryError::Degenerate(d)) => Ok(d.det.abs()),
        Err(e) => Err(e.to_string()),
        Ok(fp) => Ok(fp.gram_det().abs()),
    }
}

fn corrected_case4() -> Result<(f64, f64), String> {
    let wp: WarpedProduct = ImmersionCase::case4_corrected(0.5).build().map_err(|e| e.to_string())?;
    let fp = FramedPoint::new(wp.immersion.as_ref(), &[2.0, 1.0, 0.7]).map_err(|e| e.to_string())?;
    let g = pullback_metric(&fp);
    let target = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, 1.0, 1.0]));
    let metric_gap = (g - target).abs().max();
    let uu = fp.second_partial(2, 2);
    let half = (fp.frame_vector(0) + fp.frame_vector(1)) * 0.5;
    Ok((metric_gap, (uu - half).abs().max()))
}

pub fn identities() -> IdentitiesReport {
    let mut rows = Vec::new();
    let jj = J * J;
    rows.push(row("j_squared", "j * j = 1", jj.re + jj.jm.abs(), 1.0, Relation::Equal(0.0)));

    let v = ImmersionCase::case1_reference().v();
    match pseudo_dot(&v, &v) {
        Ok(n) => rows.push(row("case1_unit_vector", "<v,v> = 1 for the case 1 reference vector", n, 1.0, Relation::Equal(1e-15))),
        Err(e) => rows.push(failed("case1_unit_vector", e)),
    }

    let f2 = ImmersionCase::case1_reference().warp_data().f_squared(&[1.0, 0.2, 0.1, 0.3]);
    rows.push(row("case1_regression_f2", "f^2 of case 1 at (1, 0.2, 0.1, 0.3)", f2, 1.881960, Relation::Equal(5e-7)));

    match warp(&ImmersionCase::case2_reference(), &[2.0, 1.0]) {
        Ok(w) => rows.push(row("case2_psi", "ln f of case 2 at (2, 1) is ln(3)/2", w.psi.value(), 0.5 * 3f64.ln(), Relation::Equal(1e-15))),
        Err(e) => rows.push(failed("case2_psi", e)),
    }

    match sol1(vec![1.0, 0.0], 0.0, 0.0).and_then(|s| s.psi_at(&[2.0, 1.0])) {
        Ok(psi) => {
            let r = warpcheck_core::catalog::pde_residual(&psi, 1, 0, 0);
            let worst = r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            rows.push(row("sol1_residual", "first solution family solves the system at (2, 1)", worst, 0.0, Relation::Equal(1e-15)));
        }
        Err(e) => rows.push(failed("sol1_residual", e)),
    }
    match sol2_from(&[0.0, 1.0], &[1.0, 0.0], 1, 0.0, 0.0).and_then(|s| s.psi_at(&[1.0, 2.0, 0.5, 0.25])) {
        Ok(psi) => rows.push(row("sol2_value", "second family value ln(1.125)/2", psi.value(), 0.5 * 1.125f64.ln(), Relation::Equal(1e-15))),
        Err(e) => rows.push(failed("sol2_value", e)),
    }

    match christoffel_numeric(&flat_chart_f2_quadratic(), &[2.0, 1.0, 0.4]) {
        Ok(g) => rows.push(row("warped_christoffel", "Gamma^u_{su} = 2/3 for f^2 = s^2 - t^2 at (2, 1)", g.get(2, 0, 2), 2.0 / 3.0, Relation::Equal(1e-15))),
        Err(e) => rows.push(failed("warped_christoffel", e)),
    }

    for (name, model, pt, k) in [
        ("sphere_sectional", FiberModel::Sphere, [0.3, -0.8], 1.0),
        ("hyperbolic_sectional", FiberModel::Hyperbolic, [0.7, 0.2], -1.0),
    ] {
        match sectional(model, &pt) {
            Ok(s) => rows.push(row(name, "sectional curvature of the fiber chart", s, k, Relation::Equal(1e-12))),
            Err(e) => rows.push(failed(name, e)),
        }
    }

    let chart = hyperbolic_chart();
    let pt = [2.0, 1.0, 0.8, 0.3];
    match (
        connection_closed_form(&chart, &pt, ClosedFormVariant::Standard),
        connection_closed_form(&chart, &pt, ClosedFormVariant::WithExtraFirstTerm),
        christoffel_numeric(&chart, &pt),
    ) {
        (Ok(std), Ok(extra), Ok(num)) => {
            rows.push(row("hyperbolic_connection", "closed-form hyperbolic fiber connection matches the numeric one", std.max_abs_diff(&num), 0.0, Relation::Equal(1e-13)));
            rows.push(row(
                "hyperbolic_extra_term",
                "finding: an added sin(u0)cos(u0) term in Gamma^0_{aa} is off by exactly that amount",
                extra.max_abs_diff(&num),
                0.8f64.sin() * 0.8f64.cos(),
                Relation::Equal(1e-13),
            ));
        }
        (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => rows.push(failed("hyperbolic_connection", e)),
    }

    match case1_packaging() {
        Ok((printed, flipped)) => {
            rows.push(row("case1_packaging_printed", "finding: the para-complex case 1 form with +conj(v) differs from the real form", printed, 1e-3, Relation::Above));
            rows.push(row("case1_packaging_flipped", "the para-complex case 1 form with -conj(v) equals the real form", flipped, 0.0, Relation::Equal(1e-14)));
        }
        Err(e) => rows.push(failed("case1_packaging", e)),
    }

    match printed_case4_det() {
        Ok(d) => rows.push(row("case4_printed_det", "finding: the printed case 4 induces a degenerate metric", d, 0.0, Relation::Equal(1e-12))),
        Err(e) => rows.push(failed("case4_printed_det", e)),
    }

    match corrected_case4() {
        Ok((metric, uu)) => {
            rows.push(row("case4_corrected_metric", "corrected case 4 pullback at (2, 1, u) is diag(-1, 1, 1)", metric, 0.0, Relation::Equal(1e-14)));
            rows.push(row("case4_corrected_uu", "corrected case 4 satisfies d2/du2 = (d/ds + d/dt)/2", uu, 0.0, Relation::Equal(1e-14)));
        }
        Err(e) => rows.push(failed("case4_corrected", e)),
    }

    let pass = rows.iter().all(|r| r.pass);
    IdentitiesReport { engine: ENGINE, command: "identities", rows, pass }
}

#[cfg(test)]
mod tests {
    #[test]
    fn battery_passes() {
        let r = super::identities();
        for row in &r.rows {
            assert!(row.pass, "{row:?}");
        }
    }
}
