//! Named checks and their per-sample evaluation.

use warpcheck_core::catalog::{pde_residual_all, CaseTag, ImmersionCase};
use warpcheck_core::geometry::{
    christoffel_numeric, connection_closed_form, mixed_curvature_gap, ClosedFormVariant, GeometryError, MetricField,
};
use warpcheck_core::linalg::max_abs;
use warpcheck_core::submanifold::*;

/// Fiber-leaf mean curvature must stay at least this large for the leaf to
/// count as quasi-minimal rather than minimal.
pub const QUASI_MINIMAL_FLOOR: f64 = 1e-3;

/// Base finite-difference step for the Codazzi check, shrunk near the
/// domain boundary.
pub const CODAZZI_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CheckKind {
    Isometry,
    FpZero,
    ShapeOperator,
    Characterization,
    SigmaBlocks,
    Inequality,
    Equality,
    Minimality,
    QuasiMinimalLeaf,
    Pde,
    ChristoffelXcheck,
    CurvatureXcheck,
    GaussCodazzi,
    Leaves,
}

/// One reported quantity of a check.
#[derive(Debug, Clone, Copy)]
pub struct RowSpec {
    pub name: &'static str,
    pub tol: Tolerance,
}

const fn row(name: &'static str, abs: f64, rel: f64) -> RowSpec {
    RowSpec { name, tol: Tolerance { abs, rel } }
}

const ISOMETRY: &[RowSpec] = &[row("isometry", 1e-9, 0.0)];
const FP_ZERO: &[RowSpec] = &[row("fp_zero", 1e-9, 1e-9)];
const SHAPE_OPERATOR: &[RowSpec] = &[row("lemma33", 1e-9, 1e-9)];
const CHARACTERIZATION: &[RowSpec] = &[row("characterization", 1e-9, 1e-9)];
const SIGMA_BLOCKS: &[RowSpec] = &[row("sigma_blocks", 1e-10, 1e-10)];
const INEQUALITY: &[RowSpec] = &[row("inequality", 1e-9, 1e-9)];
const EQUALITY: &[RowSpec] = &[
    row("equality.sigma_dd", 1e-9, 0.0),
    row("equality.sigma_fiber", 1e-9, 0.0),
    row("equality.margin", 1e-9, 1e-9),
];
const MINIMALITY: &[RowSpec] = &[row("minimality", 1e-9, 0.0)];
const QUASI_MINIMAL: &[RowSpec] = &[row("quasi_minimal_leaf", 1e-10, 0.0)];
const PDE: &[RowSpec] = &[row("pde", 1e-10, 1e-10)];
const CHRISTOFFEL: &[RowSpec] = &[row("christoffel_xcheck", 1e-9, 1e-9)];
const CURVATURE: &[RowSpec] = &[row("curvature_xcheck", 1e-8, 1e-8)];
const GAUSS_CODAZZI: &[RowSpec] = &[row("gauss", 1e-8, 1e-8), row("codazzi", 1e-7, 1e-7)];
const LEAVES: &[RowSpec] = &[
    row("prop61.grad_norm", 1e-12, 0.0),
    row("prop61.base_leaf", 1e-9, 1e-9),
    row("prop61.fiber_leaf", 1e-9, 1e-9),
];

impl CheckKind {
    pub const ALL: [CheckKind; 14] = [
        CheckKind::Isometry,
        CheckKind::FpZero,
        CheckKind::ShapeOperator,
        CheckKind::Characterization,
        CheckKind::SigmaBlocks,
        CheckKind::Inequality,
        CheckKind::Equality,
        CheckKind::Minimality,
        CheckKind::QuasiMinimalLeaf,
        CheckKind::Pde,
        CheckKind::ChristoffelXcheck,
        CheckKind::CurvatureXcheck,
        CheckKind::GaussCodazzi,
        CheckKind::Leaves,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Isometry => "isometry",
            CheckKind::FpZero => "fp_zero",
            CheckKind::ShapeOperator => "lemma33",
            CheckKind::Characterization => "characterization",
            CheckKind::SigmaBlocks => "sigma_blocks",
            CheckKind::Inequality => "inequality",
            CheckKind::Equality => "equality",
            CheckKind::Minimality => "minimality",
            CheckKind::QuasiMinimalLeaf => "quasi_minimal_leaf",
            CheckKind::Pde => "pde",
            CheckKind::ChristoffelXcheck => "christoffel_xcheck",
            CheckKind::CurvatureXcheck => "curvature_xcheck",
            CheckKind::GaussCodazzi => "gauss_codazzi",
            CheckKind::Leaves => "prop61",
        }
    }

    pub fn parse(s: &str) -> Option<CheckKind> {
        CheckKind::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn description(self) -> &'static str {
        match self {
            CheckKind::Isometry => "pullback of the ambient metric equals the warped metric",
            CheckKind::FpZero => "FP = 0: the normal part of P vanishes on the invariant distribution",
            CheckKind::ShapeOperator => "shape operator identities for A_{FZ} and for normals in nu",
            CheckKind::Characterization => "A_{FZ}X = PX(mu) Z with mu = -ln f, and W(mu) = 0 on the fiber",
            CheckKind::SigmaBlocks => "S_sigma = S_DD + 2 S_DD' + S_D'D'",
            CheckKind::Inequality => "S_sigma <= 2p |grad ln f|^2 + |sigma_nu(D,D)|^2",
            CheckKind::Equality => "sigma(D,D) = sigma(D',D') = 0 and equality in the inequality",
            CheckKind::Minimality => "mean curvature vector vanishes",
            CheckKind::QuasiMinimalLeaf => "flat fiber leaf has a light-like, nonzero mean curvature",
            CheckKind::Pde => "ln f solves the warping PDE system",
            CheckKind::ChristoffelXcheck => "closed-form warped connection against the numeric Levi-Civita formula",
            CheckKind::CurvatureXcheck => "closed-form mixed curvature against the numeric Riemann tensor",
            CheckKind::GaussCodazzi => "Gauss and Codazzi equations in the flat ambient",
            CheckKind::Leaves => "base leaf totally geodesic, fiber leaf totally umbilical, |grad f|^2 = k",
        }
    }

    pub fn rows(self) -> &'static [RowSpec] {
        match self {
            CheckKind::Isometry => ISOMETRY,
            CheckKind::FpZero => FP_ZERO,
            CheckKind::ShapeOperator => SHAPE_OPERATOR,
            CheckKind::Characterization => CHARACTERIZATION,
            CheckKind::SigmaBlocks => SIGMA_BLOCKS,
            CheckKind::Inequality => INEQUALITY,
            CheckKind::Equality => EQUALITY,
            CheckKind::Minimality => MINIMALITY,
            CheckKind::QuasiMinimalLeaf => QUASI_MINIMAL,
            CheckKind::Pde => PDE,
            CheckKind::ChristoffelXcheck => CHRISTOFFEL,
            CheckKind::CurvatureXcheck => CURVATURE,
            CheckKind::GaussCodazzi => GAUSS_CODAZZI,
            CheckKind::Leaves => LEAVES,
        }
    }

    /// Whether the check needs the induced frame; such checks expect a
    /// degenerate verdict on the printed case 4.
    pub fn needs_frame(self) -> bool {
        !matches!(self, CheckKind::Pde | CheckKind::ChristoffelXcheck | CheckKind::CurvatureXcheck)
    }

    pub fn applies_to(self, case: &ImmersionCase) -> bool {
        match self {
            CheckKind::QuasiMinimalLeaf => case.tag == CaseTag::Case3,
            _ => true,
        }
    }
}

/// Result of one row at one sample.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Value(Residual),
    /// The value is reported but the sample fails regardless.
    Violation(Residual, String),
    Degenerate(f64),
    Error(String),
}

impl From<GeometryError> for Outcome {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::Degenerate(d) => Outcome::Degenerate(d.det),
            other => Outcome::Error(other.to_string()),
        }
    }
}

fn lift(r: Result<Residual, GeometryError>) -> Outcome {
    match r {
        Ok(r) => Outcome::Value(r),
        Err(e) => e.into(),
    }
}

struct Ctx<'a> {
    case: &'a ImmersionCase,
    wp: &'a WarpedProduct,
    point: &'a [f64],
    frame: Result<(FramedPoint, SecondFF), GeometryError>,
}

/// Evaluates `kinds` at one sample point; outcomes follow `rows()` order.
pub fn evaluate(case: &ImmersionCase, wp: &WarpedProduct, kinds: &[CheckKind], point: &[f64]) -> Vec<Vec<Outcome>> {
    let frame = wp.frame(point).map(|fp| {
        let sff = second_ff(&fp);
        (fp, sff)
    });
    let ctx = Ctx { case, wp, point, frame };
    kinds.iter().map(|&k| evaluate_one(&ctx, k)).collect()
}

fn evaluate_one(ctx: &Ctx, kind: CheckKind) -> Vec<Outcome> {
    let n_rows = kind.rows().len();
    if kind.needs_frame() {
        if let Err(e) = &ctx.frame {
            return vec![Outcome::from(e.clone()); n_rows];
        }
    }
    match framed_rows(ctx, kind) {
        Ok(rows) => rows,
        Err(e) => vec![Outcome::from(e); n_rows],
    }
}

fn framed_rows(ctx: &Ctx, kind: CheckKind) -> Result<Vec<Outcome>, GeometryError> {
    let wp = ctx.wp;
    let pt = ctx.point;
    let frame = ctx.frame.as_ref().map_err(Clone::clone);
    let grad_ln_f = || -> Result<Vec<f64>, GeometryError> { Ok(wp.chart.warp_at(pt)?.psi.grad_padded(pt.len())) };
    let one = |r: Residual| Ok(vec![Outcome::Value(r)]);
    match kind {
        CheckKind::Isometry => {
            let (fp, _) = frame?;
            one(isometry_residual(fp, &wp.chart)?)
        }
        CheckKind::FpZero => {
            let (fp, _) = frame?;
            let (inv, anti) = wp.split.residuals(fp);
            one(check_fp_zero(fp).max(Residual::new(inv, 0.0)).max(Residual::new(anti, 0.0)))
        }
        CheckKind::ShapeOperator => {
            let (fp, sff) = frame?;
            let g = wp.chart.metric_at(pt)?;
            let conn = connection_closed_form(&wp.chart, pt, ClosedFormVariant::Standard)?;
            let l = shape_operator_check(fp, sff, &wp.split, &conn, &g);
            one(l.a.max(l.b_symmetry).max(l.b_nu))
        }
        CheckKind::Characterization => {
            let (fp, sff) = frame?;
            let mu: Vec<f64> = grad_ln_f()?.iter().map(|x| -x).collect();
            one(warped_characterization_check(fp, sff, &wp.split, &mu))
        }
        CheckKind::SigmaBlocks => {
            let (fp, sff) = frame?;
            let blocks = sigma_blocks(fp, sff, &wp.split);
            let total = s_sigma(fp, sff);
            let scale = blocks.dd.abs().max(blocks.dd_perp.abs()).max(blocks.dperp_dperp.abs()).max(total.abs());
            one(Residual::new(blocks.total() - total, scale))
        }
        CheckKind::Inequality => {
            let (fp, sff) = frame?;
            let out = inequality_check(fp, sff, &wp.split, &grad_ln_f()?, FiberSign::SpaceLike);
            one(Residual::new((-out.margin).max(0.0), out.lhs.abs().max(out.rhs.abs())))
        }
        CheckKind::Equality => {
            let (fp, sff) = frame?;
            let (d, f) = (&wp.split.invariant, &wp.split.anti_invariant);
            let out = inequality_check(fp, sff, &wp.split, &grad_ln_f()?, FiberSign::SpaceLike);
            Ok(vec![
                Outcome::Value(Residual::new(sigma_block_max(sff, d, d), 0.0)),
                Outcome::Value(Residual::new(sigma_block_max(sff, f, f), 0.0)),
                Outcome::Value(Residual::new(out.margin, out.lhs.abs())),
            ])
        }
        CheckKind::Minimality => {
            let (fp, sff) = frame?;
            one(Residual::new(max_abs(mean_curvature(fp, sff).iter().copied()), 0.0))
        }
        CheckKind::QuasiMinimalLeaf => {
            let leaf = wp.fiber_leaf(pt);
            let lf = FramedPoint::new(&leaf, &leaf.leaf_point())?;
            let h = mean_curvature(&lf, &second_ff(&lf));
            let size = max_abs(h.iter().copied());
            let r = Residual::new(lf.ambient().dot(&h, &h), 0.0);
            if size < QUASI_MINIMAL_FLOOR {
                Ok(vec![Outcome::Violation(r, format!("mean curvature {size:e} below {QUASI_MINIMAL_FLOOR:e}"))])
            } else {
                one(r)
            }
        }
        CheckKind::Pde => {
            let psi = wp.chart.warp_at(pt)?.psi;
            let (r, scale) = pde_residual_all(&psi, ctx.case.h);
            one(Residual::new(r, scale))
        }
        CheckKind::ChristoffelXcheck => {
            let a = connection_closed_form(&wp.chart, pt, ClosedFormVariant::Standard)?;
            let b = christoffel_numeric(&wp.chart, pt)?;
            one(Residual::new(a.max_abs_diff(&b), b.max_abs()))
        }
        CheckKind::CurvatureXcheck => {
            let (gap, scale) = mixed_curvature_gap(&wp.chart, pt)?;
            one(Residual::new(gap, scale))
        }
        CheckKind::GaussCodazzi => {
            let (fp, sff) = frame?;
            let gauss = gauss_residual(fp, sff, &wp.chart);
            let w = wp.chart.warp_at(pt)?.f_squared;
            let grad = w.grad().iter().map(|x| x * x).sum::<f64>().sqrt();
            let step = CODAZZI_STEP * if grad > 0.0 { (w.value() / grad).min(1.0) } else { 1.0 };
            let codazzi = codazzi_residual(wp.immersion.as_ref(), pt, step);
            Ok(vec![lift(gauss), lift(codazzi)])
        }
        CheckKind::Leaves => {
            let r = leaf_checks(wp, pt)?;
            Ok(vec![
                Outcome::Value(r.grad_norm),
                Outcome::Value(r.base_leaf_geodesic),
                Outcome::Value(r.fiber_leaf_umbilic),
            ])
        }
    }
}
