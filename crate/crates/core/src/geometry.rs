//! Neutral-signature metric calculus.
//!
//! Coordinates on a warped chart are ordered `(s_1..s_h, t_1..t_h, u_1..u_p)`.
//! Christoffel symbols are stored as `Γ^k_{ij}` and the curvature tensor as
//! `R^l_{kij}`, the coefficient of `∂_l` in `R(∂_i, ∂_j)∂_k` with
//! `R(X, Y) = [∇_X, ∇_Y] - ∇_[X,Y]`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jets::{product, Jet2, JetError, Scalar};
use crate::linalg::{invert_metric, max_abs, DegenerateMetric};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Degenerate(#[from] DegenerateMetric),
    #[error("point outside the chart domain: {0}")]
    OutsideDomain(String),
    #[error("expected a point with {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Pseudo-Euclidean space with `neg` time-like coordinates followed by `pos`
/// space-like ones. With `neg == pos == m` this is the flat para-Kähler plane
/// `E^{2m}_m`, whose structure `𝒫` swaps the two coordinate blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ambient {
    neg: usize,
    pos: usize,
}

impl Ambient {
    pub fn para_kaehler(m: usize) -> Self {
        Ambient { neg: m, pos: m }
    }

    pub fn pseudo_euclidean(neg: usize, pos: usize) -> Self {
        Ambient { neg, pos }
    }

    pub fn dim(&self) -> usize {
        self.neg + self.pos
    }

    pub fn is_para_kaehler(&self) -> bool {
        self.neg == self.pos
    }

    pub fn sign(&self, a: usize) -> f64 {
        if a < self.neg {
            -1.0
        } else {
            1.0
        }
    }

    pub fn metric(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim(), self.dim(), |a, b| if a == b { self.sign(a) } else { 0.0 })
    }

    pub fn dot(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        debug_assert_eq!(u.len(), self.dim());
        debug_assert_eq!(v.len(), self.dim());
        (0..self.dim()).map(|a| self.sign(a) * u[a] * v[a]).sum()
    }

    /// `g₀ v`, i.e. the covector of `v`.
    pub fn lower(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.dim(), |a, _| self.sign(a) * v[a])
    }

    /// The block swap `𝒫(x, y) = (y, x)`; `None` unless the signature is neutral.
    pub fn structure(&self, v: &DVector<f64>) -> Option<DVector<f64>> {
        if !self.is_para_kaehler() {
            return None;
        }
        let m = self.neg;
        Some(DVector::from_fn(2 * m, |a, _| if a < m { v[a + m] } else { v[a - m] }))
    }

    /// Matrix of `𝒫`; `None` unless the signature is neutral.
    pub fn structure_matrix(&self) -> Option<DMatrix<f64>> {
        if !self.is_para_kaehler() {
            return None;
        }
        let m = self.neg;
        Some(DMatrix::from_fn(2 * m, 2 * m, |a, b| if (a + m) % (2 * m) == b { 1.0 } else { 0.0 }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FiberModel {
    Sphere,
    Hyperbolic,
    Flat,
}

/// A `p`-dimensional space form in a fixed chart.
///
/// Sphere: `w_0 = ∏ cos u_k`, `w_a = cos u_1 ⋯ cos u_{a-1} sin u_a`.
/// Hyperbolic: `w_0 = cosh u_1`, `w_a = sinh u_1 cos u_2 ⋯ cos u_a sin u_{a+1}`
/// for `a < p`, and `w_p = sinh u_1 cos u_2 ⋯ cos u_p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fiber {
    pub model: FiberModel,
    pub dim: usize,
}

/// Keep-out distance from the chart singularities used by the samplers.
pub const CHART_MARGIN: f64 = 0.1;

impl Fiber {
    pub fn new(model: FiberModel, dim: usize) -> Self {
        Fiber { model, dim }
    }

    pub fn curvature(&self) -> f64 {
        match self.model {
            FiberModel::Sphere => 1.0,
            FiberModel::Hyperbolic => -1.0,
            FiberModel::Flat => 0.0,
        }
    }

    /// Point of the model hypersurface. Curved models return `p + 1`
    /// coordinates `(w_0, .., w_p)`; the flat model returns `u` itself.
    pub fn chart_to_model<S: Scalar>(&self, u: &[S]) -> Vec<S> {
        let p = self.dim;
        assert_eq!(u.len(), p, "fiber point has wrong dimension");
        match self.model {
            FiberModel::Flat => u.to_vec(),
            FiberModel::Sphere => {
                let cos: Vec<S> = u.iter().map(|x| x.cos()).collect();
                let mut w = Vec::with_capacity(p + 1);
                w.push(product(cos.iter().cloned()));
                for a in 0..p {
                    w.push(product(cos[..a].iter().cloned()) * u[a].sin());
                }
                w
            }
            FiberModel::Hyperbolic => {
                let mut w = Vec::with_capacity(p + 1);
                w.push(u[0].cosh());
                let sh = u[0].sinh();
                let cos: Vec<S> = u.iter().map(|x| x.cos()).collect();
                for a in 1..=p {
                    let head = sh.clone() * product(cos[1..a].iter().cloned());
                    if a < p {
                        w.push(head * u[a].sin());
                    } else {
                        w.push(head);
                    }
                }
                w
            }
        }
    }

    /// Defining quadric of the model: `Σ w²` (sphere), `w_0² - Σ_{a≥1} w_a²`
    /// (hyperbolic). Both equal one on the model.
    pub fn model_quadric(&self, w: &[f64]) -> Option<f64> {
        match self.model {
            FiberModel::Flat => None,
            FiberModel::Sphere => Some(w.iter().map(|x| x * x).sum()),
            FiberModel::Hyperbolic => Some(w[0] * w[0] - w[1..].iter().map(|x| x * x).sum::<f64>()),
        }
    }

    /// Diagonal of the fiber metric `g_⊥(u)`.
    pub fn metric_diag<S: Scalar>(&self, u: &[S]) -> Vec<S> {
        let p = self.dim;
        match self.model {
            FiberModel::Flat => vec![S::from_f64(1.0); p],
            FiberModel::Sphere => {
                let c2: Vec<S> = u.iter().map(|x| x.cos().square()).collect();
                (0..p).map(|a| product(c2[..a].iter().cloned())).collect()
            }
            FiberModel::Hyperbolic => {
                let c2: Vec<S> = u.iter().map(|x| x.cos().square()).collect();
                let sh2 = u[0].sinh().square();
                (0..p)
                    .map(|a| {
                        if a == 0 {
                            S::from_f64(1.0)
                        } else {
                            sh2.clone() * product(c2[1..a].iter().cloned())
                        }
                    })
                    .collect()
            }
        }
    }

    /// Rejects points where the chart metric degenerates.
    pub fn check_chart(&self, u: &[f64]) -> Result<(), GeometryError> {
        if u.len() != self.dim {
            return Err(GeometryError::DimensionMismatch { expected: self.dim, got: u.len() });
        }
        let p = self.dim;
        let bad_cos = |range: std::ops::Range<usize>| range.into_iter().any(|k| u[k].cos().abs() < 1e-12);
        match self.model {
            FiberModel::Flat => Ok(()),
            FiberModel::Sphere if bad_cos(0..p.saturating_sub(1)) => {
                Err(GeometryError::OutsideDomain("sphere chart pole".into()))
            }
            FiberModel::Hyperbolic if p > 1 && (u[0].abs() < 1e-12 || bad_cos(1..p - 1)) => {
                Err(GeometryError::OutsideDomain("hyperbolic chart singularity".into()))
            }
            _ => Ok(()),
        }
    }

    /// Sampling box for chart coordinate `a`, away from chart singularities.
    pub fn sampling_range(&self, a: usize) -> (f64, f64) {
        let half = std::f64::consts::FRAC_PI_2 - CHART_MARGIN;
        match (self.model, a) {
            (FiberModel::Flat, _) => (-2.0, 2.0),
            (FiberModel::Sphere, _) => (-half, half),
            (FiberModel::Hyperbolic, 0) => (CHART_MARGIN, 2.0),
            (FiberModel::Hyperbolic, _) => (-half, half),
        }
    }
}

/// A metric tensor field evaluable with exact first and second derivatives.
pub trait MetricField {
    fn dim(&self) -> usize;

    /// Row-major `n × n` metric entries as jets seeded in all `n` chart
    /// variables at `point`.
    fn metric_jets(&self, point: &[f64]) -> Result<Vec<Jet2>, GeometryError>;

    fn metric_at(&self, point: &[f64]) -> Result<DMatrix<f64>, GeometryError> {
        let n = self.dim();
        let g = self.metric_jets(point)?;
        Ok(DMatrix::from_fn(n, n, |i, j| g[i * n + j].value()))
    }
}

impl MetricField for Fiber {
    fn dim(&self) -> usize {
        self.dim
    }

    fn metric_jets(&self, point: &[f64]) -> Result<Vec<Jet2>, GeometryError> {
        self.check_chart(point)?;
        let u = Jet2::seeds(point);
        Ok(diagonal(self.metric_diag(&u)))
    }
}

fn diagonal(d: Vec<Jet2>) -> Vec<Jet2> {
    let n = d.len();
    let mut out = vec![Jet2::constant(0.0); n * n];
    for (i, x) in d.into_iter().enumerate() {
        out[i * n + i] = x;
    }
    out
}

/// Metric field given by a closure over seeded chart jets.
pub struct FnMetric<F> {
    pub dim: usize,
    pub f: F,
}

impl<F> MetricField for FnMetric<F>
where
    F: Fn(&[Jet2]) -> Result<Vec<Jet2>, GeometryError>,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn metric_jets(&self, point: &[f64]) -> Result<Vec<Jet2>, GeometryError> {
        if point.len() != self.dim {
            return Err(GeometryError::DimensionMismatch { expected: self.dim, got: point.len() });
        }
        (self.f)(&Jet2::seeds(point))
    }
}

/// Squared warping function `f²` as a function of the `2h` base coordinates.
pub trait WarpFunction: Send + Sync + fmt::Debug {
    fn warp_squared(&self, base: &[Jet2]) -> Result<Jet2, JetError>;
}

/// `f ≡ c`.
#[derive(Debug, Clone, Copy)]
pub struct ConstantWarp(pub f64);

impl WarpFunction for ConstantWarp {
    fn warp_squared(&self, _base: &[Jet2]) -> Result<Jet2, JetError> {
        Ok(Jet2::constant(self.0 * self.0))
    }
}

/// Jets of the warping function at a chart point, seeded in all chart variables.
#[derive(Debug, Clone)]
pub struct WarpJets {
    pub f_squared: Jet2,
    pub f: Jet2,
    /// `ψ = ln f`
    pub psi: Jet2,
}

/// Warped chart `g = -Σ ds² + Σ dt² + f²(s,t) g_⊥(u)`.
#[derive(Debug, Clone)]
pub struct WarpedChart {
    pub h: usize,
    pub fiber: Fiber,
    pub warp: Arc<dyn WarpFunction>,
}

impl WarpedChart {
    pub fn new(h: usize, fiber: Fiber, warp: Arc<dyn WarpFunction>) -> Self {
        WarpedChart { h, fiber, warp }
    }

    pub fn base_dim(&self) -> usize {
        2 * self.h
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber.dim
    }

    fn check_point(&self, point: &[f64]) -> Result<(), GeometryError> {
        let n = self.dim();
        if point.len() != n {
            return Err(GeometryError::DimensionMismatch { expected: n, got: point.len() });
        }
        self.fiber.check_chart(&point[self.base_dim()..])
    }

    /// `f²`, `f` and `ln f` from jets of the chart coordinates.
    pub fn warp_from(&self, xi: &[Jet2]) -> Result<WarpJets, GeometryError> {
        let f_squared = self.warp.warp_squared(&xi[..self.base_dim()])?;
        if !(f_squared.value() > 0.0) {
            return Err(GeometryError::OutsideDomain(format!(
                "warping function squared is {}",
                f_squared.value()
            )));
        }
        let f = f_squared.sqrt()?;
        let psi = f_squared.ln()?.scale(0.5);
        Ok(WarpJets { f_squared, f, psi })
    }

    pub fn warp_at(&self, point: &[f64]) -> Result<WarpJets, GeometryError> {
        self.check_point(point)?;
        self.warp_from(&Jet2::seeds(point))
    }

    /// Block-diagonal metric matrix at `point`.
    pub fn warped_metric(&self, point: &[f64]) -> Result<DMatrix<f64>, GeometryError> {
        self.metric_at(point)
    }
}

impl MetricField for WarpedChart {
    fn dim(&self) -> usize {
        2 * self.h + self.fiber.dim
    }

    fn metric_jets(&self, point: &[f64]) -> Result<Vec<Jet2>, GeometryError> {
        self.check_point(point)?;
        let xi = Jet2::seeds(point);
        let warp = self.warp_from(&xi)?;
        let h = self.h;
        let mut diag: Vec<Jet2> = (0..2 * h)
            .map(|i| Jet2::constant(if i < h { -1.0 } else { 1.0 }))
            .collect();
        let fiber = self.fiber.metric_diag(&xi[2 * h..]);
        diag.extend(fiber.into_iter().map(|g| &warp.f_squared * &g));
        Ok(diagonal(diag))
    }
}

/// `Γ^k_{ij}` stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    n: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(n: usize) -> Self {
        Christoffel { n, data: vec![0.0; n * n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `Γ^k_{ij}`
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.n + i) * self.n + j]
    }

    fn slot(&mut self, k: usize, i: usize, j: usize) -> &mut f64 {
        &mut self.data[(k * self.n + i) * self.n + j]
    }

    /// Sets `Γ^k_{ij}` and `Γ^k_{ji}`.
    pub fn set_sym(&mut self, k: usize, i: usize, j: usize, v: f64) {
        *self.slot(k, i, j) = v;
        *self.slot(k, j, i) = v;
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(self.data.iter().copied())
    }

    pub fn max_abs_diff(&self, other: &Christoffel) -> f64 {
        assert_eq!(self.n, other.n);
        max_abs(self.data.iter().zip(&other.data).map(|(a, b)| a - b))
    }

    /// Chart components of `∇_{∂_i} ∂_j`.
    pub fn covariant(&self, i: usize, j: usize) -> DVector<f64> {
        DVector::from_fn(self.n, |k, _| self.get(k, i, j))
    }
}

/// Christoffel symbols and their first derivatives `∂_m Γ^k_{ij}`.
struct ConnectionData {
    gamma: Christoffel,
    /// index ((m*n + k)*n + i)*n + j
    d_gamma: Vec<f64>,
}

fn connection_data(metric: &dyn MetricField, point: &[f64]) -> Result<ConnectionData, GeometryError> {
    let n = metric.dim();
    let g = metric.metric_jets(point)?;
    let gv = DMatrix::from_fn(n, n, |i, j| g[i * n + j].value());
    let ginv = invert_metric(&gv)?.inverse;
    let idx = |i: usize, j: usize| i * n + j;

    // Γ_{l,ij} = ½(∂_i g_jl + ∂_j g_il − ∂_l g_ij) and its derivatives.
    let mut lower = vec![0.0; n * n * n];
    let mut d_lower = vec![0.0; n * n * n * n];
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                lower[(l * n + i) * n + j] =
                    0.5 * (g[idx(j, l)].d(i) + g[idx(i, l)].d(j) - g[idx(i, j)].d(l));
                for m in 0..n {
                    d_lower[((m * n + l) * n + i) * n + j] = 0.5
                        * (g[idx(j, l)].d2(m, i) + g[idx(i, l)].d2(m, j) - g[idx(i, j)].d2(m, l));
                }
            }
        }
    }

    let mut gamma = Christoffel::zeros(n);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                *gamma.slot(k, i, j) =
                    (0..n).map(|l| ginv[(k, l)] * lower[(l * n + i) * n + j]).sum();
            }
        }
    }

    // ∂_m g^{kl} = −g^{ka} ∂_m g_{ab} g^{bl}
    let mut d_ginv = vec![0.0; n * n * n];
    for m in 0..n {
        let dg = DMatrix::from_fn(n, n, |a, b| g[idx(a, b)].d(m));
        let prod = -(&ginv * dg * &ginv);
        for k in 0..n {
            for l in 0..n {
                d_ginv[(m * n + k) * n + l] = prod[(k, l)];
            }
        }
    }

    let mut d_gamma = vec![0.0; n * n * n * n];
    for m in 0..n {
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    d_gamma[((m * n + k) * n + i) * n + j] = (0..n)
                        .map(|l| {
                            d_ginv[(m * n + k) * n + l] * lower[(l * n + i) * n + j]
                                + ginv[(k, l)] * d_lower[((m * n + l) * n + i) * n + j]
                        })
                        .sum();
                }
            }
        }
    }
    Ok(ConnectionData { gamma, d_gamma })
}

/// Levi-Civita connection from metric derivatives.
pub fn christoffel_numeric(metric: &dyn MetricField, point: &[f64]) -> Result<Christoffel, GeometryError> {
    Ok(connection_data(metric, point)?.gamma)
}

/// `R^l_{kij}` stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct Riemann {
    n: usize,
    data: Vec<f64>,
}

impl Riemann {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Coefficient of `∂_l` in `R(∂_i, ∂_j)∂_k`.
    pub fn get(&self, l: usize, k: usize, i: usize, j: usize) -> f64 {
        let n = self.n;
        self.data[((l * n + k) * n + i) * n + j]
    }

    /// `g(R(∂_i, ∂_j)∂_k, ∂_l)`
    pub fn lowered(&self, g: &DMatrix<f64>, l: usize, k: usize, i: usize, j: usize) -> f64 {
        (0..self.n).map(|m| g[(l, m)] * self.get(m, k, i, j)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(self.data.iter().copied())
    }

    /// Largest violation of `R(X,Y)Z + R(Y,Z)X + R(Z,X)Y = 0`.
    pub fn bianchi_residual(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for l in 0..n {
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let r = self.get(l, k, i, j) + self.get(l, i, j, k) + self.get(l, j, k, i);
                        worst = worst.max(r.abs());
                    }
                }
            }
        }
        worst
    }

    /// Sectional curvature of the plane spanned by `∂_i`, `∂_j`.
    pub fn sectional(&self, g: &DMatrix<f64>, i: usize, j: usize) -> f64 {
        let num = self.lowered(g, i, j, i, j);
        num / (g[(i, i)] * g[(j, j)] - g[(i, j)] * g[(i, j)])
    }
}

pub fn riemann(metric: &dyn MetricField, point: &[f64]) -> Result<Riemann, GeometryError> {
    let n = metric.dim();
    let ConnectionData { gamma, d_gamma } = connection_data(metric, point)?;
    let dg = |m: usize, k: usize, i: usize, j: usize| d_gamma[((m * n + k) * n + i) * n + j];
    let mut data = vec![0.0; n * n * n * n];
    for l in 0..n {
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut r = dg(i, l, j, k) - dg(j, l, i, k);
                    for m in 0..n {
                        r += gamma.get(l, i, m) * gamma.get(m, j, k) - gamma.get(l, j, m) * gamma.get(m, i, k);
                    }
                    data[((l * n + k) * n + i) * n + j] = r;
                }
            }
        }
    }
    Ok(Riemann { n, data })
}

/// Which tabulated fiber-fiber coefficients to use for the hyperbolic chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClosedFormVariant {
    #[default]
    Standard,
    /// Adds `sin u_1 cos u_1 ∏_{2≤k<a} cos² u_k` to `Γ^{u_1}_{u_a u_a}` for
    /// `a > 1`. This extra term is not compatible with the metric and is kept
    /// so that the mismatch stays reproducible.
    WithExtraFirstTerm,
}

/// Closed-form Levi-Civita connection of a warped chart.
pub fn connection_closed_form(
    chart: &WarpedChart,
    point: &[f64],
    variant: ClosedFormVariant,
) -> Result<Christoffel, GeometryError> {
    let n = chart.dim();
    let h = chart.h;
    let p = chart.fiber.dim;
    let warp = chart.warp_at(point)?;
    let f2 = &warp.f_squared;
    let u = &point[2 * h..];
    let gperp = chart.fiber.metric_diag(u);
    let mut gamma = Christoffel::zeros(n);

    for x in 0..2 * h {
        let d_psi = f2.d(x) / (2.0 * f2.value());
        let sign = if x < h { 1.0 } else { -1.0 };
        for a in 0..p {
            let ua = 2 * h + a;
            gamma.set_sym(ua, x, ua, d_psi);
            // g^{xx} = sign⁻¹ on the base: −1 for s, +1 for t.
            gamma.set_sym(x, ua, ua, sign * 0.5 * gperp[a] * f2.d(x));
        }
    }

    let set = |g: &mut Christoffel, k: usize, i: usize, j: usize, v: f64| {
        g.set_sym(2 * h + k, 2 * h + i, 2 * h + j, v)
    };
    let cos2 = |range: std::ops::Range<usize>| range.map(|k| u[k].cos().powi(2)).product::<f64>();
    match chart.fiber.model {
        FiberModel::Flat => {}
        FiberModel::Sphere => {
            for a in 0..p {
                for b in a + 1..p {
                    set(&mut gamma, b, a, b, -u[a].try_tan()?);
                }
                for b in 0..a {
                    set(&mut gamma, b, a, a, u[b].sin() * u[b].cos() * cos2(b + 1..a));
                }
            }
        }
        FiberModel::Hyperbolic => {
            for b in 1..p {
                set(&mut gamma, b, 0, b, u[0].try_coth()?);
            }
            for a in 1..p {
                for b in a + 1..p {
                    set(&mut gamma, b, a, b, -u[a].try_tan()?);
                }
                let mut first = -u[0].sinh() * u[0].cosh() * cos2(1..a);
                if variant == ClosedFormVariant::WithExtraFirstTerm {
                    first += u[0].sin() * u[0].cos() * cos2(1..a);
                }
                set(&mut gamma, 0, a, a, first);
                for b in 1..a {
                    set(&mut gamma, b, a, a, u[b].sin() * u[b].cos() * cos2(b + 1..a));
                }
            }
        }
    }
    Ok(gamma)
}

/// Mixed base-fiber curvature coefficients in `R(∂_x, ∂_u)∂_y = c_{xy} ∂_u`,
/// with `c_{xy} = ψ_{xy} + ψ_x ψ_y`, split into the `ss`, `st`, `tt` blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedCurvature {
    pub ss: DMatrix<f64>,
    pub st: DMatrix<f64>,
    pub tt: DMatrix<f64>,
}

impl MixedCurvature {
    /// Coefficient for base indices `x`, `y` in `0..2h`.
    pub fn coefficient(&self, x: usize, y: usize) -> f64 {
        let h = self.ss.nrows();
        match (x < h, y < h) {
            (true, true) => self.ss[(x, y)],
            (true, false) => self.st[(x, y - h)],
            (false, true) => self.st[(y, x - h)],
            (false, false) => self.tt[(x - h, y - h)],
        }
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(self.ss.iter().chain(self.st.iter()).chain(self.tt.iter()).copied())
    }
}

pub fn curvature_closed_form(chart: &WarpedChart, point: &[f64]) -> Result<MixedCurvature, GeometryError> {
    let psi = chart.warp_at(point)?.psi;
    let h = chart.h;
    let c = |x: usize, y: usize| psi.d2(x, y) + psi.d(x) * psi.d(y);
    Ok(MixedCurvature {
        ss: DMatrix::from_fn(h, h, |i, j| c(i, j)),
        st: DMatrix::from_fn(h, h, |i, j| c(i, h + j)),
        tt: DMatrix::from_fn(h, h, |i, j| c(h + i, h + j)),
    })
}

/// Largest gap between the closed-form mixed curvature and the numeric
/// tensor over all base pairs and fiber directions.
pub fn mixed_curvature_gap(chart: &WarpedChart, point: &[f64]) -> Result<(f64, f64), GeometryError> {
    let closed = curvature_closed_form(chart, point)?;
    let r = riemann(chart, point)?;
    let h = chart.h;
    let mut gap: f64 = 0.0;
    for a in 0..chart.fiber.dim {
        let ua = 2 * h + a;
        for x in 0..2 * h {
            for y in 0..2 * h {
                gap = gap.max((r.get(ua, y, x, ua) - closed.coefficient(x, y)).abs());
            }
        }
    }
    Ok((gap, closed.max_abs()))
}

/// `‖∇φ‖₂ = g^{ij} ∂_i φ ∂_j φ` for the gradient `grad` of a scalar field.
pub fn grad_sq_norm(grad: &[f64], metric: &DMatrix<f64>) -> Result<f64, GeometryError> {
    let n = metric.nrows();
    if grad.len() != n {
        return Err(GeometryError::DimensionMismatch { expected: n, got: grad.len() });
    }
    let ginv = invert_metric(metric)?.inverse;
    let d = DVector::from_column_slice(grad);
    Ok(d.dot(&(ginv * &d)))
}
