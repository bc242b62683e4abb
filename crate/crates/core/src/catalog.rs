//! The concrete warped-product immersions, their warping functions and
//! domains, and the exact solution families of the warping PDE system.
//!
//! Coordinates are `ξ = (s_1..s_h, t_1..t_h, u_1..u_p)` and images are
//! ordered `(x_1..x_m, y_1..y_m)` with `m = h + p`. With
//! `S = Σ a_j s_j + Σ b_j t_j` and `T = Σ a_j t_j + Σ b_j s_j`:
//!
//! * case 1 (sphere fiber, `⟨v,v⟩ = 1`):
//!   `x_i = s_i - a_i(w_0-1)S + b_i(w_0-1)T`, `y_i = t_i - a_i(w_0-1)T + b_i(w_0-1)S`
//! * case 2 (hyperbolic fiber, `⟨v,v⟩ = -1`): the same with both correction
//!   signs flipped
//! * case 3 (flat fiber, `⟨v,v⟩ = 0`):
//!   `x_i = s_i + ½(a_i S - b_i T)|u|²`, `y_i = t_i + ½(a_i T - b_i S)|u|²`
//!
//! and fiber coordinates `x_{h+a} = w_a T`, `y_{h+a} = w_a S` (with `w = u`
//! for the flat fiber). All three have `f² = S² - T²`.

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Ambient, Fiber, FiberModel, GeometryError, WarpFunction, WarpJets, WarpedChart};
use crate::jets::{sum, Jet2, JetError, Scalar};
use crate::paracomplex::{pseudo_dot, ParaComplex, ParaVector, J};
use crate::sampling::{uniform, Sample};
use crate::submanifold::{Immersion, WarpedProduct};

/// Samples with `f²` below this are rejected.
pub const DOMAIN_MARGIN: f64 = 1e-2;

/// Half-width of the sampling box for base coordinates.
pub const BASE_BOX: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatalogError {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("point outside the domain: {0}")]
    OutsideDomain(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Jet(#[from] JetError),
}

fn invalid(msg: impl Into<String>) -> CatalogError {
    CatalogError::InvalidParameters(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseTag {
    Case1,
    Case2,
    Case3,
    Case4Printed,
    Case4Corrected,
    Custom,
}

impl CaseTag {
    pub const ALL: [CaseTag; 6] =
        [CaseTag::Case1, CaseTag::Case2, CaseTag::Case3, CaseTag::Case4Printed, CaseTag::Case4Corrected, CaseTag::Custom];

    pub fn name(self) -> &'static str {
        match self {
            CaseTag::Case1 => "case1",
            CaseTag::Case2 => "case2",
            CaseTag::Case3 => "case3",
            CaseTag::Case4Printed => "case4-printed",
            CaseTag::Case4Corrected => "case4-corrected",
            CaseTag::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Option<CaseTag> {
        CaseTag::ALL.into_iter().find(|t| t.name() == s)
    }

    pub fn fiber_model(self) -> FiberModel {
        match self {
            CaseTag::Case1 => FiberModel::Sphere,
            CaseTag::Case2 => FiberModel::Hyperbolic,
            _ => FiberModel::Flat,
        }
    }
}

/// Parameters of one catalog immersion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImmersionCase {
    pub tag: CaseTag,
    pub h: usize,
    pub p: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub eps: i8,
    pub c: f64,
}

impl ImmersionCase {
    pub fn new(tag: CaseTag, h: usize, p: usize, a: Vec<f64>, b: Vec<f64>) -> Self {
        ImmersionCase { tag, h, p, a, b, eps: 1, c: 1.0 }
    }

    /// `h=2, p=2, a=(1,0), b=(0,√2)`
    pub fn case1_reference() -> Self {
        Self::new(CaseTag::Case1, 2, 2, vec![1.0, 0.0], vec![0.0, 2f64.sqrt()])
    }

    /// `h=1, p=2, a=(1)`
    pub fn case2_reference() -> Self {
        Self::new(CaseTag::Case2, 1, 2, vec![1.0], vec![0.0])
    }

    /// `h=2, p=1, a=(1,0), b=(0,1)`
    pub fn case3_reference() -> Self {
        Self::new(CaseTag::Case3, 2, 1, vec![1.0, 0.0], vec![0.0, 1.0])
    }

    /// `h=1, p=1, ε=1, b=(1)`
    pub fn case4_printed_reference() -> Self {
        Self::new(CaseTag::Case4Printed, 1, 1, vec![], vec![1.0])
    }

    pub fn case4_corrected(c: f64) -> Self {
        ImmersionCase { c, ..Self::new(CaseTag::Case4Corrected, 1, 1, vec![], vec![1.0]) }
    }

    pub fn chart_dim(&self) -> usize {
        2 * self.h + self.p
    }

    pub fn ambient_half_dim(&self) -> usize {
        self.h + self.p
    }

    /// The real `2h`-vector `(a_1..a_h, b_1..b_h)`.
    pub fn v(&self) -> Vec<f64> {
        let mut v = self.a.clone();
        v.extend(&self.b);
        v
    }

    fn eps(&self) -> f64 {
        self.eps as f64
    }

    /// Fills defaults (`b = 0` for cases 1–3, `b = (1)` for the corrected
    /// case 4) and checks every parameter constraint.
    pub fn validated(mut self) -> Result<Self, CatalogError> {
        let h = self.h;
        if h == 0 || self.p == 0 {
            return Err(invalid("h and p must be at least 1"));
        }
        if self.eps != 1 && self.eps != -1 {
            return Err(invalid("eps must be 1 or -1"));
        }
        if self.a.iter().chain(&self.b).any(|x| !x.is_finite()) || !self.c.is_finite() {
            return Err(invalid("parameters must be finite"));
        }
        match self.tag {
            CaseTag::Case1 | CaseTag::Case2 | CaseTag::Case3 => {
                if self.b.is_empty() {
                    self.b = vec![0.0; h];
                }
                if self.a.len() != h || self.b.len() != h {
                    return Err(invalid(format!("a and b must have length h = {h}")));
                }
                if self.b[0] != 0.0 {
                    return Err(invalid("b_1 must be 0"));
                }
                if self.a[0] == 0.0 {
                    return Err(invalid("a_1 must be nonzero"));
                }
                let v = self.v();
                let norm = pseudo_dot(&v, &v).map_err(|e| invalid(e.to_string()))?;
                let scale: f64 = v.iter().map(|x| x * x).sum();
                let (target, min_h) = match self.tag {
                    CaseTag::Case1 => (1.0, 2),
                    CaseTag::Case2 => (-1.0, 1),
                    _ => (0.0, 2),
                };
                if h < min_h {
                    return Err(invalid(format!("{} needs h >= {min_h}", self.tag.name())));
                }
                if (norm - target).abs() > 1e-12 * (1.0 + scale) {
                    return Err(invalid(format!("<v,v> = {norm}, expected {target}")));
                }
            }
            CaseTag::Case4Printed | CaseTag::Case4Corrected => {
                if self.tag == CaseTag::Case4Corrected {
                    if h != 1 || self.p != 1 {
                        return Err(invalid("case4-corrected is defined for h = p = 1"));
                    }
                    if self.b.is_empty() {
                        self.b = vec![1.0];
                    }
                    if self.c == 0.0 {
                        return Err(invalid("c must be nonzero"));
                    }
                }
                if self.b.len() != h {
                    return Err(invalid(format!("b must have length h = {h}")));
                }
                if !(self.b[0] > 0.0) {
                    return Err(invalid("b_1 must be positive"));
                }
                if self.a.iter().any(|&x| x != 0.0) {
                    return Err(invalid("case 4 takes no a parameters"));
                }
                self.a = vec![0.0; h];
            }
            CaseTag::Custom => {
                return Err(invalid("custom immersions are built through the library API"));
            }
        }
        Ok(self)
    }

    pub fn fiber(&self) -> Fiber {
        Fiber::new(self.tag.fiber_model(), self.p)
    }

    pub fn warp_data(&self) -> WarpData {
        match self.tag {
            CaseTag::Case4Printed | CaseTag::Case4Corrected => {
                WarpData { a: self.a.clone(), b: self.b.clone(), form: WarpForm::Linear { eps: self.eps() } }
            }
            _ => WarpData { a: self.a.clone(), b: self.b.clone(), form: WarpForm::Quadratic },
        }
    }

    pub fn chart(&self) -> WarpedChart {
        WarpedChart::new(self.h, self.fiber(), Arc::new(self.warp_data()))
    }

    /// Validates and assembles the immersion with its chart and split.
    pub fn build(&self) -> Result<WarpedProduct, CatalogError> {
        let case = self.clone().validated()?;
        let chart = case.chart();
        Ok(WarpedProduct::new(Arc::new(CaseImmersion { case }), chart))
    }

    /// Whether `point` lies in the sampled domain: `f² ≥ DOMAIN_MARGIN` and
    /// the fiber chart is regular.
    pub fn in_domain(&self, point: &[f64]) -> bool {
        if point.len() != self.chart_dim() {
            return false;
        }
        let base: Vec<f64> = point[..2 * self.h].to_vec();
        let f2 = self.warp_data().f_squared(&base);
        f2 >= DOMAIN_MARGIN && self.fiber().check_chart(&point[2 * self.h..]).is_ok()
    }

    /// A candidate from the sampling box.
    pub fn propose(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let fiber = self.fiber();
        let mut x: Vec<f64> = (0..2 * self.h).map(|_| uniform(rng, -BASE_BOX, BASE_BOX)).collect();
        for a in 0..self.p {
            let (lo, hi) = fiber.sampling_range(a);
            x.push(uniform(rng, lo, hi));
        }
        x
    }

    /// Sample `index` of a campaign seeded with `seed`.
    pub fn sample(&self, seed: u64, index: usize) -> Sample {
        crate::sampling::draw(seed, index, |r| self.propose(r), |x| self.in_domain(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WarpForm {
    /// `f² = S² - T²`
    Quadratic,
    /// `f² = Σ b_k (s_k - ε t_k)`
    Linear { eps: f64 },
}

/// Warping function of a catalog case.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpData {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub form: WarpForm,
}

impl WarpData {
    /// The linear forms `(S, T)`.
    pub fn s_t<S: Scalar>(&self, base: &[S]) -> (S, S) {
        let h = self.a.len();
        let (s, t) = base.split_at(h);
        let big_s = sum((0..h).map(|j| s[j].clone() * self.a[j] + t[j].clone() * self.b[j]));
        let big_t = sum((0..h).map(|j| t[j].clone() * self.a[j] + s[j].clone() * self.b[j]));
        (big_s, big_t)
    }

    pub fn f_squared_generic<S: Scalar>(&self, base: &[S]) -> S {
        match self.form {
            WarpForm::Quadratic => {
                let (s, t) = self.s_t(base);
                s.square() - t.square()
            }
            WarpForm::Linear { eps } => {
                let h = self.b.len();
                sum((0..h).map(|k| (base[k].clone() - base[h + k].clone() * eps) * self.b[k]))
            }
        }
    }

    pub fn f_squared(&self, base: &[f64]) -> f64 {
        self.f_squared_generic(base)
    }
}

impl WarpFunction for WarpData {
    fn warp_squared(&self, base: &[Jet2]) -> Result<Jet2, JetError> {
        Ok(self.f_squared_generic(base))
    }
}

/// Jets of `f` and `ψ = ln f` in the `2h` base variables at `base`.
pub fn warp(case: &ImmersionCase, base: &[f64]) -> Result<WarpJets, CatalogError> {
    let case = case.clone().validated()?;
    if base.len() != 2 * case.h {
        return Err(invalid(format!("base point needs {} coordinates", 2 * case.h)));
    }
    let z = Jet2::seeds(base);
    let f_squared = case.warp_data().f_squared_generic(&z);
    if !(f_squared.value() > 0.0) {
        return Err(CatalogError::OutsideDomain(format!("f² = {}", f_squared.value())));
    }
    let f = f_squared.sqrt()?;
    let psi = f_squared.ln()?.scale(0.5);
    Ok(WarpJets { f_squared, f, psi })
}

/// A catalog immersion evaluated with any [`Scalar`].
#[derive(Debug, Clone)]
pub struct CaseImmersion {
    case: ImmersionCase,
}

impl CaseImmersion {
    pub fn case(&self) -> &ImmersionCase {
        &self.case
    }

    pub fn eval<S: Scalar>(&self, xi: &[S]) -> Result<Vec<S>, JetError> {
        let c = &self.case;
        let (h, p) = (c.h, c.p);
        let (s, rest) = xi.split_at(h);
        let (t, u) = rest.split_at(h);
        let mut x: Vec<S> = Vec::with_capacity(h + p);
        let mut y: Vec<S> = Vec::with_capacity(h + p);
        match c.tag {
            CaseTag::Case1 | CaseTag::Case2 | CaseTag::Case3 => {
                let (big_s, big_t) = c.warp_data().s_t(&xi[..2 * h]);
                let (kappa, sign, w) = match c.tag {
                    CaseTag::Case3 => {
                        let q = sum(u.iter().map(|x| x.square()));
                        (q * 0.5, 1.0, u.to_vec())
                    }
                    _ => {
                        let w = c.fiber().chart_to_model(u);
                        let sign = if c.tag == CaseTag::Case1 { -1.0 } else { 1.0 };
                        (w[0].clone() - 1.0, sign, w[1..].to_vec())
                    }
                };
                for i in 0..h {
                    let xs = big_s.clone() * c.a[i] - big_t.clone() * c.b[i];
                    let ys = big_t.clone() * c.a[i] - big_s.clone() * c.b[i];
                    x.push(s[i].clone() + kappa.clone() * xs * sign);
                    y.push(t[i].clone() + kappa.clone() * ys * sign);
                }
                for wa in &w {
                    x.push(wa.clone() * big_t.clone());
                    y.push(wa.clone() * big_s.clone());
                }
            }
            CaseTag::Case4Printed => {
                let q = sum(u.iter().map(|x| x.square()));
                let eps = c.eps();
                for i in 0..h {
                    x.push(s[i].clone() + q.clone() * (c.b[i] / 2.0));
                    y.push(t[i].clone() + q.clone() * (eps * c.b[i] / 2.0));
                }
                let r = c.b[0].sqrt() / 2.0;
                for ua in u {
                    x.push(ua.clone() * r);
                    y.push(ua.clone() * (eps * r));
                }
            }
            CaseTag::Case4Corrected => {
                let (eps, b, cc) = (c.eps(), c.b[0], c.c);
                let (s, t, u) = (&s[0], &t[0], &u[0]);
                let lin = s.clone() - t.clone() * eps;
                let tail = u.clone() * (b / (4.0 * cc));
                let head = u.clone() * lin * cc;
                x.push(s.clone() + u.square() * (b / 4.0));
                x.push(head.clone() - tail.clone());
                y.push(t.clone() + u.square() * (eps * b / 4.0));
                y.push((head * eps + tail * eps) * -1.0);
            }
            CaseTag::Custom => unreachable!("custom cases never validate"),
        }
        x.extend(y);
        Ok(x)
    }
}

impl Immersion for CaseImmersion {
    fn chart_dim(&self) -> usize {
        self.case.chart_dim()
    }

    fn ambient(&self) -> Ambient {
        Ambient::para_kaehler(self.case.ambient_half_dim())
    }

    fn map(&self, xi: &[Jet2]) -> Result<Vec<Jet2>, GeometryError> {
        Ok(self.eval(xi)?)
    }
}

/// Ambient point of a validated case at a domain point.
pub fn immerse(case: &ImmersionCase, xi: &[f64]) -> Result<Vec<f64>, CatalogError> {
    let case = case.clone().validated()?;
    if xi.len() != case.chart_dim() {
        return Err(invalid(format!("point needs {} coordinates", case.chart_dim())));
    }
    if !case.in_domain(xi) {
        return Err(CatalogError::OutsideDomain("f² below the domain margin or singular fiber chart".into()));
    }
    Ok(CaseImmersion { case }.eval(xi)?)
}

/// The corrected case-4 immersion (`h = p = 1`) at `ξ = (s, t, u)`.
pub fn case4_corrected(b: f64, eps: i8, c: f64, xi: &[f64]) -> Result<Vec<f64>, CatalogError> {
    let case = ImmersionCase { eps, b: vec![b], ..ImmersionCase::case4_corrected(c) };
    immerse(&case, xi)
}

/// Para-complex packaging of the case formulas: with `z_k = s_k + j t_k`,
/// `v_k = a_k + j b_k`, `Σ = Σ v_k z_k`, coordinates
/// `z_i + v̄_i κ Σ` and `w_a jΣ`, where `κ = w_0 - 1` (curved fibers) or
/// `|u|²/2` (flat). Case 4 uses `z_k + (v_k/2)|u|²`, `(v_0/2)u_a` with
/// `v_k = b_k(1 + εj)`, `v_0 = √b_1 (1 + εj)`.
pub fn paracomplex_form(case: &ImmersionCase, xi: &[f64]) -> Result<Vec<f64>, CatalogError> {
    let case = case.clone().validated()?;
    let (h, p) = (case.h, case.p);
    let z: Vec<ParaComplex> = (0..h).map(|k| ParaComplex::new(xi[k], xi[h + k])).collect();
    let u = &xi[2 * h..];
    let q: f64 = u.iter().map(|x| x * x).sum();
    let mut out = Vec::with_capacity(h + p);
    match case.tag {
        CaseTag::Case1 | CaseTag::Case2 | CaseTag::Case3 => {
            let v = ParaVector::new((0..h).map(|k| ParaComplex::new(case.a[k], case.b[k])).collect());
            let sigma = v.bilinear(&ParaVector::new(z.clone())).map_err(|e| invalid(e.to_string()))?;
            let (kappa, w) = if case.tag == CaseTag::Case3 {
                (q / 2.0, u.to_vec())
            } else {
                let w = case.fiber().chart_to_model(u);
                (w[0] - 1.0, w[1..].to_vec())
            };
            for i in 0..h {
                out.push(z[i] + v.0[i].conj() * sigma * kappa);
            }
            for wa in w {
                out.push(J * sigma * wa);
            }
        }
        CaseTag::Case4Printed => {
            let e = case.eps();
            for k in 0..h {
                out.push(z[k] + ParaComplex::new(case.b[k], e * case.b[k]) * (q / 2.0));
            }
            let r = case.b[0].sqrt();
            for &ua in u {
                out.push(ParaComplex::new(r, e * r) * (ua / 2.0));
            }
        }
        _ => return Err(invalid(format!("{} has no para-complex packaging", case.tag.name()))),
    }
    Ok(ParaVector::new(out).identify())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PdeFamily {
    Sol1,
    Sol2,
}

/// Exact solution of the warping PDE system. Products `⟨·,z⟩` are Euclidean
/// on `R^{2h}` with `z = (s, t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum PdeSolution {
    /// `ψ = ½ ln|(⟨v,z⟩ + c1)² - (⟨jv,z⟩ + c2)²|`
    Sol1 { v: Vec<f64>, c1: f64, c2: f64 },
    /// `ψ = ½ ln|(⟨v1,z⟩ + c)(⟨v2,z⟩ + d)|`
    Sol2 { v1: Vec<f64>, v2: Vec<f64>, c: f64, d: f64 },
}

fn euclid<S: Scalar>(v: &[f64], z: &[S]) -> S {
    sum(v.iter().zip(z).map(|(&a, x)| x.clone() * a))
}

/// Swaps the two halves: `j(a, b) = (b, a)`.
pub fn j_of(v: &[f64]) -> Vec<f64> {
    let h = v.len() / 2;
    v[h..].iter().chain(&v[..h]).copied().collect()
}

pub fn sol1(v: Vec<f64>, c1: f64, c2: f64) -> Result<PdeSolution, CatalogError> {
    if v.is_empty() || v.len() % 2 != 0 {
        return Err(invalid("v must have even positive length 2h"));
    }
    let h = v.len() / 2;
    if v[h] != 0.0 {
        return Err(invalid("v_{h+1} must be 0"));
    }
    if v[0] == 0.0 {
        return Err(invalid("a_1 must be nonzero"));
    }
    Ok(PdeSolution::Sol1 { v, c1, c2 })
}

pub fn sol2(v1: Vec<f64>, v2: Vec<f64>, c: f64, d: f64) -> Result<PdeSolution, CatalogError> {
    if v1.len() != v2.len() || v1.is_empty() || v1.len() % 2 != 0 {
        return Err(invalid("v1 and v2 must have the same even positive length 2h"));
    }
    let h = v1.len() / 2;
    if v2[0] == 0.0 {
        return Err(invalid("b_1 must be nonzero"));
    }
    let eps = -v2[h] / v2[0];
    if eps != 1.0 && eps != -1.0 {
        return Err(invalid("v2 must have the form (b, -εb)"));
    }
    let ok2 = (0..h).all(|i| v2[h + i] == -eps * v2[i]);
    let ok1 = v1[0] == 0.0 && v1[h] == 0.0 && (0..h).all(|i| v1[h + i] == eps * v1[i]);
    if !ok1 || !ok2 {
        return Err(invalid("v1 must be (0, a', 0, εa') and v2 (b, -εb) with the same ε"));
    }
    Ok(PdeSolution::Sol2 { v1, v2, c, d })
}

/// Builds the second family from `a` (with `a_1 = 0`), `b`, `ε`, `c`, `d`.
pub fn sol2_from(a: &[f64], b: &[f64], eps: i8, c: f64, d: f64) -> Result<PdeSolution, CatalogError> {
    if a.len() != b.len() {
        return Err(invalid("a and b must have the same length h"));
    }
    if eps != 1 && eps != -1 {
        return Err(invalid("eps must be 1 or -1"));
    }
    if a.first().copied().unwrap_or(0.0) != 0.0 {
        return Err(invalid("a_1 must be 0"));
    }
    let e = eps as f64;
    let v1 = a.iter().copied().chain(a.iter().map(|x| e * x)).collect();
    let v2 = b.iter().copied().chain(b.iter().map(|x| -e * x)).collect();
    sol2(v1, v2, c, d)
}

fn abs_jet(x: Jet2) -> Result<Jet2, CatalogError> {
    if x.value() == 0.0 || !x.value().is_finite() {
        return Err(CatalogError::OutsideDomain("logarithm argument vanishes".into()));
    }
    Ok(if x.value() < 0.0 { -x } else { x })
}

impl PdeSolution {
    pub fn h(&self) -> usize {
        match self {
            PdeSolution::Sol1 { v, .. } => v.len() / 2,
            PdeSolution::Sol2 { v1, .. } => v1.len() / 2,
        }
    }

    pub fn family(&self) -> PdeFamily {
        match self {
            PdeSolution::Sol1 { .. } => PdeFamily::Sol1,
            PdeSolution::Sol2 { .. } => PdeFamily::Sol2,
        }
    }

    /// Argument of the logarithm, `e^{2ψ}` up to sign.
    pub fn argument<S: Scalar>(&self, z: &[S]) -> S {
        match self {
            PdeSolution::Sol1 { v, c1, c2 } => {
                let a = euclid(v, z) + *c1;
                let b = euclid(&j_of(v), z) + *c2;
                a.square() - b.square()
            }
            PdeSolution::Sol2 { v1, v2, c, d } => (euclid(v1, z) + *c) * (euclid(v2, z) + *d),
        }
    }

    pub fn psi(&self, z: &[Jet2]) -> Result<Jet2, CatalogError> {
        if z.len() != 2 * self.h() {
            return Err(invalid(format!("point needs {} coordinates", 2 * self.h())));
        }
        Ok(abs_jet(self.argument(z))?.ln()?.scale(0.5))
    }

    pub fn psi_at(&self, z: &[f64]) -> Result<Jet2, CatalogError> {
        self.psi(&Jet2::seeds(z))
    }

    pub fn in_domain(&self, z: &[f64]) -> bool {
        self.argument(z).abs() >= DOMAIN_MARGIN
    }

    pub fn sample(&self, seed: u64, index: usize) -> Sample {
        let n = 2 * self.h();
        crate::sampling::draw(
            seed,
            index,
            |r| (0..n).map(|_| uniform(r, -BASE_BOX, BASE_BOX)).collect(),
            |z| self.in_domain(z),
        )
    }
}

/// The three left-hand sides of the PDE system at index pair `(i, j)` for a
/// jet `ψ` in the variables `(s_1..s_h, t_1..t_h)`.
pub fn pde_residual(psi: &Jet2, h: usize, i: usize, j: usize) -> [f64; 3] {
    let (si, sj, ti, tj) = (i, j, h + i, h + j);
    let d = |k: usize| psi.d(k);
    [
        psi.d2(si, sj) + d(si) * d(sj) + d(ti) * d(tj),
        psi.d2(si, tj) + d(si) * d(tj) + d(ti) * d(sj),
        psi.d2(ti, tj) + d(ti) * d(tj) + d(si) * d(sj),
    ]
}

/// Largest residual over all index pairs, with the largest term magnitude.
pub fn pde_residual_all(psi: &Jet2, h: usize) -> (f64, f64) {
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 0..h {
        for j in 0..h {
            for r in pde_residual(psi, h, i, j) {
                worst = if r.is_nan() { f64::INFINITY } else { worst.max(r.abs()) };
            }
            for (x, y) in [(i, j), (i, h + j), (h + i, h + j), (h + i, j)] {
                scale = scale.max(psi.d2(x, y).abs()).max((psi.d(x) * psi.d(y)).abs());
            }
        }
    }
    (worst, scale)
}

/// The solution family matching a case's warping function.
pub fn solution_for(case: &ImmersionCase) -> Result<PdeSolution, CatalogError> {
    let case = case.clone().validated()?;
    match case.tag {
        CaseTag::Case1 | CaseTag::Case2 | CaseTag::Case3 => sol1(case.v(), 0.0, 0.0),
        CaseTag::Case4Printed | CaseTag::Case4Corrected => {
            sol2_from(&vec![0.0; case.h], &case.b, case.eps, 1.0, 0.0)
        }
        CaseTag::Custom => Err(invalid("custom cases have no catalog solution")),
    }
}

/// `|ln f - ψ_sol|` at one domain point.
pub fn warp_solution_gap(case: &ImmersionCase, base: &[f64]) -> Result<f64, CatalogError> {
    let w = warp(case, base)?;
    let sol = solution_for(case)?;
    Ok((w.psi.value() - sol.psi_at(base)?.value()).abs())
}

/// `max |ln f - ψ_sol|` over `samples` seeded domain points.
pub fn warp_matches_solution(case: &ImmersionCase, samples: usize, seed: u64) -> Result<f64, CatalogError> {
    let case = case.clone().validated()?;
    let mut worst: f64 = 0.0;
    for i in 0..samples {
        if let Some(pt) = case.sample(seed, i).point {
            worst = worst.max(warp_solution_gap(&case, &pt[..2 * case.h])?);
        }
    }
    Ok(worst)
}

/// Adds `δ Q_a(ξ)` to every image coordinate, with seeded quadratic forms
/// `Q_a`. Breaks the product structure while staying close to the input.
pub struct QuadraticPerturbation {
    inner: Arc<dyn Immersion>,
    amplitude: f64,
    /// `coeffs[a][i*n + j]`, upper triangle used
    coeffs: Vec<Vec<f64>>,
}

impl QuadraticPerturbation {
    pub fn new(inner: Arc<dyn Immersion>, amplitude: f64, seed: u64) -> Self {
        let n = inner.chart_dim();
        let big = inner.ambient().dim();
        let coeffs = (0..big)
            .map(|a| {
                let mut rng = crate::sampling::rng_for(seed, a as u64);
                (0..n * n).map(|_| uniform(&mut rng, -1.0, 1.0)).collect()
            })
            .collect();
        QuadraticPerturbation { inner, amplitude, coeffs }
    }
}

impl Immersion for QuadraticPerturbation {
    fn chart_dim(&self) -> usize {
        self.inner.chart_dim()
    }

    fn ambient(&self) -> Ambient {
        self.inner.ambient()
    }

    fn map(&self, xi: &[Jet2]) -> Result<Vec<Jet2>, GeometryError> {
        let n = xi.len();
        let mut out = self.inner.map(xi)?;
        for (a, y) in out.iter_mut().enumerate() {
            let mut q = Jet2::constant(0.0);
            for i in 0..n {
                for j in i..n {
                    q = q + &xi[i] * &xi[j] * self.coeffs[a][i * n + j];
                }
            }
            *y = &*y + &q.scale(self.amplitude);
        }
        Ok(out)
    }
}

/// `E^{2m}_m → E^{2(m+k)}_{m+k}`, `(x, y) ↦ (x, 0, y, 0)`, composed after
/// an immersion. Totally geodesic and compatible with `𝒫`.
pub struct Reembedded {
    inner: Arc<dyn Immersion>,
    extra: usize,
}

impl Reembedded {
    pub fn new(inner: Arc<dyn Immersion>, extra: usize) -> Self {
        assert!(inner.ambient().is_para_kaehler());
        Reembedded { inner, extra }
    }
}

impl Immersion for Reembedded {
    fn chart_dim(&self) -> usize {
        self.inner.chart_dim()
    }

    fn ambient(&self) -> Ambient {
        Ambient::para_kaehler(self.inner.ambient().dim() / 2 + self.extra)
    }

    fn map(&self, xi: &[Jet2]) -> Result<Vec<Jet2>, GeometryError> {
        let v = self.inner.map(xi)?;
        let m = v.len() / 2;
        let zeros = || std::iter::repeat_n(Jet2::constant(0.0), self.extra);
        Ok(v[..m].iter().cloned().chain(zeros()).chain(v[m..].iter().cloned()).chain(zeros()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn reference_point_values() {
        let case = ImmersionCase::case1_reference();
        let (s, t) = case.warp_data().s_t(&[1.0, 0.2, 0.1, 0.3]);
        assert!(close(s, 1.424264, 5e-7));
        assert!(close(t, 0.382843, 5e-7));
        assert!(close(s * s - t * t, 1.881960, 5e-7));
    }

    #[test]
    fn immerse_at_fiber_origin() {
        let case = ImmersionCase::case1_reference();
        let x = immerse(&case, &[1.0, 0.2, 0.1, 0.3, 0.0, 0.0]).unwrap();
        assert_eq!(x, vec![1.0, 0.2, 0.0, 0.0, 0.1, 0.3, 0.0, 0.0]);
        let case2 = ImmersionCase::new(CaseTag::Case2, 1, 1, vec![1.0], vec![]);
        assert_eq!(immerse(&case2, &[2.0, 1.0, 0.0]).unwrap(), vec![2.0, 0.0, 1.0, 0.0]);
        let x = immerse(&ImmersionCase::case3_reference(), &[1.5, 0.5, 0.75, 0.25, 0.0]).unwrap();
        assert_eq!(x, vec![1.5, 0.5, 0.0, 0.75, 0.25, 0.0]);
    }

    #[test]
    fn parameter_validation() {
        assert!(ImmersionCase::new(CaseTag::Case1, 1, 1, vec![1.0], vec![0.0]).validated().is_err());
        assert!(ImmersionCase::new(CaseTag::Case2, 1, 1, vec![2.0], vec![0.0]).validated().is_err());
        assert!(ImmersionCase::new(CaseTag::Case3, 2, 1, vec![1.0, 0.0], vec![0.5, 1.0]).validated().is_err());
        assert!(ImmersionCase::new(CaseTag::Case4Printed, 1, 1, vec![], vec![-1.0]).validated().is_err());
        assert!(ImmersionCase::case4_corrected(0.0).validated().is_err());
        assert!(ImmersionCase::new(CaseTag::Custom, 1, 1, vec![], vec![]).validated().is_err());
        assert!(ImmersionCase::case1_reference().validated().is_ok());
    }

    #[test]
    fn warp_examples() {
        let case2 = ImmersionCase::new(CaseTag::Case2, 1, 1, vec![1.0], vec![]);
        let w = warp(&case2, &[2.0, 1.0]).unwrap();
        assert!(close(w.f.value(), 3f64.sqrt(), 1e-15));
        assert!(close(w.psi.value(), 0.5493061443340549, 1e-15));
        let w = warp(&ImmersionCase::case4_printed_reference(), &[2.0, 1.0]).unwrap();
        assert_eq!(w.f_squared.value(), 1.0);
        assert!(warp(&case2, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn corrected_case4_closed_form() {
        let x = case4_corrected(1.0, 1, 0.5, &[2.0, 1.0, 0.4]).unwrap();
        let (s, t, u, c) = (2.0, 1.0, 0.4, 0.5);
        let expect = [s + u * u / 4.0, c * u * (s - t) - u / (4.0 * c), t + u * u / 4.0, -c * u * (s - t) - u / (4.0 * c)];
        for (a, b) in x.iter().zip(expect) {
            assert!(close(*a, b, 1e-15));
        }
    }

    #[test]
    fn pde_examples() {
        let s1 = sol1(vec![1.0, 0.0], 0.0, 0.0).unwrap();
        let psi = s1.psi_at(&[2.0, 1.0]).unwrap();
        assert!(pde_residual(&psi, 1, 0, 0).iter().all(|r| r.abs() < 1e-15));
        let s2 = sol2_from(&[0.0, 1.0], &[1.0, 0.0], 1, 0.0, 0.0).unwrap();
        let psi = s2.psi_at(&[1.0, 2.0, 0.5, 0.25]).unwrap();
        assert!(close(psi.value(), 0.5 * 1.125f64.ln(), 1e-15));
        let (r, _) = pde_residual_all(&psi, 2);
        assert!(r < 1e-14);
        assert!(s1.psi_at(&[1.0, 1.0]).is_err());
        assert!(sol1(vec![1.0, 0.5], 0.0, 0.0).is_err());
        assert!(sol2(vec![0.0, 0.0], vec![0.0, 0.0], 0.0, 0.0).is_err());
    }

    #[test]
    fn solution_matches_case2() {
        let case2 = ImmersionCase::new(CaseTag::Case2, 1, 2, vec![1.0], vec![]);
        assert_eq!(warp_solution_gap(&case2, &[2.0, 1.0]).unwrap(), 0.0);
        let g = warp_solution_gap(&ImmersionCase::case4_printed_reference(), &[2.0, 1.0]).unwrap();
        assert_eq!(g, 0.0);
    }

    #[test]
    fn packaging_agrees_for_case2_and_case3() {
        let c2 = ImmersionCase::new(CaseTag::Case2, 2, 2, vec![2f64.sqrt(), 0.0], vec![0.0, 1.0]);
        let c3 = ImmersionCase::case3_reference();
        let c4 = ImmersionCase::case4_printed_reference();
        for (case, pt) in [
            (c2, vec![1.5, 0.2, 0.1, -0.3, 0.7, 0.4]),
            (c3, vec![1.5, 0.2, 0.1, -0.3, 1.2]),
            (c4, vec![1.5, 0.2, 0.9]),
        ] {
            let a = immerse(&case, &pt).unwrap();
            let b = paracomplex_form(&case, &pt).unwrap();
            assert!(a.iter().zip(&b).all(|(x, y)| close(*x, *y, 1e-14)), "{:?}", case.tag);
        }
    }

    #[test]
    fn packaging_flips_case1_correction() {
        let case = ImmersionCase::case1_reference();
        let pt = [1.0, 0.2, 0.1, 0.3, 0.6, -0.4];
        let normative = immerse(&case, &pt).unwrap();
        let packaged = paracomplex_form(&case, &pt).unwrap();
        let m = 4;
        let gap = (0..2).flat_map(|i| [i, m + i]).map(|k| (normative[k] - packaged[k]).abs()).fold(0.0, f64::max);
        assert!(gap > 1e-2);
        // base rows differ by the sign of the correction term only; fiber rows agree
        for i in 0..2 {
            for k in [i, m + i] {
                let z = pt[if k < m { i } else { 2 + i }];
                assert!(close(normative[k] - z, -(packaged[k] - z), 1e-14));
            }
        }
        for k in [2, 3, 6, 7] {
            assert!(close(normative[k], packaged[k], 1e-14));
        }
    }
}
