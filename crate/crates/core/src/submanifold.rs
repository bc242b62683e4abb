//! Immersion analysis in a flat pseudo-Euclidean ambient space.
//!
//! A [`FramedPoint`] evaluates an immersion with seeded jets, so its Jacobian
//! and coordinate Hessian are exact. Everything else (second fundamental
//! form, shape operators, the `P`/`F` and `t`/`f` splittings, the residual
//! checks) is linear algebra on that snapshot through the Gram inverse; no
//! frame is ever orthonormalized.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::geometry::{riemann, Ambient, Christoffel, GeometryError, MetricField, WarpedChart};
use crate::jets::Jet2;
use crate::linalg::{inf_norm, invert_metric, max_abs};

/// A smooth map from a chart of `R^n` into a pseudo-Euclidean space.
pub trait Immersion: Send + Sync {
    fn chart_dim(&self) -> usize;
    fn ambient(&self) -> Ambient;
    /// Image coordinates as jets of the given chart jets.
    fn map(&self, xi: &[Jet2]) -> Result<Vec<Jet2>, GeometryError>;
}

/// Residual together with the magnitude of the quantities it compares.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Residual {
    pub value: f64,
    pub scale: f64,
}

impl Residual {
    pub fn new(value: f64, scale: f64) -> Self {
        Residual { value, scale }
    }

    pub fn max(self, other: Residual) -> Residual {
        Residual { value: max_abs([self.value, other.value]), scale: self.scale.max(other.scale) }
    }

    pub fn within(&self, tol: Tolerance) -> bool {
        self.value <= tol.bound(self.scale)
    }
}

/// `tol_abs + tol_rel · scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { abs: 1e-9, rel: 1e-9 }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Tolerance { abs, rel }
    }

    pub fn bound(&self, scale: f64) -> f64 {
        self.abs + self.rel * scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Causal {
    SpaceLike,
    TimeLike,
    Null,
}

/// Immersion snapshot at one chart point.
#[derive(Debug, Clone)]
pub struct FramedPoint {
    point: Vec<f64>,
    ambient: Ambient,
    image: DVector<f64>,
    jacobian: DMatrix<f64>,
    /// `∂²Φ/∂ξ_i∂ξ_j`, packed for `i ≤ j`
    second: Vec<DVector<f64>>,
    gram: DMatrix<f64>,
    gram_inv: DMatrix<f64>,
    gram_det: f64,
    tangential: DMatrix<f64>,
}

fn pair_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * (2 * n - i + 1) / 2 + (j - i)
}

impl FramedPoint {
    /// Evaluates `imm` at `point`. A Gram matrix below the degeneracy
    /// threshold is reported as [`GeometryError::Degenerate`].
    pub fn new(imm: &dyn Immersion, point: &[f64]) -> Result<Self, GeometryError> {
        let n = imm.chart_dim();
        if point.len() != n {
            return Err(GeometryError::DimensionMismatch { expected: n, got: point.len() });
        }
        let ambient = imm.ambient();
        let big = ambient.dim();
        let out = imm.map(&Jet2::seeds(point))?;
        if out.len() != big {
            return Err(GeometryError::DimensionMismatch { expected: big, got: out.len() });
        }
        let image = DVector::from_fn(big, |a, _| out[a].value());
        let jacobian = DMatrix::from_fn(big, n, |a, i| out[a].d(i));
        let mut second = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                second.push(DVector::from_fn(big, |a, _| out[a].d2(i, j)));
            }
        }
        let g0 = ambient.metric();
        let gram = jacobian.transpose() * &g0 * &jacobian;
        let gram = (&gram + gram.transpose()) * 0.5;
        let inv = invert_metric(&gram)?;
        let tangential = &jacobian * &inv.inverse * jacobian.transpose() * &g0;
        Ok(FramedPoint {
            point: point.to_vec(),
            ambient,
            image,
            jacobian,
            second,
            gram,
            gram_inv: inv.inverse,
            gram_det: inv.det,
            tangential,
        })
    }

    pub fn point(&self) -> &[f64] {
        &self.point
    }

    pub fn dim(&self) -> usize {
        self.jacobian.ncols()
    }

    pub fn ambient(&self) -> Ambient {
        self.ambient
    }

    pub fn image(&self) -> &DVector<f64> {
        &self.image
    }

    pub fn jacobian(&self) -> &DMatrix<f64> {
        &self.jacobian
    }

    /// `∂_iΦ`
    pub fn frame_vector(&self, i: usize) -> DVector<f64> {
        self.jacobian.column(i).into_owned()
    }

    /// `∂²Φ/∂ξ_i∂ξ_j`
    pub fn second_partial(&self, i: usize, j: usize) -> &DVector<f64> {
        &self.second[pair_index(self.dim(), i, j)]
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn gram_inv(&self) -> &DMatrix<f64> {
        &self.gram_inv
    }

    pub fn gram_det(&self) -> f64 {
        self.gram_det
    }

    pub fn causal_pattern(&self) -> Vec<Causal> {
        let scale = max_abs(self.gram.iter().copied()).max(f64::MIN_POSITIVE);
        (0..self.dim())
            .map(|i| {
                let g = self.gram[(i, i)];
                if g.abs() <= 1e-12 * scale {
                    Causal::Null
                } else if g > 0.0 {
                    Causal::SpaceLike
                } else {
                    Causal::TimeLike
                }
            })
            .collect()
    }

    pub fn tangential_projector(&self) -> &DMatrix<f64> {
        &self.tangential
    }

    pub fn normal_projector(&self) -> DMatrix<f64> {
        DMatrix::identity(self.ambient.dim(), self.ambient.dim()) - &self.tangential
    }

    pub fn tan(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.tangential * v
    }

    pub fn nor(&self, v: &DVector<f64>) -> DVector<f64> {
        v - &self.tangential * v
    }

    /// Chart components of the tangential part of `v`.
    pub fn chart_components(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.gram_inv * (self.jacobian.transpose() * self.ambient.lower(v))
    }

    /// Ambient vector with the given chart components.
    pub fn push_forward(&self, c: &DVector<f64>) -> DVector<f64> {
        &self.jacobian * c
    }

    /// The ambient structure `𝒫`.
    ///
    /// # Panics
    /// If the ambient signature is not neutral.
    pub fn structure(&self, v: &DVector<f64>) -> DVector<f64> {
        self.ambient.structure(v).expect("para-Kähler structure needs a neutral ambient")
    }

    fn dot(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        self.ambient.dot(u, v)
    }
}

pub fn pullback_metric(fp: &FramedPoint) -> DMatrix<f64> {
    fp.gram().clone()
}

/// `max |G - g(ξ)|` against a target metric field.
pub fn isometry_residual(fp: &FramedPoint, target: &dyn MetricField) -> Result<Residual, GeometryError> {
    let g = target.metric_at(fp.point())?;
    let value = max_abs((fp.gram() - &g).iter().copied());
    Ok(Residual::new(value, max_abs(g.iter().copied())))
}

/// Second fundamental form `σ_ij = N(∂²Φ/∂ξ_i∂ξ_j)`.
#[derive(Debug, Clone)]
pub struct SecondFF {
    n: usize,
    entries: Vec<DVector<f64>>,
}

impl SecondFF {
    pub fn get(&self, i: usize, j: usize) -> &DVector<f64> {
        &self.entries[pair_index(self.n, i, j)]
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `σ(X, ∂_j)` for a tangent vector with chart components `x`.
    pub fn apply(&self, x: &DVector<f64>, j: usize) -> DVector<f64> {
        let mut out = DVector::zeros(self.entries[0].len());
        for i in 0..self.n {
            if x[i] != 0.0 {
                out += self.get(i, j) * x[i];
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(self.entries.iter().flat_map(|v| v.iter().copied()))
    }

    /// Largest tangential component of any `σ_ij`.
    pub fn normality_residual(&self, fp: &FramedPoint) -> f64 {
        max_abs(self.entries.iter().map(|v| inf_norm(&fp.tan(v))))
    }
}

pub fn second_ff(fp: &FramedPoint) -> SecondFF {
    let n = fp.dim();
    let entries = fp.second.iter().map(|h| fp.nor(h)).collect();
    SecondFF { n, entries }
}

/// Chart index sets of the invariant distribution `D` and the anti-invariant
/// distribution `D⊥`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistributionSplit {
    pub invariant: Vec<usize>,
    pub anti_invariant: Vec<usize>,
}

impl DistributionSplit {
    /// `D` spanned by `∂s, ∂t`, `D⊥` by `∂u`.
    pub fn warped(h: usize, p: usize) -> Self {
        DistributionSplit { invariant: (0..2 * h).collect(), anti_invariant: (2 * h..2 * h + p).collect() }
    }

    /// Residuals of `𝒫D ⊆ TM` and `𝒫D⊥ ⊆ T⊥M`.
    pub fn residuals(&self, fp: &FramedPoint) -> (f64, f64) {
        let inv = max_abs(self.invariant.iter().map(|&i| inf_norm(&fp.nor(&fp.structure(&fp.frame_vector(i))))));
        let anti =
            max_abs(self.anti_invariant.iter().map(|&a| inf_norm(&fp.tan(&fp.structure(&fp.frame_vector(a))))));
        (inv, anti)
    }
}

fn contract(fp: &FramedPoint, sff: &SecondFF, rows: &[usize], cols: &[usize]) -> f64 {
    let gi = fp.gram_inv();
    let mut total = 0.0;
    for &i in rows {
        for &k in rows {
            if gi[(i, k)] == 0.0 {
                continue;
            }
            for &j in cols {
                for &l in cols {
                    total += gi[(i, k)] * gi[(j, l)] * fp.dot(sff.get(i, j), sff.get(k, l));
                }
            }
        }
    }
    total
}

/// `S_σ = G^{ik} G^{jl} g₀(σ_ij, σ_kl)`.
pub fn s_sigma(fp: &FramedPoint, sff: &SecondFF) -> f64 {
    let all: Vec<usize> = (0..fp.dim()).collect();
    contract(fp, sff, &all, &all)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaBlocks {
    pub dd: f64,
    pub dd_perp: f64,
    pub dperp_dperp: f64,
}

impl SigmaBlocks {
    pub fn total(&self) -> f64 {
        self.dd + 2.0 * self.dd_perp + self.dperp_dperp
    }
}

pub fn sigma_blocks(fp: &FramedPoint, sff: &SecondFF, split: &DistributionSplit) -> SigmaBlocks {
    SigmaBlocks {
        dd: contract(fp, sff, &split.invariant, &split.invariant),
        dd_perp: contract(fp, sff, &split.invariant, &split.anti_invariant),
        dperp_dperp: contract(fp, sff, &split.anti_invariant, &split.anti_invariant),
    }
}

/// Largest component of `σ` restricted to the index pairs `rows × cols`.
pub fn sigma_block_max(sff: &SecondFF, rows: &[usize], cols: &[usize]) -> f64 {
    max_abs(rows.iter().flat_map(|&i| cols.iter().flat_map(move |&j| sff.get(i, j).iter().copied())))
}

/// `H = (1/n) G^{ij} σ_ij`.
pub fn mean_curvature(fp: &FramedPoint, sff: &SecondFF) -> DVector<f64> {
    let n = fp.dim();
    let gi = fp.gram_inv();
    let mut h = DVector::zeros(fp.ambient().dim());
    for i in 0..n {
        for j in 0..n {
            h += sff.get(i, j) * gi[(i, j)];
        }
    }
    h / n as f64
}

pub fn is_minimal(h: &DVector<f64>, tol: f64) -> bool {
    inf_norm(h) <= tol
}

pub fn is_quasi_minimal(h: &DVector<f64>, ambient: Ambient, tol: f64) -> bool {
    ambient.dot(h, h).abs() <= tol && inf_norm(h) > tol
}

/// `(PX, FX) = (tan 𝒫X, nor 𝒫X)` for a tangent vector `X`.
pub fn pf_decompose(fp: &FramedPoint, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let px = fp.structure(x);
    let t = fp.tan(&px);
    let f = &px - &t;
    (t, f)
}

/// `(tξ, fξ) = (tan 𝒫ξ, nor 𝒫ξ)` for a normal vector `ξ`.
pub fn tf_decompose(fp: &FramedPoint, xi: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    pf_decompose(fp, xi)
}

/// `max_i ‖F(P ∂_i)‖∞`.
pub fn check_fp_zero(fp: &FramedPoint) -> Residual {
    let mut worst = Residual::default();
    for i in 0..fp.dim() {
        let x = fp.frame_vector(i);
        let (p, _) = pf_decompose(fp, &x);
        let (_, fp_x) = pf_decompose(fp, &p);
        worst = worst.max(Residual::new(inf_norm(&fp_x), inf_norm(&x)));
    }
    worst
}

/// Shape operator `A_ξ` in chart components: column `i` holds `A_ξ ∂_i`,
/// defined by `g(A_ξ X, Y) = g₀(σ(X, Y), ξ)`.
pub fn shape_operator(fp: &FramedPoint, sff: &SecondFF, xi: &DVector<f64>) -> DMatrix<f64> {
    let n = fp.dim();
    let pairing = DMatrix::from_fn(n, n, |l, i| fp.dot(sff.get(i, l), xi));
    fp.gram_inv() * pairing
}

/// Ambient vectors spanning the normal complement `ν` of `𝒫D⊥`, and its
/// dimension.
pub fn nu_spanning_set(fp: &FramedPoint, split: &DistributionSplit) -> (Vec<DVector<f64>>, usize) {
    let big = fp.ambient().dim();
    let dim = big.saturating_sub(fp.dim() + split.anti_invariant.len());
    if dim == 0 {
        return (Vec::new(), 0);
    }
    let proj = nu_projector(fp, split);
    let basis = (0..big)
        .map(|a| {
            let mut e = DVector::zeros(big);
            e[a] = 1.0;
            &proj * e
        })
        .filter(|v| inf_norm(v) > 1e-12)
        .collect();
    (basis, dim)
}

/// Linear map sending an ambient vector to the `ν` part of its normal
/// component.
pub fn nu_projector(fp: &FramedPoint, split: &DistributionSplit) -> DMatrix<f64> {
    let big = fp.ambient().dim();
    let normal = fp.normal_projector();
    let q = split.anti_invariant.len();
    if q == 0 {
        return normal;
    }
    let pz = DMatrix::from_fn(big, q, |a, b| fp.structure(&fp.frame_vector(split.anti_invariant[b]))[a]);
    let g0 = fp.ambient().metric();
    let k = pz.transpose() * &g0 * &pz;
    let kinv = match invert_metric(&k) {
        Ok(inv) => inv.inverse,
        Err(_) => return normal,
    };
    let proj = &pz * kinv * pz.transpose() * g0;
    (DMatrix::identity(big, big) - proj) * normal
}

/// `‖σ_ν^D‖₂ = g₀(σ_ν(D,D), σ_ν(D,D))`.
pub fn sigma_nu_d(fp: &FramedPoint, sff: &SecondFF, split: &DistributionSplit) -> f64 {
    let proj = nu_projector(fp, split);
    let n = sff.dim();
    let mut entries = Vec::with_capacity(sff.entries.len());
    for i in 0..n {
        for j in i..n {
            entries.push(&proj * sff.get(i, j));
        }
    }
    let nu = SecondFF { n, entries };
    contract(fp, &nu, &split.invariant, &split.invariant)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ShapeOperatorResiduals {
    /// `g(A_{FZ}U, PX) - g(∇_U Z, X)`
    pub a: Residual,
    /// `A_{FZ}W - A_{FW}Z`
    pub b_symmetry: Residual,
    /// `A_{fξ}X + A_ξ PX` for `ξ ∈ ν`
    pub b_nu: Residual,
}

/// Both shape-operator identities. `∇` is the intrinsic connection
/// supplied as Christoffel symbols with `metric` its metric, so `Z` is
/// realized as the coordinate field `∂_a`.
pub fn shape_operator_check(
    fp: &FramedPoint,
    sff: &SecondFF,
    split: &DistributionSplit,
    connection: &Christoffel,
    metric: &DMatrix<f64>,
) -> ShapeOperatorResiduals {
    let n = fp.dim();
    let gram = fp.gram();
    let f_of = |a: usize| pf_decompose(fp, &fp.frame_vector(a)).1;
    let p_chart = |x: usize| fp.chart_components(&pf_decompose(fp, &fp.frame_vector(x)).0);
    let shapes: Vec<(usize, DMatrix<f64>)> =
        split.anti_invariant.iter().map(|&z| (z, shape_operator(fp, sff, &f_of(z)))).collect();

    let mut out = ShapeOperatorResiduals::default();
    for (z, a_fz) in &shapes {
        for &x in &split.invariant {
            let px = p_chart(x);
            for u in 0..n {
                let lhs = (a_fz.column(u).transpose() * gram * &px)[(0, 0)];
                let rhs: f64 = (0..n).map(|m| connection.get(m, u, *z) * metric[(m, x)]).sum();
                out.a = out.a.max(Residual::new(lhs - rhs, lhs.abs().max(rhs.abs())));
            }
        }
    }
    for (z, a_fz) in &shapes {
        for (w, a_fw) in &shapes {
            let d = max_abs((a_fz.column(*w) - a_fw.column(*z)).iter().copied());
            let s = max_abs(a_fz.column(*w).iter().chain(a_fw.column(*z).iter()).copied());
            out.b_symmetry = out.b_symmetry.max(Residual::new(d, s));
        }
    }
    let (nu, _) = nu_spanning_set(fp, split);
    for xi in &nu {
        let (_, f_xi) = tf_decompose(fp, xi);
        let a_fxi = shape_operator(fp, sff, &f_xi);
        let a_xi = shape_operator(fp, sff, xi);
        for &x in &split.invariant {
            let lhs = a_fxi.column(x).into_owned();
            let rhs = &a_xi * p_chart(x);
            let s = max_abs(lhs.iter().chain(rhs.iter()).copied());
            out.b_nu = out.b_nu.max(Residual::new(inf_norm(&(&lhs + &rhs)), s));
        }
    }
    out
}

/// `max ‖A_{FZ}X - PX(μ) Z‖∞` over `X ∈ D`, `Z ∈ D⊥`, plus `max |W(μ)|`
/// over `W ∈ D⊥`; `mu_grad` is the chart gradient of `μ`.
pub fn warped_characterization_check(
    fp: &FramedPoint,
    sff: &SecondFF,
    split: &DistributionSplit,
    mu_grad: &[f64],
) -> Residual {
    let n = fp.dim();
    let mut worst = Residual::default();
    for &w in &split.anti_invariant {
        worst = worst.max(Residual::new(mu_grad[w], 0.0));
    }
    for &z in &split.anti_invariant {
        let fz = pf_decompose(fp, &fp.frame_vector(z)).1;
        let a = shape_operator(fp, sff, &fz);
        for &x in &split.invariant {
            let px = fp.chart_components(&pf_decompose(fp, &fp.frame_vector(x)).0);
            let px_mu: f64 = (0..n).map(|k| px[k] * mu_grad[k]).sum();
            let mut expected = DVector::zeros(n);
            expected[z] = px_mu;
            let col = a.column(x).into_owned();
            let s = inf_norm(&col).max(px_mu.abs());
            worst = worst.max(Residual::new(inf_norm(&(col - expected)), s));
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FiberSign {
    SpaceLike,
    TimeLike,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityOutcome {
    /// `S_σ`
    pub lhs: f64,
    /// `2p ‖∇ ln f‖₂ + ‖σ_ν^D‖₂`
    pub rhs: f64,
    pub nu_term: f64,
    /// Non-negative exactly when the inequality holds in the direction fixed
    /// by the fiber sign.
    pub margin: f64,
}

/// Evaluates `S_σ ≤ 2p‖∇ln f‖₂ + ‖σ_ν^D‖₂` (space-like fibers) or the
/// reversed inequality (time-like fibers). `grad_ln_f` is the chart gradient.
pub fn inequality_check(
    fp: &FramedPoint,
    sff: &SecondFF,
    split: &DistributionSplit,
    grad_ln_f: &[f64],
    fiber_sign: FiberSign,
) -> InequalityOutcome {
    let lhs = s_sigma(fp, sff);
    let d = DVector::from_column_slice(grad_ln_f);
    let grad_norm = d.dot(&(fp.gram_inv() * &d));
    let nu_term = if nu_spanning_set(fp, split).1 > 0 { sigma_nu_d(fp, sff, split) } else { 0.0 };
    let rhs = 2.0 * split.anti_invariant.len() as f64 * grad_norm + nu_term;
    let margin = match fiber_sign {
        FiberSign::SpaceLike => rhs - lhs,
        FiberSign::TimeLike => lhs - rhs,
    };
    InequalityOutcome { lhs, rhs, nu_term, margin }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SplitResiduals {
    /// `g₀(σ(D, D⊥), 𝒫D⊥)`; informational.
    pub mixed_pairing: Residual,
    /// `g₀(σ(D, D), 𝒫D⊥)`
    pub invariant_pairing: Residual,
    /// Least-squares misfit of `σ(X,Y) = g(X,PY) F Z₀ (mod ν)`.
    pub umbilic_fit: Residual,
    /// `σ(PX, Y) - σ(X, PY)`
    pub integrability: Residual,
}

pub fn split_checks(fp: &FramedPoint, sff: &SecondFF, split: &DistributionSplit) -> SplitResiduals {
    let mut out = SplitResiduals::default();
    let d = &split.invariant;
    let pw: Vec<DVector<f64>> = split.anti_invariant.iter().map(|&w| fp.structure(&fp.frame_vector(w))).collect();
    let scale_of = |v: &DVector<f64>, w: &DVector<f64>| inf_norm(v) * inf_norm(w);
    for &x in d {
        for w in &pw {
            for &z in &split.anti_invariant {
                let s = sff.get(x, z);
                out.mixed_pairing = out.mixed_pairing.max(Residual::new(fp.dot(s, w), scale_of(s, w)));
            }
            for &y in d {
                let s = sff.get(x, y);
                out.invariant_pairing = out.invariant_pairing.max(Residual::new(fp.dot(s, w), scale_of(s, w)));
            }
        }
    }

    let p_chart: Vec<DVector<f64>> =
        d.iter().map(|&x| fp.chart_components(&pf_decompose(fp, &fp.frame_vector(x)).0)).collect();
    let sigma_scale = sff.max_abs();
    for (ix, &x) in d.iter().enumerate() {
        for (iy, &y) in d.iter().enumerate() {
            let a = sff.apply(&p_chart[ix], y);
            let b = sff.apply(&p_chart[iy], x);
            // roundoff in the chart components of PX is amplified by the full σ
            let s = sigma_scale * inf_norm(&p_chart[ix]).max(inf_norm(&p_chart[iy]));
            let s = s.max(inf_norm(&a)).max(inf_norm(&b));
            out.integrability = out.integrability.max(Residual::new(inf_norm(&(a - b)), s));
        }
    }

    let q = split.anti_invariant.len();
    let big = fp.ambient().dim();
    let nu = nu_projector(fp, split);
    let fz: Vec<DVector<f64>> =
        split.anti_invariant.iter().map(|&z| pf_decompose(fp, &fp.frame_vector(z)).1).collect();
    let rows = big * d.len() * d.len();
    let mut lhs = DMatrix::zeros(rows, q.max(1));
    let mut rhs = DVector::zeros(rows);
    let mut r = 0;
    for &x in d {
        for (iy, &y) in d.iter().enumerate() {
            let g_xpy = fp.dot(&fp.frame_vector(x), &fp.push_forward(&p_chart[iy]));
            let target = sff.get(x, y) - &nu * sff.get(x, y);
            for a in 0..big {
                for (c, f) in fz.iter().enumerate() {
                    lhs[(r + a, c)] = g_xpy * f[a];
                }
                rhs[r + a] = target[a];
            }
            r += big;
        }
    }
    let fitted = if q == 0 {
        DVector::zeros(rows)
    } else {
        let svd = lhs.clone().svd(true, true);
        match svd.solve(&rhs, 1e-12) {
            Ok(coef) => &lhs * coef,
            Err(_) => DVector::zeros(rows),
        }
    };
    out.umbilic_fit = Residual::new(inf_norm(&(&rhs - fitted)), inf_norm(&rhs));
    out
}

/// Chart Christoffel symbols of the induced metric,
/// `Γ^m_ij = G^{ml} g₀(∂²Φ/∂ξ_i∂ξ_j, ∂_lΦ)`.
pub fn induced_connection(fp: &FramedPoint) -> Christoffel {
    let n = fp.dim();
    let mut gamma = Christoffel::zeros(n);
    for i in 0..n {
        for j in i..n {
            let c = fp.chart_components(fp.second_partial(i, j));
            for m in 0..n {
                gamma.set_sym(m, i, j, c[m]);
            }
        }
    }
    gamma
}

/// Gauss equation in a flat ambient:
/// `g(R(∂_i,∂_j)∂_k, ∂_l) = g₀(σ_jk, σ_il) - g₀(σ_ik, σ_jl)`, with the
/// left side computed from `intrinsic`, the metric field of the chart.
pub fn gauss_residual(
    fp: &FramedPoint,
    sff: &SecondFF,
    intrinsic: &dyn MetricField,
) -> Result<Residual, GeometryError> {
    let n = fp.dim();
    let r = riemann(intrinsic, fp.point())?;
    let g = intrinsic.metric_at(fp.point())?;
    let mut worst = Residual::default();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let lhs = r.lowered(&g, l, k, i, j);
                    let a = fp.dot(sff.get(j, k), sff.get(i, l));
                    let b = fp.dot(sff.get(i, k), sff.get(j, l));
                    let s = lhs.abs().max(a.abs()).max(b.abs());
                    worst = worst.max(Residual::new(lhs - (a - b), s));
                }
            }
        }
    }
    Ok(worst)
}

/// Codazzi equation in a flat ambient: the normal part of
/// `(∇̄_i σ)_jk - (∇̄_j σ)_ik` must vanish. Coordinate derivatives of `σ` are
/// taken by Richardson-extrapolated central differences with base `step`.
pub fn codazzi_residual(imm: &dyn Immersion, point: &[f64], step: f64) -> Result<Residual, GeometryError> {
    let fp = FramedPoint::new(imm, point)?;
    let sff = second_ff(&fp);
    let gamma = induced_connection(&fp);
    let n = fp.dim();

    let sigma_at = |shifted: Vec<f64>| -> Result<SecondFF, GeometryError> {
        Ok(second_ff(&FramedPoint::new(imm, &shifted)?))
    };
    // d_sigma[i][pair(j,k)] ≈ ∂_i σ_jk
    let mut d_sigma: Vec<Vec<DVector<f64>>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut diffs = Vec::with_capacity(2);
        for h in [step, step / 2.0] {
            let mut up = point.to_vec();
            let mut dn = point.to_vec();
            up[i] += h;
            dn[i] -= h;
            let (a, b) = (sigma_at(up)?, sigma_at(dn)?);
            diffs.push((0..a.entries.len()).map(|e| (&a.entries[e] - &b.entries[e]) / (2.0 * h)).collect::<Vec<_>>());
        }
        d_sigma.push((0..diffs[0].len()).map(|e| (&diffs[1][e] * 4.0 - &diffs[0][e]) / 3.0).collect());
    }

    let mut worst = Residual::default();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            for k in 0..n {
                let a = &d_sigma[i][pair_index(n, j, k)];
                let b = &d_sigma[j][pair_index(n, i, k)];
                let mut v = fp.nor(&(a - b));
                for m in 0..n {
                    v -= sff.get(j, m) * gamma.get(m, i, k);
                    v += sff.get(i, m) * gamma.get(m, j, k);
                }
                let s = inf_norm(a).max(inf_norm(b));
                worst = worst.max(Residual::new(inf_norm(&v), s));
            }
        }
    }
    Ok(worst)
}

/// Restriction of an immersion to the coordinates in `free`, the others
/// frozen at `base`.
pub struct LeafImmersion {
    inner: Arc<dyn Immersion>,
    base: Vec<f64>,
    free: Vec<usize>,
}

impl LeafImmersion {
    pub fn new(inner: Arc<dyn Immersion>, base: Vec<f64>, free: Vec<usize>) -> Self {
        assert_eq!(base.len(), inner.chart_dim());
        LeafImmersion { inner, base, free }
    }

    /// Point of the leaf chart through the frozen base point.
    pub fn leaf_point(&self) -> Vec<f64> {
        self.free.iter().map(|&i| self.base[i]).collect()
    }
}

impl Immersion for LeafImmersion {
    fn chart_dim(&self) -> usize {
        self.free.len()
    }

    fn ambient(&self) -> Ambient {
        self.inner.ambient()
    }

    fn map(&self, xi: &[Jet2]) -> Result<Vec<Jet2>, GeometryError> {
        let mut full: Vec<Jet2> = self.base.iter().map(|&x| Jet2::constant(x)).collect();
        for (slot, &i) in self.free.iter().enumerate() {
            full[i] = xi[slot].clone();
        }
        self.inner.map(&full)
    }
}

/// Immersion bundled with its warped chart and distribution split.
#[derive(Clone)]
pub struct WarpedProduct {
    pub immersion: Arc<dyn Immersion>,
    pub chart: WarpedChart,
    pub split: DistributionSplit,
}

impl WarpedProduct {
    pub fn new(immersion: Arc<dyn Immersion>, chart: WarpedChart) -> Self {
        let split = DistributionSplit::warped(chart.h, chart.fiber.dim);
        WarpedProduct { immersion, chart, split }
    }

    pub fn frame(&self, point: &[f64]) -> Result<FramedPoint, GeometryError> {
        FramedPoint::new(self.immersion.as_ref(), point)
    }

    /// `N_⊤ × {u}` through `point`.
    pub fn base_leaf(&self, point: &[f64]) -> LeafImmersion {
        LeafImmersion::new(self.immersion.clone(), point.to_vec(), self.split.invariant.clone())
    }

    /// `{(s,t)} × N_⊥` through `point`.
    pub fn fiber_leaf(&self, point: &[f64]) -> LeafImmersion {
        LeafImmersion::new(self.immersion.clone(), point.to_vec(), self.split.anti_invariant.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LeafResiduals {
    /// `σ` of the base leaf.
    pub base_leaf_geodesic: Residual,
    /// `σ(Z,W) - g(Z,W) H` on the fiber leaf.
    pub fiber_leaf_umbilic: Residual,
    /// `‖∇f‖₂ - k`
    pub grad_norm: Residual,
    pub grad_norm_value: f64,
}

pub fn leaf_checks(wp: &WarpedProduct, point: &[f64]) -> Result<LeafResiduals, GeometryError> {
    let base = wp.base_leaf(point);
    let fb = FramedPoint::new(&base, &base.leaf_point())?;
    let sb = second_ff(&fb);
    let base_leaf_geodesic = Residual::new(sb.max_abs(), max_abs(fb.second.iter().map(inf_norm)));

    let fiber = wp.fiber_leaf(point);
    let ff = FramedPoint::new(&fiber, &fiber.leaf_point())?;
    let sf = second_ff(&ff);
    let h = mean_curvature(&ff, &sf);
    let mut umbilic = Residual::default();
    for z in 0..ff.dim() {
        for w in 0..ff.dim() {
            let d = sf.get(z, w) - &h * ff.gram()[(z, w)];
            umbilic = umbilic.max(Residual::new(inf_norm(&d), inf_norm(sf.get(z, w))));
        }
    }

    let warp = wp.chart.warp_at(point)?;
    let metric = wp.chart.metric_at(point)?;
    let value = crate::geometry::grad_sq_norm(&warp.f.grad_padded(point.len()), &metric)?;
    let k = wp.chart.fiber.curvature();
    let terms = max_abs(warp.f.grad().iter().map(|d| d * d));
    Ok(LeafResiduals {
        base_leaf_geodesic,
        fiber_leaf_umbilic: umbilic,
        grad_norm: Residual::new(value - k, terms),
        grad_norm_value: value,
    })
}
