//! Bosonic quantisation on polynomial and Gaussian sections over a symplectic
//! space. Sections are written `ψ = φ·e^{-q_J/4}` with `q_J = ω(·, J·)` and
//! only the prefactor `φ` is stored.

use crate::error::{Error, Result};
use crate::phase_space::{projection_p, unitary_frame, ComplexStructure, Family, LinearPhaseSpace};
use crate::scalars_matrices::{gauss_hermite, hermitian_eigen, tracked_root, CMatrix, C64, I, ONE, ZERO};
use crate::symm_space::{
    cut_locus_det, geodesic_between, half_form_transport, triangle_curvature_integral, GeodesicPath, DET_REFUSAL,
};
use nalgebra::DMatrix;
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};
use std::ops::{Add, Mul, Neg, Sub};

/// Upper bound on the total degree accepted by the moment recursion.
pub const MAX_WICK_DEGREE: u32 = 24;
pub const DEFAULT_QUADRATURE_NODES: usize = 40;
const ROOT_SAMPLES: usize = 64;

/// Polynomial in the real coordinates of V with complex coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, C64>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: C64) -> Self {
        let mut p = Self::zero(nvars);
        p.push(vec![0; nvars], c);
        p
    }

    /// `Σ ℓ_i x_i`.
    pub fn linear(coeffs: &[C64]) -> Self {
        let n = coeffs.len();
        let mut p = Self::zero(n);
        for (i, &c) in coeffs.iter().enumerate() {
            let mut e = vec![0; n];
            e[i] = 1;
            p.push(e, c);
        }
        p
    }

    pub fn monomial(exps: Vec<u32>, c: C64) -> Self {
        let mut p = Self::zero(exps.len());
        p.push(exps, c);
        p
    }

    fn push(&mut self, e: Vec<u32>, c: C64) {
        if c == ZERO {
            return;
        }
        let v = *self.terms.get(&e).unwrap_or(&ZERO) + c;
        if v == ZERO {
            self.terms.remove(&e);
        } else {
            self.terms.insert(e, v);
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> &BTreeMap<Vec<u32>, C64> {
        &self.terms
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut p = Self::zero(self.nvars);
        for (e, &c) in &self.terms {
            p.push(e.clone(), c * s);
        }
        p
    }

    pub fn conj(&self) -> Self {
        Polynomial { nvars: self.nvars, terms: self.terms.iter().map(|(e, c)| (e.clone(), c.conj())).collect() }
    }

    /// Directional derivative `L_v p` (v may be complex).
    pub fn derivative(&self, v: &[C64]) -> Self {
        let mut p = Self::zero(self.nvars);
        for (e, &c) in &self.terms {
            for (i, &vi) in v.iter().enumerate() {
                if e[i] > 0 && vi != ZERO {
                    let mut f = e.clone();
                    f[i] -= 1;
                    p.push(f, c * vi * e[i] as f64);
                }
            }
        }
        p
    }

    pub fn eval(&self, x: &[C64]) -> C64 {
        self.terms
            .iter()
            .map(|(e, &c)| e.iter().zip(x).fold(c, |acc, (&k, &xi)| acc * xi.powu(k)))
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.norm()))
    }

    pub fn max_abs_diff(&self, other: &Polynomial) -> f64 {
        (self - other).max_abs()
    }

    /// Drops coefficients below `tol`.
    pub fn pruned(&self, tol: f64) -> Self {
        Polynomial {
            nvars: self.nvars,
            terms: self.terms.iter().filter(|(_, c)| c.norm() > tol).map(|(e, c)| (e.clone(), *c)).collect(),
        }
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, o: &Polynomial) -> Polynomial {
        let mut p = self.clone();
        for (e, &c) in &o.terms {
            p.push(e.clone(), c);
        }
        p
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, o: &Polynomial) -> Polynomial {
        self + &(-o)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-ONE)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, o: &Polynomial) -> Polynomial {
        let mut p = Polynomial::zero(self.nvars);
        for (e, &c) in &self.terms {
            for (f, &d) in &o.terms {
                let g: Vec<u32> = e.iter().zip(f).map(|(a, b)| a + b).collect();
                p.push(g, c * d);
            }
        }
        p
    }
}

/// `S_J = ΩJ`, the matrix of `q_J`.
pub fn q_matrix(space: &LinearPhaseSpace, j: &ComplexStructure) -> CMatrix {
    space.form.matmul(&j.j)
}

fn require_symplectic(space: &LinearPhaseSpace) -> Result<()> {
    if space.kind != Family::Symplectic {
        return Err(Error::Invalid("bosonic quantisation needs a symplectic space".into()));
    }
    Ok(())
}

fn bilin(m: &CMatrix, x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(m.mul_vec(y)).map(|(a, b)| a * b).sum()
}

fn sym(m: &CMatrix) -> CMatrix {
    (m + &m.transpose()).scale_re(0.5)
}

fn real_vec(x: &[f64]) -> Vec<C64> {
    x.iter().map(|&v| C64::from(v)).collect()
}

/// Complex coordinate functionals `x ↦ x^i` of the unitary frame of `J`.
pub fn holomorphic_coordinates(space: &LinearPhaseSpace, j: &ComplexStructure) -> Result<Vec<Polynomial>> {
    let f = unitary_frame(j, space)?.matrix;
    // x^i = -iω(x, ē_i)
    Ok((0..space.n)
        .map(|i| {
            let eb: Vec<C64> = f.column(i).iter().map(|z| z.conj()).collect();
            let l: Vec<C64> = space.form.mul_vec(&eb).into_iter().map(|z| -I * z).collect();
            Polynomial::linear(&l)
        })
        .collect())
}

/// `∏ (x^i)^{k_i}` in the unitary frame of `J`.
pub fn holomorphic_monomial(space: &LinearPhaseSpace, j: &ComplexStructure, exps: &[u32]) -> Result<Polynomial> {
    let coords = holomorphic_coordinates(space, j)?;
    let mut p = Polynomial::constant(space.dim(), ONE);
    for (z, &k) in coords.iter().zip(exps) {
        for _ in 0..k {
            p = &p * z;
        }
    }
    Ok(p)
}

/// `φ·e^{-q_J/4}` with polynomial `φ`.
#[derive(Clone, Debug)]
pub struct PolynomialSection {
    pub j: ComplexStructure,
    pub p: Polynomial,
}

impl PolynomialSection {
    pub fn new(j: ComplexStructure, p: Polynomial) -> Self {
        PolynomialSection { j, p }
    }

    /// `∇_x = L_x + (i/2)ω(x,·)` pushed through the Gaussian factor.
    pub fn nabla(&self, space: &LinearPhaseSpace, x: &[C64]) -> Self {
        let s = q_matrix(space, &self.j);
        let qx: Vec<C64> = s.mul_vec(x);
        let wx: Vec<C64> = space.form.transpose().mul_vec(x);
        let lin: Vec<C64> = qx.iter().zip(&wx).map(|(&a, &b)| -0.5 * a + 0.5 * I * b).collect();
        let p = &self.p.derivative(x) + &(&Polynomial::linear(&lin) * &self.p);
        PolynomialSection { j: self.j.clone(), p }
    }

    /// `α̂ = i∇_{ν⁻¹α} + α` with `ν(x) = ω(x,·)`.
    pub fn prequant(&self, space: &LinearPhaseSpace, alpha: &[C64]) -> Self {
        let v = space.form.mul_vec(alpha);
        let a = self.nabla(space, &v);
        let p = &a.p.scale(I) + &(&Polynomial::linear(alpha) * &self.p);
        PolynomialSection { j: self.j.clone(), p }
    }

    /// `α̂` on holomorphic prefactors: `iL_{ν⁻¹α^{0,1}}φ + α^{1,0}φ`.
    pub fn prequant_holomorphic(&self, space: &LinearPhaseSpace, alpha: &[C64]) -> Self {
        let pj = projection_p(&self.j);
        let a10 = pj.transpose().mul_vec(alpha);
        let a01: Vec<C64> = alpha.iter().zip(&a10).map(|(a, b)| a - b).collect();
        let v = space.form.mul_vec(&a01);
        let p = &self.p.derivative(&v).scale(I) + &(&Polynomial::linear(&a10) * &self.p);
        PolynomialSection { j: self.j.clone(), p }
    }

    /// Largest antiholomorphic derivative coefficient of the prefactor.
    pub fn holomorphy_residual(&self, space: &LinearPhaseSpace) -> Result<f64> {
        let f = unitary_frame(&self.j, space)?.matrix;
        Ok((0..space.n)
            .map(|i| {
                let eb: Vec<C64> = f.column(i).iter().map(|z| z.conj()).collect();
                self.p.derivative(&eb).max_abs()
            })
            .fold(0.0, f64::max))
    }

    pub fn is_holomorphic(&self, space: &LinearPhaseSpace, tol: f64) -> Result<bool> {
        Ok(self.holomorphy_residual(space)? <= tol)
    }

    pub fn eval(&self, space: &LinearPhaseSpace, x: &[f64]) -> C64 {
        let xc = real_vec(x);
        let q = bilin(&q_matrix(space, &self.j), &xc, &xc);
        self.p.eval(&xc) * (-0.25 * q).exp()
    }
}

/// `det(M)^{-1/2}`, continued from `Re M` along `Re M + s·i Im M`.
pub fn gaussian_det_factor(m: &CMatrix) -> Result<C64> {
    let re = sym(&m.real_part());
    let (ev, _) = hermitian_eigen(&re);
    if ev.iter().any(|&e| e <= 0.0) {
        return Err(Error::Invalid("real part of the Gaussian exponent is not positive definite".into()));
    }
    let im = m.map(|z| C64::from(z.im));
    let dets: Vec<C64> = (0..=ROOT_SAMPLES)
        .map(|k| (&re + &im.scale(C64::new(0.0, k as f64 / ROOT_SAMPLES as f64))).det())
        .collect::<Result<_>>()?;
    Ok(1.0 / tracked_root(&dets, 2)?.value)
}

/// `∫ exp(-½yᵀMy + bᵀy) p(y) d^{2n}y/(2π)ⁿ`, with moments from the
/// Stein recursion `E[y_i f] = m_i E[f] + Σ_j C_ij E[∂_j f]`.
pub fn gaussian_moment_integral(m: &CMatrix, b: &[C64], p: &Polynomial) -> Result<C64> {
    if p.degree() > MAX_WICK_DEGREE {
        return Err(Error::Invalid(format!("degree {} exceeds {MAX_WICK_DEGREE}", p.degree())));
    }
    let cov = m.inverse()?;
    let mean = cov.mul_vec(b);
    let pref = gaussian_det_factor(m)? * (0.5 * b.iter().zip(&mean).map(|(x, y)| x * y).sum::<C64>()).exp();
    let mut memo: HashMap<Vec<u32>, C64> = HashMap::new();
    let mut total = ZERO;
    for (e, &c) in p.terms() {
        total += c * moment(e, &mean, &cov, &mut memo);
    }
    Ok(pref * total)
}

fn moment(e: &[u32], mean: &[C64], cov: &CMatrix, memo: &mut HashMap<Vec<u32>, C64>) -> C64 {
    let Some(i) = e.iter().position(|&k| k > 0) else {
        return ONE;
    };
    if let Some(v) = memo.get(e) {
        return *v;
    }
    let mut rest = e.to_vec();
    rest[i] -= 1;
    let mut v = mean[i] * moment(&rest, mean, cov, memo);
    for jx in 0..rest.len() {
        if rest[jx] > 0 {
            let mut d = rest.clone();
            d[jx] -= 1;
            v += cov[(i, jx)] * rest[jx] as f64 * moment(&d, mean, cov, memo);
        }
    }
    memo.insert(e.to_vec(), v);
    v
}

/// `⟨ψ₁, ψ₂⟩ = ∫ conj(φ₁)φ₂ e^{-q_J/2} ε̃_ω`, antilinear in the first slot.
pub fn wick_inner_product(space: &LinearPhaseSpace, a: &PolynomialSection, b: &PolynomialSection) -> Result<C64> {
    require_symplectic(space)?;
    if (&a.j.j - &b.j.j).max_abs() > 1e-12 {
        return Err(Error::Invalid("sections live in different polarisations".into()));
    }
    let s = q_matrix(space, &a.j);
    gaussian_moment_integral(&s, &vec![ZERO; space.dim()], &(&a.p.conj() * &b.p))
}

/// `c·exp[λᵀx + ½xᵀQx - ¼q_J(x)]`.
#[derive(Clone, Debug)]
pub struct GaussianState {
    pub j: ComplexStructure,
    pub c: C64,
    pub lambda: Vec<C64>,
    pub q: CMatrix,
}

impl GaussianState {
    /// Holomorphic prefactor `φ(y)`, complexified.
    pub fn prefactor(&self, y: &[C64]) -> C64 {
        let lin: C64 = self.lambda.iter().zip(y).map(|(a, b)| a * b).sum();
        self.c * (lin + 0.5 * bilin(&self.q, y, y)).exp()
    }

    pub fn eval(&self, space: &LinearPhaseSpace, x: &[f64]) -> C64 {
        let xc = real_vec(x);
        let q = bilin(&q_matrix(space, &self.j), &xc, &xc);
        self.prefactor(&xc) * (-0.25 * q).exp()
    }

    pub fn scale(&self, s: C64) -> Self {
        GaussianState { c: self.c * s, ..self.clone() }
    }
}

/// `⟨ψ₁, ψ₂⟩` of two Gaussian states by the closed-form integral.
pub fn gaussian_overlap(space: &LinearPhaseSpace, a: &GaussianState, b: &GaussianState) -> Result<C64> {
    require_symplectic(space)?;
    let s1 = q_matrix(space, &a.j);
    let s2 = q_matrix(space, &b.j);
    let m = &(&(&s1 + &s2).scale_re(0.5) - &a.q.conj()) - &b.q;
    let lin: Vec<C64> = a.lambda.iter().zip(&b.lambda).map(|(x, y)| x.conj() + y).collect();
    let one = Polynomial::constant(space.dim(), ONE);
    Ok(a.c.conj() * b.c * gaussian_moment_integral(&m, &lin, &one)?)
}

/// `ᾱ` as a vector of `V^{0,1}`, from frame coordinates of `α ∈ V^{1,0}`.
fn alpha_bar(space: &LinearPhaseSpace, j: &ComplexStructure, alpha: &[C64]) -> Result<Vec<C64>> {
    if alpha.len() != space.n {
        return Err(Error::Dimension(format!("expected {} coordinates, got {}", space.n, alpha.len())));
    }
    let f = unitary_frame(j, space)?.matrix;
    Ok(f.mul_vec(alpha).into_iter().map(|z| z.conj()).collect())
}

/// `c^α(x) = exp[q_J(ᾱ, x) - ¼q_J(x)]`.
pub fn coherent_state(space: &LinearPhaseSpace, j: &ComplexStructure, alpha: &[C64]) -> Result<GaussianState> {
    require_symplectic(space)?;
    let ab = alpha_bar(space, j, alpha)?;
    let lambda = q_matrix(space, j).transpose().mul_vec(&ab);
    let d = space.dim();
    Ok(GaussianState { j: j.clone(), c: ONE, lambda, q: CMatrix::zeros(d, d) })
}

pub fn coherent_overlap(space: &LinearPhaseSpace, j: &ComplexStructure, a: &[C64], b: &[C64]) -> Result<C64> {
    gaussian_overlap(space, &coherent_state(space, j, a)?, &coherent_state(space, j, b)?)
}

fn check_boson_path(path: &GeodesicPath) -> Result<(ComplexStructure, ComplexStructure, f64)> {
    require_symplectic(&path.space)?;
    let (j0, j1) = (path.start(), path.end());
    let det = cut_locus_det(&j0, &j1);
    if det <= DET_REFUSAL {
        return Err(Error::CutLocus(det));
    }
    Ok((j0, j1, det))
}

/// Closed-form transport of `c^α_{J₀}`:
/// `det(D)^{-1/4} e^{-q₁/4} exp[½ω(x^{1,0}_{J₁} - ᾱ, D⁻¹(x^{1,0}_{J₁} - ᾱ))]`, `D = (J₀+J₁)/2`.
pub fn bogoliubov_coherent(path: &GeodesicPath, alpha: &[C64]) -> Result<GaussianState> {
    let (j0, j1, det) = check_boson_path(path)?;
    let space = &path.space;
    let ab = alpha_bar(space, &j0, alpha)?;
    let d = (&j0.j + &j1.j).scale_re(0.5);
    let w = space.form.matmul(&d.inverse()?);
    let p1 = projection_p(&j1);
    let q = sym(&p1.transpose().matmul(&w).matmul(&p1));
    let l1 = p1.transpose().mul_vec(&w.mul_vec(&ab));
    let l2 = p1.transpose().mul_vec(&w.transpose().mul_vec(&ab));
    let lambda: Vec<C64> = l1.iter().zip(&l2).map(|(a, b)| -0.5 * (a + b)).collect();
    let c0 = 0.5 * bilin(&w, &ab, &ab);
    Ok(GaussianState { j: j1, c: det.powf(-0.25) * c0.exp(), lambda, q })
}

/// Transport of a Gaussian state through the Bergman kernel
/// `det(D)^{1/4} e^{-q₁(x)/4} ∫ exp[iω(y, x^{1,0}_{J₁}) - ¼(q₀+q₁)(y)] φ(y) ε̃_ω(y)`.
pub fn transport_gaussian(path: &GeodesicPath, state: &GaussianState) -> Result<GaussianState> {
    let (j0, j1, det) = check_boson_path(path)?;
    let space = &path.space;
    if (&state.j.j - &j0.j).max_abs() > 1e-9 {
        return Err(Error::Invalid("state does not live at the start of the path".into()));
    }
    let s0 = q_matrix(space, &j0);
    let s1 = q_matrix(space, &j1);
    let m = &(&s0 + &s1).scale_re(0.5) - &state.q;
    let minv = m.inverse()?;
    // b(x) = λ + Kx with K = iΩP₁
    let k = space.form.matmul(&projection_p(&j1)).scale(I);
    let kt = k.transpose();
    let ml = minv.mul_vec(&state.lambda);
    let c0 = 0.5 * state.lambda.iter().zip(&ml).map(|(a, b)| a * b).sum::<C64>();
    Ok(GaussianState {
        j: j1,
        c: state.c * det.powf(0.25) * gaussian_det_factor(&m)? * c0.exp(),
        lambda: kt.mul_vec(&ml),
        q: sym(&kt.matmul(&minv).matmul(&k)),
    })
}

/// Polynomial input transported by the coherent-state formula, evaluated by
/// Wick reduction at a real point `x`.
pub fn transport_polynomial_at(path: &GeodesicPath, phi: &Polynomial, x: &[f64]) -> Result<C64> {
    let (j0, j1, det) = check_boson_path(path)?;
    let space = &path.space;
    let xc = real_vec(x);
    let d = (&j0.j + &j1.j).scale_re(0.5);
    let ws = sym(&space.form.matmul(&d.inverse()?));
    let p1 = projection_p(&j1);
    let pb0 = projection_p(&j0).conj();
    let a = p1.mul_vec(&xc);
    let m = &q_matrix(space, &j0) - &pb0.transpose().matmul(&ws).matmul(&pb0);
    let b: Vec<C64> = pb0.transpose().mul_vec(&ws.mul_vec(&a)).into_iter().map(|z| -z).collect();
    let q1 = bilin(&q_matrix(space, &j1), &xc, &xc);
    let pref = det.powf(-0.25) * (0.5 * bilin(&ws, &a, &a) - 0.25 * q1).exp();
    Ok(pref * gaussian_moment_integral(&m, &b, phi)?)
}

/// Holomorphic data fed to the quadrature transport.
#[derive(Clone, Debug)]
pub enum BosonInput {
    Polynomial(Polynomial),
    Gaussian(GaussianState),
}

impl BosonInput {
    fn prefactor(&self, y: &[C64]) -> C64 {
        match self {
            BosonInput::Polynomial(p) => p.eval(y),
            BosonInput::Gaussian(g) => g.prefactor(y),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct QuadratureTransport {
    pub nodes: usize,
    pub values: Vec<C64>,
    pub coarse: Vec<C64>,
    /// Largest difference between the two node counts.
    pub error_estimate: f64,
}

/// Bergman-kernel transport by tensor Gauss–Hermite quadrature, after the
/// Cholesky change of variables that whitens `¼(q₀+q₁)`.
pub fn bergman_transport_quadrature(
    path: &GeodesicPath,
    input: &BosonInput,
    points: &[Vec<f64>],
    nodes: usize,
) -> Result<QuadratureTransport> {
    let (j0, j1, det) = check_boson_path(path)?;
    if nodes < 4 {
        return Err(Error::Invalid("at least 4 quadrature nodes are needed".into()));
    }
    let coarse_nodes = (nodes * 3 / 4).max(3);
    let values = quadrature_level(path, &j0, &j1, det, input, points, nodes)?;
    let coarse = quadrature_level(path, &j0, &j1, det, input, points, coarse_nodes)?;
    let error_estimate = values.iter().zip(&coarse).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    Ok(QuadratureTransport { nodes, values, coarse, error_estimate })
}

fn quadrature_level(
    path: &GeodesicPath,
    j0: &ComplexStructure,
    j1: &ComplexStructure,
    det: f64,
    input: &BosonInput,
    points: &[Vec<f64>],
    nodes: usize,
) -> Result<Vec<C64>> {
    let space = &path.space;
    let dim = space.dim();
    let s0 = q_matrix(space, j0);
    let s1 = q_matrix(space, j1);
    let a = (&s0 + &s1).scale_re(0.5);
    let ar = DMatrix::from_fn(dim, dim, |i, k| a[(i, k)].re);
    let chol = ar.cholesky().ok_or_else(|| Error::Invalid("q₀+q₁ is not positive".into()))?;
    let l = chol.l();
    let linv_t = l.clone().try_inverse().ok_or(Error::Singular)?.transpose();
    let det_l: f64 = (0..dim).map(|i| l[(i, i)]).product();
    let (t, w) = gauss_hermite(nodes);
    let norm = 2f64.powi(space.n as i32) / (det_l * (2.0 * std::f64::consts::PI).powi(space.n as i32));
    // precompute the grid once; it is shared by every evaluation point
    let mut grid: Vec<(Vec<C64>, f64, C64)> = Vec::with_capacity(nodes.pow(dim as u32));
    let mut idx = vec![0usize; dim];
    loop {
        let u: Vec<f64> = idx.iter().map(|&k| std::f64::consts::SQRT_2 * t[k]).collect();
        let y: Vec<C64> = (0..dim).map(|r| C64::from((0..dim).map(|s| linv_t[(r, s)] * u[s]).sum::<f64>())).collect();
        let weight: f64 = idx.iter().map(|&k| w[k]).product();
        let phi = input.prefactor(&y);
        grid.push((y, weight, phi));
        let mut d = 0;
        while d < dim {
            idx[d] += 1;
            if idx[d] < nodes {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == dim {
            break;
        }
    }
    let p1 = projection_p(j1);
    let mut out = Vec::with_capacity(points.len());
    for x in points {
        let xc = real_vec(x);
        let wx = space.form.mul_vec(&p1.mul_vec(&xc));
        let mut acc = ZERO;
        for (y, weight, phi) in &grid {
            let phase: C64 = y.iter().zip(&wx).map(|(a, b)| a * b).sum();
            acc += (I * phase).exp() * phi * *weight;
        }
        let q1 = bilin(&s1, &xc, &xc);
        out.push(acc * norm * det.powf(0.25) * (-0.25 * q1).exp());
    }
    Ok(out)
}

/// Half-form data of the bosonic correction along a path.
#[derive(Clone, Debug, Serialize)]
pub struct BosonHalfForm {
    pub coefficient: C64,
    pub pairing: C64,
    pub det_factor: f64,
    /// `det(D)^{1/4}` carried by the Bogoliubov transport.
    pub transport_factor: f64,
    /// `|det_factor · transport_factor - 1|`.
    pub cancellation_residual: f64,
    /// `|pairing - det_factor|`.
    pub pairing_residual: f64,
}

pub fn half_form_pairing_boson(path: &GeodesicPath) -> Result<BosonHalfForm> {
    let (_, _, det) = check_boson_path(path)?;
    let hf = half_form_transport(path)?;
    let transport_factor = det.powf(0.25);
    Ok(BosonHalfForm {
        coefficient: hf.coefficient.value,
        pairing: hf.pairing,
        det_factor: hf.det_factor,
        transport_factor,
        cancellation_residual: (hf.det_factor * transport_factor - 1.0).abs(),
        pairing_residual: (hf.pairing - hf.det_factor).norm(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BosonHolonomy {
    pub phase: f64,
    /// `max |X - e^{iφ}G|` over the coherent cross-Gram.
    pub residual: f64,
    pub curvature_phase: Option<f64>,
    /// Holonomy phase factor after multiplying by the half-form transports.
    pub corrected: C64,
    pub corrected_residual: f64,
}

/// Holonomy around a closed geodesic polygon, probed on coherent states.
pub fn boson_holonomy(
    space: &LinearPhaseSpace,
    vertices: &[ComplexStructure],
    alphas: &[Vec<C64>],
    nodes: usize,
) -> Result<BosonHolonomy> {
    require_symplectic(space)?;
    if vertices.len() < 2 || alphas.is_empty() {
        return Err(Error::Invalid("need a loop and at least one probe state".into()));
    }
    let probes: Vec<GaussianState> = alphas.iter().map(|a| coherent_state(space, &vertices[0], a)).collect::<Result<_>>()?;
    let mut moved = probes.clone();
    let mut half = ONE;
    for k in 0..vertices.len() {
        let path = geodesic_between(&vertices[k], &vertices[(k + 1) % vertices.len()], space)?;
        moved = moved.iter().map(|s| transport_gaussian(&path, s)).collect::<Result<_>>()?;
        half *= half_form_transport(&path)?.coefficient.value;
    }
    let m = probes.len();
    let mut num = ZERO;
    let mut den = 0.0;
    let mut pairs = Vec::with_capacity(m * m);
    for a in &probes {
        for (b, bm) in probes.iter().zip(&moved) {
            let g = gaussian_overlap(space, a, b)?;
            let x = gaussian_overlap(space, a, bm)?;
            num += g.conj() * x;
            den += g.norm_sqr();
            pairs.push((g, x));
        }
    }
    let phase = (num / den).arg();
    let u = C64::from_polar(1.0, phase);
    let residual = pairs.iter().map(|(g, x)| (x - u * g).norm()).fold(0.0, f64::max);
    let curvature_phase = if vertices.len() == 3 {
        let f = triangle_curvature_integral(&vertices[0], &vertices[1], &vertices[2], space, nodes)?;
        Some((I * f).re)
    } else {
        None
    };
    let corrected = u * half;
    Ok(BosonHolonomy { phase, residual, curvature_phase, corrected, corrected_residual: (corrected - ONE).norm() })
}

/// The one-mode display `√sech b · exp[ᾱx·A + ½(ᾱ² - x²)·B - ¼q₁(x)]` in the
/// transported frame coordinate `x = x¹`, with `(A,B) = (tanh, sech)` as
/// printed or swapped. Returns the largest deviation from the closed-form
/// transport over a fixed sample of points.
pub fn n1_display_deviation(b: f64, swapped: bool) -> Result<f64> {
    let space = LinearPhaseSpace::symplectic(1);
    let j0 = ComplexStructure::standard(1);
    let path = GeodesicPath::from_normal_form(&space, &j0, &CMatrix::identity(1), &[b])?;
    let f1 = path.g(1.0).matmul(&unitary_frame(&j0, &space)?.matrix);
    let e1b: Vec<C64> = f1.column(0).iter().map(|z| z.conj()).collect();
    let (sech, tanh) = (1.0 / b.cosh(), b.tanh());
    let (ca, cb) = if swapped { (sech, tanh) } else { (tanh, sech) };
    let mut worst = 0.0_f64;
    for alpha1 in [C64::new(0.3, -0.2), C64::new(-0.5, 0.4)] {
        let state = bogoliubov_coherent(&path, &[alpha1])?;
        for x in [[0.4, -0.3], [-0.7, 0.2], [0.1, 0.9]] {
            let xc = real_vec(&x);
            let x1 = -I * space.eval(&xc, &e1b);
            let ab = alpha1.conj();
            let q1 = bilin(&q_matrix(&space, &path.end()), &xc, &xc);
            let display = sech.sqrt() * (ab * x1 * ca + 0.5 * (ab * ab - x1 * x1) * cb - 0.25 * q1).exp();
            worst = worst.max((display - state.eval(&space, &x)).norm());
        }
    }
    Ok(worst)
}
