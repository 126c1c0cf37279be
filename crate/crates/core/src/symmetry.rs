//! Group actions on the phase space: invariant forms, real and quaternionic
//! structures, fixed points of tori, moment maps and the fermionic S¹
//! quotient ring.

use crate::error::{Error, Result};
use crate::fermion_quant::FermionContext;
use crate::grassmann::{GrassmannAlgebra, GrassmannElement};
use crate::phase_space::{orientation_relative, unitary_frame, ComplexStructure, Family, LinearPhaseSpace};
use crate::scalars_matrices::{eigenvalues, expm, hermitian_eigen, nullspace, rank, sqrtm, CMatrix, C64, ONE, ZERO};
use nalgebra::DMatrix;
use serde::Serialize;
use std::sync::Arc;

pub const MAX_TORUS_N: usize = 4;
pub const MAX_RING_GENERATORS: usize = 12;
const FORM_TOL: f64 = 1e-12;
/// Angle at which the torus is sampled when lifting to `H₀`.
const PROBE_ANGLE: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub enum GroupAction {
    /// Explicit real matrices preserving the form.
    Finite(Vec<CMatrix>),
    /// Weights on `V^{1,0}_{J₀}`, one per coordinate plane.
    Torus(Vec<i64>),
}

impl GroupAction {
    pub fn finite(space: &LinearPhaseSpace, elements: Vec<CMatrix>) -> Result<Self> {
        for k in &elements {
            if k.rows() != space.dim() || k.cols() != space.dim() || k.max_imag() > 0.0 {
                return Err(Error::Dimension("group elements must be real 2n x 2n matrices".into()));
            }
            let res = (&k.transpose().matmul(&space.form).matmul(k) - &space.form).max_abs();
            if res > FORM_TOL {
                return Err(Error::Invalid(format!("element does not preserve the form (residual {res:e})")));
            }
        }
        Ok(GroupAction::Finite(elements))
    }

    pub fn trivial(n: usize) -> Self {
        GroupAction::Finite(vec![CMatrix::identity(2 * n)])
    }

    pub fn n(&self) -> Option<usize> {
        match self {
            GroupAction::Finite(e) => e.first().map(|k| k.rows() / 2),
            GroupAction::Torus(w) => Some(w.len()),
        }
    }

    /// Real matrices constraining invariance, and whether they are Lie algebra elements.
    pub fn generators(&self) -> (Vec<CMatrix>, bool) {
        match self {
            GroupAction::Finite(e) => (e.clone(), false),
            GroupAction::Torus(w) => (vec![torus_generator(w)], true),
        }
    }

    /// Sampled group elements (the torus at a fixed generic angle).
    pub fn elements(&self) -> Vec<CMatrix> {
        match self {
            GroupAction::Finite(e) => e.clone(),
            GroupAction::Torus(w) => vec![torus_element(w, PROBE_ANGLE)],
        }
    }
}

/// `A = Σ_k w_k J₀|_k`, rotating the `(x_k, y_k)` plane.
pub fn torus_generator(weights: &[i64]) -> CMatrix {
    let n = weights.len();
    let mut a = CMatrix::zeros(2 * n, 2 * n);
    for (k, &w) in weights.iter().enumerate() {
        a[(k, n + k)] = C64::from(-(w as f64));
        a[(n + k, k)] = C64::from(w as f64);
    }
    a
}

pub fn torus_element(weights: &[i64], angle: f64) -> CMatrix {
    expm(&torus_generator(weights).scale_re(angle)).real_part()
}

fn commutes(gens: &[CMatrix], j: &CMatrix) -> f64 {
    gens.iter().map(|k| k.commutator(j).max_abs()).fold(0.0, f64::max)
}

fn check_fixed(action: &GroupAction, j: &ComplexStructure) -> Result<()> {
    let (gens, _) = action.generators();
    let res = commutes(&gens, &j.j);
    if res > 1e-10 {
        return Err(Error::Invalid(format!("complex structure is not fixed by the action (residual {res:e})")));
    }
    Ok(())
}

/// Complex representation on some `W = ℂ^m`, by group elements or Lie algebra elements.
#[derive(Clone, Debug)]
pub struct Representation {
    pub mats: Vec<CMatrix>,
    pub infinitesimal: bool,
}

impl Representation {
    pub fn dim(&self) -> usize {
        self.mats.first().map_or(0, |m| m.rows())
    }

    /// The action restricted to `V^{1,0}_J`, written in its unitary frame.
    pub fn holomorphic(action: &GroupAction, j: &ComplexStructure, space: &LinearPhaseSpace) -> Result<Self> {
        check_fixed(action, j)?;
        let f = unitary_frame(j, space)?.matrix;
        let (gens, infinitesimal) = action.generators();
        let mats = gens
            .iter()
            .map(|k| {
                let kf = k.matmul(&f);
                CMatrix::from_fn(space.n, space.n, |a, b| space.h0(&kf.column(b), &f.column(a)))
            })
            .collect();
        Ok(Representation { mats, infinitesimal })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Symmetric,
    Antisymmetric,
}

#[derive(Clone, Debug)]
pub struct InvariantForms {
    pub dim: usize,
    pub basis: Vec<CMatrix>,
}

/// Nullspace of `X ↦ (L₁X, L₂X, …)` over the matrix units, as a stacked system.
fn stacked_nullspace(m: usize, maps: &[&dyn Fn(&CMatrix) -> CMatrix]) -> CMatrix {
    let rows = maps.len() * m * m;
    let mut a = CMatrix::zeros(rows, m * m);
    for col in 0..m * m {
        let mut e = CMatrix::zeros(m, m);
        e[(col / m, col % m)] = ONE;
        for (k, f) in maps.iter().enumerate() {
            let img = f(&e);
            for r in 0..m * m {
                a[(k * m * m + r, col)] = img[(r / m, r % m)];
            }
        }
    }
    nullspace(&a, 1e-6)
}

/// Invariant complex bilinear forms `B(ρx, ρy) = B(x, y)` of the given parity.
pub fn invariant_bilinear(rep: &Representation, parity: Parity) -> InvariantForms {
    let m = rep.dim();
    if m == 0 {
        return InvariantForms { dim: 0, basis: vec![] };
    }
    let eps = match parity {
        Parity::Symmetric => 1.0,
        Parity::Antisymmetric => -1.0,
    };
    let par = move |b: &CMatrix| b - &b.transpose().scale_re(eps);
    let mut maps: Vec<Box<dyn Fn(&CMatrix) -> CMatrix + '_>> = vec![Box::new(par)];
    for r in &rep.mats {
        if rep.infinitesimal {
            maps.push(Box::new(move |b: &CMatrix| &r.transpose().matmul(b) + &b.matmul(r)));
        } else {
            maps.push(Box::new(move |b: &CMatrix| &r.transpose().matmul(b).matmul(r) - b));
        }
    }
    let refs: Vec<&dyn Fn(&CMatrix) -> CMatrix> = maps.iter().map(|b| b.as_ref()).collect();
    let ns = stacked_nullspace(m, &refs);
    let basis = (0..ns.cols()).map(|c| CMatrix::from_fn(m, m, |a, b| ns[(a * m + b, c)])).collect();
    InvariantForms { dim: ns.cols(), basis }
}

/// Complex dimension of the fixed tangent space at `J`: invariant elements of
/// `Sym²` (symplectic) or `⋀²` (euclidean) of `V^{1,0}_J`.
pub fn fixed_tangent_dim(action: &GroupAction, j: &ComplexStructure, space: &LinearPhaseSpace) -> Result<usize> {
    let rep = Representation::holomorphic(action, j, space)?;
    let parity = match space.kind {
        Family::Symplectic => Parity::Symmetric,
        Family::Euclidean => Parity::Antisymmetric,
    };
    Ok(invariant_bilinear(&rep, parity).dim)
}

/// Real tangent directions `δJ` at `J` that commute with the action.
pub fn fixed_tangent_directions(
    action: &GroupAction,
    j: &ComplexStructure,
    space: &LinearPhaseSpace,
) -> Result<Vec<CMatrix>> {
    check_fixed(action, j)?;
    let d = space.dim();
    let (gens, infinitesimal) = action.generators();
    let mut cons: Vec<Box<dyn Fn(&DMatrix<f64>) -> DMatrix<f64>>> = Vec::new();
    let jr = to_real(&j.j);
    let form = to_real(&space.form);
    {
        let jr = jr.clone();
        cons.push(Box::new(move |x| x * &jr + &jr * x));
    }
    match space.kind {
        Family::Euclidean => cons.push(Box::new(|x| x + x.transpose())),
        Family::Symplectic => cons.push(Box::new(move |x| {
            let w = &form * x;
            &w - w.transpose()
        })),
    }
    for k in gens {
        let kr = to_real(&k);
        if infinitesimal {
            cons.push(Box::new(move |x| x * &kr - &kr * x));
        } else {
            let ki = kr.clone().try_inverse().expect("group elements are invertible");
            cons.push(Box::new(move |x| &kr * x * &ki - x));
        }
    }
    let nvar = d * d;
    let mut a = DMatrix::<f64>::zeros(cons.len() * nvar, nvar);
    for col in 0..nvar {
        let mut e = DMatrix::<f64>::zeros(d, d);
        e[(col / d, col % d)] = 1.0;
        for (k, f) in cons.iter().enumerate() {
            let img = f(&e);
            for r in 0..nvar {
                a[(k * nvar + r, col)] = img[(r / d, r % d)];
            }
        }
    }
    let eig = nalgebra::SymmetricEigen::new(a.transpose() * &a);
    let top = eig.eigenvalues.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    Ok((0..nvar)
        .filter(|&k| eig.eigenvalues[k].abs() <= 1e-12 * top)
        .map(|k| CMatrix::from_fn(d, d, |r, s| C64::from(eig.eigenvectors[(r * d + s, k)])))
        .collect())
}

fn to_real(m: &CMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)].re)
}

/// Commutant oracle for [`fixed_tangent_dim`]: real dimension of the
/// invariant tangent directions, halved.
pub fn commutant_tangent_dim(action: &GroupAction, j: &ComplexStructure, space: &LinearPhaseSpace) -> Result<usize> {
    let dirs = fixed_tangent_directions(action, j, space)?;
    Ok(dirs.len() / 2)
}

/// Antilinear `z ↦ M z̄` with `C² = ε`.
#[derive(Clone, Debug)]
pub struct ConjugationOperator {
    pub m: CMatrix,
    pub eps: i8,
}

impl ConjugationOperator {
    pub fn new(m: CMatrix, eps: i8) -> Result<Self> {
        if eps != 1 && eps != -1 {
            return Err(Error::Invalid("ε must be ±1".into()));
        }
        let c = ConjugationOperator { m, eps };
        let res = c.square_residual();
        if res > 1e-10 {
            return Err(Error::Invalid(format!("C² ≠ εI (residual {res:e})")));
        }
        Ok(c)
    }

    /// Complex conjugation on `ℂ^m`.
    pub fn standard(m: usize) -> Self {
        ConjugationOperator { m: CMatrix::identity(m), eps: 1 }
    }

    pub fn apply(&self, z: &[C64]) -> Vec<C64> {
        let zb: Vec<C64> = z.iter().map(|v| v.conj()).collect();
        self.m.mul_vec(&zb)
    }

    pub fn square(&self) -> CMatrix {
        self.m.matmul(&self.m.conj())
    }

    pub fn square_residual(&self) -> f64 {
        let n = self.m.rows();
        (&self.square() - &CMatrix::identity(n).scale_re(self.eps as f64)).max_abs()
    }

    /// Real `2m × 2m` matrix in the coordinates `z = u + iv`.
    pub fn realify(&self) -> CMatrix {
        let m = self.m.rows();
        let mut r = CMatrix::zeros(2 * m, 2 * m);
        for a in 0..m {
            for b in 0..m {
                let z = self.m[(a, b)];
                r[(a, b)] = C64::from(z.re);
                r[(a, m + b)] = C64::from(z.im);
                r[(m + a, b)] = C64::from(z.im);
                r[(m + a, m + b)] = C64::from(-z.re);
            }
        }
        r
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConjugationResiduals {
    pub square: f64,
    pub invariance: f64,
    /// `h(Cx, Cy) = h(y, x)`.
    pub hermitian: f64,
    /// `g(Cx, Cy) = g(x, y)` with `g = Re h`.
    pub metric: f64,
    /// `ω(Cx, Cy) = -ω(x, y)` with `ω = -Im h`.
    pub symplectic: f64,
}

impl ConjugationResiduals {
    pub fn max(&self) -> f64 {
        [self.square, self.invariance, self.hermitian, self.metric, self.symplectic].into_iter().fold(0.0, f64::max)
    }
}

fn invariance_residual(rep: &Representation, m: &CMatrix) -> f64 {
    rep.mats.iter().map(|r| (&r.matmul(m) - &m.matmul(&r.conj())).max_abs()).fold(0.0, f64::max)
}

/// Residuals of an antilinear structure against `h(x,y) = xᵀHȳ`.
pub fn conjugation_residuals(rep: &Representation, h: &CMatrix, c: &ConjugationOperator) -> ConjugationResiduals {
    let m = h.rows();
    let hermitian = (&c.m.transpose().matmul(h).matmul(&c.m.conj()) - &h.transpose()).max_abs();
    let basis: Vec<Vec<C64>> = (0..2 * m)
        .map(|a| {
            let mut v = vec![ZERO; m];
            v[a % m] = if a < m { ONE } else { C64::new(0.0, 1.0) };
            v
        })
        .collect();
    let hv = |x: &[C64], y: &[C64]| -> C64 {
        let yb: Vec<C64> = y.iter().map(|z| z.conj()).collect();
        x.iter().zip(h.mul_vec(&yb)).map(|(a, b)| a * b).sum()
    };
    let g = CMatrix::from_fn(2 * m, 2 * m, |a, b| C64::from(hv(&basis[a], &basis[b]).re));
    let w = CMatrix::from_fn(2 * m, 2 * m, |a, b| C64::from(-hv(&basis[a], &basis[b]).im));
    let cr = c.realify();
    ConjugationResiduals {
        square: c.square_residual(),
        invariance: invariance_residual(rep, &c.m),
        hermitian,
        metric: (&cr.transpose().matmul(&g).matmul(&cr) - &g).max_abs(),
        symplectic: (&cr.transpose().matmul(&w).matmul(&cr) + &w).max_abs(),
    }
}

/// Invariant structure compatible with `h`, built from an invariant `C₀`:
/// `β(x,y) = h(x,C₀y) + ε h(y,C₀x) = h(x,Cy)`, then `C ↦ (εC²)^{-1/2} C`.
pub fn normalize_conjugation(
    rep: &Representation,
    h: &CMatrix,
    c0: &ConjugationOperator,
) -> Result<(ConjugationOperator, ConjugationResiduals)> {
    let m = h.rows();
    if c0.m.rows() != m || rep.dim() != m {
        return Err(Error::Dimension("representation, form and structure sizes differ".into()));
    }
    let inv = invariance_residual(rep, &c0.m);
    if inv > 1e-9 {
        return Err(Error::Invalid(format!("C₀ is not invariant (residual {inv:e})")));
    }
    if (h - &h.adjoint()).max_abs() > 1e-10 || hermitian_eigen(h).0[0] <= 1e-12 {
        return Err(Error::Invalid("h is not a positive Hermitian form".into()));
    }
    let eps = c0.eps as f64;
    let b0 = h.matmul(&c0.m.conj());
    let beta = &b0 + &b0.transpose().scale_re(eps);
    let mm = h.inverse()?.matmul(&beta).conj();
    let t = mm.matmul(&mm.conj()).scale_re(eps);
    let root = sqrtm(&t)?;
    let c = ConjugationOperator { m: root.inverse()?.matmul(&mm), eps: c0.eps };
    let res = conjugation_residuals(rep, h, &c);
    Ok((c, res))
}

/// `μ_A(x) = ½ω(x, Ax)`.
pub fn bosonic_moment(space: &LinearPhaseSpace, a: &CMatrix, x: &[f64]) -> f64 {
    let xc: Vec<C64> = x.iter().map(|&v| C64::from(v)).collect();
    0.5 * space.eval(&xc, &a.mul_vec(&xc)).re
}

/// `½g(A·,·) = Σ_{a<b} A_ba θᵃθᵇ` for a `g`-skew generator.
pub fn fermionic_moment(alg: &Arc<GrassmannAlgebra>, a: &CMatrix) -> Result<GrassmannElement> {
    let d = alg.len();
    if a.rows() != d || a.cols() != d {
        return Err(Error::Dimension("generator size does not match the algebra".into()));
    }
    let skew = (a + &a.transpose()).max_abs();
    if skew > 1e-12 {
        return Err(Error::NotSkew(skew));
    }
    let mut out = GrassmannElement::zero(alg);
    for i in 0..d {
        for k in i + 1..d {
            out = &out + &GrassmannElement::product_of(alg, &[i, k]).scale(a[(k, i)]);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub enum ProperVerdict {
    /// A real-type subrepresentation on whose real points `μ` vanishes.
    NonProper { witness_dim: usize, points: Vec<Vec<f64>>, mu_residual: f64 },
    NoObstruction,
}

/// Negative properness certificate from an invariant symmetric form on `V^{1,0}`.
pub fn properness_probe(action: &GroupAction, space: &LinearPhaseSpace) -> Result<ProperVerdict> {
    if space.kind != Family::Symplectic {
        return Err(Error::Invalid("properness is a symplectic question".into()));
    }
    let j0 = ComplexStructure::standard(space.n);
    let rep = Representation::holomorphic(action, &j0, space)?;
    let forms = invariant_bilinear(&rep, Parity::Symmetric);
    let Some(b) = forms.basis.first() else {
        return Ok(ProperVerdict::NoObstruction);
    };
    // h = identity in the unitary frame, so h(x, Cy) = B(x, y) gives M = B̄.
    let mm = b.conj();
    let t = mm.matmul(&mm.conj());
    let (vals, vecs) = hermitian_eigen(&t);
    let top = vals.iter().fold(0.0_f64, |a, &v| a.max(v));
    let n = space.n;
    let keep: Vec<usize> = (0..n).filter(|&k| vals[k] > 1e-9 * top).collect();
    let isqrt = CMatrix::from_fn(n, n, |a, c| {
        keep.iter().map(|&k| vecs[(a, k)] * vecs[(c, k)].conj() / vals[k].sqrt()).sum()
    });
    let proj = CMatrix::from_fn(n, n, |a, c| keep.iter().map(|&k| vecs[(a, k)] * vecs[(c, k)].conj()).sum());
    let r = isqrt.matmul(&mm);
    let f = unitary_frame(&j0, space)?.matrix;
    let (gens, infinitesimal) = action.generators();
    let mut points = Vec::new();
    let mut mu_residual = 0.0_f64;
    for s in 0..2 * n {
        let mut u = vec![ZERO; n];
        u[s % n] = if s < n { ONE } else { C64::new(0.0, 1.0) };
        let pu = proj.mul_vec(&u);
        let rpu = r.mul_vec(&pu.iter().map(|z| z.conj()).collect::<Vec<_>>());
        let w: Vec<C64> = pu.iter().zip(&rpu).map(|(a, b)| a + b).collect();
        let x: Vec<f64> = f.mul_vec(&w).iter().map(|z| 2.0 * z.re).collect();
        if x.iter().all(|v| v.abs() < 1e-12) {
            continue;
        }
        if infinitesimal {
            for a in &gens {
                mu_residual = mu_residual.max(bosonic_moment(space, a, &x).abs());
            }
        }
        points.push(x);
    }
    Ok(ProperVerdict::NonProper { witness_dim: keep.len(), points, mu_residual })
}

#[derive(Clone, Debug, Serialize)]
pub struct FixedPoint {
    /// `J = Σ s_k J₀|_k`.
    pub signs: Vec<i8>,
    pub tangent_dim: usize,
    pub commutant_dim: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct TorusFixedPoints {
    pub weights: Vec<i64>,
    pub points: Vec<FixedPoint>,
    /// Some candidate has invariant tangent directions.
    pub continuum: bool,
    pub expected_generic: usize,
}

impl TorusFixedPoints {
    pub fn count(&self) -> Option<usize> {
        (!self.continuum).then_some(self.points.len())
    }
}

pub fn signed_structure(signs: &[i8]) -> ComplexStructure {
    let n = signs.len();
    let mut j = ComplexStructure::standard(n).j;
    for (k, &s) in signs.iter().enumerate() {
        j[(k, n + k)] *= s as f64;
        j[(n + k, k)] *= s as f64;
    }
    ComplexStructure { j }
}

/// Fixed orthogonal complex structures of a torus in the component of `J₀`,
/// enumerated over sign choices on the weight lines.
pub fn torus_fixed_points(weights: &[i64]) -> Result<TorusFixedPoints> {
    let n = weights.len();
    if n == 0 || n > MAX_TORUS_N {
        return Err(Error::Invalid(format!("torus rank {n} outside 1..={MAX_TORUS_N}")));
    }
    let space = LinearPhaseSpace::euclidean(n);
    let action = GroupAction::Torus(weights.to_vec());
    let mut points = Vec::new();
    for mask in 0..1usize << n {
        let signs: Vec<i8> = (0..n).map(|k| if mask >> k & 1 == 1 { -1 } else { 1 }).collect();
        let j = signed_structure(&signs);
        if orientation_relative(&j, &space) < 0.0 {
            continue;
        }
        let tangent_dim = fixed_tangent_dim(&action, &j, &space)?;
        let commutant_dim = commutant_tangent_dim(&action, &j, &space)?;
        points.push(FixedPoint { signs, tangent_dim, commutant_dim });
    }
    let continuum = points.iter().any(|p| p.tangent_dim > 0 || p.commutant_dim > 0);
    Ok(TorusFixedPoints { weights: weights.to_vec(), points, continuum, expected_generic: 1 << (n - 1) })
}

/// Matrix of the induced action `θᵃ ↦ Σ_b (k⁻¹)_ab θᵇ` on `H₀`.
pub fn lift_to_h0(ctx: &FermionContext, k: &CMatrix) -> Result<CMatrix> {
    let alg = ctx.algebra();
    let kinv = k.inverse()?;
    let targets: Vec<usize> = (0..alg.len()).collect();
    let d = ctx.dim_h0();
    let mut out = CMatrix::zeros(d, d);
    for m in 0..d {
        let img = GrassmannElement::monomial(alg, m, ONE).substitute_linear(&kinv, alg, &targets)?;
        out.set_column(m, img.coeffs());
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct IsotypicBlock {
    /// Torus weight, or the eigenvalue of the class-function probe.
    pub label: f64,
    pub dim: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct IsotypicSplit {
    pub blocks: Vec<IsotypicBlock>,
    /// `‖L b - Σ bρ‖`: the lifted action preserves `H_J`.
    pub invariance_residual: f64,
    pub fixed_directions: usize,
    /// `max ‖[L, A^H(J, δJ)]‖` over fixed tangent directions.
    pub connection_residual: f64,
}

/// Decomposition of `H_J` under the lifted action.
pub fn isotypic_split(action: &GroupAction, ctx: &FermionContext, j: &ComplexStructure) -> Result<IsotypicSplit> {
    check_fixed(action, j)?;
    let sub = ctx.hilbert_subspace(j)?;
    let elements = action.elements();
    let lifts: Vec<CMatrix> = elements.iter().map(|k| lift_to_h0(ctx, k)).collect::<Result<_>>()?;
    let dim = sub.basis.cols();
    let restrict = |l: &CMatrix| -> (CMatrix, f64) {
        let lb = l.matmul(&sub.basis);
        let rho = CMatrix::from_fn(dim, dim, |a, b| ctx.inner(&sub.basis.column(a), &lb.column(b)));
        let back = sub.basis.matmul(&rho);
        (rho, (&lb - &back).max_abs())
    };
    let mut invariance_residual = 0.0_f64;
    let mut rhos = Vec::new();
    for l in &lifts {
        let (rho, res) = restrict(l);
        invariance_residual = invariance_residual.max(res);
        rhos.push(rho);
    }
    let mut labels: Vec<f64> = match action {
        GroupAction::Torus(_) => eigenvalues(&rhos[0])?.iter().map(|z| (z.arg() / PROBE_ANGLE).round()).collect(),
        GroupAction::Finite(el) => {
            let z = class_probe(el, &rhos)?;
            hermitian_eigen(&z).0
        }
    };
    labels.sort_by(f64::total_cmp);
    let mut blocks: Vec<IsotypicBlock> = Vec::new();
    for v in labels {
        match blocks.last_mut() {
            Some(b) if (b.label - v).abs() < 1e-6 => b.dim += 1,
            _ => blocks.push(IsotypicBlock { label: v, dim: 1 }),
        }
    }
    let space = &ctx.space;
    let dirs = fixed_tangent_directions(action, j, space)?;
    let mut connection_residual = 0.0_f64;
    for dj in &dirs {
        let a = ctx.connection_operator(j, dj)?;
        for l in &lifts {
            connection_residual = connection_residual.max((&l.matmul(&a) - &a.matmul(l)).max_abs());
        }
    }
    Ok(IsotypicSplit { blocks, invariance_residual, fixed_directions: dirs.len(), connection_residual })
}

/// `Σ_g f(class g) ρ(g)` with `f` constant on classes and on inverse pairs.
fn class_probe(elements: &[CMatrix], rhos: &[CMatrix]) -> Result<CMatrix> {
    let find = |m: &CMatrix| elements.iter().position(|e| (e - m).max_abs() < 1e-9);
    let g = elements.len();
    let mut class = vec![usize::MAX; g];
    let mut next = 0;
    for a in 0..g {
        if class[a] != usize::MAX {
            continue;
        }
        for h in elements {
            let c = h.matmul(&elements[a]).matmul(&h.inverse()?);
            let idx = find(&c).ok_or_else(|| Error::Invalid("element list is not closed under conjugation".into()))?;
            class[idx] = next;
        }
        next += 1;
    }
    for a in 0..g {
        for b in 0..g {
            if find(&elements[a].matmul(&elements[b])).is_none() {
                return Err(Error::Invalid("element list is not a group".into()));
            }
        }
    }
    // golden-ratio weights are generic enough to separate the blocks
    let weight = |c: usize| ((c as f64 + 1.0) * 0.618_033_988_749_895).fract() + 0.5;
    let mut z = CMatrix::zeros(rhos[0].rows(), rhos[0].cols());
    for a in 0..g {
        let inv = find(&elements[a].inverse()?).ok_or_else(|| Error::Invalid("missing inverse".into()))?;
        let w = weight(class[a]) + weight(class[inv]);
        z = &z + &rhos[a].scale_re(w);
    }
    Ok(z)
}

#[derive(Clone, Debug, Serialize)]
pub struct QuotientRing {
    pub n: usize,
    pub weights: Vec<i64>,
    pub invariant_dim: usize,
    pub ideal_dim: usize,
    pub dim: usize,
    /// Monomials in the unweighted generators span a complement of the ideal.
    pub rest_is_complement: bool,
    pub rest_dim: usize,
}

/// `(⋀(V*)^ℂ / ⟨μ⟩)^{S¹}` with `μ = Σ λ_k θ^{2k-1}θ^{2k}`, computed in the
/// weight basis `ζ_k = θ^{2k-1} + iθ^{2k}`, where `θ^{2k-1}θ^{2k} = (i/2)ζ_kζ̄_k`.
pub fn s1_quotient_ring(n: usize, lambdas: &[i64]) -> Result<QuotientRing> {
    if 2 * n > MAX_RING_GENERATORS {
        return Err(Error::Invalid(format!("2n = {} exceeds {MAX_RING_GENERATORS}", 2 * n)));
    }
    let r = lambdas.len();
    if r > n || lambdas.contains(&0) {
        return Err(Error::Invalid("need 1 ≤ r ≤ n nonzero weights".into()));
    }
    let alg = GrassmannAlgebra::real(2 * n, "zeta")?;
    let gw: Vec<i64> = (0..2 * n).map(|g| if g < 2 * r { if g % 2 == 0 { lambdas[g / 2] } else { -lambdas[g / 2] } } else { 0 }).collect();
    let weight = |m: usize| -> i64 { (0..2 * n).filter(|&g| m >> g & 1 == 1).map(|g| gw[g]).sum() };
    let inv: Vec<usize> = (0..alg.dim()).filter(|&m| weight(m) == 0).collect();
    let pos = |m: usize| inv.binary_search(&m).ok();
    let mut mu = GrassmannElement::zero(&alg);
    for (k, &l) in lambdas.iter().enumerate() {
        mu = &mu + &GrassmannElement::product_of(&alg, &[2 * k, 2 * k + 1]).scale(C64::from(l as f64));
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for &m in &inv {
        let p = &mu * &GrassmannElement::monomial(&alg, m, ONE);
        let mut row = vec![0.0; inv.len()];
        for (mask, c) in p.nonzero() {
            row[pos(mask).expect("μ has weight zero")] = c.re;
        }
        rows.push(row);
    }
    let ideal_dim = row_rank(rows.clone());
    let rest_mask = ((1usize << (2 * n)) - 1) & !((1usize << (2 * r)) - 1);
    let rest: Vec<usize> = inv.iter().copied().filter(|&m| m & !rest_mask == 0).collect();
    for &m in &rest {
        let mut row = vec![0.0; inv.len()];
        row[pos(m).expect("rest monomials are invariant")] = 1.0;
        rows.push(row);
    }
    let rest_is_complement = row_rank(rows) == inv.len() && ideal_dim + rest.len() == inv.len();
    Ok(QuotientRing {
        n,
        weights: lambdas.to_vec(),
        invariant_dim: inv.len(),
        ideal_dim,
        dim: inv.len() - ideal_dim,
        rest_is_complement,
        rest_dim: rest.len(),
    })
}

/// Rank by Gaussian elimination with partial pivoting.
fn row_rank(mut rows: Vec<Vec<f64>>) -> usize {
    let cols = rows.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..rows.len()).max_by(|&a, &b| rows[a][c].abs().total_cmp(&rows[b][c].abs())) else {
            break;
        };
        if rows[p][c].abs() < 1e-9 {
            continue;
        }
        rows.swap(rank, p);
        let pivot = rows[rank].clone();
        for row in rows.iter_mut().skip(rank + 1) {
            let f = row[c] / pivot[c];
            if f != 0.0 {
                for (x, y) in row.iter_mut().zip(&pivot).skip(c) {
                    *x -= f * y;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Rank of a complex matrix, re-exported for report code.
pub fn matrix_rank(a: &CMatrix) -> usize {
    rank(a, 1e-9)
}
