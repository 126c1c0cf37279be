//! Linear phase spaces, compatible complex structures, unitary frames and graph charts.

use crate::error::{Error, Result};
use crate::scalars_matrices::{c, expm, hermitian_eigen, pfaffian, r, CMatrix, C64, I, ONE, ZERO};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Positivity threshold used by compatibility diagnostics.
pub const POSITIVITY_THRESHOLD: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Symplectic,
    Euclidean,
}

/// Real 2n-dimensional space carrying either ω = [[0,I],[-I,0]] or g = I.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearPhaseSpace {
    pub n: usize,
    pub kind: Family,
    pub form: CMatrix,
}

impl LinearPhaseSpace {
    pub fn standard(n: usize, kind: Family) -> Self {
        let form = match kind {
            Family::Symplectic => standard_omega(n),
            Family::Euclidean => CMatrix::identity(2 * n),
        };
        LinearPhaseSpace { n, kind, form }
    }

    pub fn symplectic(n: usize) -> Self {
        Self::standard(n, Family::Symplectic)
    }

    pub fn euclidean(n: usize) -> Self {
        Self::standard(n, Family::Euclidean)
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    /// Complex-bilinear extension of the form.
    pub fn eval(&self, x: &[C64], y: &[C64]) -> C64 {
        bilinear(&self.form, x, y)
    }

    /// The Hermitian form h₀(x,y) = g(x,ȳ) or -iω(x,ȳ), linear in x.
    pub fn h0(&self, x: &[C64], y: &[C64]) -> C64 {
        let yb: Vec<C64> = y.iter().map(|z| z.conj()).collect();
        match self.kind {
            Family::Symplectic => -I * self.eval(x, &yb),
            Family::Euclidean => self.eval(x, &yb),
        }
    }

    /// Matrix G with h₀(x,y) = Σ x_a G_ab conj(y_b).
    pub fn h0_matrix(&self) -> CMatrix {
        match self.kind {
            Family::Symplectic => self.form.scale(-I),
            Family::Euclidean => self.form.clone(),
        }
    }

    /// Sign relating the orientation of J₀ to the standard basis order.
    pub fn orientation_sign(&self) -> f64 {
        if (self.n * self.n.saturating_sub(1) / 2).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }
}

pub fn standard_omega(n: usize) -> CMatrix {
    let mut w = CMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        w[(i, n + i)] = ONE;
        w[(n + i, i)] = -ONE;
    }
    w
}

pub fn bilinear(m: &CMatrix, x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(m.mul_vec(y)).map(|(a, b)| a * b).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexStructure {
    pub j: CMatrix,
}

impl ComplexStructure {
    /// Validates J² = -I.
    pub fn new(j: CMatrix) -> Result<Self> {
        if !j.is_square() || j.rows() % 2 == 1 {
            return Err(Error::Dimension("complex structure must be 2n x 2n".into()));
        }
        if j.max_imag() > 1e-9 {
            return Err(Error::Invalid("complex structure must be real".into()));
        }
        let res = (&j.matmul(&j) + &CMatrix::identity(j.rows())).max_abs();
        if res > 1e-8 {
            return Err(Error::Invalid(format!("J^2 + I residual {res:e}")));
        }
        Ok(ComplexStructure { j: j.real_part() })
    }

    /// J₀ = [[0,-I],[I,0]].
    pub fn standard(n: usize) -> Self {
        let mut j = CMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            j[(i, n + i)] = -ONE;
            j[(n + i, i)] = ONE;
        }
        ComplexStructure { j }
    }

    pub fn n(&self) -> usize {
        self.j.rows() / 2
    }

    pub fn neg(&self) -> Self {
        ComplexStructure { j: self.j.scale_re(-1.0) }
    }

    pub fn p(&self) -> CMatrix {
        projection_p(self)
    }

    pub fn conjugate_by(&self, k: &CMatrix) -> Result<Self> {
        let ki = k.inverse()?;
        Ok(ComplexStructure { j: k.matmul(&self.j).matmul(&ki).real_part() })
    }
}

/// P_J = ½(I - iJ).
pub fn projection_p(j: &ComplexStructure) -> CMatrix {
    let n2 = j.j.rows();
    (&CMatrix::identity(n2) - &j.j.scale(I)).scale_re(0.5)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompatibilityReport {
    pub compatible: bool,
    pub square_residual: f64,
    pub invariance_residual: f64,
    /// Smallest eigenvalue of ω(·,J·) (symplectic) or the orientation sign (euclidean).
    pub positivity_margin: f64,
    /// Eigenvector achieving the smallest eigenvalue (symplectic only).
    pub witness: Option<Vec<f64>>,
}

pub fn check_compatibility(j: &ComplexStructure, space: &LinearPhaseSpace) -> CompatibilityReport {
    let jm = &j.j;
    let id = CMatrix::identity(space.dim());
    let square_residual = (&jm.matmul(jm) + &id).max_abs();
    let inv = &jm.transpose().matmul(&space.form).matmul(jm) - &space.form;
    let invariance_residual = inv.max_abs();
    let (positivity_margin, witness) = match space.kind {
        Family::Symplectic => {
            let q = space.form.matmul(jm).real_part();
            let (vals, vecs) = hermitian_eigen(&q);
            (vals[0], Some(vecs.column(0).iter().map(|z| z.re).collect()))
        }
        Family::Euclidean => (orientation_relative(j, space), None),
    };
    let compatible = square_residual <= 1e-9 && invariance_residual <= 1e-9 && positivity_margin > POSITIVITY_THRESHOLD;
    CompatibilityReport { compatible, square_residual, invariance_residual, positivity_margin, witness }
}

/// Orientation of J relative to J₀, as the sign of Pf(Jᵀ)/Pf(J₀ᵀ).
pub fn orientation_relative(j: &ComplexStructure, space: &LinearPhaseSpace) -> f64 {
    let jt = j.j.transpose();
    let skew = (&jt - &jt.transpose()).scale_re(0.5);
    match pfaffian(&skew) {
        Ok(p) => (p.re * space.orientation_sign()).signum(),
        Err(_) => 0.0,
    }
}

/// h₀-orthonormal basis of V^{1,0}_J (columns of `matrix`).
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryFrame {
    pub matrix: CMatrix,
}

impl UnitaryFrame {
    pub fn vector(&self, i: usize) -> Vec<C64> {
        self.matrix.column(i)
    }

    pub fn len(&self) -> usize {
        self.matrix.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.cols() == 0
    }

    pub fn conj(&self) -> CMatrix {
        self.matrix.conj()
    }

    /// [e₁..eₙ, ē₁..ēₙ] as a 2n×2n change of basis.
    pub fn full_basis(&self) -> CMatrix {
        self.matrix.hstack(&self.matrix.conj())
    }
}

/// Projects the standard basis with P_J and orthonormalises in fixed order.
/// Unitary frame of `V^{1,0}_J`: the projection of the standard frame at `J₀`,
/// orthonormalised symmetrically. It is smooth in `J` and equals the standard
/// frame at `J₀`; off the chart around `J₀` a Gram–Schmidt frame is used.
pub fn unitary_frame(j: &ComplexStructure, space: &LinearPhaseSpace) -> Result<UnitaryFrame> {
    let e = gram_schmidt_frame(&ComplexStructure::standard(space.n), space)?.matrix;
    let u = projection_p(j).matmul(&e);
    let n = space.n;
    let g = CMatrix::from_fn(n, n, |a, b| space.h0(&u.column(a), &u.column(b)));
    let (vals, vecs) = hermitian_eigen(&g);
    if vals.iter().any(|&l| l <= 1e-10) {
        return gram_schmidt_frame(j, space);
    }
    let d: Vec<C64> = vals.iter().map(|&l| C64::from(l.powf(-0.5))).collect();
    // h0(F_a, F_b) = (Sᵀ G S̄)_ab, so S = conj(G^{-1/2})
    let s = vecs.matmul(&CMatrix::diag(&d)).matmul(&vecs.adjoint()).conj();
    Ok(UnitaryFrame { matrix: u.matmul(&s) })
}

fn gram_schmidt_frame(j: &ComplexStructure, space: &LinearPhaseSpace) -> Result<UnitaryFrame> {
    let n = space.n;
    let p = projection_p(j);
    let mut out: Vec<Vec<C64>> = Vec::with_capacity(n);
    for a in 0..2 * n {
        if out.len() == n {
            break;
        }
        let mut u = p.column(a);
        for e in &out {
            let coef = space.h0(&u, e);
            for (x, y) in u.iter_mut().zip(e) {
                *x -= coef * y;
            }
        }
        let nn = space.h0(&u, &u);
        if nn.re <= 1e-8 {
            continue;
        }
        let s = 1.0 / nn.re.sqrt();
        out.push(u.into_iter().map(|z| z * s).collect());
    }
    if out.len() < n {
        return Err(Error::Incompatible("h0 is not positive on the holomorphic subspace".into()));
    }
    Ok(UnitaryFrame { matrix: CMatrix::from_columns(&out) })
}

/// Graph chart around a base point: V^{1,0}_J = span{eᵢ + Σⱼ Zᵢⱼ ēⱼ}.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphChart {
    pub base: ComplexStructure,
    pub z: CMatrix,
}

pub fn chart_to_j(chart: &GraphChart, space: &LinearPhaseSpace) -> Result<ComplexStructure> {
    let e = unitary_frame(&chart.base, space)?.matrix;
    let v = &e + &e.conj().matmul(&chart.z.transpose());
    let s = v.hstack(&v.conj());
    let n = space.n;
    let mut d = vec![ZERO; 2 * n];
    for x in d.iter_mut().take(n) {
        *x = ONE;
    }
    let si = s.inverse().map_err(|_| Error::Invalid("chart value is on the boundary (1 - ZbarZ singular)".into()))?;
    let p = s.matmul(&CMatrix::diag(&d)).matmul(&si);
    let jm = (&p.scale_re(2.0) - &CMatrix::identity(2 * n)).scale(I);
    ComplexStructure::new(jm)
}

pub fn graph_chart(j0: &ComplexStructure, j: &ComplexStructure, space: &LinearPhaseSpace) -> Result<GraphChart> {
    let sum = &j0.j + &j.j;
    let d = sum.scale_re(0.5).det()?;
    if d.norm() < 1e-12 {
        return Err(Error::CutLocus(d.re));
    }
    let e = unitary_frame(j0, space)?.matrix;
    let s0 = e.hstack(&e.conj());
    let w = projection_p(j).matmul(&e);
    let coords = s0.solve(&w)?;
    let n = space.n;
    let a = coords.submatrix(0, 0, n, n);
    let b = coords.submatrix(n, 0, n, n);
    let z = b.matmul(&a.inverse()?).transpose();
    Ok(GraphChart { base: j0.clone(), z })
}

/// Random element of the Lie algebra of Sp(2n) (ΩS, S symmetric) or SO(2n) (skew).
pub fn random_lie_element(space: &LinearPhaseSpace, rng: &mut ChaCha8Rng, scale: f64) -> CMatrix {
    let d = space.dim();
    let mut s = CMatrix::zeros(d, d);
    for i in 0..d {
        for k in i..d {
            let x = rng.random_range(-1.0..1.0) * scale;
            match space.kind {
                Family::Symplectic => {
                    s[(i, k)] = r(x);
                    s[(k, i)] = r(x);
                }
                Family::Euclidean => {
                    if i != k {
                        s[(i, k)] = r(x);
                        s[(k, i)] = r(-x);
                    }
                }
            }
        }
    }
    match space.kind {
        Family::Symplectic => space.form.matmul(&s),
        Family::Euclidean => s,
    }
}

/// J = k J₀ k⁻¹ with k = exp(X) for a seeded random Lie algebra element X.
pub fn random_compatible(space: &LinearPhaseSpace, rng: &mut ChaCha8Rng, scale: f64) -> ComplexStructure {
    let k = expm(&random_lie_element(space, rng, scale)).real_part();
    ComplexStructure::standard(space.n).conjugate_by(&k).expect("group element is invertible")
}

/// Random unitary n×n matrix, exp of a random anti-Hermitian matrix.
pub fn random_unitary(n: usize, rng: &mut ChaCha8Rng, scale: f64) -> CMatrix {
    let mut a = CMatrix::zeros(n, n);
    for i in 0..n {
        for k in i..n {
            let z = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale;
            if i == k {
                a[(i, i)] = c(0.0, z.im);
            } else {
                a[(i, k)] = z;
                a[(k, i)] = -z.conj();
            }
        }
    }
    expm(&a)
}
