//! Fermionic quantisation on `H₀ = Λ(V^C)*`, represented as coefficient
//! vectors over the real monomials `θ^I` of an orthonormal coframe.

use crate::error::{Error, Result};
use crate::grassmann::{orientation_sign, quadratic_form, GrassmannAlgebra, GrassmannElement, Measure};
use crate::phase_space::{projection_p, unitary_frame, ComplexStructure, LinearPhaseSpace};
use crate::scalars_matrices::{hermitian_eigen, C64, CMatrix, I, ONE, ZERO};
use crate::symm_space::{
    cut_locus_det, geodesic_between, half_form_transport, triangle_curvature_integral, GeodesicPath, DET_REFUSAL,
};
use serde::Serialize;
use std::sync::Arc;

pub const MAX_FERMION_N: usize = 4;
pub const MIN_ODE_STEPS: usize = 4;

#[derive(Clone, Debug)]
pub struct FermionContext {
    pub space: LinearPhaseSpace,
    alg: Arc<GrassmannAlgebra>,
    /// `2^{|I| - n}`, the H₀ norm of the real monomial `θ^I`.
    weights: Vec<f64>,
}

/// Orthonormal basis of `H_J`, columns indexed by subsets of the frame.
#[derive(Clone, Debug)]
pub struct HilbertSubspace {
    pub j: ComplexStructure,
    pub frame: CMatrix,
    pub basis: CMatrix,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Ode,
    Bogoliubov,
    Kernel,
    Corrected,
}

/// Map `H_{J₀} → H_{J₁}` written in the orthonormal bases of both ends.
#[derive(Clone, Debug)]
pub struct TransportOperator {
    pub source: HilbertSubspace,
    pub target: HilbertSubspace,
    pub matrix: CMatrix,
    pub provenance: Provenance,
}

impl TransportOperator {
    pub fn unitarity_residual(&self) -> f64 {
        let m = &self.matrix;
        (&m.adjoint().matmul(m) - &CMatrix::identity(m.cols())).max_abs()
    }
}

#[derive(Clone, Debug)]
pub struct CorrectedTransport {
    pub operator: TransportOperator,
    /// `det((J₀+J₁)/2)^{-1/4}` from the Bogoliubov transport.
    pub bogoliubov_scale: f64,
    /// `det((J₀+J₁)/2)^{1/4}` from the half-form pairing.
    pub half_form_scale: f64,
    pub half_form_coefficient: C64,
    pub half_form_pairing: C64,
    /// Largest deviation between the corrected pairing and the product of the
    /// plain cross-Gram pairing with the half-form pairing.
    pub pairing_residual: f64,
}

impl CorrectedTransport {
    pub fn scale_product(&self) -> f64 {
        self.bogoliubov_scale * self.half_form_scale
    }
}

#[derive(Clone, Debug)]
pub struct FermionHolonomy {
    pub operator: CMatrix,
    pub phase: f64,
    /// `‖Hol − e^{iφ} I‖`.
    pub residual: f64,
    /// Phase predicted by the curvature integral (triangles only).
    pub curvature_phase: Option<f64>,
    pub corrected: CMatrix,
    pub corrected_residual: f64,
}

fn bits(mask: usize) -> impl Iterator<Item = usize> {
    (0..usize::BITS as usize).filter(move |i| mask & (1 << i) != 0)
}

impl FermionContext {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_FERMION_N {
            return Err(Error::Invalid(format!("fermion n = {n} outside 1..={MAX_FERMION_N}")));
        }
        let alg = GrassmannAlgebra::real(2 * n, "theta")?;
        let weights = (0..alg.dim()).map(|m: usize| 2f64.powi(m.count_ones() as i32 - n as i32)).collect();
        Ok(FermionContext { space: LinearPhaseSpace::euclidean(n), alg, weights })
    }

    pub fn n(&self) -> usize {
        self.space.n
    }

    pub fn dim_h0(&self) -> usize {
        self.alg.dim()
    }

    pub fn algebra(&self) -> &Arc<GrassmannAlgebra> {
        &self.alg
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn element(&self, v: &[C64]) -> Result<GrassmannElement> {
        GrassmannElement::from_coeffs(&self.alg, v.to_vec())
    }

    /// H₀ form, antilinear in the first slot.
    pub fn inner(&self, a: &[C64], b: &[C64]) -> C64 {
        a.iter().zip(b).zip(&self.weights).map(|((x, y), w)| x.conj() * y * *w).sum()
    }

    pub fn norm(&self, a: &[C64]) -> f64 {
        self.inner(a, a).re.max(0.0).sqrt()
    }

    /// `Σ_a x_a (ι_a − ½ θ^a∧) ψ + Σ_a y_a (ι_a + ½ θ^a∧)` style helper:
    /// applies `Σ_a (u_a ι_a + v_a θ^a∧)`.
    fn apply_linear(&self, u: &[C64], v: &[C64], psi: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; psi.len()];
        for (m, &c) in psi.iter().enumerate() {
            if c == ZERO {
                continue;
            }
            for a in 0..u.len() {
                let bit = 1 << a;
                let odd = (m & (bit - 1)).count_ones() % 2 == 1;
                let s = if odd { -c } else { c };
                if m & bit != 0 {
                    out[m ^ bit] += u[a] * s;
                } else {
                    out[m | bit] += v[a] * s;
                }
            }
        }
        out
    }

    /// `∇_x = ι_x − ½ ν(x)∧` for complex `x`.
    pub fn apply_nabla(&self, x: &[C64], psi: &[C64]) -> Vec<C64> {
        let v: Vec<C64> = x.iter().map(|z| z * -0.5).collect();
        self.apply_linear(x, &v, psi)
    }

    /// `α̂ = ι_{ν⁻¹α} + ½ α∧`.
    pub fn apply_clifford(&self, alpha: &[C64], psi: &[C64]) -> Vec<C64> {
        let v: Vec<C64> = alpha.iter().map(|z| z * 0.5).collect();
        self.apply_linear(alpha, &v, psi)
    }

    fn operator_matrix(&self, f: impl Fn(&[C64]) -> Vec<C64>) -> CMatrix {
        let d = self.dim_h0();
        let mut m = CMatrix::zeros(d, d);
        let mut e = vec![ZERO; d];
        for k in 0..d {
            e[k] = ONE;
            m.set_column(k, &f(&e));
            e[k] = ZERO;
        }
        m
    }

    pub fn nabla(&self, x: &[C64]) -> CMatrix {
        self.operator_matrix(|p| self.apply_nabla(x, p))
    }

    pub fn clifford(&self, alpha: &[C64]) -> CMatrix {
        self.operator_matrix(|p| self.apply_clifford(alpha, p))
    }

    /// Adjoint for the H₀ form: `W⁻¹ A† W`.
    pub fn adjoint(&self, a: &CMatrix) -> CMatrix {
        let w = &self.weights;
        let ad = a.adjoint();
        CMatrix::from_fn(a.cols(), a.rows(), |i, k| ad[(i, k)] * (w[k] / w[i]))
    }

    /// The 2-form `ϖ_J = g(J·,·) = Σ_{a<b} J_ba θ^a θ^b` on generators
    /// `offset..offset+2n` of `alg`.
    pub fn varpi_on(&self, j: &ComplexStructure, alg: &Arc<GrassmannAlgebra>, offset: usize) -> GrassmannElement {
        let d = 2 * self.n();
        let mut x = GrassmannElement::zero(alg);
        for a in 0..d {
            for b in a + 1..d {
                let v = j.j[(b, a)];
                if v != ZERO {
                    x.set_coeff((1 << (a + offset)) | (1 << (b + offset)), v);
                }
            }
        }
        x
    }

    /// `exp((i/2) ϖ_J)` on generators starting at `offset`.
    pub fn gaussian_factor_on(&self, j: &ComplexStructure, alg: &Arc<GrassmannAlgebra>, offset: usize) -> GrassmannElement {
        self.varpi_on(j, alg, offset).scale(I * 0.5).exp()
    }

    pub fn gaussian_factor(&self, j: &ComplexStructure) -> GrassmannElement {
        self.gaussian_factor_on(j, &self.alg, 0)
    }

    /// Complex coordinates `θ^i = Σ_a ē_{i,a} θ^a` of a frame, on generators
    /// starting at `offset`.
    pub fn coframe_on(&self, frame: &CMatrix, alg: &Arc<GrassmannAlgebra>, offset: usize) -> Vec<GrassmannElement> {
        let gens: Vec<usize> = (offset..offset + 2 * self.n()).collect();
        (0..frame.cols()).map(|i| GrassmannElement::linear(alg, &gens, &frame.column(i).iter().map(|z| z.conj()).collect::<Vec<_>>())).collect()
    }

    /// Raw states `e^{(i/2)ϖ_J} ∧ θ^{i₁}⋯θ^{i_k}` for a given frame.
    pub fn monomial_states(&self, j: &ComplexStructure, frame: &CMatrix) -> CMatrix {
        let n = self.n();
        let vac = self.gaussian_factor(j);
        let co = self.coframe_on(frame, &self.alg, 0);
        let mut cols = Vec::with_capacity(1 << n);
        for sub in 0..(1usize << n) {
            let mut phi = GrassmannElement::one(&self.alg);
            for i in bits(sub) {
                phi = &phi * &co[i];
            }
            cols.push((&vac * &phi).into_coeffs());
        }
        CMatrix::from_columns(&cols)
    }

    pub fn hilbert_subspace(&self, j: &ComplexStructure) -> Result<HilbertSubspace> {
        let frame = unitary_frame(j, &self.space)?.matrix;
        let raw = self.monomial_states(j, &frame);
        let basis = self.orthonormalize(&raw)?;
        Ok(HilbertSubspace { j: j.clone(), frame, basis })
    }

    fn orthonormalize(&self, raw: &CMatrix) -> Result<CMatrix> {
        let mut cols: Vec<Vec<C64>> = Vec::with_capacity(raw.cols());
        for k in 0..raw.cols() {
            let mut u = raw.column(k);
            for _ in 0..2 {
                for e in &cols {
                    let c = self.inner(e, &u);
                    for (x, y) in u.iter_mut().zip(e) {
                        *x -= c * y;
                    }
                }
            }
            let nn = self.norm(&u);
            if nn < 1e-10 {
                return Err(Error::Singular);
            }
            cols.push(u.into_iter().map(|z| z / nn).collect());
        }
        Ok(CMatrix::from_columns(&cols))
    }

    /// Gram matrix `⟨col_k, col_l⟩` of a set of states.
    pub fn gram(&self, a: &CMatrix, b: &CMatrix) -> CMatrix {
        CMatrix::from_fn(a.cols(), b.cols(), |k, l| self.inner(&a.column(k), &b.column(l)))
    }

    /// Largest `‖∇_{ē_i} ψ‖` over the columns of `states`.
    pub fn holomorphy_residual(&self, sub: &HilbertSubspace, states: &CMatrix) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n() {
            let eb: Vec<C64> = sub.frame.column(i).iter().map(|z| z.conj()).collect();
            for k in 0..states.cols() {
                worst = worst.max(self.norm(&self.apply_nabla(&eb, &states.column(k))));
            }
        }
        worst
    }

    /// Dimension of the common kernel of `∇_x`, `x ∈ V^{0,1}_J`.
    pub fn kernel_dimension(&self, j: &ComplexStructure, tol: f64) -> Result<usize> {
        let frame = unitary_frame(j, &self.space)?.matrix;
        let d = self.dim_h0();
        let mut acc = CMatrix::zeros(d, d);
        for i in 0..self.n() {
            let eb: Vec<C64> = frame.column(i).iter().map(|z| z.conj()).collect();
            let m = self.nabla(&eb);
            acc = &acc + &m.adjoint().matmul(&m);
        }
        let (vals, _) = hermitian_eigen(&acc);
        Ok(vals.iter().filter(|&&v| v.abs() < tol).count())
    }

    /// Orthogonal projection onto `H_J` through its orthonormal basis.
    pub fn bergman_project(&self, sub: &HilbertSubspace, psi: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; psi.len()];
        for k in 0..sub.basis.cols() {
            let col = sub.basis.column(k);
            let c = self.inner(&col, psi);
            for (o, x) in out.iter_mut().zip(&col) {
                *o += c * x;
            }
        }
        out
    }

    fn doubled_algebra(&self) -> Result<Arc<GrassmannAlgebra>> {
        let chi = GrassmannAlgebra::real(2 * self.n(), "chi")?;
        self.alg.concat(&chi)
    }

    /// `∫ exp[g(θ^{1,0}_{J₁}, χ) + (i/4)ϖ_{J₁}(χ) + (i/4)ϖ_{Ja}(χ)] f(χ) ε̃_g(χ)`
    /// followed by the factor `e^{(i/4)ϖ_{J₁}(θ)}`.
    fn kernel_integral(&self, j1: &ComplexStructure, ja: Option<&ComplexStructure>, f: &[C64]) -> Result<Vec<C64>> {
        let n = self.n();
        let d = 2 * n;
        let alg = self.doubled_algebra()?;
        let p1 = projection_p(j1);
        let mut expo = GrassmannElement::zero(&alg);
        for a in 0..d {
            for b in 0..d {
                let v = p1[(a, b)];
                if v != ZERO {
                    expo = &expo + &GrassmannElement::product_of(&alg, &[b, d + a]).scale(v);
                }
            }
        }
        expo = &expo + &self.varpi_on(j1, &alg, d).scale(I * 0.5);
        if let Some(ja) = ja {
            expo = &expo + &self.varpi_on(ja, &alg, d).scale(I * 0.5);
        }
        let fe = self.element(f)?.embed(&alg, d)?;
        let over: Vec<usize> = (d..2 * d).collect();
        let integ = (&expo.exp() * &fe).integrate(&over, Measure::TildeVolume { n })?;
        let theta_part = self.element(&integ.coeffs()[..self.dim_h0()])?;
        Ok((&self.gaussian_factor(j1) * &theta_part).into_coeffs())
    }

    /// Bergman projection evaluated as a fermionic kernel integral.
    pub fn bergman_project_kernel(&self, j: &ComplexStructure, psi: &[C64]) -> Result<Vec<C64>> {
        self.kernel_integral(j, None, psi)
    }

    /// `A^H = ½ Σ_ab T_ab ∇_a ∇_b` with `T = (P δP P̄)ᵀ`, `δP = −(i/2) δJ`.
    fn connection_tensor(j: &ComplexStructure, dj: &CMatrix) -> CMatrix {
        let p = j.p();
        let dp = dj.scale(-I * 0.5);
        p.matmul(&dp).matmul(&p.conj()).transpose()
    }

    fn apply_connection_tensor(&self, t: &CMatrix, psi: &[C64]) -> Vec<C64> {
        let d = 2 * self.n();
        let mut out = vec![ZERO; psi.len()];
        let unit = |a: usize| {
            let mut e = vec![ZERO; d];
            e[a] = ONE;
            e
        };
        let nb: Vec<Vec<C64>> = (0..d).map(|b| self.apply_nabla(&unit(b), psi)).collect();
        for a in 0..d {
            let mut inner = vec![ZERO; psi.len()];
            for b in 0..d {
                let c = t[(a, b)];
                if c != ZERO {
                    for (x, y) in inner.iter_mut().zip(&nb[b]) {
                        *x += c * y;
                    }
                }
            }
            let outer = self.apply_nabla(&unit(a), &inner);
            for (x, y) in out.iter_mut().zip(&outer) {
                *x += y * 0.5;
            }
        }
        out
    }

    pub fn apply_connection(&self, j: &ComplexStructure, dj: &CMatrix, psi: &[C64]) -> Vec<C64> {
        self.apply_connection_tensor(&Self::connection_tensor(j, dj), psi)
    }

    pub fn connection_operator(&self, j: &ComplexStructure, dj: &CMatrix) -> Result<CMatrix> {
        crate::symm_space::check_tangent(j, dj, &self.space)?;
        let t = Self::connection_tensor(j, dj);
        Ok(self.operator_matrix(|p| self.apply_connection_tensor(&t, p)))
    }

    fn check_path(&self, path: &GeodesicPath) -> Result<()> {
        if path.space != self.space {
            return Err(Error::Invalid("path lives in a different phase space".into()));
        }
        Ok(())
    }

    /// `det((J₀+J_t)/2)` at the sample points; refuses at the cut locus.
    fn path_dets(&self, path: &GeodesicPath) -> Result<f64> {
        let j0 = path.start();
        let steps = path.steps();
        let mut last = 1.0;
        for s in 0..=steps {
            let t = path.t_range.0 + (path.t_range.1 - path.t_range.0) * s as f64 / steps as f64;
            last = cut_locus_det(&j0, &path.sample(t));
            if last <= DET_REFUSAL {
                return Err(Error::CutLocus(last));
            }
        }
        Ok(last)
    }

    /// RK4 integration of `ψ̇ = −A^H(J_t, J̇_t) ψ`.
    pub fn transport_ode(&self, path: &GeodesicPath, psi0: &[C64], steps: usize) -> Result<Vec<C64>> {
        self.check_path(path)?;
        if steps < MIN_ODE_STEPS {
            return Err(Error::Invalid(format!("{steps} steps is below the minimum {MIN_ODE_STEPS}")));
        }
        self.path_dets(path)?;
        Ok(self.integrate_connection(path, psi0, steps))
    }

    /// Same integration without the cut-locus refusal (diagnostics).
    pub fn integrate_connection(&self, path: &GeodesicPath, psi0: &[C64], steps: usize) -> Vec<C64> {
        let (t0, t1) = path.t_range;
        let h = (t1 - t0) / steps as f64;
        let rhs = |t: f64, psi: &[C64]| -> Vec<C64> {
            let j = path.sample(t);
            let dj = path.velocity(t);
            self.apply_connection(&j, &dj, psi).into_iter().map(|z| -z).collect()
        };
        let axpy = |a: &[C64], k: &[C64], s: f64| -> Vec<C64> { a.iter().zip(k).map(|(x, y)| x + y * s).collect() };
        let mut psi = psi0.to_vec();
        for s in 0..steps {
            let t = t0 + h * s as f64;
            let k1 = rhs(t, &psi);
            let k2 = rhs(t + 0.5 * h, &axpy(&psi, &k1, 0.5 * h));
            let k3 = rhs(t + 0.5 * h, &axpy(&psi, &k2, 0.5 * h));
            let k4 = rhs(t + h, &axpy(&psi, &k3, h));
            for i in 0..psi.len() {
                psi[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
            }
        }
        psi
    }

    pub fn transport_ode_operator(&self, path: &GeodesicPath, steps: usize) -> Result<TransportOperator> {
        let source = self.hilbert_subspace(&path.start())?;
        let target = self.hilbert_subspace(&path.end())?;
        let mut cols = Vec::with_capacity(source.basis.cols());
        for k in 0..source.basis.cols() {
            cols.push(self.transport_ode(path, &source.basis.column(k), steps)?);
        }
        let matrix = self.gram(&target.basis, &CMatrix::from_columns(&cols));
        Ok(TransportOperator { source, target, matrix, provenance: Provenance::Ode })
    }

    /// `det((J₀+J₁)/2)^{-1/4}` times the orthogonal projection `H_{J₀} → H_{J₁}`.
    pub fn transport_bogoliubov(&self, path: &GeodesicPath) -> Result<TransportOperator> {
        self.check_path(path)?;
        let det = self.path_dets(path)?;
        let source = self.hilbert_subspace(&path.start())?;
        let target = self.hilbert_subspace(&path.end())?;
        let matrix = self.gram(&target.basis, &source.basis).scale(C64::from(det.powf(-0.25)));
        Ok(TransportOperator { source, target, matrix, provenance: Provenance::Bogoliubov })
    }

    /// Ambient image of `ψ ∈ H_{J₀}` under a transport operator.
    pub fn apply_transport(&self, op: &TransportOperator, psi: &[C64]) -> Vec<C64> {
        let coords: Vec<C64> = (0..op.source.basis.cols()).map(|k| self.inner(&op.source.basis.column(k), psi)).collect();
        op.target.basis.mul_vec(&op.matrix.mul_vec(&coords))
    }

    /// Corollary-form integral: `ψ = e^{(i/2)ϖ₀} ∧ φ` is transported through
    /// the real-coordinate kernel.
    pub fn kernel_transport(&self, path: &GeodesicPath, psi: &[C64]) -> Result<Vec<C64>> {
        self.check_path(path)?;
        let det = self.path_dets(path)?;
        let j0 = path.start();
        let j1 = path.end();
        let inv_vac = self.varpi_on(&j0, &self.alg, 0).scale(-I * 0.5).exp();
        let phi = &inv_vac * &self.element(psi)?;
        let out = self.kernel_integral(&j1, Some(&j0), phi.coeffs())?;
        let s = det.powf(-0.25);
        Ok(out.into_iter().map(|z| z * s).collect())
    }

    pub fn kernel_transport_operator(&self, path: &GeodesicPath) -> Result<TransportOperator> {
        let source = self.hilbert_subspace(&path.start())?;
        let target = self.hilbert_subspace(&path.end())?;
        let mut cols = Vec::with_capacity(source.basis.cols());
        for k in 0..source.basis.cols() {
            cols.push(self.kernel_transport(path, &source.basis.column(k))?);
        }
        let matrix = self.gram(&target.basis, &CMatrix::from_columns(&cols));
        Ok(TransportOperator { source, target, matrix, provenance: Provenance::Kernel })
    }

    /// Real generators `θ¹..θ²ⁿ` followed by `α¹, ᾱ¹, …, αⁿ, ᾱⁿ`.
    pub fn coherent_algebra(&self) -> Result<Arc<GrassmannAlgebra>> {
        let aux = GrassmannAlgebra::complex(self.n(), "alpha")?;
        self.alg.concat(&aux)
    }

    fn alpha_bar_gen(&self, i: usize) -> usize {
        2 * self.n() + 2 * i + 1
    }

    /// `c^α_J(θ) = exp[g(θ, ᾱ) − ½ g(θ, θ̄)]` over the coherent algebra, with
    /// the unitary frame of `J`.
    pub fn coherent_state(&self, j: &ComplexStructure) -> Result<GrassmannElement> {
        let alg = self.coherent_algebra()?;
        let frame = unitary_frame(j, &self.space)?.matrix;
        let co = self.coframe_on(&frame, &alg, 0);
        let mut x = self.varpi_on(j, &alg, 0).scale(I * 0.5);
        for (i, th) in co.iter().enumerate() {
            x = &x + &(th * &GrassmannElement::generator(&alg, self.alpha_bar_gen(i)));
        }
        Ok(x.exp())
    }

    /// Closed-form transport of `c^α_{J₀}`:
    /// `det(D)^{1/4} e^{(i/4)ϖ₁(θ)} exp[(i/2) g(u, D⁻¹ u)]`, `u = θ^{1,0}_{J₁} − ᾱ`,
    /// `D = (J₀+J₁)/2`.
    pub fn transport_coherent(&self, path: &GeodesicPath) -> Result<GrassmannElement> {
        self.check_path(path)?;
        let det = self.path_dets(path)?;
        let n = self.n();
        let d = 2 * n;
        let alg = self.coherent_algebra()?;
        let j0 = path.start();
        let j1 = path.end();
        let e0 = unitary_frame(&j0, &self.space)?.matrix;
        let p1 = projection_p(&j1);
        let dinv = (&j0.j + &j1.j).scale_re(0.5).inverse()?;
        let theta: Vec<usize> = (0..d).collect();
        let u: Vec<GrassmannElement> = (0..d)
            .map(|a| {
                let lin = GrassmannElement::linear(&alg, &theta, &p1.row(a));
                let abar: Vec<usize> = (0..n).map(|i| self.alpha_bar_gen(i)).collect();
                let coef: Vec<C64> = (0..n).map(|i| -e0[(a, i)].conj()).collect();
                &lin + &GrassmannElement::linear(&alg, &abar, &coef)
            })
            .collect();
        let q = quadratic_form(&dinv, &u)?;
        let expo = &self.varpi_on(&j1, &alg, 0).scale(I * 0.5) + &q.scale(I * 0.5);
        Ok(expo.exp().scale(C64::from(det.powf(0.25))))
    }

    /// Applies a linear map on `H₀` to each auxiliary component of an element
    /// of the coherent algebra.
    pub fn apply_componentwise(
        &self,
        e: &GrassmannElement,
        f: impl Fn(&[C64]) -> Result<Vec<C64>>,
    ) -> Result<GrassmannElement> {
        let d0 = self.dim_h0();
        let naux = e.algebra().dim() / d0;
        let mut out = GrassmannElement::zero(e.algebra());
        for a in 0..naux {
            let comp = &e.coeffs()[a * d0..(a + 1) * d0];
            if comp.iter().all(|z| *z == ZERO) {
                continue;
            }
            let img = f(comp)?;
            for (m, z) in img.into_iter().enumerate() {
                out.set_coeff(a * d0 + m, z);
            }
        }
        Ok(out)
    }

    /// Bogoliubov transport tensored with the half-form transport in √K⁻¹.
    pub fn corrected_transport(&self, path: &GeodesicPath) -> Result<CorrectedTransport> {
        let bog = self.transport_bogoliubov(path)?;
        let hf = half_form_transport(path)?;
        let det = cut_locus_det(&path.start(), &path.end());
        let bogoliubov_scale = det.powf(-0.25);
        let coef = hf.coefficient.value;
        let matrix = bog.matrix.scale(coef);
        // ⟨Û(ψ'⊗√μ₀), ψ⊗√μ₀⟩ must equal the unscaled ⟨Pψ', ψ⟩.
        let mut pairing_residual: f64 = 0.0;
        let proj = self.gram(&bog.target.basis, &bog.source.basis);
        for k in 0..bog.source.basis.cols() {
            for l in 0..bog.source.basis.cols() {
                let plain: C64 = (0..proj.rows()).map(|m| proj[(m, k)].conj() * proj[(m, l)]).sum();
                let lhs = (0..proj.rows()).map(|m| bog.matrix[(m, k)].conj() * proj[(m, l)]).sum::<C64>() * hf.pairing;
                pairing_residual = pairing_residual.max((lhs - plain).norm());
            }
        }
        Ok(CorrectedTransport {
            operator: TransportOperator { matrix, provenance: Provenance::Corrected, ..bog },
            bogoliubov_scale,
            half_form_scale: hf.det_factor,
            half_form_coefficient: coef,
            half_form_pairing: hf.pairing,
            pairing_residual,
        })
    }

    /// Holonomy of the closed piecewise-geodesic loop through `vertices`.
    /// For triangles the curvature integral over the cone from the first
    /// vertex is evaluated with `nodes` Gauss–Legendre points per direction.
    pub fn holonomy(&self, vertices: &[ComplexStructure], nodes: usize) -> Result<FermionHolonomy> {
        if vertices.len() < 2 {
            return Err(Error::Invalid("a loop needs at least two vertices".into()));
        }
        let subs: Vec<HilbertSubspace> = vertices.iter().map(|v| self.hilbert_subspace(v)).collect::<Result<_>>()?;
        let dim = 1usize << self.n();
        let mut hol = CMatrix::identity(dim);
        let mut half = ONE;
        for k in 0..vertices.len() {
            let (a, b) = (k, (k + 1) % vertices.len());
            let path = geodesic_between(&vertices[a], &vertices[b], &self.space)?;
            let det = self.path_dets(&path)?;
            let leg = self.gram(&subs[b].basis, &subs[a].basis).scale(C64::from(det.powf(-0.25)));
            hol = leg.matmul(&hol);
            half *= half_form_transport(&path)?.coefficient.value;
        }
        let tr = hol.trace() / dim as f64;
        let phase = tr.arg();
        let residual = (&hol - &CMatrix::identity(dim).scale(C64::from_polar(1.0, phase))).max_abs();
        let corrected = hol.scale(half);
        let corrected_residual = (&corrected - &CMatrix::identity(dim)).max_abs();
        let curvature_phase = if vertices.len() == 3 {
            let f = triangle_curvature_integral(&vertices[0], &vertices[1], &vertices[2], &self.space, nodes)?;
            Some((I * f).re)
        } else {
            None
        };
        Ok(FermionHolonomy { operator: hol, phase, residual, curvature_phase, corrected, corrected_residual })
    }
}

/// Weight of the `(ᾱ¹ᾱ² + θ¹θ²) tan b` term in the printed n = 2 formula.
pub const DISPLAY_TAN_WEIGHT: f64 = 0.5;

/// Closed form for `n = 2` along the geodesic with chart value `z(t) = tan bt`:
/// `cos b · exp[(θ¹ᾱ¹+θ²ᾱ²) sec b + w (ᾱ¹ᾱ² + θ¹θ²) tan b − ½(θ¹θ̄¹+θ²θ̄²)]`,
/// with `θⁱ` the complex coordinates of the transported frame at `J₁`.
/// The general theorem gives `w = 1`; the printed formula has `w = ½`, which
/// is not norm preserving.
pub fn n2_coherent_closed_form(ctx: &FermionContext, b: f64, tan_weight: f64) -> Result<(GeodesicPath, GrassmannElement)> {
    if ctx.n() != 2 {
        return Err(Error::Invalid("closed form is for n = 2".into()));
    }
    let j0 = ComplexStructure::standard(2);
    // k = i·1 turns the normal-form block B into −B, the orientation with z = +tan bt.
    let k = CMatrix::identity(2).scale(I);
    let path = GeodesicPath::from_normal_form(&ctx.space, &j0, &k, &[b])?;
    let alg = ctx.coherent_algebra()?;
    let e0 = unitary_frame(&j0, &ctx.space)?.matrix;
    let e1 = path.g(1.0).matmul(&e0);
    let th = ctx.coframe_on(&e1, &alg, 0);
    let thb: Vec<GrassmannElement> = (0..2)
        .map(|i| GrassmannElement::linear(&alg, &[0, 1, 2, 3], &e1.column(i)))
        .collect();
    let ab = |i: usize| GrassmannElement::generator(&alg, ctx.alpha_bar_gen(i));
    let (sec, tan) = (1.0 / b.cos(), b.tan());
    let mut x = &(&th[0] * &ab(0)) + &(&th[1] * &ab(1));
    x = x.scale(C64::from(sec));
    x = &x + &(&(&ab(0) * &ab(1)) + &(&th[0] * &th[1])).scale(C64::from(tan_weight * tan));
    x = &x - &(&(&th[0] * &thb[0]) + &(&th[1] * &thb[1])).scale(C64::from(0.5));
    Ok((path, x.exp().scale(C64::from(b.cos()))))
}

/// Sign of `J₀` orientation, re-exported for measure bookkeeping.
pub fn tilde_measure_scalar(n: usize) -> C64 {
    I.powu(n as u32) * orientation_sign(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::random_compatible;
    use crate::scalars_matrices::c;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rvec(rng: &mut ChaCha8Rng, d: usize) -> Vec<C64> {
        (0..d).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
    }

    fn single_b(ctx: &FermionContext, b: f64) -> GeodesicPath {
        let n = ctx.n();
        GeodesicPath::from_normal_form(&ctx.space, &ComplexStructure::standard(n), &CMatrix::identity(n), &[b]).unwrap()
    }

    #[test]
    fn anticommutators() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..=3 {
            let ctx = FermionContext::new(n).unwrap();
            let d = ctx.dim_h0();
            for _ in 0..10 {
                let x: Vec<C64> = (0..2 * n).map(|_| C64::from(rng.random_range(-1.0..1.0))).collect();
                let y: Vec<C64> = (0..2 * n).map(|_| C64::from(rng.random_range(-1.0..1.0))).collect();
                let gxy: C64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
                let (nx, ny) = (ctx.nabla(&x), ctx.nabla(&y));
                let ac = &nx.matmul(&ny) + &ny.matmul(&nx);
                assert!((&ac + &CMatrix::identity(d).scale(gxy)).max_abs() < 1e-12);
                let (cx, cy) = (ctx.clifford(&x), ctx.clifford(&y));
                let ac = &cx.matmul(&cy) + &cy.matmul(&cx);
                assert!((&ac - &CMatrix::identity(d).scale(gxy)).max_abs() < 1e-12);
                assert!((&ctx.adjoint(&nx) + &nx).max_abs() < 1e-12);
                assert!((&ctx.adjoint(&cx) - &cx).max_abs() < 1e-12);
            }
        }
    }

    #[test]
    fn subspace_dimension_and_holomorphy() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in 1..=3 {
            let ctx = FermionContext::new(n).unwrap();
            let j = random_compatible(&ctx.space, &mut rng, 0.6);
            let sub = ctx.hilbert_subspace(&j).unwrap();
            assert_eq!(sub.basis.cols(), 1 << n);
            assert!(ctx.holomorphy_residual(&sub, &sub.basis) < 1e-11);
            let raw = ctx.monomial_states(&j, &sub.frame);
            assert!((&ctx.gram(&raw, &raw) - &CMatrix::identity(1 << n)).max_abs() < 1e-12);
            assert_eq!(ctx.kernel_dimension(&j, 1e-9).unwrap(), 1 << n);
        }
        let ctx = FermionContext::new(2).unwrap();
        let j0 = ComplexStructure::standard(2);
        let a = ctx.hilbert_subspace(&j0).unwrap();
        let b = ctx.hilbert_subspace(&j0.neg()).unwrap();
        let sv = crate::scalars_matrices::singular_values(&ctx.gram(&a.basis, &b.basis));
        assert!(sv[0] < 1.0 - 1e-3);
    }

    #[test]
    fn clifford_preserves_subspace() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ctx = FermionContext::new(2).unwrap();
        let j = random_compatible(&ctx.space, &mut rng, 0.5);
        let sub = ctx.hilbert_subspace(&j).unwrap();
        let alpha: Vec<C64> = (0..4).map(|_| C64::from(rng.random_range(-1.0..1.0))).collect();
        for k in 0..sub.basis.cols() {
            let img = ctx.apply_clifford(&alpha, &sub.basis.column(k));
            let back = ctx.bergman_project(&sub, &img);
            assert!(img.iter().zip(&back).all(|(x, y)| (x - y).norm() < 1e-12));
        }
        // action on φ: ι_{α^{0,1}} + α^{1,0}∧
        let j0 = ComplexStructure::standard(2);
        let sub = ctx.hilbert_subspace(&j0).unwrap();
        let vac = ctx.gaussian_factor(&j0);
        let p = projection_p(&j0);
        let a10: Vec<C64> = p.transpose().mul_vec(&alpha);
        let a01: Vec<C64> = alpha.iter().zip(&a10).map(|(x, y)| x - y).collect();
        let inv_vac = ctx.varpi_on(&j0, ctx.algebra(), 0).scale(-I * 0.5).exp();
        for k in 0..sub.basis.cols() {
            let psi = sub.basis.column(k);
            let phi = &inv_vac * &ctx.element(&psi).unwrap();
            let mut expect = ctx.apply_linear(&a01, &[ZERO; 4], phi.coeffs());
            let wedge = ctx.apply_linear(&[ZERO; 4], &a10, phi.coeffs());
            for (x, y) in expect.iter_mut().zip(&wedge) {
                *x += y;
            }
            let lhs = ctx.apply_clifford(&alpha, &psi);
            let rhs = (&vac * &ctx.element(&expect).unwrap()).into_coeffs();
            assert!(lhs.iter().zip(&rhs).all(|(x, y)| (x - y).norm() < 1e-12));
        }
    }

    #[test]
    fn two_inner_product_formulas() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in 1..=3 {
            let ctx = FermionContext::new(n).unwrap();
            let j = random_compatible(&ctx.space, &mut rng, 0.7);
            let sub = ctx.hilbert_subspace(&j).unwrap();
            let inv_vac = ctx.varpi_on(&j, ctx.algebra(), 0).scale(-I * 0.5).exp();
            let weight = ctx.varpi_on(&j, ctx.algebra(), 0).scale(I).exp();
            let gens: Vec<usize> = (0..2 * n).collect();
            for _ in 0..5 {
                let a = sub.basis.mul_vec(&rvec(&mut rng, 1 << n));
                let b = sub.basis.mul_vec(&rvec(&mut rng, 1 << n));
                let h0 = ctx.inner(&a, &b);
                // Hodge form: ∫ ψ̄ ∧ ★₀ ψ' ε_g via the pairing with e₁∧⋯∧e₂ₙ.
                let s = orientation_sign(n);
                let abar = ctx.element(&a.iter().map(|z| z.conj()).collect::<Vec<_>>()).unwrap();
                let star = ctx.element(&b).unwrap().hodge_star(s, 0.5);
                let hodge = (&abar * &star).berezin_pairing() * s;
                assert!((hodge - h0).norm() < 1e-11);
                let pa = &inv_vac * &ctx.element(&a).unwrap();
                let pb = &inv_vac * &ctx.element(&b).unwrap();
                let berezin = (&(&pa.star_involution().unwrap() * &pb) * &weight)
                    .integrate_all(&gens, Measure::TildeVolume { n })
                    .unwrap();
                assert!((berezin - h0).norm() < 1e-11, "n={n}: {berezin} vs {h0}");
            }
        }
    }

    #[test]
    fn kernel_projection_matches_gram_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=3 {
            let ctx = FermionContext::new(n).unwrap();
            let j = random_compatible(&ctx.space, &mut rng, 0.5);
            let sub = ctx.hilbert_subspace(&j).unwrap();
            let psi = rvec(&mut rng, ctx.dim_h0());
            let a = ctx.bergman_project(&sub, &psi);
            let b = ctx.bergman_project_kernel(&j, &psi).unwrap();
            assert!(a.iter().zip(&b).all(|(x, y)| (x - y).norm() < 1e-10), "n={n}");
            let again = ctx.bergman_project(&sub, &a);
            assert!(a.iter().zip(&again).all(|(x, y)| (x - y).norm() < 1e-12));
        }
    }

    #[test]
    fn connection_defining_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ctx = FermionContext::new(2).unwrap();
        let j = random_compatible(&ctx.space, &mut rng, 0.5);
        let x = crate::phase_space::random_lie_element(&ctx.space, &mut rng, 1.0);
        let dj = x.commutator(&j.j);
        let a = ctx.connection_operator(&j, &dj).unwrap();
        assert!(ctx.connection_operator(&j, &CMatrix::zeros(4, 4)).unwrap().max_abs() == 0.0);
        let sub = ctx.hilbert_subspace(&j).unwrap();
        let dp = dj.scale(-I * 0.5);
        for k in 0..sub.basis.cols() {
            let psi = sub.basis.column(k);
            let dpsi: Vec<C64> = a.mul_vec(&psi).into_iter().map(|z| -z).collect();
            for l in 0..sub.basis.cols() {
                assert!(ctx.inner(&sub.basis.column(l), &dpsi).norm() < 1e-12);
            }
            for i in 0..2 {
                let eb: Vec<C64> = sub.frame.column(i).iter().map(|z| z.conj()).collect();
                let lhs = ctx.apply_nabla(&eb, &dpsi);
                let rhs = ctx.apply_nabla(&dp.mul_vec(&eb), &psi);
                assert!(lhs.iter().zip(&rhs).all(|(p, q)| (p - q).norm() < 1e-10));
            }
        }
    }

    #[test]
    fn ode_matches_bogoliubov() {
        let ctx = FermionContext::new(2).unwrap();
        let path = single_b(&ctx, 1.0);
        let ode = ctx.transport_ode_operator(&path, 1000).unwrap();
        let bog = ctx.transport_bogoliubov(&path).unwrap();
        assert!((&ode.matrix - &bog.matrix).max_abs() < 1e-7);
        assert!(bog.unitarity_residual() < 1e-9);
        let f = crate::scalars_matrices::singular_values(&ctx.gram(&bog.target.basis, &bog.source.basis));
        assert!((f[0] * 1.0f64.cos().powi(0) - 1.0).abs() < 1e-9 || f.iter().any(|s| (s - 1.0f64.cos()).abs() < 1e-9));
        let constant = GeodesicPath::constant(&ctx.space, &ComplexStructure::standard(2));
        let id = ctx.transport_bogoliubov(&constant).unwrap();
        assert!((&id.matrix - &CMatrix::identity(4)).max_abs() < 1e-12);
        assert!(matches!(ctx.transport_bogoliubov(&single_b(&ctx, 1.6)), Err(Error::CutLocus(_))));
    }

    #[test]
    fn kernel_and_coherent_transports_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [2, 3] {
            let ctx = FermionContext::new(n).unwrap();
            let j0 = random_compatible(&ctx.space, &mut rng, 0.3);
            let j1 = random_compatible(&ctx.space, &mut rng, 0.3);
            let path = geodesic_between(&j0, &j1, &ctx.space).unwrap();
            let bog = ctx.transport_bogoliubov(&path).unwrap();
            let ker = ctx.kernel_transport_operator(&path).unwrap();
            assert!((&bog.matrix - &ker.matrix).max_abs() < 1e-9, "n={n}");
            let c0 = ctx.coherent_state(&j0).unwrap();
            let closed = ctx.transport_coherent(&path).unwrap();
            let via = ctx.apply_componentwise(&c0, |v| Ok(ctx.apply_transport(&bog, v))).unwrap();
            assert!(closed.max_abs_diff(&via) < 1e-9, "n={n}: {}", closed.max_abs_diff(&via));
        }
    }

    #[test]
    fn n2_closed_form() {
        let ctx = FermionContext::new(2).unwrap();
        for b in [0.3, 1.0] {
            let (_, printed) = n2_coherent_closed_form(&ctx, b, DISPLAY_TAN_WEIGHT).unwrap();
            let (path, expect) = n2_coherent_closed_form(&ctx, b, 1.0).unwrap();
            let ch = crate::phase_space::graph_chart(&path.base, &path.end(), &ctx.space).unwrap();
            assert!((ch.z[(0, 1)] - C64::from(b.tan())).norm() < 1e-10, "{:?}", ch.z);
            let got = ctx.transport_coherent(&path).unwrap();
            assert!(got.max_abs_diff(&expect) < 1e-10, "b={b}: {}", got.max_abs_diff(&expect));
            assert!(got.max_abs_diff(&printed) > 1e-2);
            // vacuum component: cos b (1 + w tan b θ¹θ²) e^{−½θθ̄} has norm² cos²b (1 + w² tan²b)
            let d0 = ctx.dim_h0();
            assert!((ctx.norm(&got.coeffs()[..d0]) - 1.0).abs() < 1e-12);
            assert!((ctx.norm(&printed.coeffs()[..d0]) - 1.0).abs() > 1e-3);
        }
    }

    #[test]
    fn holonomy_is_projectively_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let ctx = FermionContext::new(2).unwrap();
        let a = random_compatible(&ctx.space, &mut rng, 0.3);
        let b = random_compatible(&ctx.space, &mut rng, 0.3);
        let c = random_compatible(&ctx.space, &mut rng, 0.3);
        let h = ctx.holonomy(&[a, b, c], 12).unwrap();
        assert!(h.residual < 1e-6);
        assert!((h.phase - h.curvature_phase.unwrap()).abs() < 1e-4, "{} vs {:?}", h.phase, h.curvature_phase);
        assert!(h.corrected_residual < 1e-6);
        let j0 = ComplexStructure::standard(2);
        let back = ctx.holonomy(&[j0.clone(), random_compatible(&ctx.space, &mut rng, 0.4)], 4).unwrap();
        assert!(back.phase.abs() < 1e-10 && back.residual < 1e-10);
    }
}
