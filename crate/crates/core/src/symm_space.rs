//! Geodesics, cut locus, Kähler data and bundle transports on the spaces of
//! compatible complex structures.

use crate::error::{Error, Result};
use crate::phase_space::{unitary_frame, ComplexStructure, Family, LinearPhaseSpace};
use crate::scalars_matrices::{
    expm, gauss_legendre, principal_log, singular_values, tracked_root, BranchTrackedScalar, CMatrix, C64, I, ZERO,
};

/// Sampling density along geodesics, per unit arc-length.
pub const STEPS_PER_UNIT: f64 = 200.0;
/// Below this determinant the Bogoliubov and half-form pairings are refused.
pub const DET_REFUSAL: f64 = 1e-8;

/// Geodesic J_t = exp(2tM) J₀, t ∈ t_range.
#[derive(Clone, Debug, PartialEq)]
pub struct GeodesicPath {
    pub space: LinearPhaseSpace,
    pub base: ComplexStructure,
    /// Real generator M, anticommuting with J₀.
    pub m: CMatrix,
    /// Unitary frame rotation of the normal form, when the path was built from one.
    pub k: Option<CMatrix>,
    /// Normal-form parameters b₁ ≥ b₂ ≥ … > 0.
    pub b: Vec<f64>,
    pub t_range: (f64, f64),
}

impl GeodesicPath {
    /// Builds the geodesic from a normal form (k, B) at `base`.
    pub fn from_normal_form(space: &LinearPhaseSpace, base: &ComplexStructure, k: &CMatrix, b: &[f64]) -> Result<Self> {
        let n = space.n;
        if k.rows() != n || k.cols() != n {
            return Err(Error::Dimension("k must be n x n".into()));
        }
        if (&k.adjoint().matmul(k) - &CMatrix::identity(n)).max_abs() > 1e-10 {
            return Err(Error::Invalid("k is not unitary".into()));
        }
        if b.iter().any(|&x| !x.is_finite() || x <= 0.0) {
            return Err(Error::Invalid("normal-form parameters must be positive".into()));
        }
        let mut bm = CMatrix::zeros(n, n);
        match space.kind {
            Family::Symplectic => {
                if b.len() > n {
                    return Err(Error::Invalid("too many b values".into()));
                }
                for (i, &x) in b.iter().enumerate() {
                    bm[(i, i)] = C64::new(x, 0.0);
                }
            }
            Family::Euclidean => {
                if 2 * b.len() > n {
                    return Err(Error::Invalid("at most n/2 b values in the euclidean case".into()));
                }
                for (i, &x) in b.iter().enumerate() {
                    bm[(2 * i, 2 * i + 1)] = C64::new(x, 0.0);
                    bm[(2 * i + 1, 2 * i)] = C64::new(-x, 0.0);
                }
            }
        }
        let bp = k.matmul(&bm).matmul(&k.transpose());
        let mut mc = CMatrix::zeros(2 * n, 2 * n);
        mc.set_block(0, n, &bp);
        mc.set_block(n, 0, &bp.conj());
        let s = unitary_frame(base, space)?.full_basis();
        let m = s.matmul(&mc).matmul(&s.inverse()?);
        if m.max_imag() > 1e-10 {
            return Err(Error::Invalid("normal form does not give a real generator".into()));
        }
        let mut bs = b.to_vec();
        bs.sort_by(|x, y| y.total_cmp(x));
        Ok(GeodesicPath { space: space.clone(), base: base.clone(), m: m.real_part(), k: Some(k.clone()), b: bs, t_range: (0.0, 1.0) })
    }

    pub fn constant(space: &LinearPhaseSpace, base: &ComplexStructure) -> Self {
        let d = space.dim();
        GeodesicPath {
            space: space.clone(),
            base: base.clone(),
            m: CMatrix::zeros(d, d),
            k: Some(CMatrix::identity(space.n)),
            b: vec![],
            t_range: (0.0, 1.0),
        }
    }

    /// g_t = exp(tM).
    pub fn g(&self, t: f64) -> CMatrix {
        expm(&self.m.scale_re(t)).real_part()
    }

    pub fn sample(&self, t: f64) -> ComplexStructure {
        geodesic_sample(self, t)
    }

    pub fn start(&self) -> ComplexStructure {
        self.sample(self.t_range.0)
    }

    pub fn end(&self) -> ComplexStructure {
        self.sample(self.t_range.1)
    }

    /// dJ_t/dt = 2 M J_t.
    pub fn velocity(&self, t: f64) -> CMatrix {
        self.m.scale_re(2.0).matmul(&self.sample(t).j)
    }

    /// Arc length over t_range in the restricted Kähler metric.
    pub fn arc_length(&self) -> f64 {
        let v = self.velocity(0.0);
        let (eta, _) = kahler_eval_unchecked(&self.base, &v, &v, self.space.kind);
        eta.max(0.0).sqrt() * (self.t_range.1 - self.t_range.0).abs()
    }

    /// Sample count: 200 per unit arc-length, at least 50.
    pub fn steps(&self) -> usize {
        ((STEPS_PER_UNIT * self.arc_length()).ceil() as usize).max(50)
    }

    /// Sub-path over [t0, t1] re-parametrised to [0, 1].
    pub fn segment(&self, t0: f64, t1: f64) -> GeodesicPath {
        let base = self.sample(t0);
        GeodesicPath {
            space: self.space.clone(),
            base,
            m: self.m.scale_re(t1 - t0),
            k: None,
            b: self.b.iter().map(|x| x * (t1 - t0).abs()).collect(),
            t_range: (0.0, 1.0),
        }
    }
}

pub fn geodesic_sample(path: &GeodesicPath, t: f64) -> ComplexStructure {
    let g2 = expm(&path.m.scale_re(2.0 * t)).real_part();
    ComplexStructure { j: g2.matmul(&path.base.j).real_part() }
}

/// Recovers the geodesic from J₀ to J₁ as M = ½ log(-J₁J₀).
pub fn geodesic_between(j0: &ComplexStructure, j1: &ComplexStructure, space: &LinearPhaseSpace) -> Result<GeodesicPath> {
    let g2 = j1.j.matmul(&j0.j).scale_re(-1.0);
    let l = match principal_log(&g2) {
        Ok(l) => l,
        Err(Error::BranchCut) | Err(Error::Singular) => return Err(Error::CutLocus(cut_locus_det(j0, j1))),
        Err(e) => return Err(e),
    };
    let m = l.scale_re(0.5).real_part();
    let b = extract_b(&m, j0, space)?;
    Ok(GeodesicPath { space: space.clone(), base: j0.clone(), m, k: None, b, t_range: (0.0, 1.0) })
}

/// Normal-form parameters: singular values of the off-diagonal block of M
/// in the unitary frame of the base point (stable descending order).
pub fn extract_b(m: &CMatrix, base: &ComplexStructure, space: &LinearPhaseSpace) -> Result<Vec<f64>> {
    let n = space.n;
    let s = unitary_frame(base, space)?.full_basis();
    let mc = s.inverse()?.matmul(m).matmul(&s);
    let bp = mc.submatrix(0, n, n, n);
    let sv = singular_values(&bp);
    let tol = 1e-12 * (1.0 + m.max_abs());
    Ok(match space.kind {
        Family::Symplectic => sv.into_iter().filter(|&x| x > tol).collect(),
        Family::Euclidean => sv.into_iter().step_by(2).filter(|&x| x > tol).collect(),
    })
}

/// det((J₀+J₁)/2).
pub fn cut_locus_det(j0: &ComplexStructure, j1: &ComplexStructure) -> f64 {
    (&j0.j + &j1.j).scale_re(0.5).det().map(|d| d.re).unwrap_or(0.0)
}

fn delta_p(dj: &CMatrix) -> CMatrix {
    dj.scale(-I * 0.5)
}

/// Checks that δJ is tangent at J to the given compatible family.
pub fn check_tangent(j: &ComplexStructure, dj: &CMatrix, space: &LinearPhaseSpace) -> Result<()> {
    let anti = (&dj.matmul(&j.j) + &j.j.matmul(dj)).max_abs();
    let form = match space.kind {
        Family::Symplectic => &dj.transpose().matmul(&space.form).matmul(&j.j) + &j.j.transpose().matmul(&space.form).matmul(dj),
        Family::Euclidean => &dj.transpose().matmul(&j.j) + &j.j.transpose().matmul(dj),
    };
    let scale = 1e-9 * (1.0 + dj.max_abs());
    if anti > scale || form.max_abs() > scale {
        return Err(Error::Invalid(format!("not a tangent vector (residuals {anti:e}, {:e})", form.max_abs())));
    }
    Ok(())
}

/// (η, σ) of the ambient space, with η = -2 tr(P δP δP P) polarised and
/// σ = i tr(P δP∧δP P).
pub fn kahler_eval_ambient(j: &ComplexStructure, dj1: &CMatrix, dj2: &CMatrix) -> (f64, f64) {
    let p = j.p();
    let a = delta_p(dj1);
    let b = delta_p(dj2);
    let ab = p.matmul(&a).matmul(&b).matmul(&p).trace();
    let ba = p.matmul(&b).matmul(&a).matmul(&p).trace();
    let eta = -(ab + ba);
    let sigma = I * (ab - ba);
    (eta.re, sigma.re)
}

fn kahler_eval_unchecked(j: &ComplexStructure, dj1: &CMatrix, dj2: &CMatrix, kind: Family) -> (f64, f64) {
    let (eta, sigma) = kahler_eval_ambient(j, dj1, dj2);
    match kind {
        Family::Symplectic => (eta, sigma),
        Family::Euclidean => (-eta, -sigma),
    }
}

/// Restricted Kähler metric and form (η_ω, σ_ω) or (η_g, σ_g).
pub fn kahler_eval(j: &ComplexStructure, dj1: &CMatrix, dj2: &CMatrix, space: &LinearPhaseSpace) -> Result<(f64, f64)> {
    check_tangent(j, dj1, space)?;
    check_tangent(j, dj2, space)?;
    Ok(kahler_eval_unchecked(j, dj1, dj2, space.kind))
}

/// Curvature of the quantum bundle on the pair (δJ₁, δJ₂): σ/2i for the family.
pub fn curvature_2form(j: &ComplexStructure, dj1: &CMatrix, dj2: &CMatrix, family: Family) -> C64 {
    let p = j.p();
    let a = delta_p(dj1);
    let b = delta_p(dj2);
    let w = (&a.matmul(&b) - &b.matmul(&a)).scale_re(0.5);
    let val = p.matmul(&w).matmul(&p).trace();
    match family {
        Family::Symplectic => val,
        Family::Euclidean => -val,
    }
}

/// Parallel transport in the tautological bundle along the geodesic at
/// parameter t: the map J_{t/2}/i, as an ambient 2n×2n matrix.
pub fn v_transport_ambient(path: &GeodesicPath, t: f64) -> CMatrix {
    path.sample(0.5 * t).j.scale(-I)
}

/// Matrix of J_{1/2}/i between the unitary frames at the endpoints.
pub fn v_bundle_transport(path: &GeodesicPath) -> Result<CMatrix> {
    let t1 = path.t_range.1;
    let f0 = unitary_frame(&path.start(), &path.space)?;
    let f1 = unitary_frame(&path.sample(t1), &path.space)?;
    let tm = v_transport_ambient(path, t1);
    Ok(frame_matrix(&path.space, &tm, &f0.matrix, &f1.matrix))
}

/// Entries h₀(T f0_j, f1_i).
fn frame_matrix(space: &LinearPhaseSpace, t: &CMatrix, f0: &CMatrix, f1: &CMatrix) -> CMatrix {
    let images = t.matmul(f0);
    CMatrix::from_fn(f1.cols(), f0.cols(), |i, jx| space.h0(&images.column(jx), &f1.column(i)))
}

/// Output of the half-form transport.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfFormTransport {
    /// Transported half-form coefficient (square root of the frame determinant
    /// of the tautological transport, inverted for √K).
    pub coefficient: BranchTrackedScalar,
    /// Pairing ⟨√μ₁, √μ₀⟩ of the transported and initial half-forms.
    pub pairing: C64,
    /// det((J₀+J₁)/2)^{∓1/4}: +1/4 for √K⁻¹ (euclidean), -1/4 for √K (symplectic).
    pub det_factor: f64,
}

/// Samples for the half-form roots. Near the euclidean cut locus the pairing
/// behaves like `cos²(bt)`, so the density grows with `b·tan(bt)` to keep the
/// relative change per step near 5%.
fn half_form_steps(path: &GeodesicPath) -> usize {
    let base = path.steps();
    if path.space.kind != Family::Euclidean {
        return base;
    }
    let (t0, t1) = path.t_range;
    let t = t0.abs().max(t1.abs());
    let worst = path.b.iter().map(|&b| b * (b * t).min(std::f64::consts::FRAC_PI_2 - 1e-3).tan()).fold(0.0, f64::max);
    base.max((40.0 * worst * (t1 - t0).abs()).ceil() as usize)
}

pub fn half_form_transport(path: &GeodesicPath) -> Result<HalfFormTransport> {
    let space = &path.space;
    let steps = half_form_steps(path);
    let j0 = path.start();
    let f0 = unitary_frame(&j0, space)?.matrix;
    let mut dets = Vec::with_capacity(steps + 1);
    let mut grams = Vec::with_capacity(steps + 1);
    for s in 0..=steps {
        let t = path.t_range.0 + (path.t_range.1 - path.t_range.0) * s as f64 / steps as f64;
        let jt = path.sample(t);
        let cd = cut_locus_det(&j0, &jt);
        if space.kind == Family::Euclidean && cd <= DET_REFUSAL {
            return Err(Error::PairingDegenerate { t, det: cd });
        }
        let ft = unitary_frame(&jt, space)?.matrix;
        let tm = v_transport_ambient(path, t - path.t_range.0);
        dets.push(frame_matrix(space, &tm, &f0, &ft).det()?);
        // ⟨μ_t, μ₀⟩ with μ_t the transported frame wedge, antilinear in μ_t.
        let img = tm.matmul(&f0);
        let g = CMatrix::from_fn(space.n, space.n, |a, b| space.h0(&f0.column(b), &img.column(a)));
        grams.push(g.det()?);
    }
    let root = tracked_root(&dets, 2)?;
    let pair = tracked_root(&grams, 2)?;
    let cd = cut_locus_det(&j0, &path.end());
    Ok(match space.kind {
        Family::Euclidean => HalfFormTransport { coefficient: root, pairing: pair.value, det_factor: cd.powf(0.25) },
        Family::Symplectic => {
            let inv = BranchTrackedScalar {
                value: 1.0 / root.value,
                order: 2,
                history: root.history.iter().map(|z| 1.0 / z).collect(),
            };
            HalfFormTransport { coefficient: inv, pairing: 1.0 / pair.value.conj(), det_factor: cd.powf(-0.25) }
        }
    })
}

/// Integral of the quantum-bundle curvature over the geodesic triangle
/// (a, b, c), parametrised as the cone from a over the edge b→c.
/// Orientation follows the loop a → b → c → a.
pub fn triangle_curvature_integral(
    a: &ComplexStructure,
    b: &ComplexStructure,
    c: &ComplexStructure,
    space: &LinearPhaseSpace,
    nodes: usize,
) -> Result<C64> {
    let edge = geodesic_between(b, c, space)?;
    let (x, w) = gauss_legendre(nodes);
    let h = 1e-5;
    let point = |u: f64, v: f64| -> Result<ComplexStructure> {
        let p = edge.sample(v);
        Ok(geodesic_between(a, &p, space)?.sample(u))
    };
    let mut total = ZERO;
    for (iu, &u) in x.iter().enumerate() {
        for (iv, &v) in x.iter().enumerate() {
            let j = point(u, v)?;
            let du = (&point(u + h, v)?.j - &point(u - h, v)?.j).scale_re(0.5 / h);
            let dv = (&point(u, v + h)?.j - &point(u, v - h)?.j).scale_re(0.5 / h);
            total += curvature_2form(&j, &du, &dv, space.kind) * (w[iu] * w[iv]);
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::{chart_to_j, check_compatibility, graph_chart, random_compatible, random_unitary, GraphChart};
    use crate::scalars_matrices::{c, r, ONE};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single_b(kind: Family, n: usize, b: f64) -> GeodesicPath {
        let space = LinearPhaseSpace::standard(n, kind);
        GeodesicPath::from_normal_form(&space, &ComplexStructure::standard(n), &CMatrix::identity(n), &[b]).unwrap()
    }

    #[test]
    fn normal_form_frames() {
        let b = 0.7;
        let path = single_b(Family::Euclidean, 2, b);
        let t = 0.6;
        let jt = path.sample(t);
        let f = unitary_frame(&ComplexStructure::standard(2), &path.space).unwrap();
        let (e1, e2) = (f.vector(0), f.vector(1));
        let (cs, sn) = ((b * t).cos(), (b * t).sin());
        let v1: Vec<C64> = (0..4).map(|k| e1[k] * cs - e2[k].conj() * sn).collect();
        let v2: Vec<C64> = (0..4).map(|k| e2[k] * cs + e1[k].conj() * sn).collect();
        for v in [v1, v2] {
            let jv = jt.j.mul_vec(&v);
            for k in 0..4 {
                assert!((jv[k] - I * v[k]).norm() < 1e-12);
            }
        }
        assert!((&path.sample(0.0).j - &path.base.j).max_abs() < 1e-15);
        let sp = single_b(Family::Symplectic, 1, 1.0);
        for t in [0.2, 0.9, 1.7] {
            let ch = graph_chart(&sp.base, &sp.sample(t), &sp.space).unwrap();
            assert!((ch.z[(0, 0)] - r(f64::tanh(t))).norm() < 1e-12);
        }
    }

    #[test]
    fn geodesics_stay_compatible_and_midpoint_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for kind in [Family::Symplectic, Family::Euclidean] {
            let space = LinearPhaseSpace::standard(3, kind);
            let j0 = random_compatible(&space, &mut rng, 0.4);
            let j1 = random_compatible(&space, &mut rng, 0.4);
            let path = geodesic_between(&j0, &j1, &space).unwrap();
            assert!((&path.sample(1.0).j - &j1.j).max_abs() < 1e-9);
            for k in 0..=100 {
                let rep = check_compatibility(&path.sample(k as f64 / 100.0), &space);
                assert!(rep.compatible && rep.square_residual < 1e-9 && rep.invariance_residual < 1e-9);
            }
            let mid = path.sample(0.5);
            assert!((&mid.j.matmul(&j0.j) - &j1.j.matmul(&mid.j)).max_abs() < 1e-9);
            let tv = path.velocity(0.3);
            check_tangent(&path.sample(0.3), &tv, &space).unwrap();
        }
    }

    #[test]
    fn between_recovers_normal_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let space = LinearPhaseSpace::euclidean(2);
        let k = random_unitary(2, &mut rng, 1.0);
        let path = GeodesicPath::from_normal_form(&space, &ComplexStructure::standard(2), &k, &[1.1]).unwrap();
        let back = geodesic_between(&path.base, &path.end(), &space).unwrap();
        assert!((back.b[0] - 1.1).abs() < 1e-10);
        assert!((&back.m - &path.m).max_abs() < 1e-9);
        let same = geodesic_between(&path.base, &path.base, &space).unwrap();
        assert!(same.b.is_empty());
        let j0 = ComplexStructure::standard(2);
        assert!(matches!(geodesic_between(&j0, &j0.neg(), &space), Err(Error::CutLocus(_))));
    }

    #[test]
    fn cut_locus_values() {
        let j0 = ComplexStructure::standard(2);
        assert!((cut_locus_det(&j0, &j0) - 1.0).abs() < 1e-15);
        assert!(cut_locus_det(&j0, &j0.neg()).abs() < 1e-15);
        let b = 1.2;
        let path = single_b(Family::Euclidean, 2, b);
        for t in [0.1, 0.5, 1.0] {
            let d = cut_locus_det(&j0, &path.sample(t));
            assert!((d - (b * t).cos().powi(4)).abs() < 1e-12);
        }
        let sp = single_b(Family::Symplectic, 2, b);
        assert!((cut_locus_det(&j0, &sp.end()) - b.cosh().powi(2)).abs() < 1e-11);
    }

    fn chart_tangent(base: &ComplexStructure, z: &CMatrix, dz: &CMatrix, space: &LinearPhaseSpace) -> (ComplexStructure, CMatrix) {
        let h = 1e-5;
        let at = |s: f64| chart_to_j(&GraphChart { base: base.clone(), z: z + &dz.scale_re(s) }, space).unwrap().j;
        let j = chart_to_j(&GraphChart { base: base.clone(), z: z.clone() }, space).unwrap();
        (j, (&at(h) - &at(-h)).scale_re(0.5 / h))
    }

    #[test]
    fn kahler_values_on_charts() {
        let sp = LinearPhaseSpace::symplectic(1);
        let j0 = ComplexStructure::standard(1);
        let z0 = CMatrix::zeros(1, 1);
        let (j, dx) = chart_tangent(&j0, &z0, &CMatrix::diag(&[ONE]), &sp);
        let (_, dy) = chart_tangent(&j0, &z0, &CMatrix::diag(&[I]), &sp);
        let (eta, sig0) = kahler_eval(&j, &dx, &dx, &sp).unwrap();
        let (_, sig) = kahler_eval(&j, &dx, &dy, &sp).unwrap();
        // trace formula: η = 2|dz|², σ = i dz∧dz̄ at the origin of the disk
        assert!((eta - 2.0).abs() < 1e-8 && sig0.abs() < 1e-12 && (sig - 2.0).abs() < 1e-8);
        let zc = c(0.3, 0.4);
        let (jz, dxz) = chart_tangent(&j0, &CMatrix::diag(&[zc]), &CMatrix::diag(&[ONE]), &sp);
        let (eta_z, _) = kahler_eval(&jz, &dxz, &dxz, &sp).unwrap();
        assert!((eta_z - 2.0 / (1.0 - zc.norm_sqr()).powi(2)).abs() < 1e-7);

        let eu = LinearPhaseSpace::euclidean(2);
        let j0 = ComplexStructure::standard(2);
        let anti = |z: C64| CMatrix::from_rows(&[vec![ZERO, z], vec![-z, ZERO]]);
        for z in [ZERO, c(0.5, -0.2)] {
            let (j, dx) = chart_tangent(&j0, &anti(z), &anti(ONE), &eu);
            let (_, dy) = chart_tangent(&j0, &anti(z), &anti(I), &eu);
            let (eta, _) = kahler_eval(&j, &dx, &dx, &eu).unwrap();
            let (_, sig) = kahler_eval(&j, &dx, &dy, &eu).unwrap();
            let f = (1.0 + z.norm_sqr()).powi(-2);
            assert!((eta - 4.0 * f).abs() < 1e-7, "{eta}");
            assert!((sig - 4.0 * f).abs() < 1e-7);
            let curv = curvature_2form(&j, &dx, &dy, Family::Euclidean);
            assert!((curv - C64::new(sig, 0.0) / (2.0 * I)).norm() < 1e-10 * sig.abs());
            assert!(curvature_2form(&j, &dx, &dx.scale_re(2.0), Family::Euclidean).norm() < 1e-12);
            let flip = curvature_2form(&j, &dx, &dy, Family::Symplectic);
            assert!((flip + curv).norm() < 1e-14);
        }
    }

    #[test]
    fn tautological_transport() {
        let path = single_b(Family::Euclidean, 2, 0.9);
        let t = v_bundle_transport(&path).unwrap();
        assert!((&t.adjoint().matmul(&t) - &CMatrix::identity(2)).max_abs() < 1e-10);
        let f0 = unitary_frame(&path.base, &path.space).unwrap();
        let img = v_transport_ambient(&path, 1.0).mul_vec(&f0.vector(0));
        let (e1, e2) = (f0.vector(0), f0.vector(1));
        for k in 0..4 {
            let expect = e1[k] * 0.9f64.cos() - e2[k].conj() * 0.9f64.sin();
            assert!((img[k] - expect).norm() < 1e-12);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let space = LinearPhaseSpace::symplectic(2);
        let j1 = random_compatible(&space, &mut rng, 0.5);
        let full = geodesic_between(&ComplexStructure::standard(2), &j1, &space).unwrap();
        let whole = v_transport_ambient(&full, 1.0);
        let first = v_transport_ambient(&full.segment(0.0, 0.5), 1.0);
        let second = v_transport_ambient(&full.segment(0.5, 1.0), 1.0);
        let f = unitary_frame(&full.base, &space).unwrap().matrix;
        assert!((&second.matmul(&first).matmul(&f) - &whole.matmul(&f)).max_abs() < 1e-9);
        let cst = GeodesicPath::constant(&space, &full.base);
        assert!((&v_bundle_transport(&cst).unwrap() - &CMatrix::identity(2)).max_abs() < 1e-14);
    }

    #[test]
    fn half_form_pairings() {
        for b in [0.3, 1.2] {
            let path = single_b(Family::Euclidean, 2, b);
            let h = half_form_transport(&path).unwrap();
            assert!((h.pairing - r(b.cos())).norm() < 1e-9);
            assert!((h.det_factor - b.cos()).abs() < 1e-12);
            let sp = single_b(Family::Symplectic, 1, b);
            let hs = half_form_transport(&sp).unwrap();
            let d = cut_locus_det(&sp.base, &sp.end());
            assert!((hs.pairing - r(d.powf(-0.25))).norm() < 1e-9);
        }
        let cst = GeodesicPath::constant(&LinearPhaseSpace::euclidean(2), &ComplexStructure::standard(2));
        let h = half_form_transport(&cst).unwrap();
        assert!((h.coefficient.value - ONE).norm() < 1e-14 && (h.pairing - ONE).norm() < 1e-14);
        let over = single_b(Family::Euclidean, 2, 1.6);
        assert!(matches!(half_form_transport(&over), Err(Error::PairingDegenerate { .. })));
    }

    #[test]
    fn sphere_triangle_area() {
        // A geodesic triangle on the n=2 sphere; σ_g is the unit-sphere area
        // form, so the curvature integral is (area)/(2i).
        let eu = LinearPhaseSpace::euclidean(2);
        let j0 = ComplexStructure::standard(2);
        let anti = |z: C64| CMatrix::from_rows(&[vec![ZERO, z], vec![-z, ZERO]]);
        let at = |z: C64| chart_to_j(&GraphChart { base: j0.clone(), z: anti(z) }, &eu).unwrap();
        let (a, b, cc) = (at(ZERO), at(r(0.4)), at(c(0.0, 0.4)));
        let integral = triangle_curvature_integral(&a, &b, &cc, &eu, 12).unwrap();
        // Unit-sphere points via inverse stereographic projection of the chart value.
        let sph = |z: C64| {
            let d = 1.0 + z.norm_sqr();
            [2.0 * z.re / d, 2.0 * z.im / d, (1.0 - z.norm_sqr()) / d]
        };
        let (p, q, s) = (sph(ZERO), sph(r(0.4)), sph(c(0.0, 0.4)));
        let dot = |x: [f64; 3], y: [f64; 3]| x[0] * y[0] + x[1] * y[1] + x[2] * y[2];
        let cross = [q[1] * s[2] - q[2] * s[1], q[2] * s[0] - q[0] * s[2], q[0] * s[1] - q[1] * s[0]];
        let area = 2.0 * dot(p, cross).abs().atan2(1.0 + dot(p, q) + dot(q, s) + dot(s, p));
        assert!((integral.im.abs() - area / 2.0).abs() < 1e-6, "{integral} {area}");
        assert!(integral.re.abs() < 1e-8);
    }
}
