//! Finite Grassmann algebras with dense coefficient storage.
//!
//! Bit `i` of a mask stands for generator `i`; a mask denotes the product of
//! its generators in ascending order.  Berezin integrals use the fermionic
//! coordinate convention: the measure sits to the right of the integrand, so
//! `∫ θ¹⋯θᵏ dθ¹⋯dθᵏ = (-1)^{k(k-1)/2}`.

use crate::error::{Error, Result};
use crate::scalars_matrices::{pfaffian, C64, CMatrix, I, ONE, ZERO};
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

pub const MAX_GENERATORS: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct GrassmannAlgebra {
    labels: Vec<String>,
    /// Conjugation partner of each generator.  Real generators are their own
    /// partner; `None` means conjugation is undefined on that generator.
    partner: Vec<Option<usize>>,
}

impl GrassmannAlgebra {
    pub fn new(labels: Vec<String>, partner: Vec<Option<usize>>) -> Result<Arc<Self>> {
        let n = labels.len();
        if n > MAX_GENERATORS {
            return Err(Error::Grassmann(format!("{n} generators exceed the bound {MAX_GENERATORS}")));
        }
        if partner.len() != n {
            return Err(Error::Dimension(format!("{} partners for {n} generators", partner.len())));
        }
        for (i, p) in partner.iter().enumerate() {
            if let Some(j) = *p {
                if j >= n || partner[j] != Some(i) {
                    return Err(Error::Grassmann(format!("partner map is not an involution at {i}")));
                }
            }
        }
        Ok(Arc::new(GrassmannAlgebra { labels, partner }))
    }

    /// `k` real generators `prefix1..prefixk`.
    pub fn real(k: usize, prefix: &str) -> Result<Arc<Self>> {
        let labels = (1..=k).map(|i| format!("{prefix}{i}")).collect();
        Self::new(labels, (0..k).map(Some).collect())
    }

    /// Complex-paired generators ordered `θ¹, θ̄¹, …, θⁿ, θ̄ⁿ`.
    pub fn complex(n: usize, prefix: &str) -> Result<Arc<Self>> {
        let mut labels = Vec::with_capacity(2 * n);
        let mut partner = Vec::with_capacity(2 * n);
        for i in 1..=n {
            labels.push(format!("{prefix}{i}"));
            labels.push(format!("{prefix}bar{i}"));
            partner.push(Some(2 * i - 1));
            partner.push(Some(2 * i - 2));
        }
        Self::new(labels, partner)
    }

    /// Generators of `self` followed by those of `other`.
    pub fn concat(&self, other: &GrassmannAlgebra) -> Result<Arc<Self>> {
        let off = self.len();
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().cloned());
        let mut partner = self.partner.clone();
        partner.extend(other.partner.iter().map(|p| p.map(|j| j + off)));
        Self::new(labels, partner)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        1 << self.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn partner(&self, i: usize) -> Option<usize> {
        self.partner[i]
    }
}

/// Sign of moving the ascending product `a` past `b`: parity of pairs
/// `(i in a, j in b)` with `i > j`.
#[inline]
fn merge_sign(a: usize, b: usize) -> bool {
    let mut bb = b;
    let mut odd = 0u32;
    while bb != 0 {
        let j = bb.trailing_zeros();
        odd ^= (a >> (j + 1)).count_ones() & 1;
        bb &= bb - 1;
    }
    odd == 1
}

/// Sign of the permutation sorting `seq` (distinct entries).
fn sort_sign(seq: &[usize]) -> bool {
    let mut odd = false;
    for p in 0..seq.len() {
        for q in p + 1..seq.len() {
            if seq[p] > seq[q] {
                odd = !odd;
            }
        }
    }
    odd
}

fn bits(mask: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(mask.count_ones() as usize);
    let mut m = mask;
    while m != 0 {
        out.push(m.trailing_zeros() as usize);
        m &= m - 1;
    }
    out
}

/// Scalar attached to a Berezin measure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Measure {
    /// `dθ^{i1}⋯dθ^{ik}` in the listed order.
    Coordinate,
    /// `ε_g` on `2n` real generators in standard order: `s·dθ¹⋯dθ²ⁿ`.
    Volume { n: usize },
    /// `ε̃_g = iⁿ ε_g`.
    TildeVolume { n: usize },
}

impl Measure {
    pub fn factor(&self) -> C64 {
        match *self {
            Measure::Coordinate => ONE,
            Measure::Volume { n } => C64::from(orientation_sign(n)),
            Measure::TildeVolume { n } => I.powu(n as u32) * orientation_sign(n),
        }
    }
}

/// Sign of the orientation of `J₀` relative to the standard basis order.
pub fn orientation_sign(n: usize) -> f64 {
    if (n * n.saturating_sub(1) / 2).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

#[derive(Clone, Debug)]
pub struct GrassmannElement {
    alg: Arc<GrassmannAlgebra>,
    coeffs: Vec<C64>,
}

impl PartialEq for GrassmannElement {
    fn eq(&self, other: &Self) -> bool {
        self.alg == other.alg && self.coeffs == other.coeffs
    }
}

impl GrassmannElement {
    pub fn zero(alg: &Arc<GrassmannAlgebra>) -> Self {
        GrassmannElement { alg: alg.clone(), coeffs: vec![ZERO; alg.dim()] }
    }

    pub fn scalar(alg: &Arc<GrassmannAlgebra>, c: C64) -> Self {
        let mut e = Self::zero(alg);
        e.coeffs[0] = c;
        e
    }

    pub fn one(alg: &Arc<GrassmannAlgebra>) -> Self {
        Self::scalar(alg, ONE)
    }

    pub fn generator(alg: &Arc<GrassmannAlgebra>, i: usize) -> Self {
        Self::monomial(alg, 1 << i, ONE)
    }

    pub fn monomial(alg: &Arc<GrassmannAlgebra>, mask: usize, c: C64) -> Self {
        let mut e = Self::zero(alg);
        e.coeffs[mask] = c;
        e
    }

    /// Ordered product `θ^{i1}⋯θ^{ik}` (any order, repeats give zero).
    pub fn product_of(alg: &Arc<GrassmannAlgebra>, gens: &[usize]) -> Self {
        let mut e = Self::one(alg);
        for &g in gens {
            e = &e * &Self::generator(alg, g);
        }
        e
    }

    /// `Σ_i c_i θ^{gens_i}`.
    pub fn linear(alg: &Arc<GrassmannAlgebra>, gens: &[usize], coeffs: &[C64]) -> Self {
        let mut e = Self::zero(alg);
        for (&g, &c) in gens.iter().zip(coeffs) {
            e.coeffs[1 << g] += c;
        }
        e
    }

    pub fn from_coeffs(alg: &Arc<GrassmannAlgebra>, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() != alg.dim() {
            return Err(Error::Dimension(format!("{} coefficients for dimension {}", coeffs.len(), alg.dim())));
        }
        Ok(GrassmannElement { alg: alg.clone(), coeffs })
    }

    pub fn algebra(&self) -> &Arc<GrassmannAlgebra> {
        &self.alg
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<C64> {
        self.coeffs
    }

    pub fn coeff(&self, mask: usize) -> C64 {
        self.coeffs[mask]
    }

    pub fn set_coeff(&mut self, mask: usize, c: C64) {
        self.coeffs[mask] = c;
    }

    pub fn nonzero(&self) -> impl Iterator<Item = (usize, C64)> + '_ {
        self.coeffs.iter().enumerate().filter(|(_, c)| **c != ZERO).map(|(m, c)| (m, *c))
    }

    pub fn degree_part(&self, p: usize) -> Self {
        let mut e = Self::zero(&self.alg);
        for (m, c) in self.nonzero() {
            if m.count_ones() as usize == p {
                e.coeffs[m] = c;
            }
        }
        e
    }

    pub fn is_even(&self, tol: f64) -> bool {
        self.nonzero().all(|(m, c)| m.count_ones() % 2 == 0 || c.norm() <= tol)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |a, c| a.max(c.norm()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).fold(0.0, |a, (x, y)| a.max((x - y).norm()))
    }

    pub fn scale(&self, s: C64) -> Self {
        GrassmannElement { alg: self.alg.clone(), coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.alg, &other.alg) || self.alg == other.alg {
            Ok(())
        } else {
            Err(Error::Grassmann("elements live in different algebras".into()))
        }
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(GrassmannElement { alg: self.alg.clone(), coeffs })
    }

    pub fn multiply(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut out = vec![ZERO; self.alg.dim()];
        let rhs: Vec<(usize, C64)> = other.nonzero().collect();
        for (ma, ca) in self.nonzero() {
            for &(mb, cb) in &rhs {
                if ma & mb != 0 {
                    continue;
                }
                let v = ca * cb;
                if merge_sign(ma, mb) {
                    out[ma | mb] -= v;
                } else {
                    out[ma | mb] += v;
                }
            }
        }
        Ok(GrassmannElement { alg: self.alg.clone(), coeffs: out })
    }

    /// Finite exponential series; the body part is exponentiated exactly.
    pub fn exp(&self) -> Self {
        let body = self.coeffs[0];
        let mut soul = self.clone();
        soul.coeffs[0] = ZERO;
        let mut term = Self::one(&self.alg);
        let mut sum = term.clone();
        for k in 1..=self.alg.len() + 1 {
            term = (&term * &soul).scale(C64::from(1.0 / k as f64));
            if term.max_abs() == 0.0 {
                break;
            }
            sum = &sum + &term;
        }
        sum.scale(body.exp())
    }

    /// `∂/∂θⁱ` acting from the left (contraction).
    pub fn left_derivative(&self, i: usize) -> Self {
        let mut e = Self::zero(&self.alg);
        let bit = 1 << i;
        for (m, c) in self.nonzero() {
            if m & bit != 0 {
                let odd = (m & (bit - 1)).count_ones() % 2 == 1;
                e.coeffs[m ^ bit] += if odd { -c } else { c };
            }
        }
        e
    }

    /// `∂/∂θⁱ` acting from the right.
    pub fn right_derivative(&self, i: usize) -> Self {
        let mut e = Self::zero(&self.alg);
        let bit = 1 << i;
        for (m, c) in self.nonzero() {
            if m & bit != 0 {
                let odd = (m >> (i + 1)).count_ones() % 2 == 1;
                e.coeffs[m ^ bit] += if odd { -c } else { c };
            }
        }
        e
    }

    /// `θⁱ · e`.
    pub fn left_mul_generator(&self, i: usize) -> Self {
        let mut e = Self::zero(&self.alg);
        let bit = 1 << i;
        for (m, c) in self.nonzero() {
            if m & bit == 0 {
                let odd = (m & (bit - 1)).count_ones() % 2 == 1;
                e.coeffs[m | bit] += if odd { -c } else { c };
            }
        }
        e
    }

    /// Berezin integral over `over` (in the listed order) times the measure
    /// scalar.  The remaining generators are kept to the left of the
    /// integration variables.
    pub fn integrate(&self, over: &[usize], measure: Measure) -> Result<Self> {
        let n = self.alg.len();
        let mut s_mask = 0usize;
        for &g in over {
            if g >= n {
                return Err(Error::Grassmann(format!("generator {g} outside the algebra")));
            }
            if s_mask & (1 << g) != 0 {
                return Err(Error::Grassmann(format!("generator {g} listed twice")));
            }
            s_mask |= 1 << g;
        }
        let k = over.len();
        let base = if (k * k.saturating_sub(1) / 2).is_multiple_of(2) { 1.0 } else { -1.0 };
        let factor = measure.factor() * base;
        let mut out = Self::zero(&self.alg);
        for (m, c) in self.nonzero() {
            if m & s_mask != s_mask {
                continue;
            }
            let rest = m & !s_mask;
            let mut seq = bits(rest);
            seq.extend_from_slice(over);
            let v = c * factor;
            out.coeffs[rest] += if sort_sign(&seq) { -v } else { v };
        }
        Ok(out)
    }

    /// Integral over every generator in the listed order.
    pub fn integrate_all(&self, over: &[usize], measure: Measure) -> Result<C64> {
        if over.len() != self.alg.len() {
            return Err(Error::Grassmann("full integral must list every generator".into()));
        }
        Ok(self.integrate(over, measure)?.coeffs[0])
    }

    /// Pairing of the top-degree component with `e_1∧⋯∧e_N` (the Berezin
    /// integral without the coordinate sign).
    pub fn berezin_pairing(&self) -> C64 {
        self.coeffs[self.alg.dim() - 1]
    }

    /// Antilinear order-reversing involution.
    pub fn star_involution(&self) -> Result<Self> {
        let mut out = Self::zero(&self.alg);
        for (m, c) in self.nonzero() {
            let gens = bits(m);
            let mut img = Vec::with_capacity(gens.len());
            for &g in gens.iter().rev() {
                let p = self.alg.partner[g]
                    .ok_or_else(|| Error::Grassmann(format!("generator {} has no conjugate", self.alg.labels[g])))?;
                img.push(p);
            }
            let mask = img.iter().fold(0usize, |a, &g| a | (1 << g));
            let v = c.conj();
            out.coeffs[mask] += if sort_sign(&img) { -v } else { v };
        }
        Ok(out)
    }

    /// Hodge star for a metric in which the generators are orthonormal
    /// covectors, scaled by `lambda` (so `lambda = 0.5` gives `★₀`), with
    /// volume form `orientation · θ¹⋯θᴺ`.
    pub fn hodge_star(&self, orientation: f64, lambda: f64) -> Self {
        let n = self.alg.len();
        let full = self.alg.dim() - 1;
        let mut out = Self::zero(&self.alg);
        for (m, c) in self.nonzero() {
            let p = m.count_ones() as i32;
            let comp = full ^ m;
            let scale = lambda.powf(n as f64 / 2.0 - p as f64) * orientation;
            let v = c * scale;
            out.coeffs[comp] += if merge_sign(m, comp) { -v } else { v };
        }
        out
    }

    /// Algebra homomorphism fixed by `θⁱ ↦ images[i]` (odd images).
    pub fn substitute(&self, images: &[GrassmannElement]) -> Result<Self> {
        if images.len() != self.alg.len() {
            return Err(Error::Dimension(format!("{} images for {} generators", images.len(), self.alg.len())));
        }
        let target = images
            .first()
            .map(|e| e.alg.clone())
            .ok_or_else(|| Error::Grassmann("substitution into an empty algebra".into()))?;
        for im in images {
            im.check_same(&images[0])?;
        }
        let mut out = GrassmannElement::zero(&target);
        for (m, c) in self.nonzero() {
            let mut term = GrassmannElement::scalar(&target, c);
            for g in bits(m) {
                term = &term * &images[g];
            }
            out = &out + &term;
        }
        Ok(out)
    }

    /// `θⁱ ↦ Σ_j l[(i, j)] θ'^{targets[j]}` in the algebra `target`.
    pub fn substitute_linear(&self, l: &CMatrix, target: &Arc<GrassmannAlgebra>, targets: &[usize]) -> Result<Self> {
        if l.rows() != self.alg.len() || l.cols() != targets.len() {
            return Err(Error::Dimension(format!(
                "map {}x{} for {} -> {} generators",
                l.rows(),
                l.cols(),
                self.alg.len(),
                targets.len()
            )));
        }
        let images: Vec<_> = (0..l.rows()).map(|i| GrassmannElement::linear(target, targets, &l.row(i))).collect();
        self.substitute(&images)
    }

    /// Copy into a larger algebra whose generators `offset..offset+N` are
    /// this algebra's generators.
    pub fn embed(&self, target: &Arc<GrassmannAlgebra>, offset: usize) -> Result<Self> {
        if offset + self.alg.len() > target.len() {
            return Err(Error::Dimension("embedding does not fit".into()));
        }
        let mut out = GrassmannElement::zero(target);
        for (m, c) in self.nonzero() {
            out.coeffs[m << offset] = c;
        }
        Ok(out)
    }
}

impl Add for &GrassmannElement {
    type Output = GrassmannElement;
    fn add(self, rhs: &GrassmannElement) -> GrassmannElement {
        self.try_add(rhs).expect("algebra mismatch")
    }
}

impl Sub for &GrassmannElement {
    type Output = GrassmannElement;
    fn sub(self, rhs: &GrassmannElement) -> GrassmannElement {
        self.try_add(&-rhs).expect("algebra mismatch")
    }
}

impl Neg for &GrassmannElement {
    type Output = GrassmannElement;
    fn neg(self) -> GrassmannElement {
        self.scale(-ONE)
    }
}

impl Mul for &GrassmannElement {
    type Output = GrassmannElement;
    fn mul(self, rhs: &GrassmannElement) -> GrassmannElement {
        self.multiply(rhs).expect("algebra mismatch")
    }
}

/// `Σ_ab m_ab u_a u_b` with the literal factor order.
pub fn quadratic_form(m: &CMatrix, u: &[GrassmannElement]) -> Result<GrassmannElement> {
    if m.rows() != u.len() || m.cols() != u.len() || u.is_empty() {
        return Err(Error::Dimension("quadratic form size".into()));
    }
    let mut out = GrassmannElement::zero(u[0].algebra());
    for a in 0..u.len() {
        for b in 0..u.len() {
            if m[(a, b)] != ZERO {
                out = &out + &(&u[a] * &u[b]).scale(m[(a, b)]);
            }
        }
    }
    Ok(out)
}

/// Pfaffian of `g(A·,·)` relative to the orientation of `J₀`; the value of
/// the fermionic Gaussian integral.
pub fn oriented_pfaffian(a: &CMatrix) -> Result<C64> {
    let n = a.rows() / 2;
    Ok(pfaffian(&a.transpose())? * orientation_sign(n))
}

/// `exp[(i/2) g(Aθ, θ)]` on the real generators `gens`, with
/// `g(Aθ,θ) = Σ_ij A_ij θʲ θⁱ`.
pub fn fermionic_gaussian(a: &CMatrix, alg: &Arc<GrassmannAlgebra>, gens: &[usize]) -> Result<GrassmannElement> {
    if !a.is_square() || a.rows() != gens.len() {
        return Err(Error::Dimension(format!("{}x{} matrix on {} generators", a.rows(), a.cols(), gens.len())));
    }
    let scale = a.max_abs().max(1.0);
    let res = (a + &a.transpose()).max_abs();
    if res > 1e-12 * scale {
        return Err(Error::NotSkew(res));
    }
    let mut x = GrassmannElement::zero(alg);
    for i in 0..gens.len() {
        for j in 0..gens.len() {
            if i != j && a[(i, j)] != ZERO {
                let m = GrassmannElement::product_of(alg, &[gens[j], gens[i]]);
                x = &x + &m.scale(a[(i, j)] * I * 0.5);
            }
        }
    }
    Ok(x.exp())
}

/// Bergman kernel `exp[θχ̄ − ½θθ̄ − ½χχ̄]` on the complex algebra
/// `θ¹,θ̄¹,…,θⁿ,θ̄ⁿ,χ¹,χ̄¹,…,χⁿ,χ̄ⁿ` (unitary frame).
pub fn bergman_kernel(n: usize) -> Result<(Arc<GrassmannAlgebra>, GrassmannElement)> {
    let th = GrassmannAlgebra::complex(n, "theta")?;
    let ch = GrassmannAlgebra::complex(n, "chi")?;
    let alg = th.concat(&ch)?;
    let off = 2 * n;
    let mut x = GrassmannElement::zero(&alg);
    for i in 0..n {
        let (t, tb, c, cb) = (2 * i, 2 * i + 1, off + 2 * i, off + 2 * i + 1);
        x = &x + &GrassmannElement::product_of(&alg, &[t, cb]);
        x = &x + &GrassmannElement::product_of(&alg, &[t, tb]).scale(C64::from(-0.5));
        x = &x + &GrassmannElement::product_of(&alg, &[c, cb]).scale(C64::from(-0.5));
    }
    Ok((alg, x.exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalars_matrices::c;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_element(alg: &Arc<GrassmannAlgebra>, rng: &mut ChaCha8Rng) -> GrassmannElement {
        let coeffs = (0..alg.dim()).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        GrassmannElement::from_coeffs(alg, coeffs).unwrap()
    }

    fn random_skew(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        let mut a = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let v = rng.random_range(-1.5..1.5);
                a[(i, j)] = C64::from(v);
                a[(j, i)] = C64::from(-v);
            }
        }
        a
    }

    #[test]
    fn basic_products() {
        let alg = GrassmannAlgebra::real(2, "t").unwrap();
        let t1 = GrassmannElement::generator(&alg, 0);
        let t2 = GrassmannElement::generator(&alg, 1);
        assert_eq!((&t1 * &t2).coeff(0b11), ONE);
        assert_eq!((&t2 * &t1).coeff(0b11), -ONE);
        assert_eq!((&t1 * &t1).max_abs(), 0.0);
        let x = &GrassmannElement::one(&alg) + &(&t1 * &t2);
        let sq = &x * &x;
        assert_eq!(sq.coeff(0), ONE);
        assert_eq!(sq.coeff(0b11), C64::from(2.0));
        let a = 0.7;
        let e = (&t1 * &t2).scale(I * a).exp();
        assert_eq!(e.coeff(0), ONE);
        assert!((e.coeff(0b11) - I * a).norm() < 1e-15);
    }

    #[test]
    fn integration_signs() {
        let alg = GrassmannAlgebra::real(2, "t").unwrap();
        let t12 = GrassmannElement::product_of(&alg, &[0, 1]);
        assert_eq!(t12.integrate_all(&[0, 1], Measure::Coordinate).unwrap(), -ONE);
        let a = 1.3;
        let e = t12.scale(I * a).exp();
        let v = e.integrate_all(&[0, 1], Measure::Coordinate).unwrap() * I;
        assert!((v - a).norm() < 1e-14);
        let one = GrassmannElement::one(&alg);
        assert_eq!(one.integrate(&[0], Measure::Coordinate).unwrap().max_abs(), 0.0);
        assert!(one.integrate(&[0, 0], Measure::Coordinate).is_err());
        for k in 1..6 {
            let alg = GrassmannAlgebra::real(k, "t").unwrap();
            let gens: Vec<usize> = (0..k).collect();
            let m = GrassmannElement::product_of(&alg, &gens);
            let expect = if (k * (k - 1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
            assert_eq!(m.integrate_all(&gens, Measure::Coordinate).unwrap(), C64::from(expect));
        }
    }

    #[test]
    fn fubini_for_all_orders() {
        // dθ^{p1} sits next to the integrand, so it is integrated first.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in 1..=4 {
            let alg = GrassmannAlgebra::real(k, "t").unwrap();
            let e = random_element(&alg, &mut rng);
            let mut perm: Vec<usize> = (0..k).collect();
            for _ in 0..6 {
                for i in (1..k).rev() {
                    let j = rng.random_range(0..=i);
                    perm.swap(i, j);
                }
                let block = e.integrate_all(&perm, Measure::Coordinate).unwrap();
                let mut cur = e.clone();
                for &g in &perm {
                    cur = cur.integrate(&[g], Measure::Coordinate).unwrap();
                }
                assert!((cur.coeff(0) - block).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn associativity_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let alg = GrassmannAlgebra::real(5, "t").unwrap();
        for _ in 0..500 {
            let (a, b, c) = (random_element(&alg, &mut rng), random_element(&alg, &mut rng), random_element(&alg, &mut rng));
            let l = &(&a * &b) * &c;
            let r = &a * &(&b * &c);
            assert!(l.max_abs_diff(&r) < 1e-12);
        }
    }

    #[test]
    fn star_involution_rules() {
        let alg = GrassmannAlgebra::complex(2, "t").unwrap();
        let t12 = GrassmannElement::product_of(&alg, &[0, 2]);
        let s = t12.star_involution().unwrap();
        // (θ¹θ²)* = θ̄²θ̄¹ = −θ̄¹θ̄²
        assert_eq!(s.coeff((1 << 1) | (1 << 3)), -ONE);
        let z = GrassmannElement::scalar(&alg, c(1.0, 2.0));
        assert_eq!(z.star_involution().unwrap().coeff(0), c(1.0, -2.0));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let e = random_element(&alg, &mut rng);
            let back = e.star_involution().unwrap().star_involution().unwrap();
            assert!(back.max_abs_diff(&e) < 1e-15);
            let f = random_element(&alg, &mut rng);
            let lhs = (&e * &f).star_involution().unwrap();
            let rhs = &f.star_involution().unwrap() * &e.star_involution().unwrap();
            assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        }
        let aux = GrassmannAlgebra::new(vec!["a".into()], vec![None]).unwrap();
        assert!(GrassmannElement::generator(&aux, 0).star_involution().is_err());
    }

    #[test]
    fn hodge_star_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=3 {
            let alg = GrassmannAlgebra::real(2 * n, "t").unwrap();
            let s = orientation_sign(n);
            let one = GrassmannElement::one(&alg);
            let vol = one.hodge_star(s, 1.0);
            assert_eq!(vol.coeff(alg.dim() - 1), C64::from(s));
            let e = random_element(&alg, &mut rng);
            for p in 0..=2 * n {
                let ep = e.degree_part(p);
                let ratio = 2f64.powi(p as i32 - n as i32);
                let d = ep.hodge_star(s, 0.5).max_abs_diff(&ep.hodge_star(s, 1.0).scale(C64::from(ratio)));
                assert!(d < 1e-13);
                // ★★ = (−1)^{p(N−p)} in Euclidean signature
                let sign = if (p * (2 * n - p)) % 2 == 0 { 1.0 } else { -1.0 };
                let twice = ep.hodge_star(s, 1.0).hodge_star(s, 1.0);
                assert!(twice.max_abs_diff(&ep.scale(C64::from(sign))) < 1e-13);
            }
        }
    }

    #[test]
    fn linear_substitution() {
        let alg = GrassmannAlgebra::real(3, "t").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let e = random_element(&alg, &mut rng);
        let gens = [0, 1, 2];
        let id = e.substitute_linear(&CMatrix::identity(3), &alg, &gens).unwrap();
        assert!(id.max_abs_diff(&e) < 1e-15);
        let alg2 = GrassmannAlgebra::real(2, "t").unwrap();
        let t12 = GrassmannElement::product_of(&alg2, &[0, 1]);
        let shear = CMatrix::from_real(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(t12.substitute_linear(&shear, &alg2, &[0, 1]).unwrap().max_abs_diff(&t12) < 1e-15);
        let l = CMatrix::from_fn(3, 3, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let top = GrassmannElement::product_of(&alg, &gens);
        let img = top.substitute_linear(&l, &alg, &gens).unwrap();
        assert!((img.coeff(7) - l.det().unwrap()).norm() < 1e-13);
        let m = CMatrix::from_fn(3, 3, |_, _| c(rng.random_range(-1.0..1.0), 0.0));
        let two = e.substitute_linear(&l, &alg, &gens).unwrap().substitute_linear(&m, &alg, &gens).unwrap();
        // θ ↦ Lθ then θ ↦ Mθ composes to θ ↦ (LM)θ.
        let once = e.substitute_linear(&l.matmul(&m), &alg, &gens).unwrap();
        assert!(two.max_abs_diff(&once) < 1e-12);
    }

    #[test]
    fn gaussian_integral_is_oriented_pfaffian() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for n in 1..=4 {
            let alg = GrassmannAlgebra::real(2 * n, "t").unwrap();
            let gens: Vec<usize> = (0..2 * n).collect();
            let j0 = crate::phase_space::ComplexStructure::standard(n).j;
            let v = fermionic_gaussian(&j0, &alg, &gens)
                .unwrap()
                .integrate_all(&gens, Measure::TildeVolume { n })
                .unwrap();
            assert!((v - ONE).norm() < 1e-13, "n={n}: {v}");
            assert!((oriented_pfaffian(&j0).unwrap() - ONE).norm() < 1e-13);
            for _ in 0..25 {
                let a = random_skew(&mut rng, 2 * n);
                let v = fermionic_gaussian(&a, &alg, &gens)
                    .unwrap()
                    .integrate_all(&gens, Measure::TildeVolume { n })
                    .unwrap();
                assert!((v - oriented_pfaffian(&a).unwrap()).norm() < 1e-10);
            }
        }
        let alg = GrassmannAlgebra::real(2, "t").unwrap();
        let b = 0.8;
        let a = CMatrix::from_real(2, 2, &[0.0, -b, b, 0.0]);
        let v = fermionic_gaussian(&a, &alg, &[0, 1]).unwrap().integrate_all(&[0, 1], Measure::TildeVolume { n: 1 }).unwrap();
        assert!((v - b).norm() < 1e-14);
        assert!(fermionic_gaussian(&CMatrix::identity(2), &alg, &[0, 1]).is_err());
    }

    #[test]
    fn bergman_kernel_reproduces_basis_states() {
        for n in 1..=3 {
            let (alg, k) = bergman_kernel(n).unwrap();
            let off = 2 * n;
            let chi_measure: Vec<usize> = (off..2 * off).collect();
            let vac = |shift: usize| {
                let mut x = GrassmannElement::zero(&alg);
                for i in 0..n {
                    x = &x + &GrassmannElement::product_of(&alg, &[shift + 2 * i, shift + 2 * i + 1]).scale(C64::from(-0.5));
                }
                x.exp()
            };
            let (vac_theta, vac_chi) = (vac(0), vac(off));
            for sub in 0..(1usize << n) {
                let idx: Vec<usize> = (0..n).filter(|i| sub & (1 << i) != 0).collect();
                let psi_chi = &GrassmannElement::product_of(&alg, &idx.iter().map(|i| off + 2 * i).collect::<Vec<_>>()) * &vac_chi;
                let psi_theta = &GrassmannElement::product_of(&alg, &idx.iter().map(|i| 2 * i).collect::<Vec<_>>()) * &vac_theta;
                let out = (&k * &psi_chi).integrate(&chi_measure, Measure::Coordinate).unwrap();
                assert!(out.max_abs_diff(&psi_theta) < 1e-13, "n={n} sub={sub}");
            }
            // an antiholomorphic state is projected away
            let anti = &GrassmannElement::generator(&alg, off + 1) * &vac_chi;
            let out = (&k * &anti).integrate(&chi_measure, Measure::Coordinate).unwrap();
            assert!(out.max_abs() < 1e-13);
        }
    }

    #[test]
    fn n1_kernel_expansion() {
        // e^{θχ̄ − ½θθ̄ − ½χχ̄} = 1 + θχ̄ − ½θθ̄ − ½χχ̄ + products, expanded by hand.
        let (alg, k) = bergman_kernel(1).unwrap();
        let m = |g: &[usize]| g.iter().fold(0usize, |a, &x| a | (1 << x));
        assert_eq!(k.coeff(0), ONE);
        assert_eq!(k.coeff(m(&[0, 3])), ONE);
        assert_eq!(k.coeff(m(&[0, 1])), C64::from(-0.5));
        assert_eq!(k.coeff(m(&[2, 3])), C64::from(-0.5));
        // (−½θθ̄)(−½χχ̄) = ¼ θθ̄χχ̄; (θχ̄)² = 0; cross terms θχ̄·θθ̄ vanish.
        assert!((k.coeff(15) - C64::from(0.25)).norm() < 1e-15);
        assert_eq!(alg.len(), 4);
    }
}
