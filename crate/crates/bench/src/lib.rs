//! Fixtures shared by the criterion benches.

use gqlab::boson_quant::{coherent_state, BosonInput};
use gqlab::scalars_matrices::c;
use gqlab::{CMatrix, ComplexStructure, FermionContext, GeodesicPath, LinearPhaseSpace, Result};

/// A fixed skew matrix of size `d` with entries of order one.
pub fn skew(d: usize) -> CMatrix {
    let mut a = CMatrix::zeros(d, d);
    for i in 0..d {
        for k in i + 1..d {
            let z = c(((i * 7 + k * 3) % 5) as f64 * 0.3 - 0.6, ((i + 2 * k) % 3) as f64 * 0.25);
            a[(i, k)] = z;
            a[(k, i)] = -z;
        }
    }
    a
}

/// Fermionic context with a normal-form path of angles `b, 0.7b, ...` from `J₀`.
pub fn fermion_path(n: usize, b: f64) -> Result<(FermionContext, GeodesicPath)> {
    let ctx = FermionContext::new(n)?;
    let bs: Vec<f64> = [1.0, 0.7].iter().take(n / 2).map(|s| s * b).collect();
    let path = GeodesicPath::from_normal_form(&ctx.space, &ComplexStructure::standard(n), &CMatrix::identity(n), &bs)?;
    Ok((ctx, path))
}

/// One-mode bosonic path together with a coherent input state.
pub fn boson_path(b: f64) -> Result<(GeodesicPath, BosonInput)> {
    let space = LinearPhaseSpace::symplectic(1);
    let j0 = ComplexStructure::standard(1);
    let path = GeodesicPath::from_normal_form(&space, &j0, &CMatrix::identity(1), &[b])?;
    let coh = coherent_state(&space, &j0, &[c(0.3, -0.2)])?;
    Ok((path, BosonInput::Gaussian(coh)))
}
