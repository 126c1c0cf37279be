use std::collections::BTreeMap;

use gqlab::grassmann::oriented_pfaffian;
use gqlab::harness::VERSION;
use gqlab::phase_space::{chart_to_j, check_compatibility, graph_chart, random_compatible, random_unitary};
use gqlab::scalars_matrices::{c, pfaffian};
use gqlab::symm_space::geodesic_between;
use gqlab::{CMatrix, Check, ComplexStructure, FermionContext, GeodesicPath, GrassmannAlgebra, GrassmannElement, LinearPhaseSpace, Suite, VerificationReport};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn skew_from(d: usize, vals: &[(f64, f64)]) -> CMatrix {
    let mut a = CMatrix::zeros(d, d);
    let mut it = vals.iter().cycle();
    for i in 0..d {
        for k in i + 1..d {
            let &(re, im) = it.next().unwrap();
            a[(i, k)] = c(re, im);
            a[(k, i)] = -c(re, im);
        }
    }
    a
}

fn element(alg: &std::sync::Arc<GrassmannAlgebra>, vals: &[(f64, f64)]) -> GrassmannElement {
    let coeffs = (0..alg.dim()).map(|k| {
        let (re, im) = vals[k % vals.len()];
        c(re, im)
    });
    GrassmannElement::from_coeffs(alg, coeffs.collect()).unwrap()
}

fn entries() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 28)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pfaffian_squared_is_determinant(half in 1usize..=4, vals in entries()) {
        let a = skew_from(2 * half, &vals);
        let pf = pfaffian(&a).unwrap();
        let det = a.det().unwrap();
        prop_assert!((pf * pf - det).norm() <= 1e-10 * (1.0 + det.norm()));
        // the oriented variant differs by a sign only
        let opf = oriented_pfaffian(&a).unwrap();
        prop_assert!((opf.norm() - pf.norm()).abs() <= 1e-12 * (1.0 + pf.norm()));
    }

    #[test]
    fn grassmann_product_is_associative(a in entries(), b in entries(), d in entries()) {
        let alg = GrassmannAlgebra::real(4, "t").unwrap();
        let (x, y, z) = (element(&alg, &a), element(&alg, &b), element(&alg, &d));
        let left = x.multiply(&y).unwrap().multiply(&z).unwrap();
        let right = x.multiply(&y.multiply(&z).unwrap()).unwrap();
        prop_assert!(left.max_abs_diff(&right) <= 1e-12);
    }

    #[test]
    fn odd_generators_anticommute(i in 0usize..5, k in 0usize..5) {
        let alg = GrassmannAlgebra::real(5, "t").unwrap();
        let (a, b) = (GrassmannElement::generator(&alg, i), GrassmannElement::generator(&alg, k));
        let sum = a.multiply(&b).unwrap().try_add(&b.multiply(&a).unwrap()).unwrap();
        prop_assert!(sum.max_abs() == 0.0);
    }

    #[test]
    fn random_structures_are_compatible_and_chart_round_trips(seed in any::<u64>(), n in 1usize..=3, symplectic in any::<bool>()) {
        let space = if symplectic { LinearPhaseSpace::symplectic(n) } else { LinearPhaseSpace::euclidean(2 * n) };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let j = random_compatible(&space, &mut rng, 0.5);
        prop_assert!(check_compatibility(&j, &space).compatible);
        let j0 = ComplexStructure::standard(space.n);
        let chart = graph_chart(&j0, &j, &space).unwrap();
        let back = chart_to_j(&chart, &space).unwrap();
        prop_assert!((&back.j - &j.j).max_abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn bogoliubov_transport_is_unitary(seed in any::<u64>(), b in 0.05f64..1.45) {
        let ctx = FermionContext::new(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = random_unitary(2, &mut rng, 1.0);
        let path = GeodesicPath::from_normal_form(&ctx.space, &ComplexStructure::standard(2), &k, &[b]).unwrap();
        let op = ctx.transport_bogoliubov(&path).unwrap();
        prop_assert!(op.unitarity_residual() <= 1e-9);
    }

    #[test]
    fn geodesic_between_recovers_the_endpoint(seed in any::<u64>()) {
        let space = LinearPhaseSpace::symplectic(2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (random_compatible(&space, &mut rng, 0.4), random_compatible(&space, &mut rng, 0.4));
        let path = geodesic_between(&a, &b, &space).unwrap();
        prop_assert!((&path.start().j - &a.j).max_abs() <= 1e-8);
        prop_assert!((&path.end().j - &b.j).max_abs() <= 1e-8);
    }

    #[test]
    fn report_json_round_trips(vals in prop::collection::vec(prop_oneof![
        4 => -1e6f64..1e6,
        1 => Just(f64::NAN),
        1 => Just(f64::INFINITY),
        1 => Just(f64::NEG_INFINITY),
        1 => Just(5e-324),
    ], 1..12), seed in any::<u64>()) {
        let checks = vals.iter().enumerate().map(|(k, &v)| {
            let ch = Check::new(&format!("p.{k}"), "round trip, \"quoted\"", v, 0.0, 1e-9, "exact");
            if k % 3 == 0 { ch.diagnostic() } else { ch }
        }).collect();
        let rep = VerificationReport { suite: Suite::Grassmann, seed, checks, timings: BTreeMap::new(), version: VERSION.to_string() };
        let text = rep.to_json();
        let back = VerificationReport::from_json(&text).unwrap();
        prop_assert_eq!(back.to_json(), text);
        prop_assert_eq!(back.checks.len(), rep.checks.len());
        for (x, y) in back.checks.iter().zip(&rep.checks) {
            prop_assert!(x.measured.to_bits() == y.measured.to_bits() || (x.measured.is_nan() && y.measured.is_nan()));
        }
    }
}
