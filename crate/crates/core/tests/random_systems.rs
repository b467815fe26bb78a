//! Structural properties on randomly generated level systems.

use num_complex::Complex64;
use proptest::prelude::*;
use stirap_core::decomp::{decompose, lambda_pairs, verify_bright};
use stirap_core::linalg::{ComplexMatrix, DEFAULT_RANK_TOL};
use stirap_core::ode::OdeOptions;
use stirap_core::passage::{integrate_transfer, Direction};
use stirap_core::LevelSystem;

fn labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Random complex matrix with a prescribed rank (entries exactly zero outside
/// a random low-rank product, to get non-generic null spaces).
fn low_rank(rows: usize, cols: usize, rank: usize, seed: &[f64]) -> ComplexMatrix {
    let mut it = seed.iter().cycle();
    let mut next = || Complex64::new(*it.next().unwrap(), *it.next().unwrap());
    let l = ComplexMatrix::from_fn(rows, rank, |_, _| next());
    let r = ComplexMatrix::from_fn(rank, cols, |_, _| next());
    l * r
}

fn system_strategy() -> impl Strategy<Value = LevelSystem> {
    (1usize..5, 1usize..5, 1usize..5, 1usize..5, 1usize..5, prop::collection::vec(-1.0f64..1.0, 64)).prop_map(
        |(da, db, de, ra, rb, seed)| {
            let ra = ra.min(da).min(de);
            let rb = rb.min(db).min(de);
            let a = low_rank(da, de, ra, &seed);
            let b = low_rank(db, de, rb, &seed[7..]);
            LevelSystem::new(labels("a", da), labels("b", db), labels("e", de), a, b).unwrap()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decomposition_invariants(system in system_strategy()) {
        let Ok(d) = decompose(&system, DEFAULT_RANK_TOL) else { return Ok(()); };
        let (a, b) = (d.dims_a(), d.dims_b());
        prop_assert_eq!(a.lambda + a.dark + a.prime, system.dim_a());
        prop_assert_eq!(b.lambda + b.dark + b.prime, system.dim_b());
        prop_assert_eq!(a.lambda, b.lambda);
        prop_assert!(a.prime <= d.e_dark.dim());
        for (x, y) in [(&d.a_dark, &d.a_lambda), (&d.a_dark, &d.a_prime), (&d.a_lambda, &d.a_prime),
                       (&d.b_dark, &d.b_lambda), (&d.b_dark, &d.b_prime), (&d.b_lambda, &d.b_prime)] {
            let cross = x.matrix().adjoint() * y.matrix();
            prop_assert!(cross.iter().all(|z| z.norm() <= 1e-9));
        }
        let basis = lambda_pairs(&d, &system, None).unwrap();
        prop_assert!(basis.pair_residual(&system) <= 1e-9);
        prop_assert!(basis.lambdas().iter().all(|&l| l > 0.0));
        let report = verify_bright(&d, &system).unwrap();
        prop_assert_eq!(report.a_witnesses.len(), a.prime);
        prop_assert_eq!(report.b_certificates.len(), b.prime);
    }

    #[test]
    fn transfer_is_unitary(system in system_strategy()) {
        let Ok(d) = decompose(&system, DEFAULT_RANK_TOL) else { return Ok(()); };
        let basis = lambda_pairs(&d, &system, None).unwrap();
        // Nearly parallel b-states make the dark-state Gram singular near π/2.
        let Ok(map) = integrate_transfer(&basis, Direction::AToB, &OdeOptions::default()) else { return Ok(()); };
        prop_assert!(map.unitarity_error <= 1e-8);
        prop_assert!(map.output_norm_error(&basis) <= 1e-8);
    }
}
