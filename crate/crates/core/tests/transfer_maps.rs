use num_complex::Complex64;
use stirap_core::atom::{cesium_system, toy_model, zeeman_ket};
use stirap_core::decomp::{adapted_a_basis, decompose, lambda_pairs, LambdaBasis};
use stirap_core::linalg::{ComplexMatrix, ComplexVector, DEFAULT_RANK_TOL};
use stirap_core::ode::OdeOptions;
use stirap_core::passage::{
    analytic_transfer, analytic_two_level, integrate_transfer, trajectory, Direction, TwoLevelSolution,
};
use stirap_core::{LevelSystem, Polarization};

fn basis_for(system: &LevelSystem) -> LambdaBasis {
    let d = decompose(system, DEFAULT_RANK_TOL).unwrap();
    lambda_pairs(&d, system, Some(&adapted_a_basis(&d))).unwrap()
}

fn pair_index(basis: &LambdaBasis, m: i32) -> usize {
    let k = zeeman_ket(3, m);
    (0..basis.len()).find(|&j| basis.a_state(j).dotc(&k).norm() > 1.0 - 1e-9).unwrap()
}

fn dominant_parity(v: &ComplexVector, f: i32) -> i32 {
    let (i, _) = v.iter().enumerate().max_by(|a, b| a.1.norm().total_cmp(&b.1.norm())).unwrap();
    (i as i32 - f).rem_euclid(2)
}

#[test]
fn even_block_matches_closed_form_with_overlap_minus_one_fifteenth() {
    let system = cesium_system(3, &Polarization::z(), &Polarization::x()).unwrap();
    let basis = basis_for(&system);
    let (p, m) = (pair_index(&basis, 2), pair_index(&basis, -2));
    let z = basis.b_gram()[(p, m)];
    assert!((z.norm() - 1.0 / 15.0).abs() < 1e-10);
    assert!(z.im.abs() < 1e-12);
    let TwoLevelSolution::EqualLambda { alpha, beta } =
        analytic_two_level(basis.lambdas()[p], basis.lambdas()[m], z.re).unwrap()
    else {
        panic!("expected closed form")
    };
    let map = integrate_transfer(&basis, Direction::AToB, &OdeOptions::default()).unwrap();
    assert!((map.c_final[(p, p)].re - alpha).abs() < 1e-6);
    assert!((map.c_final[(m, p)].re - beta).abs() < 1e-6);
    assert!((map.c_final[(m, m)].re - alpha).abs() < 1e-6);
    assert!((map.c_final[(p, m)].re - beta).abs() < 1e-6);
}

#[test]
fn overlap_minus_one_fifteenth_coefficients() {
    // Independent evaluation of ((1+z)^-1/2 ± (1-z)^-1/2)/2 at z = -1/15.
    let z = -1.0_f64 / 15.0;
    let ep = (15.0_f64 / 14.0).sqrt();
    let em = (15.0_f64 / 16.0).sqrt();
    let TwoLevelSolution::EqualLambda { alpha, beta } = analytic_two_level(1.0, 1.0, z).unwrap() else { panic!() };
    assert!((alpha - (ep + em) / 2.0).abs() < 1e-15);
    assert!((beta - (ep - em) / 2.0).abs() < 1e-15);
    assert!((alpha - 1.001672).abs() < 1e-6 && (beta - 0.033426).abs() < 1e-6);
}

#[test]
fn selection_rule_blocks() {
    for (fp, p3, p4) in [(3, Polarization::z(), Polarization::x()), (4, Polarization::x(), Polarization::z())] {
        let system = cesium_system(fp, &p3, &p4).unwrap();
        let basis = basis_for(&system);
        let map = integrate_transfer(&basis, Direction::AToB, &OdeOptions::default()).unwrap();
        let parity_a: Vec<i32> = (0..basis.len()).map(|j| dominant_parity(&basis.a_state(j), 3)).collect();
        let parity_b: Vec<i32> = (0..basis.len()).map(|j| dominant_parity(&basis.b_state(j), 4)).collect();
        for j in 0..basis.len() {
            // Δm = ±1 flips parity between partners.
            assert_ne!(parity_a[j], parity_b[j]);
            for i in 0..basis.len() {
                if parity_a[i] != parity_a[j] {
                    assert!(map.c_final[(i, j)].norm() < 1e-8, "leak {i}<-{j} for F'={fp}");
                }
            }
        }
    }
}

#[test]
fn round_trip_and_unitarity_for_cesium_examples() {
    let (z, x, sp) = (Polarization::z(), Polarization::x(), Polarization::sigma_plus());
    for (fp, p3, p4) in [(3, z, z), (3, z, x), (4, z, z), (4, x, z), (4, sp, sp)] {
        let system = cesium_system(fp, &p3, &p4).unwrap();
        let basis = basis_for(&system);
        let opts = OdeOptions::default();
        let fwd = integrate_transfer(&basis, Direction::AToB, &opts).unwrap();
        let rev = integrate_transfer(&basis, Direction::BToA, &opts).unwrap();
        let n = basis.len();
        assert!(fwd.unitarity_error < 1e-8 && rev.unitarity_error < 1e-8);
        assert!(fwd.output_norm_error(&basis) < 1e-8);
        assert!((&rev.c_final * &fwd.c_final - ComplexMatrix::identity(n, n)).camax() < 1e-6);
    }
}

#[test]
fn tolerance_study_is_stable() {
    let basis = basis_for(&toy_model());
    let loose = integrate_transfer(&basis, Direction::AToB, &OdeOptions::with_tolerances(1e-8, 1e-8)).unwrap();
    let tight = integrate_transfer(&basis, Direction::AToB, &OdeOptions::default()).unwrap();
    assert!((loose.u_ortho - tight.u_ortho).camax() < 1e-6);
}

#[test]
fn analytic_transfer_covers_decoupled_systems() {
    let system = cesium_system(4, &Polarization::sigma_plus(), &Polarization::sigma_plus()).unwrap();
    let basis = basis_for(&system);
    let closed = analytic_transfer(&basis, Direction::AToB).unwrap().unwrap();
    let n = basis.len();
    assert_eq!(closed.c_final, ComplexMatrix::identity(n, n));
    let general = cesium_system(3, &Polarization::z(), &Polarization::x()).unwrap();
    assert!(analytic_transfer(&basis_for(&general), Direction::AToB).unwrap().is_none());
}

#[test]
fn norm_is_conserved_along_cesium_trajectory() {
    let system = cesium_system(4, &Polarization::x(), &Polarization::z()).unwrap();
    let basis = basis_for(&system);
    let n = basis.len();
    let mut c0 = ComplexVector::zeros(n);
    c0[pair_index(&basis, 2)] = Complex64::new(0.6, 0.0);
    c0[pair_index(&basis, 0)] = Complex64::new(0.0, 0.8);
    let grid: Vec<f64> = (0..=40).map(|k| std::f64::consts::FRAC_PI_2 * k as f64 / 40.0).collect();
    let pts = trajectory(&basis, &c0, &grid, &OdeOptions::default()).unwrap();
    for p in &pts {
        assert!((p.norm - 1.0).abs() < 1e-8);
        let total: f64 = p.populations_a.iter().chain(&p.populations_b).sum();
        assert!((total - p.norm).abs() < 1e-10);
    }
}
