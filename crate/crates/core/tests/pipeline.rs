//! End-to-end checks of the public surface: generated positive instances
//! round-trip through triangularization, refutations carry re-checkable
//! context, and the two factorization orientations stay in sync.

use lma_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tol() -> ToleranceConfig {
    ToleranceConfig::default()
}

fn unit(n: usize, i: usize, j: usize) -> ComplexMatrix {
    ComplexMatrix::matrix_unit(n, i, j)
}

fn random_partition(n: usize, rng: &mut ChaCha8Rng) -> Partition {
    let mut parts = Vec::new();
    let mut left = n;
    while left > 0 {
        let p = 1 + rng.gen_range(0..left);
        parts.push(p);
        left -= p;
    }
    Partition::new(parts).unwrap()
}

#[test]
fn round_trip_recovery_over_random_partitions() {
    let tol = tol();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..30u64 {
        let n = 2 + (trial as usize % 7);
        let partition = random_partition(n, &mut rng);
        let u = haar_unitary(n, rng.gen()).unwrap();
        let a = nest_algebra(&partition).conjugate(&u);
        match triangularize(&a, &tol).unwrap() {
            TriangularizeOutcome::Certified(cert) => {
                assert_eq!(cert.partition, partition, "trial {trial}");
                let report = verify_certificate(&a, &cert, &tol);
                assert!(report.matches);
                assert!(report.algebra_residual <= 1e-7);
            }
            TriangularizeOutcome::Refuted(f) => {
                panic!("trial {trial} refuted: {:?}", f.stage)
            }
        }
    }
}

#[test]
fn duality_holds_on_generated_instances() {
    let tol = tol();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..10u64 {
        let n = 2 + (trial as usize % 5);
        let partition = random_partition(n, &mut rng);
        let u = haar_unitary(n, rng.gen()).unwrap();
        let a = nest_algebra(&partition).conjugate(&u);
        let cert = triangularize(&a, &tol)
            .unwrap()
            .certificate()
            .cloned()
            .expect("positive instance");
        let dual_cert = triangularize(&a.adjoint_algebra(), &tol)
            .unwrap()
            .certificate()
            .cloned()
            .expect("adjoint stays positive");
        assert_eq!(dual_cert.partition, cert.partition.reversed());
    }
}

#[test]
fn refutations_recheck_against_the_original_input() {
    let tol = tol();
    // diagonal algebras, a nilpotent span, and a block-diagonal sum
    let d3 = close_under_products(
        3,
        &[unit(3, 0, 0), unit(3, 1, 1), unit(3, 2, 2)],
        true,
        &tol,
    )
    .unwrap();
    let nilpotent = close_under_products(2, &[unit(2, 0, 1)], true, &tol).unwrap();
    let block_sum = close_under_products(
        4,
        &[
            unit(4, 0, 0),
            unit(4, 0, 1),
            unit(4, 1, 0),
            unit(4, 1, 1),
            unit(4, 2, 2),
            unit(4, 2, 3),
            unit(4, 3, 2),
            unit(4, 3, 3),
        ],
        true,
        &tol,
    )
    .unwrap();
    for (name, algebra) in [
        ("d3", &d3),
        ("nilpotent", &nilpotent),
        ("m2+m2", &block_sum),
    ] {
        match triangularize(algebra, &tol).unwrap() {
            TriangularizeOutcome::Refuted(f) => {
                assert!(f.recheck(algebra, &tol).unwrap(), "{name}: recheck failed");
            }
            TriangularizeOutcome::Certified(_) => panic!("{name} must be refuted"),
        }
    }
}

#[test]
fn conjugated_negatives_are_still_refuted() {
    let tol = tol();
    let d2 = close_under_products(2, &[unit(2, 0, 0), unit(2, 1, 1)], true, &tol).unwrap();
    for seed in 0..5u64 {
        let u = haar_unitary(2, seed).unwrap();
        let moved = d2.conjugate(&u);
        match triangularize(&moved, &tol).unwrap() {
            TriangularizeOutcome::Refuted(f) => {
                assert!(f.recheck(&moved, &tol).unwrap());
            }
            TriangularizeOutcome::Certified(_) => panic!("conjugated D_2 certified"),
        }
    }
}

#[test]
fn both_factorization_orientations_agree_on_positives() {
    let tol = tol();
    let u = haar_unitary(4, 19).unwrap();
    let a = nest_algebra(&Partition::new(vec![2, 2]).unwrap()).conjugate(&u);
    let cert = triangularize(&a, &tol)
        .unwrap()
        .certificate()
        .cloned()
        .unwrap();
    for seed in 0..6u64 {
        let b = sample_pd(4, seed, if seed % 2 == 0 { 1.0 } else { 1e-2 }).unwrap();
        let left = factor_positive(&a, &cert, &b, &tol).unwrap();
        let right = factor_positive_dual(&a, &cert, &b, &tol).unwrap();
        let scale = b.frobenius_norm();
        assert!(left.factor_residual <= 1e-8 * scale);
        assert!(right.factor_residual <= 1e-8 * scale);
        assert!(left.membership_residual <= 1e-8);
        assert!(right.membership_residual <= 1e-8);
        assert!(left.min_singular_value > 1e-10);
        assert!(right.min_singular_value > 1e-10);
    }
}

#[test]
fn algebra_file_loader_round_trips_through_json() {
    let tol = tol();
    let u = haar_unitary(3, 5).unwrap();
    let a = nest_algebra(&Partition::new(vec![1, 2]).unwrap()).conjugate(&u);
    let text = serde_json::to_string_pretty(&a.to_file_repr()).unwrap();
    let back = Subalgebra::from_json(&text, &tol).unwrap();
    assert!(equals_algebra(&a, &back, &tol));
    let verdict_before = triangularize(&a, &tol).unwrap();
    let verdict_after = triangularize(&back, &tol).unwrap();
    assert_eq!(
        verdict_before.certificate().unwrap().partition,
        verdict_after.certificate().unwrap().partition
    );
}

#[test]
fn permuted_nest_algebras_recover_their_partition() {
    // permutation conjugations keep the basis sparse, exercising the exact
    // zero-pattern paths that Haar conjugations never hit
    let tol = tol();
    let perms: Vec<Vec<usize>> = vec![
        vec![2, 0, 1, 3],
        vec![3, 2, 1, 0],
        vec![1, 3, 0, 2],
    ];
    for perm in perms {
        for parts in [vec![1, 3], vec![2, 2], vec![1, 1, 2], vec![4]] {
            let partition = Partition::new(parts).unwrap();
            let q = permutation_unitary(&perm).unwrap();
            let a = nest_algebra(&partition).conjugate(&q);
            let cert = triangularize(&a, &tol)
                .unwrap()
                .certificate()
                .cloned()
                .unwrap_or_else(|| panic!("perm {perm:?} partition {partition:?} refuted"));
            assert_eq!(cert.partition, partition);
            assert!(verify_certificate(&a, &cert, &tol).matches);
        }
    }
}
