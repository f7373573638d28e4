use heralds_core::catalog::{build_cnot_pittman, build_klm_ns, special_state_s};
use heralds_core::cpmap::{partial_trace_ancilla, OperatorKind};
use heralds_core::fock::enumerate_sector;
use heralds_core::linalg::{max_abs_deviation, trace};
use heralds_core::{
    conditional_output, success_probability, v_map, CMatrix, ConditionalDevice, DensityOperator, Error,
    FockSubspaceBasis, FockVector, ModeRegistry, OccupationVector, C64,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const KLM_D3: f64 = 0.107_864_376_269_049_5;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn random_coeffs(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n)
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect()
}

fn random_pure(rng: &mut ChaCha8Rng, basis: &FockSubspaceBasis) -> DensityOperator {
    DensityOperator::pure_in(basis, &random_coeffs(rng, basis.dim())).unwrap()
}

fn random_mixed(rng: &mut ChaCha8Rng, basis: &FockSubspaceBasis) -> DensityOperator {
    let n = basis.dim();
    let g = CMatrix::from_fn(n, n, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let m = &g * g.adjoint();
    let m = m.unscale(trace(&m).re);
    DensityOperator::state(basis.clone(), (&m + m.adjoint()).scale(0.5)).unwrap()
}

fn basis_state(basis: &FockSubspaceBasis, j: usize) -> DensityOperator {
    let mut v = vec![c(0.0); basis.dim()];
    v[j] = c(1.0);
    DensityOperator::pure_in(basis, &v).unwrap()
}

/// Both operators expanded in the Fock kets their supports touch, compared entrywise.
fn operator_distance(a: &DensityOperator, b: &DensityOperator) -> f64 {
    let occs: Vec<OccupationVector> = a
        .basis()
        .vectors()
        .iter()
        .chain(b.basis().vectors())
        .flat_map(|v| v.terms().map(|(o, _)| o.clone()))
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let fock = FockSubspaceBasis::from_occupations(a.basis().registry(), &occs).unwrap();
    max_abs_deviation(&a.matrix_in(&fock).unwrap(), &b.matrix_in(&fock).unwrap())
}

#[test]
fn klm_success_probability_is_a_quarter() {
    let dev = build_klm_ns(false);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10 {
        let rho = random_pure(&mut rng, dev.subspace_in());
        assert!((success_probability(&dev, 0, &rho).unwrap() - 0.25).abs() < 1e-10);
    }
}

#[test]
fn klm_three_photons_break_the_gate() {
    let dev = build_klm_ns(true);
    let d3 = success_probability(&dev, 0, &basis_state(dev.subspace_in(), 3)).unwrap();
    assert!((d3 - (2.0 * 2f64.sqrt() - 2.5).powi(2)).abs() < 1e-12);
    assert!((d3 - KLM_D3).abs() < 1e-12);
}

#[test]
fn cnot_first_outcome_on_00() {
    let dev = build_cnot_pittman();
    let d = success_probability(&dev, 0, &basis_state(dev.subspace_in(), 0)).unwrap();
    assert!((d - 1.0 / 64.0).abs() < 1e-12);
}

#[test]
fn invalid_outcome_index() {
    let dev = build_klm_ns(false);
    let rho = basis_state(dev.subspace_in(), 0);
    assert!(matches!(
        success_probability(&dev, 1, &rho),
        Err(Error::InvalidOutcome { index: 1, count: 1 })
    ));
}

#[test]
fn extra_photon_gives_zero_operator_and_zero_probability_error() {
    let dev = build_cnot_pittman();
    let s = special_state_s();
    for l in 0..16 {
        assert!(success_probability(&dev, l, &s).unwrap().abs() < 1e-12);
        let v = v_map(&dev, l, &s).unwrap();
        assert!(v.matrix().iter().all(|z| z.norm() < 1e-12));
        assert!(matches!(conditional_output(&dev, l, &s), Err(Error::ZeroProbability)));
    }
}

#[test]
fn klm_v_map_on_one_photon() {
    let dev = build_klm_ns(false);
    let v = v_map(&dev, 0, &basis_state(dev.subspace_in(), 1)).unwrap();
    assert_eq!(v.kind(), OperatorKind::Positive);
    let out = dev.subspace_out().unwrap();
    let m = v.matrix_in(out).unwrap();
    let mut expected = CMatrix::zeros(3, 3);
    expected[(1, 1)] = c(0.25);
    assert!(max_abs_deviation(&m, &expected) < 1e-12);
    assert!((v.trace() - 0.25).abs() < 1e-12);
}

#[test]
fn v_map_is_linear_and_trace_is_d() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for dev in [build_klm_ns(true), build_cnot_pittman()] {
        for l in [0, dev.outcomes().len() - 1] {
            let a = random_mixed(&mut rng, dev.subspace_in());
            let b = random_pure(&mut rng, dev.subspace_in());
            let x: f64 = rng.random();
            let mix = DensityOperator::mix(x, &a, &b).unwrap();
            let va = v_map(&dev, l, &a).unwrap();
            let vb = v_map(&dev, l, &b).unwrap();
            let vm = v_map(&dev, l, &mix).unwrap();
            let combo = va.matrix().scale(x) + vb.matrix().scale(1.0 - x);
            assert!(max_abs_deviation(vm.matrix(), &combo) < 1e-12);
            assert!((vm.trace() - success_probability(&dev, l, &mix).unwrap()).abs() < 1e-10);
        }
    }
}

#[test]
fn klm_transformation_law() {
    let dev = build_klm_ns(false);
    let s = 1.0 / 3f64.sqrt();
    let rho = DensityOperator::pure_in(dev.subspace_in(), &[c(s), c(s), c(s)]).unwrap();
    let out = conditional_output(&dev, 0, &rho).unwrap();
    let expected = DensityOperator::pure_in(dev.subspace_out().unwrap(), &[c(s), c(s), c(-s)]).unwrap();
    assert!(operator_distance(&out, &expected) < 1e-12);
    assert!((out.trace() - 1.0).abs() < 1e-12);
}

#[test]
fn cnot_flips_target_when_control_is_set() {
    let dev = build_cnot_pittman();
    let rho = basis_state(dev.subspace_in(), 2);
    let expected = basis_state(dev.subspace_out().unwrap(), 3);
    for l in 0..16 {
        let out = conditional_output(&dev, l, &rho).unwrap();
        assert!(operator_distance(&out, &expected) < 1e-12, "outcome {l}");
    }
}

#[test]
fn maximally_mixed_through_klm() {
    let dev = build_klm_ns(false);
    let out = conditional_output(&dev, 0, &DensityOperator::maximally_mixed(dev.subspace_in())).unwrap();
    let expected = DensityOperator::maximally_mixed(dev.subspace_out().unwrap());
    assert!(operator_distance(&out, &expected) < 1e-12);
}

#[test]
fn conditional_output_is_trace_one_and_convex() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for dev in [build_klm_ns(false), build_klm_ns(true), build_cnot_pittman()] {
        for _ in 0..5 {
            let l = rng.random_range(0..dev.outcomes().len());
            let a = random_mixed(&mut rng, dev.subspace_in());
            let b = random_pure(&mut rng, dev.subspace_in());
            let x: f64 = rng.random();
            let mix = DensityOperator::mix(x, &a, &b).unwrap();
            let out = conditional_output(&dev, l, &mix).unwrap();
            assert!((out.trace() - 1.0).abs() < 1e-10);
            // ρ̄(xρa + (1−x)ρb) = [x d_a ρ̄a + (1−x) d_b ρ̄b] / (x d_a + (1−x) d_b)
            let (da, db) = (
                success_probability(&dev, l, &a).unwrap(),
                success_probability(&dev, l, &b).unwrap(),
            );
            let (oa, ob) = (
                conditional_output(&dev, l, &a).unwrap(),
                conditional_output(&dev, l, &b).unwrap(),
            );
            let w = x * da / (x * da + (1.0 - x) * db);
            let expected = DensityOperator::mix(w, &oa, &ob).unwrap();
            assert!(operator_distance(&out, &expected) < 1e-9);
        }
    }
}

#[test]
fn v_map_is_completely_positive_on_random_dyads() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for dev in [build_klm_ns(true), build_cnot_pittman()] {
        for _ in 0..5 {
            let l = rng.random_range(0..dev.outcomes().len());
            let rho = random_pure(&mut rng, dev.subspace_in());
            assert!(v_map(&dev, l, &rho).unwrap().min_eigenvalue() >= -1e-9);
        }
    }
}

/// Second route to `V_L(ρ)`: build `P U(|ψ⟩⊗|χ⟩)` on the full output registry,
/// form its dyad and trace out the ancilla modes.
fn v_map_by_projection(dev: &ConditionalDevice, l: usize, psi: &FockVector) -> DensityOperator {
    let mut projected = Vec::new();
    for term in dev.sigma().terms() {
        let joint = dev.input().embed(psi, &term.chi).unwrap();
        let out = dev.unitary().lift_apply(&joint, dev.photon_cap()).unwrap();
        for k in dev.outcomes()[l].signature.kets() {
            let reduced = dev.output().contract_second(k, &out).unwrap();
            projected.push((term.p, dev.output().embed(&reduced, k).unwrap()));
        }
    }
    let occs: Vec<OccupationVector> = projected
        .iter()
        .flat_map(|(_, v)| v.terms().map(|(o, _)| o.clone()))
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let full = FockSubspaceBasis::from_occupations(dev.output().full(), &occs).unwrap();
    let mut m = CMatrix::zeros(occs.len(), occs.len());
    for (p, v) in &projected {
        let col = full.coefficients(v).unwrap();
        m += (&col * col.adjoint()).scale(*p);
    }
    let rho = DensityOperator::positive(full, m).unwrap();
    partial_trace_ancilla(&rho, dev.output().second().labels()).unwrap()
}

#[test]
fn v_map_agrees_with_projection_and_partial_trace() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for dev in [build_klm_ns(true), build_cnot_pittman()] {
        for _ in 0..3 {
            let l = rng.random_range(0..dev.outcomes().len());
            let coeffs = random_coeffs(&mut rng, dev.subspace_in().dim());
            let psi = dev.subspace_in().combine(&coeffs).unwrap().normalized().unwrap();
            let rho = DensityOperator::pure(&psi).unwrap();
            let direct = v_map(&dev, l, &rho).unwrap();
            let other = v_map_by_projection(&dev, l, &psi);
            assert!(operator_distance(&direct, &other) < 1e-12);
            assert!((direct.trace() - other.trace()).abs() < 1e-12);
        }
    }
}

#[test]
fn partial_trace_of_product_state() {
    let reg = ModeRegistry::new(["x", "y", "z"]).unwrap();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let v = FockVector::from_terms(
        &reg,
        [
            (OccupationVector::new(vec![1, 1, 0]), c(s)),
            (OccupationVector::new(vec![2, 1, 0]), c(s)),
        ],
    )
    .unwrap();
    let reduced = partial_trace_ancilla(&DensityOperator::pure(&v).unwrap(), &["y", "z"]).unwrap();
    assert_eq!(reduced.basis().dim(), 2);
    let expected = CMatrix::from_element(2, 2, c(0.5));
    assert!(max_abs_deviation(reduced.matrix(), &expected) < 1e-12);
    assert_eq!(reduced.kind(), OperatorKind::State);
}

#[test]
fn partial_trace_of_entangled_single_photon() {
    let reg = ModeRegistry::new(["x", "y"]).unwrap();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let v = FockVector::from_terms(
        &reg,
        [
            (OccupationVector::new(vec![1, 0]), c(s)),
            (OccupationVector::new(vec![0, 1]), c(s)),
        ],
    )
    .unwrap();
    let reduced = partial_trace_ancilla(&DensityOperator::pure(&v).unwrap(), &["y"]).unwrap();
    let expected = CMatrix::identity(2, 2).scale(0.5);
    assert!(max_abs_deviation(reduced.matrix(), &expected) < 1e-12);
}

#[test]
fn partial_trace_preserves_trace_and_positivity() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let reg = ModeRegistry::new(["x", "y", "z"]).unwrap();
    let basis = FockSubspaceBasis::from_occupations(&reg, &enumerate_sector(&reg, 2)).unwrap();
    for _ in 0..5 {
        let n = basis.dim();
        let g = CMatrix::from_fn(n, n, |_, _| {
            C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let m = &g * g.adjoint();
        let rho = DensityOperator::positive(basis.clone(), (&m + m.adjoint()).scale(0.5)).unwrap();
        let reduced = partial_trace_ancilla(&rho, &["z"]).unwrap();
        assert!((reduced.trace() - rho.trace()).abs() < 1e-10 * rho.trace());
        assert!(reduced.min_eigenvalue() >= -1e-10);
        assert_eq!(reduced.kind(), OperatorKind::Positive);
    }
}

#[test]
fn partial_trace_rejects_unknown_modes() {
    let reg = ModeRegistry::new(["x", "y"]).unwrap();
    let rho = DensityOperator::pure(&FockVector::basis(&reg, vec![1, 0]).unwrap()).unwrap();
    assert!(partial_trace_ancilla(&rho, &["w"]).is_err());
}

#[test]
fn cnot_signatures_are_pairwise_orthogonal_across_outcomes() {
    let dev = build_cnot_pittman();
    let outcomes = dev.outcomes();
    for (l, a) in outcomes.iter().enumerate() {
        for (m, b) in outcomes.iter().enumerate() {
            let g = a.signature.kets()[0].inner(&b.signature.kets()[0]).unwrap();
            let e = if l == m { 1.0 } else { 0.0 };
            assert!((g - c(e)).norm() < 1e-12, "({l},{m})");
        }
    }
}

#[test]
fn density_operator_validation() {
    let reg = ModeRegistry::new(["x"]).unwrap();
    let basis =
        FockSubspaceBasis::from_occupations(&reg, &[OccupationVector::new(vec![0]), OccupationVector::new(vec![1])])
            .unwrap();
    let not_hermitian = CMatrix::from_row_slice(2, 2, &[c(0.5), c(0.3), c(0.0), c(0.5)]);
    assert!(DensityOperator::state(basis.clone(), not_hermitian).is_err());
    let negative = CMatrix::from_row_slice(2, 2, &[c(1.5), c(0.0), c(0.0), c(-0.5)]);
    assert!(DensityOperator::state(basis.clone(), negative).is_err());
    let trace_two = CMatrix::identity(2, 2);
    assert!(DensityOperator::state(basis.clone(), trace_two.clone()).is_err());
    assert!(DensityOperator::positive(basis, trace_two).is_ok());
}
