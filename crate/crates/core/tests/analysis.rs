use std::f64::consts::PI;

use heralds_core::analysis::{
    analyze, canonical_phase, completeness_check, detect_output_basis, effective_action, proportionality_check,
    randomized_d_probe, test_condition, test_operator, w_matrices, AnalysisOptions, BasisSource, TestOperator,
    WMatrixFamily, WMember,
};
use heralds_core::catalog::{build_cnot_pittman, build_klm_ns, special_state_s};
use heralds_core::cpmap::DeviceParts;
use heralds_core::linalg::{expm, max_abs_deviation};
use heralds_core::{
    conditional_output, success_probability, CMatrix, ConditionalDevice, Correction, DensityOperator,
    DetectionSignature, Error, FockSubspaceBasis, FockVector, OccupationVector, Outcome, C64,
};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const KLM_D3: f64 = 0.107_864_376_269_049_5;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn diag(values: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&DVector::from_iterator(values.len(), values.iter().map(|&x| c(x))))
}

fn cnot_permutation() -> CMatrix {
    let mut p = CMatrix::zeros(4, 4);
    for (row, col) in [(0, 0), (1, 1), (3, 2), (2, 3)] {
        p[(row, col)] = c(1.0);
    }
    p
}

fn rebuild(
    dev: &ConditionalDevice,
    subspace_out: Option<FockSubspaceBasis>,
    outcomes: Vec<Outcome>,
) -> ConditionalDevice {
    ConditionalDevice::new(DeviceParts {
        unitary: dev.unitary().clone(),
        input: dev.input().clone(),
        output: dev.output().clone(),
        sigma: dev.sigma().clone(),
        subspace_in: dev.subspace_in().clone(),
        subspace_out,
        outcomes,
    })
    .unwrap()
}

fn family(matrices: Vec<CMatrix>) -> WMatrixFamily {
    let dim = matrices[0].nrows();
    WMatrixFamily {
        members: matrices
            .into_iter()
            .enumerate()
            .map(|(j, matrix)| WMember {
                outcome: j,
                ket: 0,
                term: 0,
                matrix,
            })
            .collect(),
        taus: vec![1.0],
        active_outcomes: vec![0],
        dim_out: dim,
        dim_in: dim,
    }
}

fn random_state(rng: &mut ChaCha8Rng, basis: &FockSubspaceBasis) -> (Vec<C64>, DensityOperator) {
    let v: Vec<C64> = (0..basis.dim())
        .map(|_| C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
        .collect();
    let rho = DensityOperator::pure_in(basis, &v).unwrap();
    (v, rho)
}

#[test]
fn klm_test_operator_is_quarter_identity() {
    let t = test_operator(&build_klm_ns(false), 0).unwrap();
    assert!(max_abs_deviation(&t.matrix, &diag(&[0.25; 3])) < 1e-10);
    let v = test_condition(&t, 1e-9);
    assert!(v.pass && !v.degenerate);
    assert!((v.tau - 0.25).abs() < 1e-12);
}

#[test]
fn extended_klm_test_operator_has_the_breakdown_eigenvalue() {
    let t = test_operator(&build_klm_ns(true), 0).unwrap();
    assert!(max_abs_deviation(&t.matrix, &diag(&[0.25, 0.25, 0.25, KLM_D3])) < 1e-10);
    let v = test_condition(&t, 1e-9);
    assert!(!v.pass);
    assert!((v.spread - (0.25 - KLM_D3)).abs() < 1e-10);
    assert!((v.spread - 0.142).abs() < 1e-3);
}

#[test]
fn cnot_test_operators() {
    let dev = build_cnot_pittman();
    for l in 0..16 {
        let t = test_operator(&dev, l).unwrap();
        assert!(
            max_abs_deviation(&t.matrix, &diag(&[1.0 / 64.0; 4])) < 1e-10,
            "outcome {l}"
        );
    }
}

#[test]
fn zero_test_operator_is_degenerate() {
    let t = TestOperator {
        outcome: 0,
        matrix: CMatrix::zeros(3, 3),
        eigenvalues: vec![0.0; 3],
    };
    let v = test_condition(&t, 1e-9);
    assert!(v.pass && v.degenerate);
    assert_eq!(v.tau, 0.0);
}

#[test]
fn klm_w_is_sign_flip() {
    let dev = build_klm_ns(false);
    let fam = w_matrices(&dev, dev.subspace_out().unwrap()).unwrap();
    assert_eq!(fam.members.len(), 1);
    assert!(max_abs_deviation(&fam.members[0].matrix, &diag(&[1.0, 1.0, -1.0])) < 1e-12);
}

#[test]
fn cnot_w_family_before_and_after_corrections() {
    let dev = build_cnot_pittman();
    let out = dev.subspace_out().unwrap();
    let corrected = w_matrices(&dev, out).unwrap();
    assert_eq!(corrected.members.len(), 16);
    for m in &corrected.members {
        assert!(
            max_abs_deviation(&m.matrix, &cnot_permutation()) < 1e-9,
            "outcome {}",
            m.outcome
        );
    }
    let raw = w_matrices(&dev.without_corrections(), out).unwrap();
    for m in &raw.members {
        // same support as the permutation, entries ±1
        for i in 0..4 {
            for j in 0..4 {
                let z = m.matrix[(i, j)];
                if cnot_permutation()[(i, j)].re == 1.0 {
                    assert!((z.norm() - 1.0).abs() < 1e-12 && z.im.abs() < 1e-12);
                } else {
                    assert!(z.norm() < 1e-12);
                }
            }
        }
    }
    let p = proportionality_check(&raw, 1e-9).unwrap();
    assert!(!p.pass && p.relative_second > 0.1);
}

#[test]
fn degenerate_device_has_no_w_family() {
    // four photons in b cannot come from at most three
    let dev = build_klm_ns(false);
    let herald = FockVector::basis(dev.output().second(), vec![4, 0]).unwrap();
    let never = rebuild(
        &dev,
        dev.subspace_out().cloned(),
        vec![Outcome {
            signature: DetectionSignature::new(vec![herald]).unwrap(),
            correction: Correction::Identity,
        }],
    );
    assert!(matches!(
        w_matrices(&never, dev.subspace_out().unwrap()),
        Err(Error::Degenerate)
    ));
    assert!(matches!(detect_output_basis(&never), Err(Error::ZeroImage)));
    let report = analyze(&never, AnalysisOptions::default()).unwrap();
    assert!(report.degenerate && !report.operationally_unitary);
}

#[test]
fn proportionality_examples() {
    let p = proportionality_check(&family(vec![diag(&[1.0, 1.0, -1.0])]), 1e-9).unwrap();
    assert!(p.pass);
    assert!(max_abs_deviation(p.common.as_ref().unwrap(), &diag(&[1.0, 1.0, -1.0])) < 1e-12);

    let p = proportionality_check(&family(vec![diag(&[1.0, 1.0]), diag(&[1.0, -1.0])]), 1e-9).unwrap();
    assert!(!p.pass && p.common.is_none());
    assert!((p.relative_second - 1.0).abs() < 1e-12);

    let mut fam = family(vec![cnot_permutation(); 16]);
    fam.active_outcomes = (0..16).collect();
    let p = proportionality_check(&fam, 1e-9).unwrap();
    assert!(p.pass);
    assert!(max_abs_deviation(p.common.as_ref().unwrap(), &cnot_permutation()) < 1e-12);
    assert!(p.scalars.iter().all(|s| (s - c(1.0)).norm() < 1e-12));
}

#[test]
fn proportionality_fixes_the_global_phase_and_reports_scalars() {
    let i = C64::new(0.0, 1.0);
    let w = diag(&[1.0, -1.0]);
    let fam = family(vec![&w * i, &w * c(-0.5), CMatrix::zeros(2, 2)]);
    let p = proportionality_check(&fam, 1e-9).unwrap();
    assert!(p.pass);
    assert_eq!(p.nonvanishing, vec![0, 1]);
    let common = p.common.unwrap();
    assert!(common[(0, 0)].im.abs() < 1e-15 && common[(0, 0)].re > 0.0);
    for (s, m) in p.scalars.iter().zip([&w * i, &w * c(-0.5)]) {
        assert!(max_abs_deviation(&(&common * *s), &m) < 1e-12);
    }
    assert!(matches!(
        proportionality_check(&family(vec![CMatrix::zeros(2, 2)]), 1e-9),
        Err(Error::EmptyFamily)
    ));
}

#[test]
fn canonical_phase_makes_first_entry_positive() {
    let m = CMatrix::from_row_slice(2, 2, &[c(0.0), C64::new(0.0, -2.0), c(1.0), c(0.0)]);
    let p = canonical_phase(&m, 1e-12);
    assert_eq!(p[(0, 1)], c(2.0));
    assert!((p[(1, 0)] - C64::new(0.0, 1.0)).norm() < 1e-15);
}

#[test]
fn completeness_examples() {
    assert_eq!(completeness_check(&diag(&[1.0, 1.0, -1.0])), 0.0);
    assert_eq!(completeness_check(&cnot_permutation()), 0.0);
    assert!((completeness_check(&diag(&[0.9; 3])) - 0.19).abs() < 1e-12);
}

#[test]
fn effective_action_examples() {
    let q = effective_action(&CMatrix::identity(3, 3), 1.0, 1e-9).unwrap();
    assert!(q.q.iter().all(|z| z.norm() < 1e-12));

    let w = diag(&[1.0, 1.0, -1.0]);
    let q = effective_action(&w, 2.0, 1e-9).unwrap();
    assert!(max_abs_deviation(&q.q, &diag(&[0.0, 0.0, PI])) < 1e-9);
    assert_eq!(q.eigenphases.last().copied(), Some(PI));
    assert!(q.reconstruction_deviation < 1e-9);
    assert!(max_abs_deviation(&q.h_eff, &q.q.unscale(2.0)) < 1e-15);
    // (π/2)(5n − n²) on n = 0, 1, 2 is another branch of the same unitary
    let alt = expm(&(diag(&[0.0, 2.0 * PI, 3.0 * PI]) * C64::new(0.0, -1.0)));
    assert!(max_abs_deviation(&alt, &w) < 1e-12);

    let q = effective_action(&cnot_permutation(), 1.0, 1e-9).unwrap();
    assert!(q.reconstruction_deviation < 1e-9);
    assert!(q.eigenphases.iter().all(|&x| x > -PI && x <= PI));

    assert!(matches!(
        effective_action(&diag(&[0.9, 0.9]), 1.0, 1e-9),
        Err(Error::NonUnitary { .. })
    ));
    assert!(effective_action(&w, 0.0, 1e-9).is_err());
}

#[test]
fn detected_basis_for_klm_is_the_number_states() {
    let dev = build_klm_ns(false);
    let detect = rebuild(&dev, None, dev.outcomes().to_vec());
    let basis = detect_output_basis(&detect).unwrap();
    assert_eq!(basis.dim(), 3);
    for (n, v) in basis.vectors().iter().enumerate() {
        assert_eq!(v.len(), 1);
        let amp = v.amplitude(&OccupationVector::new(vec![n as u32]));
        assert!((amp.norm() - 1.0).abs() < 1e-12);
    }
    let report = analyze(&detect, AnalysisOptions::default()).unwrap();
    assert_eq!(report.basis_source, BasisSource::Detected);
    assert!(report.operationally_unitary);
    assert!(max_abs_deviation(report.common_w().unwrap(), &diag(&[1.0, 1.0, -1.0])) < 1e-9);
}

#[test]
fn detected_basis_for_cnot_is_four_dimensional() {
    let dev = build_cnot_pittman().without_corrections();
    let detect = rebuild(&dev, None, dev.outcomes().to_vec());
    let basis = detect_output_basis(&detect).unwrap();
    assert_eq!(basis.dim(), 4);
    // it spans the logical kets on ports 5 and 6
    let logical = build_cnot_pittman().subspace_out().unwrap().clone();
    for v in logical.vectors() {
        let proj: f64 = basis.coefficients(v).unwrap().norm_squared();
        assert!((proj - 1.0).abs() < 1e-10);
    }
}

#[test]
fn d_probe_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let klm = build_klm_ns(false);
    let p = randomized_d_probe(&klm, 0, None, 50, &mut rng).unwrap();
    assert!(p.spread <= 1e-10);
    assert_eq!(p.probes, 53);

    let ext = build_klm_ns(true);
    let p = randomized_d_probe(&ext, 0, None, 50, &mut rng).unwrap();
    assert!((p.spread - (0.25 - KLM_D3)).abs() < 1e-10);

    // CNOT probed on the logical span plus the extra-photon state
    let cnot = build_cnot_pittman();
    let s = special_state_s();
    let probe_basis = cnot.subspace_in().extended(s.basis().vectors()).unwrap();
    let wide = cnot.with_subspace_in(probe_basis.clone()).unwrap();
    for l in [0, 7, 15] {
        let p = randomized_d_probe(&wide, l, Some(&probe_basis), 10, &mut rng).unwrap();
        assert!((p.spread - 1.0 / 64.0).abs() < 1e-10);
        assert!(p.min.abs() < 1e-12);
    }
    assert!(randomized_d_probe(&klm, 0, None, 1, &mut rng).is_err());
}

#[test]
fn d_probe_agrees_with_test_verdicts() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let tol = 1e-9;
    for dev in [build_klm_ns(false), build_klm_ns(true), build_cnot_pittman()] {
        for l in 0..dev.outcomes().len() {
            let verdict = test_condition(&test_operator(&dev, l).unwrap(), tol);
            let probe = randomized_d_probe(&dev, l, None, 20, &mut rng).unwrap();
            assert_eq!(probe.spread <= tol, verdict.pass);
        }
    }
}

#[test]
fn pass_means_conjugation_by_w() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for dev in [build_klm_ns(false), build_cnot_pittman()] {
        let report = analyze(&dev, AnalysisOptions::default()).unwrap();
        assert!(report.operationally_unitary);
        let w = report.common_w().unwrap();
        let out_basis = report.output_basis.as_ref().unwrap();
        assert!(report.effective_action.as_ref().unwrap().reconstruction_deviation < 1e-9);
        for _ in 0..20 {
            let (_, rho) = random_state(&mut rng, dev.subspace_in());
            let expected = w * rho.matrix() * w.adjoint();
            let mut first: Option<CMatrix> = None;
            for l in 0..dev.outcomes().len() {
                let out = conditional_output(&dev, l, &rho).unwrap();
                let m = out.matrix_in(out_basis).unwrap();
                assert!(max_abs_deviation(&m, &expected) < 1e-9);
                assert!(out.purity() >= 1.0 - 1e-9);
                // same output whichever outcome fired
                if let Some(f) = &first {
                    assert!(max_abs_deviation(&m, f) < 1e-9);
                } else {
                    first = Some(m);
                }
            }
        }
    }
}

#[test]
fn tau_matches_success_probability() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for dev in [build_klm_ns(false), build_cnot_pittman()] {
        let report = analyze(&dev, AnalysisOptions::default()).unwrap();
        for _ in 0..10 {
            let (_, rho) = random_state(&mut rng, dev.subspace_in());
            for o in &report.outcomes {
                let d = success_probability(&dev, o.test.outcome, &rho).unwrap();
                assert!((d - o.verdict.tau).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn analysis_reports() {
    let r = analyze(&build_klm_ns(false), AnalysisOptions::default()).unwrap();
    assert!(r.operationally_unitary && r.failures.is_empty());
    assert!((r.total_tau - 0.25).abs() < 1e-12);
    assert_eq!(r.basis_source, BasisSource::User);

    let r = analyze(&build_klm_ns(true), AnalysisOptions::default()).unwrap();
    assert!(!r.operationally_unitary);
    assert!(!r.tests_pass());
    assert!((r.outcomes[0].test.eigenvalues[0] - KLM_D3).abs() < 1e-9);

    let r = analyze(&build_cnot_pittman(), AnalysisOptions::default()).unwrap();
    assert!(r.operationally_unitary);
    assert_eq!(r.outcomes.len(), 16);
    assert!((r.total_tau - 0.25).abs() < 1e-10);

    let r = analyze(&build_cnot_pittman().without_corrections(), AnalysisOptions::default()).unwrap();
    assert!(r.tests_pass() && !r.operationally_unitary);
}
