//! Operational-unitarity analysis of a [`ConditionalDevice`].
//!
//! A set of heralded maps is operationally unitary on the computational subspace
//! exactly when
//!
//! 1. every test operator `T_L = Tr_A(σ U† P_L U)` restricted to the subspace is a
//!    multiple `τ_L` of the identity, and
//! 2. the matrices `w_{L,k,i} = √(p_i/τ_L) V̄_L ⟨k̄|⟨ᾱ|U|β⟩|χ_i⟩` over outcomes with
//!    `τ_L > 0` are all proportional to one another (or vanish).
//!
//! When both hold the common matrix `w` is unitary and the conditional output is
//! `w ρ w†`. [`analyze`] runs both checks, extracts `w` and its effective action
//! `Q` with `w = exp(−iQ)`.

use std::f64::consts::PI;

use nalgebra::SVD;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cpmap::{
    branch_gram, fock_occupations, success_probability, Branch, ConditionalDevice, Correction, DecompositionSource,
    DensityOperator, ZERO_PROBABILITY,
};
use crate::error::{Error, Result};
use crate::fock::{occupation_index, FockSubspaceBasis, FockVector};
use crate::linalg::{
    expm, hermitian_eigen, max_abs_deviation, max_abs_deviation_from_identity, normal_eigen, trace, CMatrix,
};

/// Default verdict tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Relative singular-value cutoff when detecting the output subspace.
pub const DETECTION_CUTOFF: f64 = 1e-8;

/// Eigenphases this close to −π are reported as +π.
const BRANCH_SNAP: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct TestOperator {
    pub outcome: usize,
    /// `T_L` over the computational input basis.
    pub matrix: CMatrix,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestVerdict {
    pub pass: bool,
    /// `Tr(T)/dim`; the success probability when the test passes.
    pub tau: f64,
    /// `‖T − τI‖_max`.
    pub max_deviation: f64,
    /// Largest minus smallest eigenvalue.
    pub spread: f64,
    /// Passed with `τ = 0`: the outcome never fires.
    pub degenerate: bool,
}

fn test_operator_from(outcome: usize, matrix: CMatrix) -> TestOperator {
    let (eigenvalues, _) = hermitian_eigen(&matrix);
    TestOperator {
        outcome,
        matrix,
        eigenvalues,
    }
}

/// `T_L = Tr_A(σ U† P_L U)` on the device's computational input subspace.
pub fn test_operator(dev: &ConditionalDevice, outcome: usize) -> Result<TestOperator> {
    let propagated = dev.propagate(dev.subspace_in())?;
    let branches = dev.branches(outcome, &propagated)?;
    Ok(test_operator_from(
        outcome,
        branch_gram(&branches, dev.subspace_in().dim())?,
    ))
}

/// Pass iff `‖T − τI‖_max ≤ tol` with `τ = Tr(T)/dim`.
pub fn test_condition(t: &TestOperator, tol: f64) -> TestVerdict {
    let dim = t.matrix.nrows().max(1);
    let tau = trace(&t.matrix).re / dim as f64;
    let target = CMatrix::identity(t.matrix.nrows(), t.matrix.ncols()).scale(tau);
    let max_deviation = max_abs_deviation(&t.matrix, &target);
    let spread = match (t.eigenvalues.first(), t.eigenvalues.last()) {
        (Some(lo), Some(hi)) => hi - lo,
        _ => 0.0,
    };
    let pass = max_deviation <= tol;
    TestVerdict {
        pass,
        tau,
        max_deviation,
        spread,
        degenerate: pass && tau <= ZERO_PROBABILITY,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WMember {
    pub outcome: usize,
    pub ket: usize,
    pub term: usize,
    /// Rows: output basis `ᾱ`; columns: input basis `β`.
    pub matrix: CMatrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WMatrixFamily {
    pub members: Vec<WMember>,
    /// `τ_L` for every outcome of the device.
    pub taus: Vec<f64>,
    /// Outcomes with `τ_L > 0`; only these contribute members.
    pub active_outcomes: Vec<usize>,
    pub dim_out: usize,
    pub dim_in: usize,
}

/// Every `w_{L,k,i}` on the given output basis.
pub fn w_matrices(dev: &ConditionalDevice, out_basis: &FockSubspaceBasis) -> Result<WMatrixFamily> {
    let propagated = dev.propagate(dev.subspace_in())?;
    let dim = dev.subspace_in().dim();
    let mut per_outcome = Vec::with_capacity(dev.outcomes().len());
    for l in 0..dev.outcomes().len() {
        let branches = dev.branches(l, &propagated)?;
        let tau = trace(&branch_gram(&branches, dim)?).re / dim as f64;
        per_outcome.push((tau, branches));
    }
    w_family(dev, out_basis, per_outcome)
}

fn w_family(
    dev: &ConditionalDevice,
    out_basis: &FockSubspaceBasis,
    per_outcome: Vec<(f64, Vec<Branch>)>,
) -> Result<WMatrixFamily> {
    dev.output().first().ensure_same(out_basis.registry())?;
    let dim_in = dev.subspace_in().dim();
    let dim_out = out_basis.dim();
    let taus: Vec<f64> = per_outcome.iter().map(|(t, _)| *t).collect();
    let active_outcomes: Vec<usize> = (0..taus.len()).filter(|&l| taus[l] > ZERO_PROBABILITY).collect();
    if active_outcomes.is_empty() {
        return Err(Error::Degenerate);
    }

    let mut members = Vec::new();
    for (l, (tau, branches)) in per_outcome.into_iter().enumerate() {
        if tau <= ZERO_PROBABILITY {
            continue;
        }
        let correction = match &dev.outcomes()[l].correction {
            Correction::Identity => None,
            Correction::Unitary(v) => {
                if v.nrows() != dim_out {
                    return Err(Error::Dimension {
                        what: "correction",
                        expected: dim_out,
                        found: v.nrows(),
                    });
                }
                Some(v)
            }
        };
        for br in branches {
            let mut raw = CMatrix::zeros(dim_out, dim_in);
            for (b, img) in br.images.iter().enumerate() {
                for (a, bar) in out_basis.vectors().iter().enumerate() {
                    raw[(a, b)] = bar.inner(img)?;
                }
            }
            let corrected = match correction {
                Some(v) => v * raw,
                None => raw,
            };
            members.push(WMember {
                outcome: l,
                ket: br.ket,
                term: br.term,
                matrix: corrected.scale((br.weight / tau).sqrt()),
            });
        }
    }
    Ok(WMatrixFamily {
        members,
        taus,
        active_outcomes,
        dim_out,
        dim_in,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Proportionality {
    pub pass: bool,
    /// Singular values of the stacked nonvanishing members, descending.
    pub singular_values: Vec<f64>,
    /// `σ₂/σ₁` (zero for a single member).
    pub relative_second: f64,
    /// Indices into the family of the members that do not vanish.
    pub nonvanishing: Vec<usize>,
    /// Phase-fixed common matrix, present on pass.
    pub common: Option<CMatrix>,
    /// `w_J = c_J · common` for each nonvanishing member, present on pass.
    pub scalars: Vec<C64>,
}

/// Multiply by the phase that makes the first entry (row-major) with magnitude above
/// `eps` real and positive.
pub fn canonical_phase(m: &CMatrix, eps: f64) -> CMatrix {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            if z.norm() > eps {
                return m * (z.conj() / z.norm());
            }
        }
    }
    m.clone()
}

/// Rank-one test on the family: stack each nonvanishing member as a row-major vector
/// and compare the two leading singular values.
pub fn proportionality_check(fam: &WMatrixFamily, tol: f64) -> Result<Proportionality> {
    let nonvanishing: Vec<usize> = (0..fam.members.len())
        .filter(|&j| fam.members[j].matrix.norm() > tol)
        .collect();
    if nonvanishing.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let cols = fam.dim_out * fam.dim_in;
    let stacked = CMatrix::from_fn(nonvanishing.len(), cols, |r, c| {
        fam.members[nonvanishing[r]].matrix[(c / fam.dim_in, c % fam.dim_in)]
    });
    let svd = SVD::new(stacked, false, true);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let singular_values: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
    let s1 = singular_values[0];
    let relative_second = singular_values.get(1).map_or(0.0, |s2| s2 / s1);
    let pass = relative_second <= tol;

    let (common, scalars) = if pass {
        let v_t = svd.v_t.as_ref().expect("requested V^H");
        let row = v_t.row(order[0]);
        // members carry √(p/τ_L), so Σ_J ‖w_J‖² = (#active outcomes)·‖w‖² for unitary w
        let scale = s1 / (fam.active_outcomes.len() as f64).sqrt();
        let w = CMatrix::from_fn(fam.dim_out, fam.dim_in, |a, b| row[a * fam.dim_in + b] * scale);
        let w = canonical_phase(&w, tol);
        let wn = w.norm_squared();
        let scalars = nonvanishing
            .iter()
            .map(|&j| w.dotc(&fam.members[j].matrix) / wn)
            .collect();
        (Some(w), scalars)
    } else {
        (None, Vec::new())
    };

    Ok(Proportionality {
        pass,
        singular_values,
        relative_second,
        nonvanishing,
        common,
        scalars,
    })
}

/// `‖w†w − I‖_max`.
pub fn completeness_check(w: &CMatrix) -> f64 {
    max_abs_deviation_from_identity(&(w.adjoint() * w))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveAction {
    /// Hermitian generator with `exp(−iQ) = w` (ħ = 1).
    pub q: CMatrix,
    /// Eigenvalues of `Q`, ascending, each in (−π, π].
    pub eigenphases: Vec<f64>,
    pub t_eff: f64,
    /// `Q / t_eff`.
    pub h_eff: CMatrix,
    /// `‖exp(−iQ) − w‖_max`.
    pub reconstruction_deviation: f64,
}

/// Principal-branch effective action of a unitary `w`.
pub fn effective_action(w: &CMatrix, t_eff: f64, tol: f64) -> Result<EffectiveAction> {
    if !w.is_square() {
        return Err(Error::NotSquare {
            rows: w.nrows(),
            cols: w.ncols(),
        });
    }
    if !(t_eff > 0.0 && t_eff.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_eff must be positive, got {t_eff}")));
    }
    let deviation = completeness_check(w);
    if deviation > tol {
        return Err(Error::NonUnitary { what: "w", deviation });
    }
    let (values, vectors, _) = normal_eigen(w);
    let phases: Vec<f64> = values
        .iter()
        .map(|z| {
            let q = -z.arg() + 0.0;
            if q <= -PI + BRANCH_SNAP {
                PI
            } else {
                q
            }
        })
        .collect();
    let diag = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        phases.len(),
        phases.iter().map(|&q| C64::new(q, 0.0)),
    ));
    let q = &vectors * diag * vectors.adjoint();
    let q = (&q + q.adjoint()).scale(0.5);
    let reconstructed = expm(&(&q * C64::new(0.0, -1.0)));
    let reconstruction_deviation = max_abs_deviation(&reconstructed, w);
    let mut eigenphases = phases;
    eigenphases.sort_by(f64::total_cmp);
    Ok(EffectiveAction {
        h_eff: q.unscale(t_eff),
        q,
        eigenphases,
        t_eff,
        reconstruction_deviation,
    })
}

/// Orthonormal basis of the span of the conditional images of the computational
/// subspace, chosen by pivoted Gram–Schmidt over Fock kets so that it is as close to
/// the Fock basis as the span allows.
pub fn detect_output_basis(dev: &ConditionalDevice) -> Result<FockSubspaceBasis> {
    let propagated = dev.propagate(dev.subspace_in())?;
    let fock = FockSubspaceBasis::sectors(dev.output().first(), &dev.output_sectors(dev.subspace_in()))?;
    let occs = fock_occupations(&fock);
    let index = occupation_index(&occs);
    let dim = occs.len();

    let mut columns = Vec::new();
    for l in 0..dev.outcomes().len() {
        for br in dev.branches(l, &propagated)? {
            for img in &br.images {
                columns.push(img.to_dense(&index, dim) * C64::new(br.weight.sqrt(), 0.0));
            }
        }
    }
    let images = CMatrix::from_columns(&columns);
    if images.iter().all(|z| z.norm() <= ZERO_PROBABILITY) {
        return Err(Error::ZeroImage);
    }
    let svd = SVD::new(images, true, false);
    let u = svd.u.as_ref().expect("requested U");
    let s_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let kept: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > DETECTION_CUTOFF * s_max)
        .collect();
    let range = CMatrix::from_columns(&kept.iter().map(|&k| u.column(k).into_owned()).collect::<Vec<_>>());
    let projector = &range * range.adjoint();

    // column-pivoted Gram–Schmidt on the projector; ties go to the earlier Fock ket
    let mut residual = projector;
    let mut chosen: Vec<FockVector> = Vec::with_capacity(kept.len());
    for _ in 0..kept.len() {
        let norms: Vec<f64> = (0..dim).map(|j| residual.column(j).norm()).collect();
        let best = norms.iter().copied().fold(0.0, f64::max);
        let j = norms.iter().position(|&n| n >= best * (1.0 - 1e-9)).expect("non-empty");
        let v = residual.column(j).unscale(norms[j]);
        residual -= &v * (v.adjoint() * &residual);
        let fv = FockVector::from_terms(dev.output().first(), occs.iter().cloned().zip(v.iter().copied()))?;
        chosen.push(fv);
    }
    FockSubspaceBasis::new(chosen)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DProbe {
    pub min: f64,
    pub max: f64,
    /// `max − min` over all probes.
    pub spread: f64,
    pub probes: usize,
}

/// Success probability of outcome `outcome` on every basis ket of `basis` (default: the
/// device's computational subspace) and on `trials` Haar-random pure states in its
/// span; reports the spread.
pub fn randomized_d_probe<R: Rng + ?Sized>(
    dev: &ConditionalDevice,
    outcome: usize,
    basis: Option<&FockSubspaceBasis>,
    trials: usize,
    rng: &mut R,
) -> Result<DProbe> {
    if trials < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 trials, got {trials}")));
    }
    let basis = basis.unwrap_or(dev.subspace_in());
    let dim = basis.dim();
    let mut values = Vec::with_capacity(dim + trials);
    for j in 0..dim {
        let mut c = vec![C64::new(0.0, 0.0); dim];
        c[j] = C64::new(1.0, 0.0);
        values.push(success_probability(
            dev,
            outcome,
            &DensityOperator::pure_in(basis, &c)?,
        )?);
    }
    for _ in 0..trials {
        let c: Vec<C64> = (0..dim)
            .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        values.push(success_probability(
            dev,
            outcome,
            &DensityOperator::pure_in(basis, &c)?,
        )?);
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(DProbe {
        min,
        max,
        spread: max - min,
        probes: values.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalysisOptions {
    pub tol: f64,
    pub t_eff: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            tol: DEFAULT_TOL,
            t_eff: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisSource {
    User,
    Detected,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeAnalysis {
    pub test: TestOperator,
    pub verdict: TestVerdict,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisReport {
    pub options: AnalysisOptions,
    pub outcomes: Vec<OutcomeAnalysis>,
    pub total_tau: f64,
    pub degenerate: bool,
    pub sigma_source: DecompositionSource,
    pub basis_source: BasisSource,
    pub output_basis: Option<FockSubspaceBasis>,
    pub family: Option<WMatrixFamily>,
    pub proportionality: Option<Proportionality>,
    pub completeness_deviation: Option<f64>,
    pub effective_action: Option<EffectiveAction>,
    /// Human-readable reasons the verdict failed; empty on pass.
    pub failures: Vec<String>,
    pub operationally_unitary: bool,
}

impl AnalysisReport {
    pub fn tests_pass(&self) -> bool {
        self.outcomes.iter().all(|o| o.verdict.pass)
    }

    pub fn common_w(&self) -> Option<&CMatrix> {
        self.proportionality.as_ref().and_then(|p| p.common.as_ref())
    }
}

/// Run both conditions, build the common `w` and its effective action.
pub fn analyze(dev: &ConditionalDevice, options: AnalysisOptions) -> Result<AnalysisReport> {
    let tol = options.tol;
    let dim_in = dev.subspace_in().dim();
    let propagated = dev.propagate(dev.subspace_in())?;

    let mut outcomes = Vec::with_capacity(dev.outcomes().len());
    let mut per_outcome = Vec::with_capacity(dev.outcomes().len());
    for l in 0..dev.outcomes().len() {
        let branches = dev.branches(l, &propagated)?;
        let test = test_operator_from(l, branch_gram(&branches, dim_in)?);
        let verdict = test_condition(&test, tol);
        per_outcome.push((verdict.tau, branches));
        outcomes.push(OutcomeAnalysis { test, verdict });
    }
    let total_tau = outcomes.iter().map(|o| o.verdict.tau).sum();
    let degenerate = outcomes.iter().all(|o| o.verdict.tau <= ZERO_PROBABILITY);
    let mut failures = Vec::new();
    for o in &outcomes {
        if !o.verdict.pass {
            failures.push(format!(
                "outcome {}: test operator not proportional to identity (deviation {:e}, eigenvalue spread {:.6})",
                o.test.outcome, o.verdict.max_deviation, o.verdict.spread
            ));
        }
    }

    let mut report = AnalysisReport {
        options,
        outcomes,
        total_tau,
        degenerate,
        sigma_source: dev.sigma().source(),
        basis_source: if dev.subspace_out().is_some() {
            BasisSource::User
        } else {
            BasisSource::Detected
        },
        output_basis: None,
        family: None,
        proportionality: None,
        completeness_deviation: None,
        effective_action: None,
        failures,
        operationally_unitary: false,
    };
    if degenerate {
        report.failures.push("degenerate: no outcome ever succeeds".into());
        return Ok(report);
    }

    let out_basis = match dev.subspace_out() {
        Some(b) => b.clone(),
        None => detect_output_basis(dev)?,
    };
    if out_basis.dim() != dim_in {
        report.failures.push(format!(
            "output subspace has dimension {} but the computational subspace has {dim_in}",
            out_basis.dim()
        ));
    }
    let family = w_family(dev, &out_basis, per_outcome)?;
    report.output_basis = Some(out_basis);

    match proportionality_check(&family, tol) {
        Ok(p) => {
            if !p.pass {
                report.failures.push(format!(
                    "w matrices are not proportional (σ₂/σ₁ = {:e})",
                    p.relative_second
                ));
            }
            if let Some(w) = &p.common {
                let dev_c = completeness_check(w);
                report.completeness_deviation = Some(dev_c);
                if dev_c > tol {
                    report
                        .failures
                        .push(format!("common w is not unitary (‖w†w − I‖ = {dev_c:e})"));
                } else if w.is_square() {
                    report.effective_action = effective_action(w, options.t_eff, tol).ok();
                }
            }
            report.proportionality = Some(p);
        }
        Err(Error::EmptyFamily) => {
            report
                .failures
                .push("every w matrix vanishes on the output subspace".into());
        }
        Err(e) => return Err(e),
    }
    report.family = Some(family);
    report.operationally_unitary = report.failures.is_empty();
    Ok(report)
}
