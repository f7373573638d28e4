//! Heralded devices and the conditional maps they induce.
//!
//! A [`ConditionalDevice`] evolves `ρ ⊗ σ` with a passive mode unitary, projects the
//! output ancilla modes onto a detection signature and traces them out. For outcome
//! `L` this gives the success probability `d_L(ρ)`, the unnormalized output `V_L(ρ)`
//! and, after renormalization and the outcome's correction, the conditional output.
//!
//! Everything is computed from the branch images
//! `φ = (⟨k̄| ⊗ I) U (|b⟩ ⊗ |χ_i⟩)` for signature kets `k̄`, ancilla terms `χ_i` and
//! input basis vectors `b`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::DVector;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{occupation_index, FockSubspaceBasis, FockVector, ModePartition, OccupationVector};
use crate::lift::{ModeUnitary, DEFAULT_PHOTON_CAP, MODE_UNITARITY_TOL};
use crate::linalg::{hermitian_eigen, hermiticity_deviation, trace, unitarity_deviation, CMatrix};

/// Success probabilities at or below this are treated as zero.
pub const ZERO_PROBABILITY: f64 = 1e-14;

const HERMITIAN_TOL: f64 = 1e-12;
const NEGATIVE_EIGEN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;
const PROBABILITY_SUM_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    /// Unit trace.
    State,
    /// Positive, trace unconstrained.
    Positive,
}

/// Positive operator expressed in an orthonormal [`FockSubspaceBasis`].
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    basis: FockSubspaceBasis,
    matrix: CMatrix,
    kind: OperatorKind,
}

impl DensityOperator {
    pub fn state(basis: FockSubspaceBasis, matrix: CMatrix) -> Result<Self> {
        Self::checked(basis, matrix, OperatorKind::State)
    }

    pub fn positive(basis: FockSubspaceBasis, matrix: CMatrix) -> Result<Self> {
        Self::checked(basis, matrix, OperatorKind::Positive)
    }

    fn checked(basis: FockSubspaceBasis, matrix: CMatrix, kind: OperatorKind) -> Result<Self> {
        if matrix.nrows() != basis.dim() || matrix.ncols() != basis.dim() {
            return Err(Error::Dimension {
                what: "density matrix",
                expected: basis.dim(),
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        let herm = hermiticity_deviation(&matrix);
        if herm > HERMITIAN_TOL {
            return Err(Error::validation(
                "DensityOperator",
                format!("not Hermitian (deviation {herm:e})"),
            ));
        }
        let (eig, _) = hermitian_eigen(&matrix);
        if let Some(&min) = eig.first() {
            if min < -NEGATIVE_EIGEN_TOL {
                return Err(Error::validation(
                    "DensityOperator",
                    format!("negative eigenvalue {min:e}"),
                ));
            }
        }
        if kind == OperatorKind::State {
            let tr = trace(&matrix);
            if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
                return Err(Error::validation("DensityOperator", format!("trace {tr} is not 1")));
            }
        }
        Ok(DensityOperator { basis, matrix, kind })
    }

    /// Hermitizes `matrix` without further checks; used for computed outputs.
    fn computed(basis: FockSubspaceBasis, matrix: CMatrix, kind: OperatorKind) -> Self {
        let matrix = (&matrix + matrix.adjoint()).scale(0.5);
        DensityOperator { basis, matrix, kind }
    }

    /// `|v⟩⟨v| / ⟨v|v⟩` with the one-vector basis `{v/‖v‖}`.
    pub fn pure(v: &FockVector) -> Result<Self> {
        let basis = FockSubspaceBasis::new(vec![v.normalized()?])?;
        Self::state(basis, CMatrix::from_element(1, 1, C64::new(1.0, 0.0)))
    }

    /// Pure state `Σ c_i |b_i⟩` (normalized) as a dyad over `basis`.
    pub fn pure_in(basis: &FockSubspaceBasis, coefficients: &[C64]) -> Result<Self> {
        if coefficients.len() != basis.dim() {
            return Err(Error::Dimension {
                what: "state coefficients",
                expected: basis.dim(),
                found: coefficients.len(),
            });
        }
        let c = DVector::from_column_slice(coefficients);
        let n = c.norm();
        if n < ZERO_PROBABILITY {
            return Err(Error::InvalidArgument("zero state vector".into()));
        }
        let c = c.unscale(n);
        Self::state(basis.clone(), Self::hermitize(&c * c.adjoint()))
    }

    pub fn maximally_mixed(basis: &FockSubspaceBasis) -> Self {
        let d = basis.dim();
        DensityOperator {
            basis: basis.clone(),
            matrix: CMatrix::identity(d, d).unscale(d as f64),
            kind: OperatorKind::State,
        }
    }

    /// `x·a + (1 − x)·b`; both operators must share a basis.
    pub fn mix(x: f64, a: &DensityOperator, b: &DensityOperator) -> Result<Self> {
        if a.basis != b.basis {
            return Err(Error::InvalidArgument("mixing operators on different bases".into()));
        }
        let kind = if a.kind == OperatorKind::State && b.kind == OperatorKind::State {
            OperatorKind::State
        } else {
            OperatorKind::Positive
        };
        Ok(Self::computed(
            a.basis.clone(),
            a.matrix.scale(x) + b.matrix.scale(1.0 - x),
            kind,
        ))
    }

    fn hermitize(m: CMatrix) -> CMatrix {
        (&m + m.adjoint()).scale(0.5)
    }

    pub fn basis(&self) -> &FockSubspaceBasis {
        &self.basis
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn trace(&self) -> f64 {
        trace(&self.matrix).re
    }

    pub fn purity(&self) -> f64 {
        trace(&(&self.matrix * &self.matrix)).re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigen(&self.matrix).0.first().copied().unwrap_or(0.0)
    }

    /// Matrix elements `⟨x_i|ρ|x_j⟩` for the vectors of another basis on the same
    /// registry.
    pub fn matrix_in(&self, other: &FockSubspaceBasis) -> Result<CMatrix> {
        self.basis.registry().ensure_same(other.registry())?;
        let mut overlap = CMatrix::zeros(other.dim(), self.basis.dim());
        for (i, x) in other.vectors().iter().enumerate() {
            for (a, v) in self.basis.vectors().iter().enumerate() {
                overlap[(i, a)] = x.inner(v)?;
            }
        }
        Ok(&overlap * &self.matrix * overlap.adjoint())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecompositionSource {
    /// Convex decomposition supplied as given.
    Explicit,
    /// Eigen-decomposition of a supplied density matrix.
    Spectral,
}

impl fmt::Display for DecompositionSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecompositionSource::Explicit => "explicit",
            DecompositionSource::Spectral => "spectral",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AncillaTerm {
    pub p: f64,
    pub chi: FockVector,
}

/// `σ = Σ p_i |χ_i⟩⟨χ_i|` with normalized, not necessarily orthogonal `χ_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct AncillaDecomposition {
    terms: Vec<AncillaTerm>,
    source: DecompositionSource,
}

impl AncillaDecomposition {
    pub fn new(terms: Vec<AncillaTerm>) -> Result<Self> {
        Self::validated(terms, DecompositionSource::Explicit)
    }

    pub fn pure(chi: FockVector) -> Result<Self> {
        Self::new(vec![AncillaTerm { p: 1.0, chi }])
    }

    /// Spectral decomposition of a density matrix given over `basis`.
    pub fn from_density(basis: &FockSubspaceBasis, matrix: &CMatrix) -> Result<Self> {
        let rho = DensityOperator::state(basis.clone(), matrix.clone())
            .map_err(|e| Error::validation("AncillaDecomposition", format!("ancilla density matrix: {e}")))?;
        let (values, vectors) = hermitian_eigen(rho.matrix());
        let mut terms = Vec::new();
        for (k, &p) in values.iter().enumerate().rev() {
            if p <= ZERO_PROBABILITY {
                continue;
            }
            let coeffs: Vec<C64> = vectors.column(k).iter().copied().collect();
            let chi = basis.combine(&coeffs)?;
            terms.push(AncillaTerm { p, chi });
        }
        Self::validated(terms, DecompositionSource::Spectral)
    }

    fn validated(terms: Vec<AncillaTerm>, source: DecompositionSource) -> Result<Self> {
        const WHAT: &str = "AncillaDecomposition";
        if terms.is_empty() {
            return Err(Error::validation(WHAT, "no terms"));
        }
        let registry = terms[0].chi.registry().clone();
        for (i, t) in terms.iter().enumerate() {
            if t.p.is_nan() || t.p < 0.0 {
                return Err(Error::validation(WHAT, format!("p[{i}] = {} is negative", t.p)));
            }
            registry
                .ensure_same(t.chi.registry())
                .map_err(|e| Error::validation(WHAT, e.to_string()))?;
            let n = t.chi.norm();
            if (n - 1.0).abs() > PROBABILITY_SUM_TOL {
                return Err(Error::validation(WHAT, format!("chi[{i}] has norm {n}, expected 1")));
            }
        }
        let sum: f64 = terms.iter().map(|t| t.p).sum();
        if (sum - 1.0).abs() > PROBABILITY_SUM_TOL {
            return Err(Error::validation(
                WHAT,
                format!("probabilities sum to {sum}, expected 1"),
            ));
        }
        Ok(AncillaDecomposition { terms, source })
    }

    pub fn terms(&self) -> &[AncillaTerm] {
        &self.terms
    }

    pub fn source(&self) -> DecompositionSource {
        self.source
    }
}

/// Orthonormal kets on the output ancilla modes whose detection heralds one outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectionSignature(FockSubspaceBasis);

impl DetectionSignature {
    pub fn new(kets: Vec<FockVector>) -> Result<Self> {
        FockSubspaceBasis::new(kets)
            .map(DetectionSignature)
            .map_err(|e| Error::validation("DetectionSignature", e.to_string()))
    }

    pub fn kets(&self) -> &[FockVector] {
        self.0.vectors()
    }

    pub fn rank(&self) -> usize {
        self.0.dim()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Correction {
    Identity,
    /// Unitary over the output computational subspace basis.
    Unitary(CMatrix),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub signature: DetectionSignature,
    pub correction: Correction,
}

/// Everything needed to assemble a [`ConditionalDevice`].
#[derive(Clone, Debug)]
pub struct DeviceParts {
    pub unitary: ModeUnitary,
    /// Computational / ancilla split of the input modes.
    pub input: ModePartition,
    /// Computational / ancilla split of the output modes.
    pub output: ModePartition,
    pub sigma: AncillaDecomposition,
    pub subspace_in: FockSubspaceBasis,
    pub subspace_out: Option<FockSubspaceBasis>,
    pub outcomes: Vec<Outcome>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalDevice {
    unitary: ModeUnitary,
    input: ModePartition,
    output: ModePartition,
    sigma: AncillaDecomposition,
    subspace_in: FockSubspaceBasis,
    subspace_out: Option<FockSubspaceBasis>,
    outcomes: Vec<Outcome>,
    photon_cap: u32,
}

impl ConditionalDevice {
    pub fn new(parts: DeviceParts) -> Result<Self> {
        let DeviceParts {
            unitary,
            input,
            output,
            sigma,
            subspace_in,
            subspace_out,
            outcomes,
        } = parts;

        if input.full() != unitary.registry_in() {
            return Err(Error::Partition(
                "input partition does not cover the unitary's input modes".into(),
            ));
        }
        if output.full() != unitary.registry_out() {
            return Err(Error::Partition(
                "output partition does not cover the unitary's output modes".into(),
            ));
        }
        for t in sigma.terms() {
            input.second().ensure_same(t.chi.registry()).map_err(|e| {
                Error::validation(
                    "AncillaDecomposition",
                    format!("ancilla ket not on the ancilla modes: {e}"),
                )
            })?;
        }
        input
            .first()
            .ensure_same(subspace_in.registry())
            .map_err(|e| Error::validation("subspace_in", e.to_string()))?;
        if let Some(out) = &subspace_out {
            output
                .first()
                .ensure_same(out.registry())
                .map_err(|e| Error::validation("subspace_out", e.to_string()))?;
        }
        if outcomes.is_empty() {
            return Err(Error::validation("outcomes", "device has no outcomes"));
        }
        for (l, o) in outcomes.iter().enumerate() {
            for k in o.signature.kets() {
                output
                    .second()
                    .ensure_same(k.registry())
                    .map_err(|e| Error::validation("DetectionSignature", format!("outcome {l}: {e}")))?;
            }
            if let Correction::Unitary(v) = &o.correction {
                let Some(out) = &subspace_out else {
                    return Err(Error::validation(
                        "correction",
                        format!("outcome {l}: a non-identity correction needs subspace_out"),
                    ));
                };
                if v.nrows() != out.dim() || v.ncols() != out.dim() {
                    return Err(Error::validation(
                        "correction",
                        format!(
                            "outcome {l}: {}x{} matrix, expected {d}x{d}",
                            v.nrows(),
                            v.ncols(),
                            d = out.dim()
                        ),
                    ));
                }
                let dev = unitarity_deviation(v);
                if dev > MODE_UNITARITY_TOL {
                    return Err(Error::validation(
                        "correction",
                        format!("outcome {l}: not unitary (deviation {dev:e})"),
                    ));
                }
            }
        }
        // P_L P_L' = δ_LL' P_L
        for l in 0..outcomes.len() {
            for m in (l + 1)..outcomes.len() {
                for a in outcomes[l].signature.kets() {
                    for b in outcomes[m].signature.kets() {
                        let ov = a.inner(b)?.norm();
                        if ov > crate::fock::ORTHONORMAL_TOL {
                            return Err(Error::validation(
                                "DetectionSignature",
                                format!("outcomes {l} and {m} overlap (|⟨k|k'⟩| = {ov:e})"),
                            ));
                        }
                    }
                }
            }
        }

        Ok(ConditionalDevice {
            unitary,
            input,
            output,
            sigma,
            subspace_in,
            subspace_out,
            outcomes,
            photon_cap: DEFAULT_PHOTON_CAP,
        })
    }

    pub fn with_photon_cap(mut self, cap: u32) -> Self {
        self.photon_cap = cap;
        self
    }

    /// Same device with every correction replaced by the identity.
    pub fn without_corrections(&self) -> Self {
        let mut d = self.clone();
        for o in &mut d.outcomes {
            o.correction = Correction::Identity;
        }
        d
    }

    /// Same device with a different computational input subspace.
    pub fn with_subspace_in(&self, basis: FockSubspaceBasis) -> Result<Self> {
        self.input.first().ensure_same(basis.registry())?;
        let mut d = self.clone();
        d.subspace_in = basis;
        Ok(d)
    }

    pub fn unitary(&self) -> &ModeUnitary {
        &self.unitary
    }

    pub fn input(&self) -> &ModePartition {
        &self.input
    }

    pub fn output(&self) -> &ModePartition {
        &self.output
    }

    pub fn sigma(&self) -> &AncillaDecomposition {
        &self.sigma
    }

    pub fn subspace_in(&self) -> &FockSubspaceBasis {
        &self.subspace_in
    }

    pub fn subspace_out(&self) -> Option<&FockSubspaceBasis> {
        self.subspace_out.as_ref()
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn photon_cap(&self) -> u32 {
        self.photon_cap
    }

    pub(crate) fn outcome(&self, index: usize) -> Result<&Outcome> {
        self.outcomes.get(index).ok_or(Error::InvalidOutcome {
            index,
            count: self.outcomes.len(),
        })
    }

    /// `U (|b⟩ ⊗ |χ_i⟩)` on the full output registry, indexed `[i][b]`.
    pub(crate) fn propagate(&self, basis: &FockSubspaceBasis) -> Result<Vec<Vec<FockVector>>> {
        self.input.first().ensure_same(basis.registry())?;
        self.sigma
            .terms()
            .iter()
            .map(|t| {
                basis
                    .vectors()
                    .iter()
                    .map(|b| {
                        let joint = self.input.embed(b, &t.chi)?;
                        self.unitary.lift_apply(&joint, self.photon_cap)
                    })
                    .collect()
            })
            .collect()
    }

    /// Branch images for one outcome from propagated states.
    pub(crate) fn branches(&self, outcome: usize, propagated: &[Vec<FockVector>]) -> Result<Vec<Branch>> {
        let o = self.outcome(outcome)?;
        let mut out = Vec::new();
        for (k, ket) in o.signature.kets().iter().enumerate() {
            for (i, (term, states)) in self.sigma.terms().iter().zip(propagated).enumerate() {
                let images = states
                    .iter()
                    .map(|s| self.output.contract_second(ket, s))
                    .collect::<Result<Vec<_>>>()?;
                out.push(Branch {
                    ket: k,
                    term: i,
                    weight: term.p,
                    images,
                });
            }
        }
        Ok(out)
    }

    /// Photon-number sectors of the output computational modes that any branch can
    /// populate, plus those of `subspace_out`.
    pub(crate) fn output_sectors(&self, basis: &FockSubspaceBasis) -> BTreeSet<u32> {
        let n_in = basis.photon_numbers();
        let n_anc: BTreeSet<u32> = self.sigma.terms().iter().flat_map(|t| t.chi.photon_numbers()).collect();
        let n_det: BTreeSet<u32> = self
            .outcomes
            .iter()
            .flat_map(|o| o.signature.kets().iter().flat_map(FockVector::photon_numbers))
            .collect();
        let mut sectors = BTreeSet::new();
        for &a in &n_in {
            for &b in &n_anc {
                for &k in &n_det {
                    if a + b >= k {
                        sectors.insert(a + b - k);
                    }
                }
            }
        }
        if let Some(out) = &self.subspace_out {
            sectors.extend(out.photon_numbers());
        }
        if sectors.is_empty() {
            sectors.insert(0);
        }
        sectors
    }

    fn check_input(&self, rho: &DensityOperator) -> Result<()> {
        self.input.first().ensure_same(rho.basis().registry())
    }
}

pub(crate) struct Branch {
    pub ket: usize,
    pub term: usize,
    pub weight: f64,
    /// One image per input basis vector, on the output computational modes.
    pub images: Vec<FockVector>,
}

/// `Σ_branches p_i ⟨φ_a|φ_b⟩` over an input basis: the test operator `T_L` restricted to
/// that basis.
pub(crate) fn branch_gram(branches: &[Branch], dim: usize) -> Result<CMatrix> {
    let mut g = CMatrix::zeros(dim, dim);
    for br in branches {
        for a in 0..dim {
            for b in a..dim {
                let z = br.images[a].inner(&br.images[b])? * br.weight;
                g[(a, b)] += z;
                if a != b {
                    g[(b, a)] += z.conj();
                }
            }
        }
    }
    Ok(g)
}

/// `d_L(ρ) = Tr(U(ρ ⊗ σ)U† P_L)`.
pub fn success_probability(dev: &ConditionalDevice, outcome: usize, rho: &DensityOperator) -> Result<f64> {
    dev.check_input(rho)?;
    dev.outcome(outcome)?;
    let propagated = dev.propagate(rho.basis())?;
    let branches = dev.branches(outcome, &propagated)?;
    let t = branch_gram(&branches, rho.basis().dim())?;
    Ok(trace(&(rho.matrix() * t)).re)
}

/// `V_L(ρ) = Tr_Ā(P_L U(ρ ⊗ σ)U† P_L)` in the Fock basis of the reachable
/// photon-number sectors of the output computational modes.
pub fn v_map(dev: &ConditionalDevice, outcome: usize, rho: &DensityOperator) -> Result<DensityOperator> {
    dev.check_input(rho)?;
    dev.outcome(outcome)?;
    let propagated = dev.propagate(rho.basis())?;
    let branches = dev.branches(outcome, &propagated)?;
    let basis = FockSubspaceBasis::sectors(dev.output.first(), &dev.output_sectors(rho.basis()))?;
    Ok(accumulate_v(&branches, rho, &basis))
}

pub(crate) fn fock_occupations(basis: &FockSubspaceBasis) -> Vec<OccupationVector> {
    basis
        .vectors()
        .iter()
        .map(|v| v.terms().next().expect("single-term Fock ket").0.clone())
        .collect()
}

fn accumulate_v(branches: &[Branch], rho: &DensityOperator, fock: &FockSubspaceBasis) -> DensityOperator {
    let occs = fock_occupations(fock);
    let index = occupation_index(&occs);
    let dim = occs.len();
    let n_in = rho.basis().dim();
    let mut m = CMatrix::zeros(dim, dim);
    for br in branches {
        let mut phi = CMatrix::zeros(dim, n_in);
        for (b, img) in br.images.iter().enumerate() {
            phi.set_column(b, &img.to_dense(&index, dim));
        }
        m += (&phi * rho.matrix() * phi.adjoint()).scale(br.weight);
    }
    DensityOperator::computed(fock.clone(), m, OperatorKind::Positive)
}

/// Unitary on the span of `fock` that acts as `v` on `subspace` and as the identity on
/// its orthogonal complement.
fn extend_correction(v: &CMatrix, subspace: &FockSubspaceBasis, fock: &FockSubspaceBasis) -> CMatrix {
    let occs = fock_occupations(fock);
    let index = occupation_index(&occs);
    let dim = occs.len();
    let mut b = CMatrix::zeros(dim, subspace.dim());
    for (j, s) in subspace.vectors().iter().enumerate() {
        b.set_column(j, &s.to_dense(&index, dim));
    }
    let proj = &b * b.adjoint();
    &b * v * b.adjoint() + (CMatrix::identity(dim, dim) - proj)
}

/// `ρ̄_L = V̄_L V_L(ρ) V̄_L† / d_L(ρ)`.
pub fn conditional_output(dev: &ConditionalDevice, outcome: usize, rho: &DensityOperator) -> Result<DensityOperator> {
    dev.check_input(rho)?;
    let o = dev.outcome(outcome)?;
    let propagated = dev.propagate(rho.basis())?;
    let branches = dev.branches(outcome, &propagated)?;
    let d = trace(&(rho.matrix() * branch_gram(&branches, rho.basis().dim())?)).re;
    if d <= ZERO_PROBABILITY {
        return Err(Error::ZeroProbability);
    }
    let fock = FockSubspaceBasis::sectors(dev.output.first(), &dev.output_sectors(rho.basis()))?;
    let v = accumulate_v(&branches, rho, &fock);
    let mut m = v.matrix.unscale(d);
    if let (Correction::Unitary(corr), Some(sub)) = (&o.correction, &dev.subspace_out) {
        let full = extend_correction(corr, sub, &fock);
        m = &full * m * full.adjoint();
    }
    Ok(DensityOperator::computed(fock, m, OperatorKind::State))
}

/// `Tr_Ā` of an operator on a full registry. The result is expressed in the Fock kets
/// of the remaining modes that occur in `full`'s basis, in canonical order.
pub fn partial_trace_ancilla<S: AsRef<str>>(full: &DensityOperator, ancilla: &[S]) -> Result<DensityOperator> {
    let part = ModePartition::complement(full.basis().registry(), ancilla)?;

    // each basis vector grouped by its ancilla occupation
    let grouped: Vec<BTreeMap<OccupationVector, Vec<(OccupationVector, C64)>>> = full
        .basis()
        .vectors()
        .iter()
        .map(|v| {
            let mut g: BTreeMap<OccupationVector, Vec<(OccupationVector, C64)>> = BTreeMap::new();
            for (occ, amp) in v.terms() {
                let (kept, traced) = part.split(occ);
                g.entry(traced).or_default().push((kept, *amp));
            }
            g
        })
        .collect();

    let occs: Vec<OccupationVector> = grouped
        .iter()
        .flat_map(|g| g.values().flat_map(|terms| terms.iter().map(|(o, _)| o.clone())))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index = occupation_index(&occs);
    let dim = occs.len();
    let mut m = CMatrix::zeros(dim, dim);
    for (a, ga) in grouped.iter().enumerate() {
        for (b, gb) in grouped.iter().enumerate() {
            let coeff = full.matrix()[(a, b)];
            if coeff.norm() == 0.0 {
                continue;
            }
            for (traced, terms_a) in ga {
                let Some(terms_b) = gb.get(traced) else { continue };
                for (x, ax) in terms_a {
                    for (y, by) in terms_b {
                        m[(index[x], index[y])] += coeff * ax * by.conj();
                    }
                }
            }
        }
    }
    let basis = FockSubspaceBasis::from_occupations(part.first(), &occs)?;
    Ok(DensityOperator::computed(basis, m, full.kind()))
}
