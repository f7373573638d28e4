//! Multimode Fock bases and sparse state vectors.
//!
//! A [`FockVector`] is a sparse map from [`OccupationVector`] to complex amplitude
//! over a [`ModeRegistry`]. Occupation vectors compare lexicographically and that
//! order is the canonical basis order for every matrix built from them.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Amplitudes with magnitude below this are dropped after every linear operation.
pub const AMPLITUDE_EPS: f64 = 1e-14;

/// Tolerance on the Gram matrix of a [`FockSubspaceBasis`].
pub const ORTHONORMAL_TOL: f64 = 1e-10;

struct RegistryInner {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

/// Ordered set of named optical modes.
#[derive(Clone)]
pub struct ModeRegistry(Arc<RegistryInner>);

impl ModeRegistry {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::EmptyRegistry);
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            if index.insert(label.clone(), i).is_some() {
                return Err(Error::DuplicateMode(label.clone()));
            }
        }
        Ok(ModeRegistry(Arc::new(RegistryInner { labels, index })))
    }

    pub fn mode_count(&self) -> usize {
        self.0.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.0.labels
    }

    pub fn label(&self, index: usize) -> &str {
        &self.0.labels[index]
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.0
            .index
            .get(label)
            .copied()
            .ok_or_else(|| Error::UnknownMode(label.to_string()))
    }

    pub fn contains(&self, label: &str) -> bool {
        self.0.index.contains_key(label)
    }

    pub(crate) fn ensure_same(&self, other: &ModeRegistry) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::RegistryMismatch {
                expected: self.labels().to_vec(),
                found: other.labels().to_vec(),
            })
        }
    }
}

impl PartialEq for ModeRegistry {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.labels == other.0.labels
    }
}

impl Eq for ModeRegistry {}

impl fmt::Debug for ModeRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("ModeRegistry").field(&self.0.labels).finish()
    }
}

/// Photon counts per mode.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OccupationVector(Vec<u32>);

impl OccupationVector {
    pub fn new(counts: Vec<u32>) -> Self {
        OccupationVector(counts)
    }

    pub fn vacuum(mode_count: usize) -> Self {
        OccupationVector(vec![0; mode_count])
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    /// `∏ n_i!` as a float; used for creation-operator normalization.
    pub fn factorial_product(&self) -> f64 {
        self.0.iter().map(|&n| factorial(n)).product()
    }
}

impl From<Vec<u32>> for OccupationVector {
    fn from(counts: Vec<u32>) -> Self {
        OccupationVector(counts)
    }
}

impl fmt::Display for OccupationVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for (i, n) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, "⟩")
    }
}

pub(crate) fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// All occupation vectors with `n` photons over `mode_count` modes, lexicographically.
pub fn enumerate_occupations(mode_count: usize, n: u32) -> Vec<OccupationVector> {
    fn fill(prefix: &mut Vec<u32>, modes_left: usize, n: u32, out: &mut Vec<OccupationVector>) {
        if modes_left == 1 {
            prefix.push(n);
            out.push(OccupationVector(prefix.clone()));
            prefix.pop();
            return;
        }
        for k in 0..=n {
            prefix.push(k);
            fill(prefix, modes_left - 1, n - k, out);
            prefix.pop();
        }
    }

    let mut out = Vec::new();
    if mode_count == 0 {
        if n == 0 {
            out.push(OccupationVector(Vec::new()));
        }
        return out;
    }
    fill(&mut Vec::with_capacity(mode_count), mode_count, n, &mut out);
    out
}

/// The photon-number-`n` sector of `registry` in canonical order.
pub fn enumerate_sector(registry: &ModeRegistry, n: u32) -> Vec<OccupationVector> {
    enumerate_occupations(registry.mode_count(), n)
}

/// Sparse vector in the Fock space of a registry.
#[derive(Clone, PartialEq)]
pub struct FockVector {
    registry: ModeRegistry,
    terms: BTreeMap<OccupationVector, C64>,
}

impl FockVector {
    pub fn zero(registry: &ModeRegistry) -> Self {
        FockVector {
            registry: registry.clone(),
            terms: BTreeMap::new(),
        }
    }

    pub fn vacuum(registry: &ModeRegistry) -> Self {
        let mut v = Self::zero(registry);
        v.terms
            .insert(OccupationVector::vacuum(registry.mode_count()), C64::new(1.0, 0.0));
        v
    }

    pub fn basis(registry: &ModeRegistry, occupation: impl Into<OccupationVector>) -> Result<Self> {
        Self::from_terms(registry, [(occupation.into(), C64::new(1.0, 0.0))])
    }

    /// Build from `(occupation, amplitude)` pairs; repeated occupations are summed.
    pub fn from_terms<I>(registry: &ModeRegistry, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (OccupationVector, C64)>,
    {
        let mut v = Self::zero(registry);
        for (occ, amp) in terms {
            if occ.len() != registry.mode_count() {
                return Err(Error::OccupationLength {
                    expected: registry.mode_count(),
                    found: occ.len(),
                });
            }
            *v.terms.entry(occ).or_insert(C64::new(0.0, 0.0)) += amp;
        }
        v.prune();
        Ok(v)
    }

    pub fn registry(&self) -> &ModeRegistry {
        &self.registry
    }

    pub fn terms(&self) -> impl Iterator<Item = (&OccupationVector, &C64)> {
        self.terms.iter()
    }

    pub fn amplitude(&self, occupation: &OccupationVector) -> C64 {
        self.terms.get(occupation).copied().unwrap_or(C64::new(0.0, 0.0))
    }

    /// Number of stored nonzero terms; see [`FockVector::is_zero`] for emptiness.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n < AMPLITUDE_EPS {
            return Err(Error::InvalidArgument("cannot normalize a zero vector".into()));
        }
        Ok(self.scale(C64::new(1.0 / n, 0.0)))
    }

    /// Distinct total photon numbers among the stored terms.
    pub fn photon_numbers(&self) -> BTreeSet<u32> {
        self.terms.keys().map(OccupationVector::total).collect()
    }

    pub fn max_photons(&self) -> u32 {
        self.terms.keys().map(OccupationVector::total).max().unwrap_or(0)
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut v = FockVector {
            registry: self.registry.clone(),
            terms: self.terms.iter().map(|(k, a)| (k.clone(), a * c)).collect(),
        };
        v.prune();
        v
    }

    /// `self + c·other`.
    pub fn axpy(&self, c: C64, other: &FockVector) -> Result<Self> {
        self.registry.ensure_same(&other.registry)?;
        let mut v = self.clone();
        for (k, a) in &other.terms {
            *v.terms.entry(k.clone()).or_insert(C64::new(0.0, 0.0)) += c * a;
        }
        v.prune();
        Ok(v)
    }

    pub fn add(&self, other: &FockVector) -> Result<Self> {
        self.axpy(C64::new(1.0, 0.0), other)
    }

    pub fn sub(&self, other: &FockVector) -> Result<Self> {
        self.axpy(C64::new(-1.0, 0.0), other)
    }

    /// ⟨self|other⟩, conjugate-linear in `self`.
    pub fn inner(&self, other: &FockVector) -> Result<C64> {
        self.registry.ensure_same(&other.registry)?;
        let (small, large, flip) = if self.terms.len() <= other.terms.len() {
            (self, other, false)
        } else {
            (other, self, true)
        };
        let mut acc = C64::new(0.0, 0.0);
        for (k, a) in &small.terms {
            if let Some(b) = large.terms.get(k) {
                acc += if flip { b.conj() * a } else { a.conj() * b };
            }
        }
        Ok(acc)
    }

    pub fn create(&self, mode: &str) -> Result<Self> {
        let i = self.registry.index_of(mode)?;
        Ok(self.create_at(i))
    }

    pub fn annihilate(&self, mode: &str) -> Result<Self> {
        let i = self.registry.index_of(mode)?;
        Ok(self.annihilate_at(i))
    }

    /// a†_i by mode index. Panics if `i` is out of range.
    pub fn create_at(&self, i: usize) -> Self {
        let mut out = BTreeMap::new();
        for (occ, amp) in &self.terms {
            let mut counts = occ.0.clone();
            let n = counts[i];
            counts[i] = n + 1;
            out.insert(OccupationVector(counts), amp * f64::from(n + 1).sqrt());
        }
        let mut v = FockVector {
            registry: self.registry.clone(),
            terms: out,
        };
        v.prune();
        v
    }

    /// a_i by mode index. Panics if `i` is out of range.
    pub fn annihilate_at(&self, i: usize) -> Self {
        let mut out = BTreeMap::new();
        for (occ, amp) in &self.terms {
            let n = occ.0[i];
            if n == 0 {
                continue;
            }
            let mut counts = occ.0.clone();
            counts[i] = n - 1;
            out.insert(OccupationVector(counts), amp * f64::from(n).sqrt());
        }
        let mut v = FockVector {
            registry: self.registry.clone(),
            terms: out,
        };
        v.prune();
        v
    }

    /// Dense coordinates with respect to an ordered list of occupations. Terms not in
    /// `index` are dropped.
    pub(crate) fn to_dense(&self, index: &HashMap<OccupationVector, usize>, dim: usize) -> DVector<C64> {
        let mut out = DVector::zeros(dim);
        for (occ, amp) in &self.terms {
            if let Some(&j) = index.get(occ) {
                out[j] = *amp;
            }
        }
        out
    }

    fn prune(&mut self) {
        self.terms.retain(|_, a| a.norm() >= AMPLITUDE_EPS);
    }
}

impl fmt::Debug for FockVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FockVector")
            .field("modes", &self.registry.labels())
            .field("terms", &self.terms)
            .finish()
    }
}

impl fmt::Display for FockVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (occ, a)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({:.6}{:+.6}i){}", a.re, a.im, occ)?;
        }
        Ok(())
    }
}

/// Product state on `full` from factors living on disjoint sub-registries that
/// together cover every mode of `full`.
pub fn embed_product(full: &ModeRegistry, parts: &[&FockVector]) -> Result<FockVector> {
    let mut owner: Vec<Option<usize>> = vec![None; full.mode_count()];
    let mut maps = Vec::with_capacity(parts.len());
    for (p, part) in parts.iter().enumerate() {
        let mut map = Vec::with_capacity(part.registry.mode_count());
        for label in part.registry.labels() {
            let i = full
                .index_of(label)
                .map_err(|_| Error::Partition(format!("mode `{label}` is not in the full registry")))?;
            if let Some(q) = owner[i] {
                return Err(Error::Partition(format!("mode `{label}` appears in parts {q} and {p}")));
            }
            owner[i] = Some(p);
            map.push(i);
        }
        maps.push(map);
    }
    if let Some(i) = owner.iter().position(Option::is_none) {
        return Err(Error::Partition(format!(
            "mode `{}` is not covered by any part",
            full.label(i)
        )));
    }

    let mut acc: Vec<(Vec<u32>, C64)> = vec![(vec![0; full.mode_count()], C64::new(1.0, 0.0))];
    for (part, map) in parts.iter().zip(&maps) {
        let mut next = Vec::with_capacity(acc.len() * part.len());
        for (counts, amp) in &acc {
            for (occ, a) in part.terms() {
                let mut c = counts.clone();
                for (k, &i) in map.iter().enumerate() {
                    c[i] = occ.0[k];
                }
                next.push((c, amp * a));
            }
        }
        acc = next;
    }
    FockVector::from_terms(full, acc.into_iter().map(|(c, a)| (OccupationVector(c), a)))
}

/// Split of a registry into two disjoint labelled parts (computational and ancilla).
#[derive(Clone, Debug, PartialEq)]
pub struct ModePartition {
    full: ModeRegistry,
    first: ModeRegistry,
    second: ModeRegistry,
    first_idx: Vec<usize>,
    second_idx: Vec<usize>,
}

impl ModePartition {
    pub fn new<S: AsRef<str>>(full: &ModeRegistry, first: &[S], second: &[S]) -> Result<Self> {
        let mut seen = vec![false; full.mode_count()];
        let mut indices = |labels: &[S]| -> Result<Vec<usize>> {
            labels
                .iter()
                .map(|l| {
                    let l = l.as_ref();
                    let i = full
                        .index_of(l)
                        .map_err(|_| Error::Partition(format!("unknown mode `{l}`")))?;
                    if seen[i] {
                        return Err(Error::Partition(format!("mode `{l}` listed twice")));
                    }
                    seen[i] = true;
                    Ok(i)
                })
                .collect()
        };
        let first_idx = indices(first)?;
        let second_idx = indices(second)?;
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Partition(format!(
                "mode `{}` belongs to neither part",
                full.label(i)
            )));
        }
        if first_idx.is_empty() {
            return Err(Error::Partition("computational part is empty".into()));
        }
        let sub = |idx: &[usize]| -> Result<Option<ModeRegistry>> {
            if idx.is_empty() {
                Ok(None)
            } else {
                ModeRegistry::new(idx.iter().map(|&i| full.label(i).to_string())).map(Some)
            }
        };
        let first_reg = sub(&first_idx)?.expect("non-empty");
        let second_reg = match sub(&second_idx)? {
            Some(r) => r,
            None => return Err(Error::Partition("ancilla part is empty".into())),
        };
        Ok(ModePartition {
            full: full.clone(),
            first: first_reg,
            second: second_reg,
            first_idx,
            second_idx,
        })
    }

    /// Partition where `second` is every mode of `full` not in `first`, in registry order.
    pub fn complement<S: AsRef<str>>(full: &ModeRegistry, second: &[S]) -> Result<Self> {
        let second: Vec<&str> = second.iter().map(AsRef::as_ref).collect();
        let first: Vec<&str> = full
            .labels()
            .iter()
            .map(String::as_str)
            .filter(|l| !second.contains(l))
            .collect();
        Self::new(full, &first, &second)
    }

    pub fn full(&self) -> &ModeRegistry {
        &self.full
    }

    pub fn first(&self) -> &ModeRegistry {
        &self.first
    }

    pub fn second(&self) -> &ModeRegistry {
        &self.second
    }

    pub fn split(&self, occ: &OccupationVector) -> (OccupationVector, OccupationVector) {
        let a = self.first_idx.iter().map(|&i| occ.0[i]).collect();
        let b = self.second_idx.iter().map(|&i| occ.0[i]).collect();
        (OccupationVector(a), OccupationVector(b))
    }

    pub fn join(&self, first: &OccupationVector, second: &OccupationVector) -> OccupationVector {
        let mut c = vec![0; self.full.mode_count()];
        for (k, &i) in self.first_idx.iter().enumerate() {
            c[i] = first.0[k];
        }
        for (k, &i) in self.second_idx.iter().enumerate() {
            c[i] = second.0[k];
        }
        OccupationVector(c)
    }

    pub fn embed(&self, first: &FockVector, second: &FockVector) -> Result<FockVector> {
        self.first.ensure_same(first.registry())?;
        self.second.ensure_same(second.registry())?;
        embed_product(&self.full, &[first, second])
    }

    /// `(⟨bra| ⊗ I) ket`, with `bra` on the second part and `ket` on the full registry;
    /// the result lives on the first part.
    pub fn contract_second(&self, bra: &FockVector, ket: &FockVector) -> Result<FockVector> {
        self.second.ensure_same(bra.registry())?;
        self.full.ensure_same(ket.registry())?;
        let mut out: BTreeMap<OccupationVector, C64> = BTreeMap::new();
        for (occ, amp) in &ket.terms {
            let (a, b) = self.split(occ);
            if let Some(k) = bra.terms.get(&b) {
                *out.entry(a).or_insert(C64::new(0.0, 0.0)) += k.conj() * amp;
            }
        }
        let mut v = FockVector {
            registry: self.first.clone(),
            terms: out,
        };
        v.prune();
        Ok(v)
    }
}

/// Ordered orthonormal set of vectors on one registry.
#[derive(Clone, Debug, PartialEq)]
pub struct FockSubspaceBasis {
    registry: ModeRegistry,
    vectors: Vec<FockVector>,
}

impl FockSubspaceBasis {
    pub fn new(vectors: Vec<FockVector>) -> Result<Self> {
        let basis = Self::unchecked(vectors)?;
        let dev = basis.orthonormality_deviation();
        if dev > ORTHONORMAL_TOL {
            return Err(Error::validation(
                "FockSubspaceBasis",
                format!("vectors are not orthonormal (max Gram deviation {dev:e})"),
            ));
        }
        Ok(basis)
    }

    pub(crate) fn unchecked(vectors: Vec<FockVector>) -> Result<Self> {
        let registry = match vectors.first() {
            Some(v) => v.registry.clone(),
            None => {
                return Err(Error::validation("FockSubspaceBasis", "basis is empty"));
            }
        };
        for v in &vectors {
            registry.ensure_same(&v.registry)?;
        }
        Ok(FockSubspaceBasis { registry, vectors })
    }

    /// Single-term Fock kets, in the given order.
    pub fn from_occupations(registry: &ModeRegistry, occupations: &[OccupationVector]) -> Result<Self> {
        let vectors = occupations
            .iter()
            .map(|o| FockVector::basis(registry, o.clone()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(vectors)
    }

    /// Every Fock ket in the listed photon-number sectors, canonically ordered.
    pub fn sectors(registry: &ModeRegistry, photon_numbers: &BTreeSet<u32>) -> Result<Self> {
        let mut occs: Vec<OccupationVector> = photon_numbers
            .iter()
            .flat_map(|&n| enumerate_sector(registry, n))
            .collect();
        occs.sort();
        Self::from_occupations(registry, &occs)
    }

    pub fn registry(&self) -> &ModeRegistry {
        &self.registry
    }

    pub fn vectors(&self) -> &[FockVector] {
        &self.vectors
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn gram(&self) -> DMatrix<C64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| {
            self.vectors[i]
                .inner(&self.vectors[j])
                .expect("same registry by construction")
        })
    }

    pub fn orthonormality_deviation(&self) -> f64 {
        let g = self.gram();
        crate::linalg::max_abs_deviation_from_identity(&g)
    }

    /// `⟨b_i|v⟩` for every basis vector.
    pub fn coefficients(&self, v: &FockVector) -> Result<DVector<C64>> {
        let c = self.vectors.iter().map(|b| b.inner(v)).collect::<Result<Vec<_>>>()?;
        Ok(DVector::from_vec(c))
    }

    /// `Σ_i c_i |b_i⟩`.
    pub fn combine(&self, coefficients: &[C64]) -> Result<FockVector> {
        if coefficients.len() != self.dim() {
            return Err(Error::Dimension {
                what: "coefficient vector",
                expected: self.dim(),
                found: coefficients.len(),
            });
        }
        let mut v = FockVector::zero(&self.registry);
        for (b, &c) in self.vectors.iter().zip(coefficients) {
            v = v.axpy(c, b)?;
        }
        Ok(v)
    }

    pub fn photon_numbers(&self) -> BTreeSet<u32> {
        self.vectors.iter().flat_map(FockVector::photon_numbers).collect()
    }

    /// Appends vectors, re-checking orthonormality.
    pub fn extended(&self, more: &[FockVector]) -> Result<Self> {
        let mut v = self.vectors.clone();
        v.extend_from_slice(more);
        Self::new(v)
    }
}

/// Lookup table from occupation to dense index for an ordered occupation list.
pub(crate) fn occupation_index(occs: &[OccupationVector]) -> HashMap<OccupationVector, usize> {
    occs.iter().cloned().enumerate().map(|(i, o)| (o, i)).collect()
}
