//! JSON device description files.
//!
//! Complex numbers are `[re, im]` pairs and matrices are row-major lists of them.
//! Kets are lists of `{occupations, re, im}` terms with one count per mode of the
//! registry they live on. Export writes every float in shortest round-trip form, so
//! `export(parse(export(d)))` is byte-identical to `export(d)`.

use serde::{Deserialize, Serialize};

use crate::cpmap::{
    AncillaDecomposition, AncillaTerm, ConditionalDevice, Correction, DetectionSignature, DeviceParts, Outcome,
};
use crate::error::{Error, Result};
use crate::fock::{FockSubspaceBasis, FockVector, ModePartition, ModeRegistry, OccupationVector};
use crate::lift::ModeUnitary;
use crate::linalg::CMatrix;
use num_complex::Complex64 as C64;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceFile {
    pub schema_version: u32,
    /// Input mode labels; also the output labels unless `modes_out` is given.
    pub modes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes_out: Option<Vec<String>>,
    pub unitary: Vec<[f64; 2]>,
    pub input_partition: PartitionSpec,
    pub output_partition: PartitionSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ancilla: Vec<AncillaSpec>,
    /// Alternative to `ancilla`: a density matrix, decomposed spectrally.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ancilla_density: Option<DensitySpec>,
    pub subspace_in: Vec<Vec<TermSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subspace_out: Option<Vec<Vec<TermSpec>>>,
    pub outcomes: Vec<OutcomeSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSpec {
    pub computational: Vec<String>,
    pub ancilla: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AncillaSpec {
    pub p: f64,
    pub ket: Vec<TermSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub basis: Vec<Vec<TermSpec>>,
    pub matrix: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub occupations: Vec<u32>,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeSpec {
    pub signature: Vec<Vec<TermSpec>>,
    pub correction: CorrectionSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CorrectionSpec {
    Named(IdentityTag),
    Matrix(Vec<[f64; 2]>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IdentityTag {
    Identity,
}

/// Parse and validate a device description.
pub fn parse_device(text: &str) -> Result<ConditionalDevice> {
    let file: DeviceFile = serde_json::from_str(text)?;
    file.to_device()
}

/// Pretty-printed JSON with a trailing newline.
pub fn export_device(dev: &ConditionalDevice) -> String {
    let mut s = serde_json::to_string_pretty(&DeviceFile::from_device(dev)).expect("device files serialize");
    s.push('\n');
    s
}

// -0.0 would otherwise print as "-0.0"
fn pair(z: C64) -> [f64; 2] {
    [z.re + 0.0, z.im + 0.0]
}

fn square_matrix(entries: &[[f64; 2]], what: &'static str) -> Result<CMatrix> {
    let n = (entries.len() as f64).sqrt().round() as usize;
    if n * n != entries.len() || n == 0 {
        return Err(Error::validation(
            what,
            format!("{} entries do not form a non-empty square matrix", entries.len()),
        ));
    }
    Ok(CMatrix::from_row_iterator(
        n,
        n,
        entries.iter().map(|[re, im]| C64::new(*re, *im)),
    ))
}

fn matrix_entries(m: &CMatrix) -> Vec<[f64; 2]> {
    (0..m.nrows())
        .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
        .map(|(i, j)| pair(m[(i, j)]))
        .collect()
}

fn ket(registry: &ModeRegistry, terms: &[TermSpec]) -> Result<FockVector> {
    for t in terms {
        if t.occupations.len() != registry.mode_count() {
            return Err(Error::OccupationLength {
                expected: registry.mode_count(),
                found: t.occupations.len(),
            });
        }
    }
    FockVector::from_terms(
        registry,
        terms
            .iter()
            .map(|t| (OccupationVector::new(t.occupations.clone()), C64::new(t.re, t.im))),
    )
}

fn ket_spec(v: &FockVector) -> Vec<TermSpec> {
    v.terms()
        .map(|(o, z)| TermSpec {
            occupations: o.counts().to_vec(),
            re: z.re + 0.0,
            im: z.im + 0.0,
        })
        .collect()
}

fn kets(registry: &ModeRegistry, list: &[Vec<TermSpec>]) -> Result<Vec<FockVector>> {
    list.iter().map(|k| ket(registry, k)).collect()
}

fn subspace(registry: &ModeRegistry, list: &[Vec<TermSpec>], what: &'static str) -> Result<FockSubspaceBasis> {
    FockSubspaceBasis::new(kets(registry, list)?).map_err(|e| Error::validation(what, e.to_string()))
}

impl DeviceFile {
    pub fn to_device(&self) -> Result<ConditionalDevice> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::SchemaVersion(self.schema_version));
        }
        let reg_in = ModeRegistry::new(self.modes.iter().cloned())?;
        let reg_out = match &self.modes_out {
            Some(m) => ModeRegistry::new(m.iter().cloned())?,
            None => reg_in.clone(),
        };
        let n = reg_in.mode_count();
        if self.unitary.len() != n * reg_out.mode_count() {
            return Err(Error::Dimension {
                what: "unitary entries",
                expected: n * reg_out.mode_count(),
                found: self.unitary.len(),
            });
        }
        let matrix = CMatrix::from_row_iterator(
            n,
            reg_out.mode_count(),
            self.unitary.iter().map(|[re, im]| C64::new(*re, *im)),
        );
        let unitary = ModeUnitary::new(reg_in.clone(), reg_out.clone(), matrix)?;
        let input = ModePartition::new(
            &reg_in,
            &self.input_partition.computational,
            &self.input_partition.ancilla,
        )?;
        let output = ModePartition::new(
            &reg_out,
            &self.output_partition.computational,
            &self.output_partition.ancilla,
        )?;

        let sigma = match (&self.ancilla_density, self.ancilla.is_empty()) {
            (Some(_), false) => {
                return Err(Error::validation(
                    "AncillaDecomposition",
                    "give either `ancilla` or `ancilla_density`, not both",
                ))
            }
            (Some(d), true) => {
                let basis = subspace(input.second(), &d.basis, "AncillaDecomposition")?;
                AncillaDecomposition::from_density(&basis, &square_matrix(&d.matrix, "AncillaDecomposition")?)?
            }
            (None, true) => return Err(Error::validation("AncillaDecomposition", "no ancilla terms")),
            (None, false) => AncillaDecomposition::new(
                self.ancilla
                    .iter()
                    .map(|a| {
                        Ok(AncillaTerm {
                            p: a.p,
                            chi: ket(input.second(), &a.ket)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?,
            )?,
        };

        let subspace_in = subspace(input.first(), &self.subspace_in, "subspace_in")?;
        let subspace_out = self
            .subspace_out
            .as_ref()
            .map(|s| subspace(output.first(), s, "subspace_out"))
            .transpose()?;
        let outcomes = self
            .outcomes
            .iter()
            .map(|o| {
                Ok(Outcome {
                    signature: DetectionSignature::new(kets(output.second(), &o.signature)?)?,
                    correction: match &o.correction {
                        CorrectionSpec::Named(IdentityTag::Identity) => Correction::Identity,
                        CorrectionSpec::Matrix(m) => Correction::Unitary(square_matrix(m, "correction")?),
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;

        ConditionalDevice::new(DeviceParts {
            unitary,
            input,
            output,
            sigma,
            subspace_in,
            subspace_out,
            outcomes,
        })
    }

    pub fn from_device(dev: &ConditionalDevice) -> Self {
        let u = dev.unitary();
        let labels = |r: &ModeRegistry| r.labels().to_vec();
        let partition = |p: &ModePartition| PartitionSpec {
            computational: labels(p.first()),
            ancilla: labels(p.second()),
        };
        DeviceFile {
            schema_version: SCHEMA_VERSION,
            modes: labels(u.registry_in()),
            modes_out: (u.registry_out() != u.registry_in()).then(|| labels(u.registry_out())),
            unitary: matrix_entries(u.matrix()),
            input_partition: partition(dev.input()),
            output_partition: partition(dev.output()),
            ancilla: dev
                .sigma()
                .terms()
                .iter()
                .map(|t| AncillaSpec {
                    p: t.p,
                    ket: ket_spec(&t.chi),
                })
                .collect(),
            ancilla_density: None,
            subspace_in: dev.subspace_in().vectors().iter().map(ket_spec).collect(),
            subspace_out: dev.subspace_out().map(|b| b.vectors().iter().map(ket_spec).collect()),
            outcomes: dev
                .outcomes()
                .iter()
                .map(|o| OutcomeSpec {
                    signature: o.signature.kets().iter().map(ket_spec).collect(),
                    correction: match &o.correction {
                        Correction::Identity => CorrectionSpec::Named(IdentityTag::Identity),
                        Correction::Unitary(m) => CorrectionSpec::Matrix(matrix_entries(m)),
                    },
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::Builtin;

    #[test]
    fn builtins_round_trip() {
        for b in Builtin::ALL {
            let dev = b.build();
            let text = export_device(&dev);
            let back = parse_device(&text).unwrap();
            assert_eq!(back, dev, "{b}");
            assert_eq!(export_device(&back), text, "{b}");
        }
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        let e = parse_device("{ \"schema_version\": 1, ").unwrap_err();
        assert!(e.is_parse_error());
    }

    #[test]
    fn unknown_field_is_a_parse_error() {
        let mut v: serde_json::Value = serde_json::from_str(&export_device(&Builtin::KlmNs.build())).unwrap();
        v["colour"] = serde_json::json!("blue");
        assert!(parse_device(&v.to_string()).unwrap_err().is_parse_error());
    }

    #[test]
    fn wrong_schema_version() {
        let mut v: serde_json::Value = serde_json::from_str(&export_device(&Builtin::KlmNs.build())).unwrap();
        v["schema_version"] = serde_json::json!(7);
        assert!(matches!(parse_device(&v.to_string()), Err(Error::SchemaVersion(7))));
    }

    #[test]
    fn correction_must_be_square() {
        assert!(square_matrix(&[[1.0, 0.0], [0.0, 0.0]], "correction").is_err());
        assert!(square_matrix(&[], "correction").is_err());
    }
}
