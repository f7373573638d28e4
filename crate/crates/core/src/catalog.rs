//! Ready-made devices: the KLM nonlinear sign gate (with an optional three-photon
//! breakdown variant) and the polarization-encoded feed-forward CNOT.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;

use crate::cpmap::{
    AncillaDecomposition, ConditionalDevice, Correction, DensityOperator, DetectionSignature, DeviceParts, Outcome,
};
use crate::error::{Error, Result};
use crate::fock::{embed_product, FockSubspaceBasis, FockVector, ModePartition, ModeRegistry, OccupationVector};
use crate::lift::ModeUnitary;
use crate::linalg::CMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Builtin {
    KlmNs,
    KlmNsExtended,
    CnotPittman,
}

impl Builtin {
    pub const ALL: [Builtin; 3] = [Builtin::KlmNs, Builtin::KlmNsExtended, Builtin::CnotPittman];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::KlmNs => "klm-ns",
            Builtin::KlmNsExtended => "klm-ns-extended",
            Builtin::CnotPittman => "cnot-pittman",
        }
    }

    pub fn build(self) -> ConditionalDevice {
        match self {
            Builtin::KlmNs => build_klm_ns(false),
            Builtin::KlmNsExtended => build_klm_ns(true),
            Builtin::CnotPittman => build_cnot_pittman(),
        }
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Builtin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Builtin::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown builtin device `{s}`")))
    }
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Real symmetric 3×3 transfer matrix of the KLM sign gate; rows are input ports
/// (1, 2, 3), columns output ports (a, b, c).
pub fn klm_unitary() -> CMatrix {
    let s2 = 2f64.sqrt();
    let u01 = 2f64.powf(-0.25);
    let u02 = (3.0 / s2 - 2.0).sqrt();
    let u12 = 0.5 - 1.0 / s2;
    #[rustfmt::skip]
    let rows = [
        1.0 - s2, u01, u02,
        u01, 0.5, u12,
        u02, u12, s2 - 0.5,
    ];
    CMatrix::from_row_slice(3, 3, &rows.map(re))
}

fn number_states(registry: &ModeRegistry, max_n: u32) -> FockSubspaceBasis {
    let occs: Vec<OccupationVector> = (0..=max_n).map(|n| OccupationVector::new(vec![n])).collect();
    FockSubspaceBasis::from_occupations(registry, &occs).expect("Fock kets are orthonormal")
}

/// KLM nonlinear sign gate: one photon in ancilla port 2, heralded by exactly one
/// photon in b and none in c. `extended` adds `|3⟩` to the computational subspace.
pub fn build_klm_ns(extended: bool) -> ConditionalDevice {
    let build = || -> Result<ConditionalDevice> {
        let reg_in = ModeRegistry::new(["1", "2", "3"])?;
        let reg_out = ModeRegistry::new(["a", "b", "c"])?;
        let unitary = ModeUnitary::new(reg_in.clone(), reg_out.clone(), klm_unitary())?;
        let input = ModePartition::new(&reg_in, &["1"], &["2", "3"])?;
        let output = ModePartition::new(&reg_out, &["a"], &["b", "c"])?;
        let chi = FockVector::vacuum(input.second()).create("2")?;
        let herald = FockVector::basis(output.second(), vec![1, 0])?;
        let max_n = if extended { 3 } else { 2 };
        ConditionalDevice::new(DeviceParts {
            subspace_in: number_states(input.first(), max_n),
            subspace_out: Some(number_states(output.first(), max_n)),
            sigma: AncillaDecomposition::pure(chi)?,
            outcomes: vec![Outcome {
                signature: DetectionSignature::new(vec![herald])?,
                correction: Correction::Identity,
            }],
            unitary,
            input,
            output,
        })
    };
    build().expect("catalog device is valid")
}

const CNOT_MODES_IN: [&str; 12] = [
    "H_a", "V_a", "H_b", "V_b", "H_1", "V_1", "H_2", "V_2", "H_3", "V_3", "H_4", "V_4",
];
const CNOT_MODES_OUT: [&str; 12] = [
    "H_p", "V_p", "H_q", "V_q", "H_n", "V_n", "H_m", "V_m", "H_5", "V_5", "H_6", "V_6",
];
const CNOT_DETECTED_PORTS: [&str; 4] = ["p", "q", "n", "m"];

/// Single-photon mode map of the polarizing beamsplitter network, as
/// (input, output, amplitude of `a†_out` in `U a†_in U†`).
fn cnot_mode_map() -> [(&'static str, &'static str, C64); 12] {
    let one = re(1.0);
    let mi = C64::new(0.0, -1.0);
    [
        ("H_1", "H_p", one),
        ("V_1", "V_q", mi),
        ("H_2", "H_5", one),
        ("V_2", "V_5", one),
        ("H_3", "H_6", one),
        ("V_3", "V_6", one),
        ("H_4", "H_m", one),
        ("V_4", "V_n", mi),
        ("H_a", "H_q", one),
        ("V_a", "V_p", mi),
        ("H_b", "H_n", one),
        ("V_b", "V_m", mi),
    ]
}

/// Sign of the diagonal (+) / anti-diagonal (−) Hadamard-basis detection for each
/// detected port of outcome `index` (0..16). Bit 3 is port p, bit 0 is port m.
fn cnot_outcome_signs(index: usize) -> [f64; 4] {
    let mut s = [1.0; 4];
    for (k, slot) in s.iter_mut().enumerate() {
        if index >> (3 - k) & 1 == 1 {
            *slot = -1.0;
        }
    }
    s
}

/// Polarization-encoded CNOT with 16 heralding outcomes and ±1 phase corrections.
pub fn build_cnot_pittman() -> ConditionalDevice {
    let build = || -> Result<ConditionalDevice> {
        let reg_in = ModeRegistry::new(CNOT_MODES_IN)?;
        let reg_out = ModeRegistry::new(CNOT_MODES_OUT)?;
        let mut u = CMatrix::zeros(12, 12);
        for (from, to, amp) in cnot_mode_map() {
            u[(reg_in.index_of(from)?, reg_out.index_of(to)?)] = amp.conj();
        }
        let unitary = ModeUnitary::new(reg_in.clone(), reg_out.clone(), u)?;
        let input = ModePartition::new(&reg_in, &CNOT_MODES_IN[..4], &CNOT_MODES_IN[4..])?;
        let output = ModePartition::new(&reg_out, &CNOT_MODES_OUT[8..], &CNOT_MODES_OUT[..8])?;

        // ancilla modes: H_1 V_1 H_2 V_2 H_3 V_3 H_4 V_4
        let chi = FockVector::from_terms(
            input.second(),
            [
                vec![1, 0, 1, 0, 1, 0, 1, 0],
                vec![1, 0, 1, 0, 0, 1, 0, 1],
                vec![0, 1, 0, 1, 0, 1, 1, 0],
                vec![0, 1, 0, 1, 1, 0, 0, 1],
            ]
            .into_iter()
            .map(|o| (OccupationVector::new(o), re(0.5))),
        )?;

        let logical = |reg: &ModeRegistry| {
            FockSubspaceBasis::from_occupations(
                reg,
                &[[1, 0, 1, 0], [1, 0, 0, 1], [0, 1, 1, 0], [0, 1, 0, 1]].map(|o| OccupationVector::new(o.to_vec())),
            )
        };

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut outcomes = Vec::with_capacity(16);
        for l in 0..16 {
            let s = cnot_outcome_signs(l);
            let ports = CNOT_DETECTED_PORTS
                .iter()
                .zip(s)
                .map(|(port, sign)| {
                    let reg = ModeRegistry::new([format!("H_{port}"), format!("V_{port}")])?;
                    FockVector::from_terms(
                        &reg,
                        [
                            (OccupationVector::new(vec![1, 0]), re(h)),
                            (OccupationVector::new(vec![0, 1]), re(sign * h)),
                        ],
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let parts: Vec<&FockVector> = ports.iter().collect();
            let ket = embed_product(output.second(), &parts)?;

            // Each logical input pairs with exactly one ancilla term; the heralded
            // amplitude carries that term's (−i)² factor times the detection signs on
            // the two ports fed by V photons.
            let [sp, sq, sn, sm] = s;
            let diag = [1.0, -sn * sm, sp * sq * sn * sm, -sp * sq];
            let corr = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(4, diag.into_iter().map(re)));
            outcomes.push(Outcome {
                signature: DetectionSignature::new(vec![ket])?,
                correction: Correction::Unitary(corr),
            });
        }

        ConditionalDevice::new(DeviceParts {
            subspace_in: logical(input.first())?,
            subspace_out: Some(logical(output.first())?),
            sigma: AncillaDecomposition::pure(chi)?,
            outcomes,
            unitary,
            input,
            output,
        })
    };
    build().expect("catalog device is valid")
}

/// `|H_a⟩|H_b⟩|H_b⟩`: one extra photon in the control port of the CNOT.
pub fn special_state_s() -> DensityOperator {
    let reg = ModeRegistry::new(CNOT_MODES_IN[..4].iter().copied()).expect("distinct labels");
    let v = FockVector::basis(&reg, vec![1, 0, 2, 0]).expect("four modes");
    DensityOperator::pure(&v).expect("normalized")
}
