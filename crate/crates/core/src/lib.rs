//! Heralded linear-optical devices on few-photon Fock spaces.
//!
//! A device evolves a computational input together with an ancilla state through a
//! passive mode unitary, detects the ancilla output modes and keeps the remaining
//! modes when the detection pattern heralds success. This crate builds the resulting
//! conditional maps and decides whether a device acts on a chosen subspace as a fixed
//! unitary with input-independent success probability.

pub mod analysis;
pub mod catalog;
pub mod cpmap;
pub mod device_file;
pub mod error;
pub mod fock;
pub mod lift;
pub mod linalg;
pub mod permanent;
pub mod report;

pub use analysis::{analyze, AnalysisOptions, AnalysisReport, BasisSource};
pub use catalog::Builtin;
pub use cpmap::{
    conditional_output, success_probability, v_map, AncillaDecomposition, ConditionalDevice, Correction,
    DensityOperator, DetectionSignature, Outcome,
};
pub use device_file::{export_device, parse_device};
pub use error::{Error, Result};
pub use fock::{FockSubspaceBasis, FockVector, ModePartition, ModeRegistry, OccupationVector};
pub use lift::ModeUnitary;
pub use linalg::CMatrix;
pub use num_complex::Complex64 as C64;
pub use report::ReportFile;
