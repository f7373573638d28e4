//! Serializable verdict reports and their text rendering.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::analysis::{AnalysisReport, BasisSource, DETECTION_CUTOFF};
use crate::cpmap::{DecompositionSource, ZERO_PROBABILITY};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Tolerance for re-deriving `total_tau` from the per-outcome values.
const TOTAL_TAU_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    OperationallyUnitary,
    NotOperationallyUnitary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeReport {
    pub outcome: usize,
    pub tau: f64,
    pub test_pass: bool,
    pub max_dev: f64,
    pub eigenvalues: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProportionalityReport {
    pub pass: bool,
    pub relative_second: f64,
    pub members: usize,
    pub nonvanishing: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub verdict: f64,
    pub detection_cutoff: f64,
    pub zero_probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportFile {
    pub schema_version: u32,
    pub device: String,
    pub overall_verdict: Verdict,
    pub per_outcome: Vec<OutcomeReport>,
    pub total_tau: f64,
    pub degenerate: bool,
    pub dim_in: usize,
    pub dim_out: Option<usize>,
    pub proportionality: Option<ProportionalityReport>,
    /// Row-major rows of `[re, im]` pairs.
    pub w_matrix: Option<Vec<Vec<[f64; 2]>>>,
    pub completeness_dev: Option<f64>,
    pub q_eigenphases: Option<Vec<f64>>,
    pub t_eff: f64,
    pub basis_source: BasisSource,
    pub sigma_decomposition: DecompositionSource,
    pub photon_cap: u32,
    pub tolerances: Tolerances,
    pub failures: Vec<String>,
}

fn rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| [m[(i, j)].re + 0.0, m[(i, j)].im + 0.0])
                .collect()
        })
        .collect()
}

impl ReportFile {
    pub fn new(device: impl Into<String>, photon_cap: u32, r: &AnalysisReport) -> Self {
        ReportFile {
            schema_version: REPORT_SCHEMA_VERSION,
            device: device.into(),
            overall_verdict: if r.operationally_unitary {
                Verdict::OperationallyUnitary
            } else {
                Verdict::NotOperationallyUnitary
            },
            per_outcome: r
                .outcomes
                .iter()
                .map(|o| OutcomeReport {
                    outcome: o.test.outcome,
                    tau: o.verdict.tau,
                    test_pass: o.verdict.pass,
                    max_dev: o.verdict.max_deviation,
                    eigenvalues: o.test.eigenvalues.clone(),
                })
                .collect(),
            total_tau: r.total_tau,
            degenerate: r.degenerate,
            dim_in: r.outcomes.first().map_or(0, |o| o.test.matrix.nrows()),
            dim_out: r.output_basis.as_ref().map(|b| b.dim()),
            proportionality: r.proportionality.as_ref().map(|p| ProportionalityReport {
                pass: p.pass,
                relative_second: p.relative_second,
                members: r.family.as_ref().map_or(0, |f| f.members.len()),
                nonvanishing: p.nonvanishing.len(),
            }),
            w_matrix: r.common_w().map(rows),
            completeness_dev: r.completeness_deviation,
            q_eigenphases: r.effective_action.as_ref().map(|q| q.eigenphases.clone()),
            t_eff: r.options.t_eff,
            basis_source: r.basis_source,
            sigma_decomposition: r.sigma_source,
            photon_cap,
            tolerances: Tolerances {
                verdict: r.options.tol,
                detection_cutoff: DETECTION_CUTOFF,
                zero_probability: ZERO_PROBABILITY,
            },
            failures: r.failures.clone(),
        }
    }

    pub fn is_unitary(&self) -> bool {
        self.overall_verdict == Verdict::OperationallyUnitary
    }

    /// The verdict implied by the per-outcome fields, proportionality, dimensions and
    /// completeness deviation, ignoring `overall_verdict` itself.
    pub fn derived_verdict(&self) -> bool {
        let tol = self.tolerances.verdict;
        !self.degenerate
            && !self.per_outcome.is_empty()
            && self.per_outcome.iter().all(|o| o.test_pass && o.max_dev <= tol)
            && self
                .proportionality
                .as_ref()
                .is_some_and(|p| p.pass && p.relative_second <= tol)
            && self.dim_out == Some(self.dim_in)
            && self.completeness_dev.is_some_and(|c| c <= tol)
    }

    /// Check that totals and the verdict agree with the per-outcome fields.
    pub fn validate(&self) -> Result<()> {
        const WHAT: &str = "report";
        if self.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::SchemaVersion(self.schema_version));
        }
        let sum: f64 = self.per_outcome.iter().map(|o| o.tau).sum();
        if (sum - self.total_tau).abs() > TOTAL_TAU_TOL {
            return Err(Error::validation(
                WHAT,
                format!("total_tau {} differs from the per-outcome sum {sum}", self.total_tau),
            ));
        }
        if self.derived_verdict() != self.is_unitary() {
            return Err(Error::validation(
                WHAT,
                "overall_verdict contradicts the per-outcome fields",
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: ReportFile = serde_json::from_str(text)?;
        r.validate()?;
        Ok(r)
    }

    /// 0 when operationally unitary, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.is_unitary() {
            0
        } else {
            2
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let verdict = match self.overall_verdict {
            Verdict::OperationallyUnitary => "operationally unitary",
            Verdict::NotOperationallyUnitary => "NOT operationally unitary",
        };
        let _ = writeln!(s, "device: {}", self.device);
        let _ = writeln!(s, "verdict: {verdict}");
        let _ = writeln!(
            s,
            "tolerance: {:e}  photon cap: {}  sigma: {}  output basis: {}",
            self.tolerances.verdict,
            self.photon_cap,
            self.sigma_decomposition,
            match self.basis_source {
                BasisSource::User => "user",
                BasisSource::Detected => "detected",
            }
        );
        let _ = writeln!(s, "total tau: {:.10}", self.total_tau);
        let _ = writeln!(s, "outcomes:");
        for o in &self.per_outcome {
            let _ = writeln!(
                s,
                "  L={:<3} tau={:.10}  test={}  max_dev={:.3e}",
                o.outcome,
                o.tau,
                if o.test_pass { "pass" } else { "FAIL" },
                o.max_dev
            );
            if !o.test_pass {
                let eig: Vec<String> = o.eigenvalues.iter().map(|e| format!("{e:.10}")).collect();
                let _ = writeln!(s, "        eigenvalues: {}", eig.join(", "));
            }
        }
        if let Some(p) = &self.proportionality {
            let _ = writeln!(
                s,
                "proportionality: {} (sigma2/sigma1 = {:.3e}, {} of {} members nonvanishing)",
                if p.pass { "pass" } else { "FAIL" },
                p.relative_second,
                p.nonvanishing,
                p.members
            );
        }
        if let Some(w) = &self.w_matrix {
            let _ = writeln!(s, "w:");
            for row in w {
                let cells: Vec<String> = row.iter().map(|[re, im]| format!("{re:>9.6}{im:+.6}i")).collect();
                let _ = writeln!(s, "  [{}]", cells.join("  "));
            }
        }
        if let Some(c) = self.completeness_dev {
            let _ = writeln!(s, "completeness |w'w - I|: {c:.3e}");
        }
        if let Some(q) = &self.q_eigenphases {
            let ph: Vec<String> = q.iter().map(|x| format!("{x:.6}")).collect();
            let _ = writeln!(s, "Q eigenphases: [{}]  (t_eff = {})", ph.join(", "), self.t_eff);
        }
        for f in &self.failures {
            let _ = writeln!(s, "failure: {f}");
        }
        s
    }
}
