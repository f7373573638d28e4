//! Mode unitaries and their action on multiphoton Fock states.
//!
//! A [`ModeUnitary`] stores the single-photon transfer matrix with rows indexed by
//! input modes and columns by output modes. The evolution acts on creation
//! operators as `a†_in → Σ_out conj(U[in, out]) a†_out`, so a single photon entering
//! mode `in` leaves in superposition with amplitudes `conj(U[in, ·])`.

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fock::{FockVector, ModeRegistry, OccupationVector};
use crate::linalg::{unitarity_deviation, CMatrix};

pub const DEFAULT_PHOTON_CAP: u32 = 8;

/// Tolerance used when constructing a [`ModeUnitary`].
pub const MODE_UNITARITY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitarityCheck {
    pub unitary: bool,
    pub deviation: f64,
}

/// `‖U U† − I‖_max ≤ tol`, with the deviation reported either way.
pub fn check_mode_unitarity(matrix: &CMatrix, tol: f64) -> Result<UnitarityCheck> {
    if !matrix.is_square() {
        return Err(Error::NotSquare {
            rows: matrix.nrows(),
            cols: matrix.ncols(),
        });
    }
    let deviation = unitarity_deviation(matrix);
    Ok(UnitarityCheck {
        unitary: deviation <= tol,
        deviation,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModeUnitary {
    registry_in: ModeRegistry,
    registry_out: ModeRegistry,
    matrix: CMatrix,
}

impl ModeUnitary {
    pub fn new(registry_in: ModeRegistry, registry_out: ModeRegistry, matrix: CMatrix) -> Result<Self> {
        let check = check_mode_unitarity(&matrix, MODE_UNITARITY_TOL)?;
        if matrix.nrows() != registry_in.mode_count() {
            return Err(Error::Dimension {
                what: "mode unitary rows",
                expected: registry_in.mode_count(),
                found: matrix.nrows(),
            });
        }
        if matrix.ncols() != registry_out.mode_count() {
            return Err(Error::Dimension {
                what: "mode unitary columns",
                expected: registry_out.mode_count(),
                found: matrix.ncols(),
            });
        }
        if !check.unitary {
            return Err(Error::NonUnitary {
                what: "mode unitary",
                deviation: check.deviation,
            });
        }
        Ok(ModeUnitary {
            registry_in,
            registry_out,
            matrix,
        })
    }

    pub fn identity(registry: &ModeRegistry) -> Self {
        let n = registry.mode_count();
        ModeUnitary {
            registry_in: registry.clone(),
            registry_out: registry.clone(),
            matrix: CMatrix::identity(n, n),
        }
    }

    pub fn registry_in(&self) -> &ModeRegistry {
        &self.registry_in
    }

    pub fn registry_out(&self) -> &ModeRegistry {
        &self.registry_out
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// The device `self` followed by `next`. With the row-input convention the
    /// composite transfer matrix is the plain product `self · next`.
    pub fn then(&self, next: &ModeUnitary) -> Result<ModeUnitary> {
        self.registry_out.ensure_same(&next.registry_in)?;
        Ok(ModeUnitary {
            registry_in: self.registry_in.clone(),
            registry_out: next.registry_out.clone(),
            matrix: &self.matrix * &next.matrix,
        })
    }

    /// Apply the induced Fock-space unitary to `v` by expanding every basis term as a
    /// creation-operator monomial and substituting each `a†`.
    pub fn lift_apply(&self, v: &FockVector, photon_cap: u32) -> Result<FockVector> {
        self.registry_in.ensure_same(v.registry())?;
        let n_out = self.registry_out.mode_count();

        // conj(U[in, out]) rows, with zeros dropped
        let rows: Vec<Vec<(usize, C64)>> = (0..self.matrix.nrows())
            .map(|i| {
                (0..n_out)
                    .filter_map(|j| {
                        let z = self.matrix[(i, j)].conj();
                        (z.norm() > 0.0).then_some((j, z))
                    })
                    .collect()
            })
            .collect();

        let mut out: HashMap<Vec<u32>, C64> = HashMap::new();
        for (occ, &amp) in v.terms() {
            let photons = occ.total();
            if photons > photon_cap {
                return Err(Error::PhotonCap {
                    photons,
                    cap: photon_cap,
                });
            }
            let mut poly: HashMap<Vec<u32>, C64> = HashMap::new();
            poly.insert(vec![0; n_out], C64::new(1.0, 0.0));
            for (mode, &count) in occ.counts().iter().enumerate() {
                for _ in 0..count {
                    let mut next: HashMap<Vec<u32>, C64> = HashMap::with_capacity(poly.len() * rows[mode].len());
                    for (mono, coeff) in &poly {
                        for &(j, z) in &rows[mode] {
                            let mut m = mono.clone();
                            m[j] += 1;
                            *next.entry(m).or_insert(C64::new(0.0, 0.0)) += coeff * z;
                        }
                    }
                    poly = next;
                }
            }
            let prefactor = amp / occ.factorial_product().sqrt();
            for (mono, coeff) in poly {
                let norm = OccupationVector::new(mono.clone()).factorial_product().sqrt();
                *out.entry(mono).or_insert(C64::new(0.0, 0.0)) += prefactor * coeff * norm;
            }
        }
        FockVector::from_terms(
            &self.registry_out,
            out.into_iter().map(|(m, a)| (OccupationVector::new(m), a)),
        )
    }
}

/// Haar-random `n × n` unitary from the QR decomposition of a complex Gaussian matrix.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let z = DMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    });
    let qr = z.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut q = q;
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Balanced two-mode beamsplitter `[[1, 1], [1, -1]] / √2`.
pub fn beamsplitter_50_50() -> CMatrix {
    let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    CMatrix::from_row_slice(2, 2, &[s, s, s, -s])
}
