//! Entanglement and fidelity diagnostics for the output field of a protocol.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{
    partial_trace, pure_to_density, DensityMatrix, FieldState, ReducedDensity, StateVector,
    Subsystem,
};

/// Largest out-of-sector probability tolerated before projecting a field
/// state onto the `{0,1} ⊗ {0,1}` sector.
pub const SECTOR_LEAKAGE_TOL: f64 = 1e-9;

/// Eigenvalues below this contribute nothing to the von Neumann entropy.
pub const ENTROPY_FLOOR: f64 = 1e-14;

/// `|⟨target|state⟩|²`, insensitive to the global phase of either argument.
pub fn fidelity_up_to_global_phase(state: &StateVector, target: &StateVector) -> Result<f64> {
    state.require_normalized()?;
    target.require_normalized()?;
    Ok(target.inner(state)?.norm_sqr())
}

pub fn field_fidelity(state: &FieldState, target: &FieldState) -> Result<f64> {
    Ok(target.inner(state)?.norm_sqr())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BellKind {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellKind {
    pub const ALL: [BellKind; 4] = [BellKind::PhiPlus, BellKind::PhiMinus, BellKind::PsiPlus, BellKind::PsiMinus];

    /// `Φ± = (|0_A0_B⟩ ± |1_A1_B⟩)/√2`, `Ψ± = (|0_A1_B⟩ ± |1_A0_B⟩)/√2`.
    pub fn field(self, dim_a: usize, dim_b: usize) -> Result<FieldState> {
        let one = C64::new(1.0, 0.0);
        let terms = match self {
            BellKind::PhiPlus => [(one, 0, 0), (one, 1, 1)],
            BellKind::PhiMinus => [(one, 0, 0), (-one, 1, 1)],
            BellKind::PsiPlus => [(one, 0, 1), (one, 1, 0)],
            BellKind::PsiMinus => [(one, 0, 1), (-one, 1, 0)],
        };
        FieldState::superposition(dim_a, dim_b, &terms)
    }

    pub fn name(self) -> &'static str {
        match self {
            BellKind::PhiPlus => "phi_plus",
            BellKind::PhiMinus => "phi_minus",
            BellKind::PsiPlus => "psi_plus",
            BellKind::PsiMinus => "psi_minus",
        }
    }
}

/// Overlaps `⟨B|ψ⟩` with the four Bell vectors, plus out-of-sector probability.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BellDecomposition {
    pub phi_plus: C64,
    pub phi_minus: C64,
    pub psi_plus: C64,
    pub psi_minus: C64,
    pub leakage: f64,
}

impl BellDecomposition {
    pub fn amplitude(&self, kind: BellKind) -> C64 {
        match kind {
            BellKind::PhiPlus => self.phi_plus,
            BellKind::PhiMinus => self.phi_minus,
            BellKind::PsiPlus => self.psi_plus,
            BellKind::PsiMinus => self.psi_minus,
        }
    }

    pub fn total_probability(&self) -> f64 {
        BellKind::ALL.iter().map(|k| self.amplitude(*k).norm_sqr()).sum::<f64>() + self.leakage
    }

    pub fn weights(&self) -> BellWeights {
        BellWeights {
            phi_plus: self.phi_plus.norm_sqr(),
            phi_minus: self.phi_minus.norm_sqr(),
            psi_plus: self.psi_plus.norm_sqr(),
            psi_minus: self.psi_minus.norm_sqr(),
            leakage: self.leakage,
        }
    }
}

/// Bell-basis populations; the serialized `bell` block of a metric report.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BellWeights {
    pub phi_plus: f64,
    pub phi_minus: f64,
    pub psi_plus: f64,
    pub psi_minus: f64,
    pub leakage: f64,
}

pub fn bell_decompose(field: &FieldState) -> BellDecomposition {
    let overlap = |kind: BellKind| -> C64 {
        let bell = kind.field(field.dim_a(), field.dim_b()).expect("field dims are at least 2");
        bell.inner(field).expect("same field dims")
    };
    let in_sector: f64 = [(0, 0), (0, 1), (1, 0), (1, 1)]
        .iter()
        .map(|&(a, b)| field.amplitude(a, b).norm_sqr())
        .sum();
    BellDecomposition {
        phi_plus: overlap(BellKind::PhiPlus),
        phi_minus: overlap(BellKind::PhiMinus),
        psi_plus: overlap(BellKind::PsiPlus),
        psi_minus: overlap(BellKind::PsiMinus),
        leakage: (field.norm().powi(2) - in_sector).max(0.0),
    }
}

fn require_field_pair(rho: &ReducedDensity) -> Result<(usize, usize)> {
    match rho.factors() {
        [(Subsystem::ModeA, da), (Subsystem::ModeB, db)] => Ok((*da, *db)),
        other => Err(Error::InvalidBipartition(format!("expected the two field modes, got {other:?}"))),
    }
}

/// Bell populations `⟨B|ρ|B⟩` of a reduced field density matrix.
pub fn bell_weights(rho: &ReducedDensity) -> Result<BellWeights> {
    let (da, db) = require_field_pair(rho)?;
    let weight = |kind: BellKind| -> Result<f64> {
        let v = kind.field(da, db)?;
        let v = v.amplitudes();
        // Rounding can leave a zero population slightly negative.
        Ok(v.dotc(&(rho.entries() * v)).re.max(0.0))
    };
    let in_sector: f64 = [(0, 0), (0, 1), (1, 0), (1, 1)]
        .iter()
        .map(|&(a, b)| rho.entries()[(a * db + b, a * db + b)].re)
        .sum();
    Ok(BellWeights {
        phi_plus: weight(BellKind::PhiPlus)?,
        phi_minus: weight(BellKind::PhiMinus)?,
        psi_plus: weight(BellKind::PsiPlus)?,
        psi_minus: weight(BellKind::PsiMinus)?,
        leakage: (rho.trace() - in_sector).max(0.0),
    })
}

/// Projects a field density matrix onto `{0,1} ⊗ {0,1}` and renormalizes.
pub fn two_qubit_sector(rho: &ReducedDensity) -> Result<DMatrix<C64>> {
    let (da, db) = require_field_pair(rho)?;
    let idx = [0, 1, db, db + 1];
    let mut out = DMatrix::zeros(4, 4);
    for (i, &r) in idx.iter().enumerate() {
        for (j, &c) in idx.iter().enumerate() {
            out[(i, j)] = rho.entries()[(r, c)];
        }
    }
    let kept = out.trace().re;
    let leakage = rho.trace() - kept;
    if leakage > SECTOR_LEAKAGE_TOL || kept <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "field leaks {leakage:e} out of the two-qubit sector of ({da}, {db})"
        )));
    }
    Ok(out / C64::new(kept, 0.0))
}

/// Reduced density matrix of the two modes with the atom traced out.
pub fn field_density(psi: &StateVector) -> Result<ReducedDensity> {
    partial_trace(&pure_to_density(psi)?, &[Subsystem::ModeA, Subsystem::ModeB])
}

pub fn field_density_mixed(rho: &DensityMatrix) -> Result<ReducedDensity> {
    partial_trace(rho, &[Subsystem::ModeA, Subsystem::ModeB])
}

fn sigma_y_sigma_y() -> DMatrix<C64> {
    let mut m = DMatrix::zeros(4, 4);
    m[(0, 3)] = C64::new(-1.0, 0.0);
    m[(1, 2)] = C64::new(1.0, 0.0);
    m[(2, 1)] = C64::new(1.0, 0.0);
    m[(3, 0)] = C64::new(-1.0, 0.0);
    m
}

fn hermitian_sqrt(m: &DMatrix<C64>) -> DMatrix<C64> {
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);
    let roots = eig.eigenvalues.map(|v| C64::new(v.max(0.0).sqrt(), 0.0));
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.adjoint()
}

/// Wootters concurrence `max(0, λ1 − λ2 − λ3 − λ4)` of a two-qubit density
/// matrix, with `λi` the decreasing square roots of the eigenvalues of
/// `ρ (σy⊗σy) ρ* (σy⊗σy)`.
///
/// Since `√ρ ρ̃ √ρ = A A†` with `A = √ρ (σy⊗σy) √ρ*`, the `λi` are the
/// singular values of `A`, which avoids square-rooting tiny eigenvalues.
pub fn concurrence(rho: &DMatrix<C64>) -> Result<f64> {
    if rho.nrows() != 4 || rho.ncols() != 4 {
        return Err(Error::InvalidDimension(format!(
            "concurrence needs a 4x4 density matrix, got {}x{}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    let yy = sigma_y_sigma_y();
    let root = hermitian_sqrt(rho);
    let a = &root * yy * root.conjugate();
    let mut lambdas: Vec<f64> = a.singular_values().iter().copied().collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    Ok((lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).clamp(0.0, 1.0))
}

/// Concurrence of a pure field state, after projecting onto the two-qubit sector.
pub fn field_concurrence(field: &FieldState) -> Result<f64> {
    let v = field.normalize()?;
    let v = v.amplitudes();
    let rho = ReducedDensity::from_parts(
        vec![(Subsystem::ModeA, field.dim_a()), (Subsystem::ModeB, field.dim_b())],
        v * v.adjoint(),
    );
    concurrence(&two_qubit_sector(&rho)?)
}

/// `−Σ p log₂ p` over the given eigenvalues, ignoring those below [`ENTROPY_FLOOR`].
pub fn von_neumann_entropy_bits(eigenvalues: &[f64]) -> f64 {
    eigenvalues
        .iter()
        .filter(|&&p| p > ENTROPY_FLOOR)
        .map(|&p| -p * p.log2())
        .sum::<f64>()
        .max(0.0)
}

/// Entropy of the reduced state on `keep` for a pure composite state.
pub fn entanglement_entropy(psi: &StateVector, keep: &[Subsystem]) -> Result<f64> {
    let reduced = partial_trace(&pure_to_density(psi)?, keep)?;
    Ok(von_neumann_entropy_bits(&reduced.eigenvalues()))
}

/// Serialized metrics block of a run report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricReport {
    pub fidelity: Option<f64>,
    pub concurrence: Option<f64>,
    pub entropy_bits: f64,
    pub bell: BellWeights,
}

/// Metrics of a pure composite output state. Concurrence is `None` when the
/// field leaves the two-qubit sector.
pub fn metric_report(state: &StateVector, target: Option<&StateVector>) -> Result<MetricReport> {
    let field = field_density(state)?;
    Ok(MetricReport {
        fidelity: target.map(|t| fidelity_up_to_global_phase(state, t)).transpose()?,
        concurrence: two_qubit_sector(&field).ok().map(|m| concurrence(&m)).transpose()?,
        entropy_bits: entanglement_entropy(state, &[Subsystem::ModeA])?,
        bell: bell_weights(&field)?,
    })
}
