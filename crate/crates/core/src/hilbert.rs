//! Composite Hilbert-space bookkeeping for one atom and two cavity modes.
//!
//! Basis states are ordered atom-slowest, row-major:
//!
//! ```text
//! index = atom * (dim_a * dim_b) + n_a * dim_b + n_b
//! ```
//!
//! Atomic labels are `a = 0, b = 1, c = 2` for the three-level (V-type) atom
//! and `g = 0, e = 1` for the two-level atom. Photon numbers run over
//! `0..dim_a` and `0..dim_b`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used by the container invariants.
pub const INVARIANT_TOL: f64 = 1e-12;

/// Largest deviation of `‖ψ‖` from one accepted where a normalized state is required.
pub const NORM_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawSpace")]
pub struct SpaceDescriptor {
    atom_levels: usize,
    dim_a: usize,
    dim_b: usize,
}

#[derive(Deserialize)]
struct RawSpace {
    atom_levels: usize,
    dim_a: usize,
    dim_b: usize,
}

impl TryFrom<RawSpace> for SpaceDescriptor {
    type Error = Error;

    fn try_from(raw: RawSpace) -> Result<Self> {
        make_space(raw.atom_levels, raw.dim_a, raw.dim_b)
    }
}

pub fn make_space(atom_levels: usize, dim_a: usize, dim_b: usize) -> Result<SpaceDescriptor> {
    if !(2..=3).contains(&atom_levels) {
        return Err(Error::InvalidDimension(format!(
            "atom_levels must be 2 or 3, got {atom_levels}"
        )));
    }
    if dim_a < 2 || dim_b < 2 {
        return Err(Error::InvalidDimension(format!(
            "Fock truncations must be at least 2, got ({dim_a}, {dim_b})"
        )));
    }
    Ok(SpaceDescriptor { atom_levels, dim_a, dim_b })
}

impl SpaceDescriptor {
    pub fn atom_levels(&self) -> usize {
        self.atom_levels
    }

    pub fn dim_a(&self) -> usize {
        self.dim_a
    }

    pub fn dim_b(&self) -> usize {
        self.dim_b
    }

    pub fn field_dim(&self) -> usize {
        self.dim_a * self.dim_b
    }

    pub fn dim(&self) -> usize {
        self.atom_levels * self.dim_a * self.dim_b
    }

    pub fn is_three_level(&self) -> bool {
        self.atom_levels == 3
    }

    pub fn index(&self, atom: usize, n_a: usize, n_b: usize) -> Result<usize> {
        if atom >= self.atom_levels || n_a >= self.dim_a || n_b >= self.dim_b {
            return Err(Error::IndexOutOfRange(format!(
                "label ({atom}, {n_a}, {n_b}) outside space ({}, {}, {})",
                self.atom_levels, self.dim_a, self.dim_b
            )));
        }
        Ok(atom * self.field_dim() + n_a * self.dim_b + n_b)
    }

    /// Inverse of [`SpaceDescriptor::index`]: `(atom, n_a, n_b)`.
    pub fn labels(&self, index: usize) -> Result<(usize, usize, usize)> {
        if index >= self.dim() {
            return Err(Error::IndexOutOfRange(format!(
                "index {index} outside dimension {}",
                self.dim()
            )));
        }
        let atom = index / self.field_dim();
        let rest = index % self.field_dim();
        Ok((atom, rest / self.dim_b, rest % self.dim_b))
    }

    /// Factor dimensions in canonical order (atom, mode A, mode B).
    pub fn factors(&self) -> [(Subsystem, usize); 3] {
        [
            (Subsystem::Atom, self.atom_levels),
            (Subsystem::ModeA, self.dim_a),
            (Subsystem::ModeB, self.dim_b),
        ]
    }

    fn check_same(&self, other: &SpaceDescriptor) -> Result<()> {
        if self != other {
            return Err(Error::IncompatibleSpace(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}

pub fn basis_index(space: &SpaceDescriptor, atom: usize, n_a: usize, n_b: usize) -> Result<usize> {
    space.index(atom, n_a, n_b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subsystem {
    Atom,
    ModeA,
    ModeB,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    space: SpaceDescriptor,
    amplitudes: DVector<C64>,
}

impl StateVector {
    pub fn new(space: SpaceDescriptor, amplitudes: DVector<C64>) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::InvalidDimension(format!(
                "{} amplitudes for a space of dimension {}",
                amplitudes.len(),
                space.dim()
            )));
        }
        Ok(StateVector { space, amplitudes })
    }

    pub fn zeros(space: SpaceDescriptor) -> Self {
        StateVector { space, amplitudes: DVector::zeros(space.dim()) }
    }

    pub fn from_pairs(space: SpaceDescriptor, pairs: &[[f64; 2]]) -> Result<Self> {
        let amps = DVector::from_iterator(pairs.len(), pairs.iter().map(|p| C64::new(p[0], p[1])));
        Self::new(space, amps)
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn amplitude(&self, atom: usize, n_a: usize, n_b: usize) -> Result<C64> {
        Ok(self.amplitudes[self.space.index(atom, n_a, n_b)?])
    }

    pub fn to_pairs(&self) -> Vec<[f64; 2]> {
        self.amplitudes.iter().map(|z| [z.re, z.im]).collect()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn normalize(&self) -> Result<Self> {
        let norm = self.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Normalization(norm));
        }
        Ok(self.scale(C64::new(1.0 / norm, 0.0)))
    }

    pub fn scale(&self, factor: C64) -> Self {
        StateVector { space: self.space, amplitudes: &self.amplitudes * factor }
    }

    pub fn add(&self, other: &StateVector) -> Result<Self> {
        self.space.check_same(&other.space)?;
        Ok(StateVector { space: self.space, amplitudes: &self.amplitudes + &other.amplitudes })
    }

    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        inner_product(self, other)
    }

    pub(crate) fn require_normalized(&self) -> Result<()> {
        let norm = self.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Normalization(norm));
        }
        Ok(())
    }

    /// Total probability carried by atomic level `atom`.
    pub fn level_population(&self, atom: usize) -> Result<f64> {
        self.space.index(atom, 0, 0)?;
        let block = self.space.field_dim();
        Ok(self.amplitudes.rows(atom * block, block).norm_squared())
    }

    /// Unnormalized field amplitudes conditioned on atomic level `atom`.
    pub fn field_component(&self, atom: usize) -> Result<FieldState> {
        self.space.index(atom, 0, 0)?;
        let block = self.space.field_dim();
        Ok(FieldState {
            dim_a: self.space.dim_a,
            dim_b: self.space.dim_b,
            amplitudes: self.amplitudes.rows(atom * block, block).into_owned(),
        })
    }

    /// `|atom⟩ ⊗ field`.
    pub fn product(space: SpaceDescriptor, atom: usize, field: &FieldState) -> Result<Self> {
        if field.dim_a != space.dim_a || field.dim_b != space.dim_b {
            return Err(Error::IncompatibleSpace(format!(
                "field ({}, {}) vs space {space:?}",
                field.dim_a, field.dim_b
            )));
        }
        let mut psi = StateVector::zeros(space);
        let start = space.index(atom, 0, 0)?;
        psi.amplitudes.rows_mut(start, space.field_dim()).copy_from(&field.amplitudes);
        Ok(psi)
    }

    /// Probability outside the `{0,1} ⊗ {0,1}` photon sector.
    pub fn photon_leakage(&self) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let (_, n_a, n_b) = self.space.labels(*i).expect("index within dimension");
                n_a > 1 || n_b > 1
            })
            .map(|(_, z)| z.norm_sqr())
            .sum()
    }
}

impl Serialize for StateVector {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Wire<'a> {
            space: &'a SpaceDescriptor,
            amplitudes: Vec<[f64; 2]>,
        }
        Wire { space: &self.space, amplitudes: self.to_pairs() }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for StateVector {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            space: SpaceDescriptor,
            amplitudes: Vec<[f64; 2]>,
        }
        let wire = Wire::deserialize(deserializer)?;
        StateVector::from_pairs(wire.space, &wire.amplitudes).map_err(serde::de::Error::custom)
    }
}

pub fn basis_state(space: &SpaceDescriptor, atom: usize, n_a: usize, n_b: usize) -> Result<StateVector> {
    let idx = space.index(atom, n_a, n_b)?;
    let mut psi = StateVector::zeros(*space);
    psi.amplitudes[idx] = C64::new(1.0, 0.0);
    Ok(psi)
}

/// `⟨x|y⟩`, antilinear in `x`.
pub fn inner_product(x: &StateVector, y: &StateVector) -> Result<C64> {
    x.space.check_same(&y.space)?;
    Ok(x.amplitudes.dotc(&y.amplitudes))
}

/// Pure state of the two cavity modes alone, ordered `n_a * dim_b + n_b`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    dim_a: usize,
    dim_b: usize,
    amplitudes: DVector<C64>,
}

impl FieldState {
    pub fn new(dim_a: usize, dim_b: usize, amplitudes: DVector<C64>) -> Result<Self> {
        if dim_a < 2 || dim_b < 2 || amplitudes.len() != dim_a * dim_b {
            return Err(Error::InvalidDimension(format!(
                "{} amplitudes for field ({dim_a}, {dim_b})",
                amplitudes.len()
            )));
        }
        Ok(FieldState { dim_a, dim_b, amplitudes })
    }

    pub fn fock(dim_a: usize, dim_b: usize, n_a: usize, n_b: usize) -> Result<Self> {
        if n_a >= dim_a || n_b >= dim_b {
            return Err(Error::IndexOutOfRange(format!(
                "Fock ({n_a}, {n_b}) outside ({dim_a}, {dim_b})"
            )));
        }
        let mut amps = DVector::zeros(dim_a * dim_b);
        amps[n_a * dim_b + n_b] = C64::new(1.0, 0.0);
        Self::new(dim_a, dim_b, amps)
    }

    /// Superposition `Σ c·|n_a, n_b⟩`, normalized.
    pub fn superposition(dim_a: usize, dim_b: usize, terms: &[(C64, usize, usize)]) -> Result<Self> {
        let mut amps = DVector::zeros(dim_a * dim_b);
        for &(c, n_a, n_b) in terms {
            if n_a >= dim_a || n_b >= dim_b {
                return Err(Error::IndexOutOfRange(format!(
                    "Fock ({n_a}, {n_b}) outside ({dim_a}, {dim_b})"
                )));
            }
            amps[n_a * dim_b + n_b] += c;
        }
        Self::new(dim_a, dim_b, amps)?.normalize()
    }

    pub fn dim_a(&self) -> usize {
        self.dim_a
    }

    pub fn dim_b(&self) -> usize {
        self.dim_b
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn amplitude(&self, n_a: usize, n_b: usize) -> C64 {
        self.amplitudes[n_a * self.dim_b + n_b]
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn normalize(&self) -> Result<Self> {
        let norm = self.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Normalization(norm));
        }
        Ok(FieldState { amplitudes: &self.amplitudes / C64::new(norm, 0.0), ..self.clone() })
    }

    pub fn inner(&self, other: &FieldState) -> Result<C64> {
        if self.dim_a != other.dim_a || self.dim_b != other.dim_b {
            return Err(Error::IncompatibleSpace(format!(
                "field ({}, {}) vs ({}, {})",
                self.dim_a, self.dim_b, other.dim_a, other.dim_b
            )));
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// Embed in a composite space with mode truncations `(dim_a, dim_b)`,
    /// which must be at least as large as this state's.
    pub fn resize(&self, dim_a: usize, dim_b: usize) -> Result<Self> {
        let mut amps = DVector::zeros(dim_a * dim_b);
        for n_a in 0..self.dim_a {
            for n_b in 0..self.dim_b {
                let z = self.amplitude(n_a, n_b);
                if z == C64::new(0.0, 0.0) {
                    continue;
                }
                if n_a >= dim_a || n_b >= dim_b {
                    return Err(Error::InvalidDimension(format!(
                        "cannot truncate populated Fock state ({n_a}, {n_b})"
                    )));
                }
                amps[n_a * dim_b + n_b] = z;
            }
        }
        Self::new(dim_a, dim_b, amps)
    }
}

/// Dense density matrix over a full [`SpaceDescriptor`].
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    space: SpaceDescriptor,
    entries: DMatrix<C64>,
}

impl DensityMatrix {
    /// Validates hermiticity and unit trace at [`INVARIANT_TOL`] and
    /// positivity at `-1e-10`.
    pub fn new(space: SpaceDescriptor, entries: DMatrix<C64>) -> Result<Self> {
        let rho = Self::new_unchecked(space, entries)?;
        let defect = hermiticity_defect(&rho.entries);
        if defect > INVARIANT_TOL {
            return Err(Error::InvalidParameter(format!("density matrix not hermitian ({defect:e})")));
        }
        let tr = rho.trace();
        if (tr - 1.0).abs() > INVARIANT_TOL {
            return Err(Error::InvalidParameter(format!("density matrix trace {tr}")));
        }
        let min = rho.min_eigenvalue();
        if min < -1e-10 {
            return Err(Error::InvalidParameter(format!("density matrix eigenvalue {min:e}")));
        }
        Ok(rho)
    }

    pub(crate) fn new_unchecked(space: SpaceDescriptor, entries: DMatrix<C64>) -> Result<Self> {
        if entries.nrows() != space.dim() || entries.ncols() != space.dim() {
            return Err(Error::InvalidDimension(format!(
                "{}x{} matrix for a space of dimension {}",
                entries.nrows(),
                entries.ncols(),
                space.dim()
            )));
        }
        Ok(DensityMatrix { space, entries })
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace().re
    }

    pub fn purity(&self) -> f64 {
        (&self.entries * &self.entries).trace().re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.entries)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn expectation(&self, op: &DMatrix<C64>) -> f64 {
        (&self.entries * op).trace().re
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn overlap(&self, psi: &StateVector) -> Result<f64> {
        self.space.check_same(psi.space())?;
        let v = psi.amplitudes();
        Ok(v.dotc(&(&self.entries * v)).re)
    }

    pub fn partial_trace(&self, keep: &[Subsystem]) -> Result<ReducedDensity> {
        partial_trace(self, keep)
    }
}

pub fn pure_to_density(psi: &StateVector) -> Result<DensityMatrix> {
    psi.require_normalized()?;
    let v = psi.amplitudes();
    Ok(DensityMatrix { space: *psi.space(), entries: v * v.adjoint() })
}

/// Density matrix on a subset of the (atom, mode A, mode B) factors,
/// factors kept in canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedDensity {
    factors: Vec<(Subsystem, usize)>,
    entries: DMatrix<C64>,
}

impl ReducedDensity {
    pub(crate) fn from_parts(factors: Vec<(Subsystem, usize)>, entries: DMatrix<C64>) -> Self {
        ReducedDensity { factors, entries }
    }

    pub fn factors(&self) -> &[(Subsystem, usize)] {
        &self.factors
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace().re
    }

    pub fn purity(&self) -> f64 {
        (&self.entries * &self.entries).trace().re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.entries)
    }
}

pub fn partial_trace(rho: &DensityMatrix, keep: &[Subsystem]) -> Result<ReducedDensity> {
    let factors = rho.space.factors();
    let mut kept: Vec<Subsystem> = keep.to_vec();
    kept.sort();
    kept.dedup();
    if kept.is_empty() || kept.len() == factors.len() {
        return Err(Error::InvalidBipartition(format!(
            "keep-set must be a non-empty proper subset, got {keep:?}"
        )));
    }

    let dims: Vec<usize> = factors.iter().map(|f| f.1).collect();
    let is_kept: Vec<bool> = factors.iter().map(|f| kept.contains(&f.0)).collect();
    let kept_factors: Vec<(Subsystem, usize)> =
        factors.iter().copied().filter(|f| kept.contains(&f.0)).collect();
    let kept_dim: usize = kept_factors.iter().map(|f| f.1).product();
    let traced_dim = rho.space.dim() / kept_dim;

    // Composite index from (kept multi-index, traced multi-index).
    let compose = |k: usize, t: usize| -> usize {
        let (mut k, mut t) = (k, t);
        let mut digits = [0usize; 3];
        for f in (0..3).rev() {
            if is_kept[f] {
                digits[f] = k % dims[f];
                k /= dims[f];
            } else {
                digits[f] = t % dims[f];
                t /= dims[f];
            }
        }
        digits.iter().zip(&dims).fold(0, |acc, (d, n)| acc * n + d)
    };

    let mut out = DMatrix::zeros(kept_dim, kept_dim);
    for i in 0..kept_dim {
        for j in 0..kept_dim {
            let mut acc = C64::new(0.0, 0.0);
            for t in 0..traced_dim {
                acc += rho.entries[(compose(i, t), compose(j, t))];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(ReducedDensity { factors: kept_factors, entries: out })
}

pub(crate) fn hermiticity_defect(m: &DMatrix<C64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub(crate) fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut vals: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}
