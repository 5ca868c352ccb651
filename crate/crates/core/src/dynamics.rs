//! Atom-field Hamiltonians and unitary time evolution.
//!
//! Units: ħ = 1, couplings in rad per unit time, interaction picture at exact
//! resonance. Evolution is `exp(-iHt)`.
//!
//! Two coupling conventions are in use. The V-type atom accumulates phase
//! `g·t` per branch, the Jaynes-Cummings atom `Ω·t/2` with `Ω = 2μ√(n+1)` in
//! the excited sector. In the one-excitation sector they coincide when
//! `g = μ√(n+1)`, see [`equivalent_vtype_coupling`].

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{hermiticity_defect, SpaceDescriptor, StateVector};

/// Hermiticity tolerance accepted by the propagators.
pub const HERMITIAN_TOL: f64 = 1e-10;

pub const LEVEL_A: usize = 0;
pub const LEVEL_B: usize = 1;
pub const LEVEL_C: usize = 2;
pub const LEVEL_G: usize = 0;
pub const LEVEL_E: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CavityMode {
    A,
    B,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingParams {
    pub g1: f64,
    pub g2: f64,
    pub mu1: f64,
    pub mu2: f64,
}

impl Default for CouplingParams {
    fn default() -> Self {
        CouplingParams { g1: 1.0, g2: 1.0, mu1: 1.0, mu2: 1.0 }
    }
}

impl CouplingParams {
    pub fn new(g1: f64, g2: f64, mu1: f64, mu2: f64) -> Result<Self> {
        let p = CouplingParams { g1, g2, mu1, mu2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("g1", self.g1), ("g2", self.g2), ("mu1", self.mu1), ("mu2", self.mu2)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(format!("coupling {name} = {v} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    pub fn jc_coupling(&self, mode: CavityMode) -> f64 {
        match mode {
            CavityMode::A => self.mu1,
            CavityMode::B => self.mu2,
        }
    }

    pub fn largest(&self) -> f64 {
        self.g1.max(self.g2).max(self.mu1).max(self.mu2)
    }
}

/// Dense operator on a composite space.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    space: SpaceDescriptor,
    entries: DMatrix<C64>,
}

impl OperatorMatrix {
    pub fn new(space: SpaceDescriptor, entries: DMatrix<C64>) -> Result<Self> {
        if entries.nrows() != space.dim() || entries.ncols() != space.dim() {
            return Err(Error::InvalidDimension(format!(
                "{}x{} operator for dimension {}",
                entries.nrows(),
                entries.ncols(),
                space.dim()
            )));
        }
        Ok(OperatorMatrix { space, entries })
    }

    pub fn zeros(space: SpaceDescriptor) -> Self {
        OperatorMatrix { space, entries: DMatrix::zeros(space.dim(), space.dim()) }
    }

    pub fn identity(space: SpaceDescriptor) -> Self {
        OperatorMatrix { space, entries: DMatrix::identity(space.dim(), space.dim()) }
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn element(&self, row: usize, col: usize) -> C64 {
        self.entries[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        OperatorMatrix { space: self.space, entries: self.entries.adjoint() }
    }

    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.entries)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        self.check_space(psi.space())?;
        StateVector::new(self.space, &self.entries * psi.amplitudes())
    }

    pub fn matmul(&self, other: &OperatorMatrix) -> Result<Self> {
        self.check_space(&other.space)?;
        Ok(OperatorMatrix { space: self.space, entries: &self.entries * &other.entries })
    }

    pub fn commutator(&self, other: &OperatorMatrix) -> Result<Self> {
        self.check_space(&other.space)?;
        Ok(OperatorMatrix {
            space: self.space,
            entries: &self.entries * &other.entries - &other.entries * &self.entries,
        })
    }

    /// `⟨ψ|O|ψ⟩`.
    pub fn expectation(&self, psi: &StateVector) -> Result<C64> {
        self.check_space(psi.space())?;
        Ok(psi.amplitudes().dotc(&(&self.entries * psi.amplitudes())))
    }

    fn check_space(&self, other: &SpaceDescriptor) -> Result<()> {
        if &self.space != other {
            return Err(Error::IncompatibleSpace(format!("{:?} vs {other:?}", self.space)));
        }
        Ok(())
    }

    fn scaled_add(mut self, other: &OperatorMatrix, factor: C64) -> Self {
        self.entries += &other.entries * factor;
        self
    }
}

impl Serialize for OperatorMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Wire<'a> {
            space: &'a SpaceDescriptor,
            entries: Vec<[f64; 2]>,
        }
        let n = self.entries.nrows();
        let entries = (0..n)
            .flat_map(|r| (0..n).map(move |c| (r, c)))
            .map(|(r, c)| [self.entries[(r, c)].re, self.entries[(r, c)].im])
            .collect();
        Wire { space: &self.space, entries }.serialize(serializer)
    }
}

/// Annihilation operator of one cavity mode, identity on the atom and the other mode.
pub fn annihilation(space: &SpaceDescriptor, mode: CavityMode) -> OperatorMatrix {
    let mut op = OperatorMatrix::zeros(*space);
    for idx in 0..space.dim() {
        let (atom, n_a, n_b) = space.labels(idx).expect("index within dimension");
        let lowered = match mode {
            CavityMode::A if n_a > 0 => Some((n_a - 1, n_b, n_a)),
            CavityMode::B if n_b > 0 => Some((n_a, n_b - 1, n_b)),
            _ => None,
        };
        if let Some((na, nb, n)) = lowered {
            let row = space.index(atom, na, nb).expect("lowered label in range");
            op.entries[(row, idx)] = C64::new((n as f64).sqrt(), 0.0);
        }
    }
    op
}

/// `|to⟩⟨from|` on the atom, identity on the field.
pub fn atomic_transition(space: &SpaceDescriptor, to: usize, from: usize) -> Result<OperatorMatrix> {
    space.index(to, 0, 0)?;
    space.index(from, 0, 0)?;
    let mut op = OperatorMatrix::zeros(*space);
    let block = space.field_dim();
    for k in 0..block {
        op.entries[(to * block + k, from * block + k)] = C64::new(1.0, 0.0);
    }
    Ok(op)
}

/// V-type Hamiltonian `g1(a|a⟩⟨c| + a†|c⟩⟨a|) + g2(b|b⟩⟨c| + b†|c⟩⟨b|)`.
pub fn build_vtype_hamiltonian(space: &SpaceDescriptor, g1: f64, g2: f64) -> Result<OperatorMatrix> {
    build_vtype_hamiltonian_phased(space, g1, 0.0, g2, 0.0)
}

/// V-type Hamiltonian with a dipole phase on each coupling:
/// `g1(e^{iχ1} a|a⟩⟨c| + h.c.) + g2(e^{iχ2} b|b⟩⟨c| + h.c.)`.
pub fn build_vtype_hamiltonian_phased(
    space: &SpaceDescriptor,
    g1: f64,
    chi1: f64,
    g2: f64,
    chi2: f64,
) -> Result<OperatorMatrix> {
    if space.atom_levels() != 3 {
        return Err(Error::ModelMismatch("V-type Hamiltonian needs a three-level atom".into()));
    }
    let mut h = OperatorMatrix::zeros(*space);
    for (g, chi, mode, upper) in [(g1, chi1, CavityMode::A, LEVEL_A), (g2, chi2, CavityMode::B, LEVEL_B)] {
        if g == 0.0 {
            continue;
        }
        // a|upper⟩⟨c|: photon absorbed, atom raised.
        let raise = annihilation(space, mode).matmul(&atomic_transition(space, upper, LEVEL_C)?)?;
        let term = OperatorMatrix { space: *space, entries: raise.entries * C64::from_polar(g, chi) };
        h = h.scaled_add(&term, C64::new(1.0, 0.0)).scaled_add(&term.adjoint(), C64::new(1.0, 0.0));
    }
    Ok(h)
}

/// Jaynes-Cummings interaction `μ(a†σ + σ†a)` with `σ = |g⟩⟨e|`, on mode A or B.
pub fn build_jc_hamiltonian(space: &SpaceDescriptor, mode: CavityMode, mu: f64) -> Result<OperatorMatrix> {
    if space.atom_levels() != 2 {
        return Err(Error::ModelMismatch("Jaynes-Cummings Hamiltonian needs a two-level atom".into()));
    }
    let lower = atomic_transition(space, LEVEL_G, LEVEL_E)?;
    let emit = annihilation(space, mode).adjoint().matmul(&lower)?;
    let h = emit.clone().scaled_add(&emit.adjoint(), C64::new(1.0, 0.0));
    Ok(OperatorMatrix { space: *space, entries: h.entries * C64::new(mu, 0.0) })
}

/// `|e⟩⟨e| + n̂` for the given mode; conserved by the JC interaction on that mode.
pub fn excitation_number(space: &SpaceDescriptor, mode: CavityMode) -> Result<OperatorMatrix> {
    if space.atom_levels() != 2 {
        return Err(Error::ModelMismatch("excitation number is defined for the two-level atom".into()));
    }
    let a = annihilation(space, mode);
    let photons = a.adjoint().matmul(&a)?;
    Ok(photons.scaled_add(&atomic_transition(space, LEVEL_E, LEVEL_E)?, C64::new(1.0, 0.0)))
}

/// Eigendecomposition of a Hermitian Hamiltonian, reusable across times.
#[derive(Clone, Debug)]
pub struct Propagator {
    space: SpaceDescriptor,
    energies: DVector<f64>,
    eigenvectors: DMatrix<C64>,
}

impl Propagator {
    pub fn new(h: &OperatorMatrix) -> Result<Self> {
        let defect = h.hermiticity_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::InvalidHamiltonian(defect));
        }
        let sym = (&h.entries + h.entries.adjoint()) * C64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(sym);
        Ok(Propagator { space: h.space, energies: eig.eigenvalues, eigenvectors: eig.eigenvectors })
    }

    pub fn unitary(&self, t: f64) -> OperatorMatrix {
        let phases = DVector::from_iterator(
            self.energies.len(),
            self.energies.iter().map(|e| C64::from_polar(1.0, -e * t)),
        );
        let v = &self.eigenvectors;
        let entries = v * DMatrix::from_diagonal(&phases) * v.adjoint();
        OperatorMatrix { space: self.space, entries }
    }

    pub fn evolve(&self, psi: &StateVector, t: f64) -> Result<StateVector> {
        if !t.is_finite() {
            return Err(Error::InvalidParameter(format!("evolution time {t}")));
        }
        if psi.space() != &self.space {
            return Err(Error::IncompatibleSpace(format!("{:?} vs {:?}", psi.space(), self.space)));
        }
        let v = &self.eigenvectors;
        let mut coeffs = v.adjoint() * psi.amplitudes();
        for (c, e) in coeffs.iter_mut().zip(self.energies.iter()) {
            *c *= C64::from_polar(1.0, -e * t);
        }
        StateVector::new(self.space, v * coeffs)
    }
}

/// `exp(-iHt)|ψ⟩` by diagonalizing `H`.
pub fn evolve_numeric(psi: &StateVector, h: &OperatorMatrix, t: f64) -> Result<StateVector> {
    Propagator::new(h)?.evolve(psi, t)
}

/// `exp(-iHt)|ψ⟩` by a scaled-and-squared Taylor series. Independent of the
/// eigensolver; used to cross-check it.
pub fn evolve_series(psi: &StateVector, h: &OperatorMatrix, t: f64) -> Result<StateVector> {
    let defect = h.hermiticity_defect();
    if defect > HERMITIAN_TOL {
        return Err(Error::InvalidHamiltonian(defect));
    }
    let n = h.entries.nrows();
    let generator = &h.entries * C64::new(0.0, -t);
    let norm1 = (0..n)
        .map(|c| generator.column(c).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm1 > 0.5 { (norm1 / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = generator * C64::new(0.5f64.powi(squarings as i32), 0.0);

    let mut sum = DMatrix::<C64>::identity(n, n);
    let mut term = DMatrix::<C64>::identity(n, n);
    for k in 1..64 {
        term = &term * &scaled * C64::new(1.0 / k as f64, 0.0);
        sum += &term;
        if term.camax() < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    if psi.space() != &h.space {
        return Err(Error::IncompatibleSpace(format!("{:?} vs {:?}", psi.space(), h.space)));
    }
    StateVector::new(h.space, sum * psi.amplitudes())
}

/// `(cosθ|a⟩ + e^{iφ} sinθ|b⟩) ⊗ |0_A, 0_B⟩`.
pub fn vtype_initial_state(space: &SpaceDescriptor, theta: f64, phi: f64) -> Result<StateVector> {
    if space.atom_levels() != 3 {
        return Err(Error::ModelMismatch("V-type initial state needs a three-level atom".into()));
    }
    let mut amps = DVector::zeros(space.dim());
    amps[space.index(LEVEL_A, 0, 0)?] = C64::new(theta.cos(), 0.0);
    amps[space.index(LEVEL_B, 0, 0)?] = C64::from_polar(theta.sin(), phi);
    StateVector::new(*space, amps)
}

/// Closed-form V-type evolution from [`vtype_initial_state`]:
///
/// ```text
/// cosθ cos(g1 t)|a,0,0⟩ − i cosθ sin(g1 t)|c,1,0⟩
///   + e^{iφ} sinθ cos(g2 t)|b,0,0⟩ − i e^{iφ} sinθ sin(g2 t)|c,0,1⟩
/// ```
pub fn evolve_vtype_exact(
    space: &SpaceDescriptor,
    theta: f64,
    phi: f64,
    g1: f64,
    g2: f64,
    t: f64,
) -> Result<StateVector> {
    if space.atom_levels() != 3 {
        return Err(Error::ModelMismatch("V-type evolution needs a three-level atom".into()));
    }
    let (ct, st) = (theta.cos(), theta.sin());
    let branch_b = C64::from_polar(st, phi);
    let minus_i = C64::new(0.0, -1.0);
    let mut amps = DVector::zeros(space.dim());
    amps[space.index(LEVEL_A, 0, 0)?] = C64::new(ct * (g1 * t).cos(), 0.0);
    amps[space.index(LEVEL_C, 1, 0)?] = minus_i * ct * (g1 * t).sin();
    amps[space.index(LEVEL_B, 0, 0)?] = branch_b * (g2 * t).cos();
    amps[space.index(LEVEL_C, 0, 1)?] = minus_i * branch_b * (g2 * t).sin();
    StateVector::new(*space, amps)
}

/// Which one-excitation doublet of the JC ladder the atom starts in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JcSector {
    /// `|g, n⟩ ↔ |e, n−1⟩`, `Ω = 2μ√n`.
    GroundWithN,
    /// `|e, n⟩ ↔ |g, n+1⟩`, `Ω = 2μ√(n+1)`.
    ExcitedWithN,
}

pub fn jc_rabi_frequency(mu: f64, n_photons: usize, sector: JcSector) -> f64 {
    match sector {
        JcSector::GroundWithN => 2.0 * mu * (n_photons as f64).sqrt(),
        JcSector::ExcitedWithN => 2.0 * mu * ((n_photons + 1) as f64).sqrt(),
    }
}

/// Amplitudes `(c_g, c_e)` of the resonant JC doublet after time `t`.
///
/// Starting in `|g,n⟩`: `c_g = cos(Ωt/2)`, `c_e = −i sin(Ωt/2)`.
/// Starting in `|e,n⟩`: `c_e = cos(Ωt/2)`, `c_g = −i sin(Ωt/2)`.
pub fn jc_amplitudes(n_photons: usize, mu: f64, t: f64, sector: JcSector) -> Result<(C64, C64)> {
    if sector == JcSector::GroundWithN && n_photons == 0 {
        return Err(Error::NoDynamics("|g,0⟩ is uncoupled; the state is stationary".into()));
    }
    let half = jc_rabi_frequency(mu, n_photons, sector) * t / 2.0;
    let stay = C64::new(half.cos(), 0.0);
    let flip = C64::new(0.0, -half.sin());
    Ok(match sector {
        JcSector::GroundWithN => (stay, flip),
        JcSector::ExcitedWithN => (flip, stay),
    })
}

/// V-type coupling whose `g·t` phase matches the JC `Ωt/2` phase of the
/// excited doublet with `n` photons.
pub fn equivalent_vtype_coupling(mu: f64, n_photons: usize) -> f64 {
    mu * ((n_photons + 1) as f64).sqrt()
}
