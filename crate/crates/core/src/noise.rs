//! Cavity photon loss: Lindblad evolution of the density matrix with
//! collapse operators `√κ_a a` and `√κ_b b`.
//!
//! The integrator is classical fourth-order Runge-Kutta with a fixed step,
//! symmetrized after every step. Atomic segments (pulses, rotations,
//! detections) are instantaneous and act as `UρU†` or `PρP / tr(PρP)`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::dynamics::{annihilation, CavityMode, CouplingParams, OperatorMatrix, Propagator};
use crate::error::{Error, Result};
use crate::hilbert::{pure_to_density, DensityMatrix, SpaceDescriptor, StateVector};
use crate::schedule::{
    apply_segment, laser_unitary, level_projector, prepared_state, rotation_unitary, window_hamiltonian,
    PulseSegment, RunState, Schedule, Units, MIN_BRANCH_PROBABILITY,
};

/// Steps per fastest timescale required of `dt`.
pub const STEPS_PER_TIMESCALE: f64 = 50.0;

/// Upper bound on fidelity samples recorded per cavity window.
pub const MAX_SAMPLES_PER_WINDOW: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DampingParams {
    pub kappa_a: f64,
    pub kappa_b: f64,
    pub dt: f64,
}

impl DampingParams {
    pub fn new(kappa_a: f64, kappa_b: f64, dt: f64) -> Result<Self> {
        let d = DampingParams { kappa_a, kappa_b, dt };
        d.validate()?;
        Ok(d)
    }

    /// Decay rates `1/T_a`, `1/T_b` from photon lifetimes.
    pub fn from_lifetimes(t_a: f64, t_b: f64, dt: f64) -> Result<Self> {
        if !(t_a > 0.0 && t_b > 0.0) {
            return Err(Error::IntegratorConfig(format!("lifetimes must be positive, got {t_a}, {t_b}")));
        }
        Self::new(1.0 / t_a, 1.0 / t_b, dt)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, k) in [("kappa_a", self.kappa_a), ("kappa_b", self.kappa_b)] {
            if !(k.is_finite() && k >= 0.0) {
                return Err(Error::IntegratorConfig(format!("{name} = {k} must be finite and >= 0")));
            }
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::IntegratorConfig(format!("dt = {} must be positive", self.dt)));
        }
        Ok(())
    }

    pub fn is_closed(&self) -> bool {
        self.kappa_a == 0.0 && self.kappa_b == 0.0
    }

    pub fn with_scale(&self, s: f64) -> Self {
        DampingParams { kappa_a: self.kappa_a * s, kappa_b: self.kappa_b * s, ..*self }
    }

    /// Largest `dt` allowed for a Hamiltonian whose largest entry is `h_max`.
    pub fn max_step(&self, h_max: f64) -> f64 {
        1.0 / (STEPS_PER_TIMESCALE * self.kappa_a.max(self.kappa_b).max(h_max))
    }

    fn check_step(&self, h_max: f64) -> Result<()> {
        self.validate()?;
        let limit = self.max_step(h_max);
        if self.dt > limit * (1.0 + 1e-12) {
            return Err(Error::IntegratorConfig(format!(
                "dt = {:e} exceeds the stable step {limit:e} (1/(50 max(kappa, coupling)))",
                self.dt
            )));
        }
        Ok(())
    }
}

/// `dρ/dt = −i(H_eff ρ − ρ H_eff†) + Σ L ρ L†`, `H_eff = H − (i/2) Σ L†L`.
struct Lindbladian {
    h_eff: DMatrix<C64>,
    jumps: Vec<DMatrix<C64>>,
}

impl Lindbladian {
    fn new(h: &OperatorMatrix, damping: &DampingParams) -> Self {
        let space = h.space();
        let mut h_eff = h.entries().clone();
        let mut jumps = Vec::new();
        for (mode, kappa) in [(CavityMode::A, damping.kappa_a), (CavityMode::B, damping.kappa_b)] {
            if kappa > 0.0 {
                let l = annihilation(space, mode).entries() * C64::new(kappa.sqrt(), 0.0);
                h_eff -= (l.adjoint() * &l) * C64::new(0.0, 0.5);
                jumps.push(l);
            }
        }
        Lindbladian { h_eff, jumps }
    }

    fn apply(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let hr = &self.h_eff * rho;
        let mut out = (&hr - hr.adjoint()) * C64::new(0.0, -1.0);
        // ρ is Hermitian, so ρ H_eff† = (H_eff ρ)†.
        for l in &self.jumps {
            out += l * rho * l.adjoint();
        }
        out
    }

    fn rk4(&self, rho: &DMatrix<C64>, h: f64) -> DMatrix<C64> {
        let half = C64::new(h / 2.0, 0.0);
        let full = C64::new(h, 0.0);
        let k1 = self.apply(rho);
        let k2 = self.apply(&(rho + &k1 * half));
        let k3 = self.apply(&(rho + &k2 * half));
        let k4 = self.apply(&(rho + &k3 * full));
        let next = rho + (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * C64::new(h / 6.0, 0.0);
        symmetrize(next)
    }
}

fn symmetrize(m: DMatrix<C64>) -> DMatrix<C64> {
    (&m + m.adjoint()) * C64::new(0.5, 0.0)
}

fn max_entry(h: &OperatorMatrix) -> f64 {
    h.entries().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// One RK4 step of length `damping.dt`.
pub fn lindblad_step(rho: &DensityMatrix, h: &OperatorMatrix, damping: &DampingParams) -> Result<DensityMatrix> {
    if rho.space() != h.space() {
        return Err(Error::IncompatibleSpace(format!("{:?} vs {:?}", rho.space(), h.space())));
    }
    check_hermitian(h)?;
    damping.check_step(max_entry(h))?;
    let next = Lindbladian::new(h, damping).rk4(rho.entries(), damping.dt);
    DensityMatrix::new_unchecked(*rho.space(), next)
}

fn check_hermitian(h: &OperatorMatrix) -> Result<()> {
    let defect = h.hermiticity_defect();
    if defect > crate::dynamics::HERMITIAN_TOL {
        return Err(Error::InvalidHamiltonian(defect));
    }
    Ok(())
}

/// Evolves `rho` for `duration` in `ceil(duration/dt)` equal steps no longer
/// than `dt`. `observe(k, t, ρ)` runs after every step.
pub fn integrate(
    rho: &DensityMatrix,
    h: &OperatorMatrix,
    damping: &DampingParams,
    duration: f64,
    mut observe: impl FnMut(usize, f64, &DensityMatrix) -> Result<()>,
) -> Result<DensityMatrix> {
    if rho.space() != h.space() {
        return Err(Error::IncompatibleSpace(format!("{:?} vs {:?}", rho.space(), h.space())));
    }
    if !(duration.is_finite() && duration >= 0.0) {
        return Err(Error::InvalidTiming(format!("duration {duration} must be finite and >= 0")));
    }
    check_hermitian(h)?;
    damping.check_step(max_entry(h))?;
    let steps = step_count(duration, damping.dt);
    let step = if steps == 0 { 0.0 } else { duration / steps as f64 };
    let lindblad = Lindbladian::new(h, damping);
    let space = *rho.space();
    let mut current = rho.clone();
    for k in 1..=steps {
        current = DensityMatrix::new_unchecked(space, lindblad.rk4(current.entries(), step))?;
        observe(k, k as f64 * step, &current)?;
    }
    Ok(current)
}

fn step_count(duration: f64, dt: f64) -> usize {
    if duration == 0.0 {
        return 0;
    }
    ((duration / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DampedSample {
    pub t: f64,
    /// `⟨ψ_ideal(t)|ρ(t)|ψ_ideal(t)⟩`.
    pub fidelity: f64,
    pub trace: f64,
    pub min_eigenvalue: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DampedRunResult {
    pub final_rho: DensityMatrix,
    /// Noiseless output of the same schedule.
    pub ideal_state: StateVector,
    pub success_probability: f64,
    /// Final fidelity to [`Self::ideal_state`].
    pub fidelity: f64,
    pub samples: Vec<DampedSample>,
}

impl DampedRunResult {
    pub fn samples_csv(&self) -> String {
        let mut out = String::from("t,fidelity,trace,min_eigenvalue\n");
        for s in &self.samples {
            out.push_str(&format!(
                "{},{},{},{}\n",
                crate::format_sig15(s.t),
                crate::format_sig15(s.fidelity),
                crate::format_sig15(s.trace),
                crate::format_sig15(s.min_eigenvalue)
            ));
        }
        out
    }
}

fn sample(t: f64, rho: &DensityMatrix, ideal: &StateVector) -> Result<DampedSample> {
    Ok(DampedSample { t, fidelity: rho.overlap(ideal)?, trace: rho.trace(), min_eigenvalue: rho.min_eigenvalue() })
}

fn conjugate(rho: &DensityMatrix, u: &OperatorMatrix) -> Result<DensityMatrix> {
    let m = u.entries() * rho.entries() * u.entries().adjoint();
    DensityMatrix::new_unchecked(*rho.space(), symmetrize(m))
}

/// Density-matrix analogue of [`crate::schedule::run_schedule`]. Requires
/// [`Units::Physical`] whenever a decay rate is nonzero.
pub fn run_schedule_damped(sched: &Schedule, params: &CouplingParams, damping: &DampingParams) -> Result<DampedRunResult> {
    let initial = crate::hilbert::basis_state(&sched.space, 0, 0, 0)?;
    run_schedule_damped_from(sched, params, damping, initial)
}

pub fn run_schedule_damped_from(
    sched: &Schedule,
    params: &CouplingParams,
    damping: &DampingParams,
    initial: StateVector,
) -> Result<DampedRunResult> {
    sched.validate()?;
    params.validate()?;
    damping.validate()?;
    if !damping.is_closed() && sched.units != Units::Physical {
        return Err(Error::IntegratorConfig(
            "nonzero decay rates need physical units (couplings in rad/s, durations in s)".into(),
        ));
    }
    if initial.space() != &sched.space {
        return Err(Error::IncompatibleSpace(format!("{:?} vs {:?}", initial.space(), sched.space)));
    }
    initial.require_normalized()?;
    let space: SpaceDescriptor = sched.space;

    let mut ideal = RunState::new(initial.clone());
    let mut rho = pure_to_density(&initial)?;
    let mut success_probability = 1.0;
    let mut clock = 0.0;
    let mut samples = vec![sample(0.0, &rho, &ideal.psi)?];

    for (index, seg) in sched.segments.iter().enumerate() {
        let at = |e: Error| match e {
            Error::ImpossiblePostSelection { probability, .. } => Error::ImpossiblePostSelection { segment: index, probability },
            Error::InvalidSegment { reason, .. } => Error::InvalidSegment { index, reason },
            other => other,
        };
        let (next_ideal, _) = apply_segment(&ideal, seg, params).map_err(at)?;
        match *seg {
            PulseSegment::PrepareAtom { .. } => {
                rho = pure_to_density(&prepared_state(&space, seg).map_err(at)?)?;
            }
            PulseSegment::CavityWindow { model, mode, duration, dipole_phase } => {
                let h = window_hamiltonian(&space, model, mode, dipole_phase, ideal.stark_on, params).map_err(at)?;
                let propagator = Propagator::new(&h)?;
                let start = ideal.psi.clone();
                let steps = step_count(duration, damping.dt);
                let stride = steps.div_ceil(MAX_SAMPLES_PER_WINDOW).max(1);
                let t0 = clock;
                rho = integrate(&rho, &h, damping, duration, |k, t, r| {
                    if k % stride == 0 || k == steps {
                        samples.push(sample(t0 + t, r, &propagator.evolve(&start, t)?)?);
                    }
                    Ok(())
                })
                .map_err(at)?;
                clock += duration;
            }
            PulseSegment::Stark { .. } => {}
            PulseSegment::LaserPi { transition, pulse_area, .. } => {
                rho = conjugate(&rho, &laser_unitary(&space, transition, pulse_area)?)?;
            }
            PulseSegment::Rotation { transition, theta, phi } => {
                rho = conjugate(&rho, &rotation_unitary(&space, transition, theta, phi)?)?;
            }
            PulseSegment::Detect { level, post_select } => {
                if post_select {
                    let p = level_projector(&space, level)?;
                    let projected = p.entries() * rho.entries() * p.entries();
                    let probability = projected.trace().re;
                    if probability < MIN_BRANCH_PROBABILITY {
                        return Err(Error::ImpossiblePostSelection { segment: index, probability });
                    }
                    success_probability *= probability;
                    rho = DensityMatrix::new_unchecked(space, symmetrize(projected) / C64::new(probability, 0.0))?;
                }
            }
        }
        ideal = next_ideal;
        if !matches!(seg, PulseSegment::CavityWindow { .. } | PulseSegment::Stark { .. }) {
            samples.push(sample(clock, &rho, &ideal.psi)?);
        }
    }

    let fidelity = rho.overlap(&ideal.psi)?;
    Ok(DampedRunResult { final_rho: rho, ideal_state: ideal.psi, success_probability, fidelity, samples })
}
