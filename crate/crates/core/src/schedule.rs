//! Pulse sequences: atom preparation, cavity windows, Stark switching,
//! classical pulses, atomic rotations and projective detection.
//!
//! A [`Schedule`] is a piecewise-constant experiment over one composite space.
//! [`run_schedule`] folds [`apply_segment`] over it, multiplying the branch
//! probabilities of every post-selected detection.
//!
//! Durations are times in the inverse unit of the couplings. With couplings
//! of order one they are dimensionless (`coupling × time`); with couplings in
//! rad/s they are seconds, see [`Units`].

use std::f64::consts::TAU;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    build_jc_hamiltonian, build_vtype_hamiltonian_phased, CavityMode, CouplingParams, OperatorMatrix,
    Propagator,
};
use crate::error::{Error, Result};
use crate::hilbert::{basis_state, SpaceDescriptor, StateVector};

/// Smallest branch probability accepted by a post-selecting detection.
pub const MIN_BRANCH_PROBABILITY: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    A,
    B,
    C,
    G,
    E,
}

impl Level {
    /// Basis label of this level in `space`.
    pub fn index(self, space: &SpaceDescriptor) -> Result<usize> {
        match (space.atom_levels(), self) {
            (3, Level::A) => Ok(0),
            (3, Level::B) => Ok(1),
            (3, Level::C) => Ok(2),
            (2, Level::G) => Ok(0),
            (2, Level::E) => Ok(1),
            (n, level) => Err(Error::ModelMismatch(format!("level {level:?} does not exist for a {n}-level atom"))),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Level::A => "a",
            Level::B => "b",
            Level::C => "c",
            Level::G => "g",
            Level::E => "e",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Vtype,
    Jc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WindowMode {
    A,
    B,
    #[serde(rename = "both")]
    Both,
}

impl From<CavityMode> for WindowMode {
    fn from(mode: CavityMode) -> Self {
        match mode {
            CavityMode::A => WindowMode::A,
            CavityMode::B => WindowMode::B,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    Dimensionless,
    Physical,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

fn is_vacuum(v: &[usize; 2]) -> bool {
    *v == [0, 0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PulseSegment {
    /// Either the superposition `cosθ|upper⟩ + e^{iφ} sinθ|other⟩` (`a`/`b`
    /// for the V-type atom, `e`/`g` for the two-level atom) or a pure
    /// `level`, times the Fock state `field = [n_a, n_b]`.
    PrepareAtom {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta: Option<f64>,
        #[serde(default, skip_serializing_if = "is_zero")]
        phi: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        level: Option<Level>,
        #[serde(default, skip_serializing_if = "is_vacuum")]
        field: [usize; 2],
    },
    CavityWindow {
        model: Model,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mode: Option<WindowMode>,
        duration: f64,
        #[serde(default, skip_serializing_if = "is_zero")]
        dipole_phase: f64,
    },
    Stark {
        on: bool,
    },
    LaserPi {
        transition: [Level; 2],
        pulse_area: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rabi_frequency: Option<f64>,
    },
    Rotation {
        transition: [Level; 2],
        theta: f64,
        #[serde(default)]
        phi: f64,
    },
    Detect {
        level: Level,
        post_select: bool,
    },
}

impl PulseSegment {
    pub fn prepare_superposition(theta: f64, phi: f64) -> Self {
        PulseSegment::PrepareAtom { theta: Some(theta), phi, level: None, field: [0, 0] }
    }

    pub fn prepare_level(level: Level, n_a: usize, n_b: usize) -> Self {
        PulseSegment::PrepareAtom { theta: None, phi: 0.0, level: Some(level), field: [n_a, n_b] }
    }

    pub fn vtype_window(mode: WindowMode, duration: f64) -> Self {
        PulseSegment::CavityWindow { model: Model::Vtype, mode: Some(mode), duration, dipole_phase: 0.0 }
    }

    pub fn jc_window(mode: CavityMode, duration: f64) -> Self {
        PulseSegment::CavityWindow { model: Model::Jc, mode: Some(mode.into()), duration, dipole_phase: 0.0 }
    }

    pub fn detect(level: Level) -> Self {
        PulseSegment::Detect { level, post_select: true }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            PulseSegment::PrepareAtom { .. } => "prepare_atom",
            PulseSegment::CavityWindow { .. } => "cavity_window",
            PulseSegment::Stark { .. } => "stark",
            PulseSegment::LaserPi { .. } => "laser_pi",
            PulseSegment::Rotation { .. } => "rotation",
            PulseSegment::Detect { .. } => "detect",
        }
    }

    /// Elapsed time: window durations, and `pulse_area / Ω` for a laser pulse
    /// with a recorded Rabi frequency. Everything else is instantaneous.
    pub fn duration(&self) -> f64 {
        match self {
            PulseSegment::CavityWindow { duration, .. } => *duration,
            PulseSegment::LaserPi { pulse_area, rabi_frequency: Some(omega), .. } if *omega > 0.0 => {
                pulse_area / omega
            }
            _ => 0.0,
        }
    }

    fn validate(&self, space: &SpaceDescriptor) -> std::result::Result<(), String> {
        let level_ok = |l: Level| l.index(space).map_err(|e| e.to_string());
        match *self {
            PulseSegment::PrepareAtom { theta, phi, level, field } => {
                match (theta, level) {
                    (Some(t), None) if t.is_finite() && phi.is_finite() => {}
                    (Some(_), None) => return Err("theta and phi must be finite".into()),
                    (None, Some(l)) => {
                        level_ok(l)?;
                    }
                    _ => return Err("prepare_atom needs exactly one of `theta` or `level`".into()),
                }
                if field[0] >= space.dim_a() || field[1] >= space.dim_b() {
                    return Err(format!("field {field:?} outside the Fock truncation"));
                }
            }
            PulseSegment::CavityWindow { model, mode, duration, dipole_phase } => {
                if !duration.is_finite() || duration < 0.0 {
                    return Err(format!("duration {duration} must be finite and >= 0"));
                }
                if !dipole_phase.is_finite() {
                    return Err("dipole_phase must be finite".into());
                }
                match model {
                    Model::Vtype if mode.is_none() => return Err("vtype window needs a mode".into()),
                    Model::Jc if mode == Some(WindowMode::Both) => {
                        return Err("a jc window couples a single mode".into())
                    }
                    Model::Jc if dipole_phase != 0.0 => {
                        return Err("dipole_phase applies to vtype windows only".into())
                    }
                    _ => {}
                }
            }
            PulseSegment::Stark { .. } => {}
            PulseSegment::LaserPi { transition, pulse_area, rabi_frequency } => {
                check_transition(space, transition)?;
                if !(0.0..=TAU).contains(&pulse_area) {
                    return Err(format!("pulse_area {pulse_area} outside [0, 2π]"));
                }
                if let Some(omega) = rabi_frequency {
                    if !omega.is_finite() || omega <= 0.0 {
                        return Err(format!("rabi_frequency {omega} must be positive"));
                    }
                }
            }
            PulseSegment::Rotation { transition, theta, phi } => {
                check_transition(space, transition)?;
                if !theta.is_finite() || !phi.is_finite() {
                    return Err("rotation angles must be finite".into());
                }
            }
            PulseSegment::Detect { level, .. } => {
                level_ok(level)?;
            }
        }
        Ok(())
    }
}

fn check_transition(space: &SpaceDescriptor, transition: [Level; 2]) -> std::result::Result<(), String> {
    let upper = transition[0].index(space).map_err(|e| e.to_string())?;
    let lower = transition[1].index(space).map_err(|e| e.to_string())?;
    if upper == lower {
        return Err("transition needs two distinct levels".into());
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub space: SpaceDescriptor,
    #[serde(default)]
    pub units: Units,
    pub segments: Vec<PulseSegment>,
}

impl Schedule {
    pub fn new(space: SpaceDescriptor) -> Self {
        Schedule { space, units: Units::default(), segments: Vec::new() }
    }

    pub fn with_units(mut self, units: Units) -> Self {
        self.units = units;
        self
    }

    pub fn push(mut self, segment: PulseSegment) -> Self {
        self.segments.push(segment);
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (index, seg) in self.segments.iter().enumerate() {
            if index > 0 && matches!(seg, PulseSegment::PrepareAtom { .. }) {
                return Err(Error::InvalidSegment {
                    index,
                    reason: "prepare_atom may only appear as the first segment".into(),
                });
            }
            seg.validate(&self.space).map_err(|reason| Error::InvalidSegment { index, reason })?;
        }
        Ok(())
    }

    /// The same schedule without its leading `prepare_atom`, for chaining runs.
    pub fn without_preparation(&self) -> Schedule {
        let segments = self
            .segments
            .iter()
            .filter(|s| !matches!(s, PulseSegment::PrepareAtom { .. }))
            .cloned()
            .collect();
        Schedule { segments, ..self.clone() }
    }

    /// Sum of segment durations (see [`PulseSegment::duration`]).
    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(PulseSegment::duration).sum()
    }

    /// Durations of the cavity windows, in order.
    pub fn window_durations(&self) -> Vec<f64> {
        self.segments
            .iter()
            .filter(|s| matches!(s, PulseSegment::CavityWindow { .. }))
            .map(PulseSegment::duration)
            .collect()
    }

    /// State before any segment acts: the prepared state if the schedule
    /// starts with `prepare_atom`, else basis state 0.
    pub fn initial_state(&self) -> Result<StateVector> {
        match self.segments.first() {
            Some(seg @ PulseSegment::PrepareAtom { .. }) => prepared_state(&self.space, seg),
            _ => basis_state(&self.space, 0, 0, 0),
        }
    }
}

/// On-disk schedule: the schedule plus the couplings it was built for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleFile {
    pub space: SpaceDescriptor,
    pub params: CouplingParams,
    #[serde(default)]
    pub units: Units,
    pub segments: Vec<PulseSegment>,
}

impl ScheduleFile {
    pub fn new(schedule: &Schedule, params: CouplingParams) -> Self {
        ScheduleFile {
            space: schedule.space,
            params,
            units: schedule.units,
            segments: schedule.segments.clone(),
        }
    }

    pub fn schedule(&self) -> Schedule {
        Schedule { space: self.space, units: self.units, segments: self.segments.clone() }
    }

    /// Parses and validates; malformed segments are reported with their index.
    pub fn parse(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            space: SpaceDescriptor,
            params: CouplingParams,
            #[serde(default)]
            units: Units,
            segments: Vec<serde_json::Value>,
        }
        let raw: Raw = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        raw.params.validate().map_err(|e| Error::Schema(e.to_string()))?;
        let segments = raw
            .segments
            .into_iter()
            .enumerate()
            .map(|(index, v)| {
                serde_json::from_value::<PulseSegment>(v)
                    .map_err(|e| Error::InvalidSegment { index, reason: e.to_string() })
            })
            .collect::<Result<Vec<_>>>()?;
        let file = ScheduleFile { space: raw.space, params: raw.params, units: raw.units, segments };
        file.schedule().validate()?;
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serializes")
    }
}

/// Executor state between segments.
#[derive(Clone, Debug, PartialEq)]
pub struct RunState {
    pub psi: StateVector,
    /// Whether the Stark field retargets the JC resonance to mode B.
    pub stark_on: bool,
}

impl RunState {
    pub fn new(psi: StateVector) -> Self {
        RunState { psi, stark_on: false }
    }

    pub fn resonant_mode(&self) -> CavityMode {
        if self.stark_on {
            CavityMode::B
        } else {
            CavityMode::A
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceEntry {
    pub segment: usize,
    pub state: StateVector,
    pub branch_probability: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub final_state: StateVector,
    pub success_probability: f64,
    pub trace: Vec<TraceEntry>,
}

impl RunResult {
    /// Branch probabilities of every detect segment, post-selecting or not.
    pub fn detection_probabilities(&self, schedule: &Schedule) -> Vec<f64> {
        self.trace
            .iter()
            .filter(|e| matches!(schedule.segments[e.segment], PulseSegment::Detect { .. }))
            .map(|e| e.branch_probability)
            .collect()
    }
}

pub(crate) fn prepared_state(space: &SpaceDescriptor, seg: &PulseSegment) -> Result<StateVector> {
    let PulseSegment::PrepareAtom { theta, phi, level, field } = *seg else {
        return Err(Error::InvalidParameter("not a prepare_atom segment".into()));
    };
    let [n_a, n_b] = field;
    match (theta, level) {
        (None, Some(level)) => basis_state(space, level.index(space)?, n_a, n_b),
        (Some(theta), None) => {
            // V-type: cosθ|a⟩ + e^{iφ} sinθ|b⟩; two-level: cosθ|e⟩ + e^{iφ} sinθ|g⟩.
            let (upper, other) = if space.is_three_level() { (0, 1) } else { (1, 0) };
            let up = basis_state(space, upper, n_a, n_b)?.scale(C64::new(theta.cos(), 0.0));
            let down = basis_state(space, other, n_a, n_b)?.scale(C64::from_polar(theta.sin(), phi));
            up.add(&down)
        }
        _ => Err(Error::InvalidParameter("prepare_atom needs exactly one of theta or level".into())),
    }
}

/// Hamiltonian of a cavity window given the current Stark switch.
pub fn window_hamiltonian(
    space: &SpaceDescriptor,
    model: Model,
    mode: Option<WindowMode>,
    dipole_phase: f64,
    stark_on: bool,
    params: &CouplingParams,
) -> Result<OperatorMatrix> {
    match model {
        Model::Vtype => {
            let (g1, g2) = match mode {
                Some(WindowMode::A) => (params.g1, 0.0),
                Some(WindowMode::B) => (0.0, params.g2),
                Some(WindowMode::Both) => (params.g1, params.g2),
                None => return Err(Error::ModelMismatch("vtype window needs a mode".into())),
            };
            build_vtype_hamiltonian_phased(space, g1, dipole_phase, g2, dipole_phase)
        }
        Model::Jc => {
            let resonant = if stark_on { CavityMode::B } else { CavityMode::A };
            match mode {
                None => {}
                Some(m) if m == WindowMode::from(resonant) => {}
                Some(m) => {
                    return Err(Error::ModelMismatch(format!(
                        "jc window on mode {m:?} but the Stark switch makes mode {resonant:?} resonant"
                    )))
                }
            }
            build_jc_hamiltonian(space, resonant, params.jc_coupling(resonant))
        }
    }
}

/// Unitary acting as the 2x2 matrix `u` on `(upper, lower)` (columns are
/// inputs), identity on the other atomic level and on the field.
fn atomic_unitary(space: &SpaceDescriptor, transition: [Level; 2], u: [[C64; 2]; 2]) -> Result<OperatorMatrix> {
    let levels = [transition[0].index(space)?, transition[1].index(space)?];
    let mut m = OperatorMatrix::identity(*space).entries().clone();
    let block = space.field_dim();
    for k in 0..block {
        for (r, &lr) in levels.iter().enumerate() {
            for (c, &lc) in levels.iter().enumerate() {
                m[(lr * block + k, lc * block + k)] = u[r][c];
            }
        }
    }
    OperatorMatrix::new(*space, m)
}

/// Resonant classical pulse of area `A` on `transition = [upper, lower]`:
/// `exp(−i A/2 (|u⟩⟨l| + |l⟩⟨u|))`.
pub fn laser_unitary(space: &SpaceDescriptor, transition: [Level; 2], pulse_area: f64) -> Result<OperatorMatrix> {
    let c = C64::new((pulse_area / 2.0).cos(), 0.0);
    let s = C64::new(0.0, -(pulse_area / 2.0).sin());
    atomic_unitary(space, transition, [[c, s], [s, c]])
}

/// `|u⟩ → cosθ|u⟩ − e^{iφ} sinθ|l⟩`, `|l⟩ → e^{−iφ} sinθ|u⟩ + cosθ|l⟩`.
pub fn rotation_unitary(space: &SpaceDescriptor, transition: [Level; 2], theta: f64, phi: f64) -> Result<OperatorMatrix> {
    let c = C64::new(theta.cos(), 0.0);
    let s = theta.sin();
    atomic_unitary(
        space,
        transition,
        [[c, C64::from_polar(s, -phi)], [-C64::from_polar(s, phi), c]],
    )
}

/// `|level⟩⟨level| ⊗ 1`.
pub fn level_projector(space: &SpaceDescriptor, level: Level) -> Result<OperatorMatrix> {
    let l = level.index(space)?;
    crate::dynamics::atomic_transition(space, l, l)
}

pub fn apply_segment(state: &RunState, seg: &PulseSegment, params: &CouplingParams) -> Result<(RunState, f64)> {
    let space = *state.psi.space();
    seg.validate(&space).map_err(|reason| Error::InvalidSegment { index: 0, reason })?;
    match *seg {
        PulseSegment::PrepareAtom { .. } => Ok((RunState { psi: prepared_state(&space, seg)?, ..state.clone() }, 1.0)),
        PulseSegment::CavityWindow { model, mode, duration, dipole_phase } => {
            let h = window_hamiltonian(&space, model, mode, dipole_phase, state.stark_on, params)?;
            let psi = Propagator::new(&h)?.evolve(&state.psi, duration)?;
            Ok((RunState { psi, ..state.clone() }, 1.0))
        }
        PulseSegment::Stark { on } => Ok((RunState { stark_on: on, ..state.clone() }, 1.0)),
        PulseSegment::LaserPi { transition, pulse_area, .. } => {
            let psi = laser_unitary(&space, transition, pulse_area)?.apply(&state.psi)?;
            Ok((RunState { psi, ..state.clone() }, 1.0))
        }
        PulseSegment::Rotation { transition, theta, phi } => {
            let psi = rotation_unitary(&space, transition, theta, phi)?.apply(&state.psi)?;
            Ok((RunState { psi, ..state.clone() }, 1.0))
        }
        PulseSegment::Detect { level, post_select } => {
            let projected = level_projector(&space, level)?.apply(&state.psi)?;
            let probability = projected.norm().powi(2);
            if !post_select {
                return Ok((state.clone(), probability));
            }
            if probability < MIN_BRANCH_PROBABILITY {
                return Err(Error::ImpossiblePostSelection { segment: 0, probability });
            }
            let psi = projected.scale(C64::new(1.0 / probability.sqrt(), 0.0));
            Ok((RunState { psi, ..state.clone() }, probability))
        }
    }
}

fn with_segment_index(err: Error, index: usize) -> Error {
    match err {
        Error::ImpossiblePostSelection { probability, .. } => {
            Error::ImpossiblePostSelection { segment: index, probability }
        }
        Error::InvalidSegment { reason, .. } => Error::InvalidSegment { index, reason },
        other => other,
    }
}

pub fn run_schedule(sched: &Schedule, params: &CouplingParams) -> Result<RunResult> {
    run_schedule_from(sched, params, basis_state(&sched.space, 0, 0, 0)?)
}

/// Runs `sched` starting from `initial` (replaced if the schedule prepares the atom).
pub fn run_schedule_from(sched: &Schedule, params: &CouplingParams, initial: StateVector) -> Result<RunResult> {
    sched.validate()?;
    params.validate()?;
    if initial.space() != &sched.space {
        return Err(Error::IncompatibleSpace(format!("{:?} vs {:?}", initial.space(), sched.space)));
    }
    initial.require_normalized()?;

    let mut state = RunState::new(initial);
    let mut success_probability = 1.0;
    let mut trace = Vec::with_capacity(sched.segments.len());
    for (index, seg) in sched.segments.iter().enumerate() {
        let (next, p) = apply_segment(&state, seg, params).map_err(|e| with_segment_index(e, index))?;
        if matches!(seg, PulseSegment::Detect { post_select: true, .. }) {
            success_probability *= p;
        }
        trace.push(TraceEntry { segment: index, state: next.psi.clone(), branch_probability: p });
        state = next;
    }
    Ok(RunResult { final_state: state.psi, success_probability, trace })
}

/// Probability of finding the V-type atom in `|c⟩` after both modes interact
/// for time `t`: `cos²θ sin²(g1 t) + sin²θ sin²(g2 t)`. At `θ = π/4` this is
/// `(sin²(g1 t) + sin²(g2 t)) / 2`.
pub fn detection_probability_pc(theta: f64, g1: f64, g2: f64, t: f64) -> f64 {
    theta.cos().powi(2) * (g1 * t).sin().powi(2) + theta.sin().powi(2) * (g2 * t).sin().powi(2)
}

/// Prepare `(θ, φ)`, expose both modes for `t`, detect `|c⟩` with post-selection.
pub fn detection_schedule(space: SpaceDescriptor, theta: f64, phi: f64, t: f64) -> Schedule {
    Schedule::new(space)
        .push(PulseSegment::prepare_superposition(theta, phi))
        .push(PulseSegment::vtype_window(WindowMode::Both, t))
        .push(PulseSegment::detect(Level::C))
}

/// Branch probability of `|c⟩` measured by the executor on [`detection_schedule`].
pub fn measured_detection_probability(
    space: SpaceDescriptor,
    theta: f64,
    phi: f64,
    params: &CouplingParams,
    t: f64,
) -> Result<f64> {
    let sched = detection_schedule(space, theta, phi, t);
    let sched = Schedule {
        segments: sched
            .segments
            .into_iter()
            .map(|s| match s {
                PulseSegment::Detect { level, .. } => PulseSegment::Detect { level, post_select: false },
                other => other,
            })
            .collect(),
        ..sched
    };
    let run = run_schedule(&sched, params)?;
    Ok(run.trace.last().map(|e| e.branch_probability).unwrap_or(0.0))
}
