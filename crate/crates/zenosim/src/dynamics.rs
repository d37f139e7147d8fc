//! Time propagation of the density matrix under the measurement master
//! equation.
//!
//! The equation of motion (ħ = 1, energies in rad/fs, time in fs) is
//!
//! ```text
//! dρ/dt = −i[H₀ − μE(t), ρ] − ½ Σ_m κ_m(t) [A_m, [A_m, ρ]]
//! ```
//!
//! integrated with classic fixed-step fourth-order Runge-Kutta. Continuous
//! observations contribute the double-commutator dephasing term inside their
//! piecewise-constant strength windows; instantaneous observations stop the
//! integrator exactly at the event time and apply the projective measurement
//! map before continuing. A companion pure-state propagator integrates
//! `iĊ = H(t)C` for unitary-only runs.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ControlField;
use crate::models::SystemSpec;
use crate::quantum::{
    rehermitize, DensityMatrix, HermitianOperator, Projector, DEFAULT_DEGENERACY_TOL,
};

/// Default integrator step in fs. Small enough for carrier frequencies up to
/// ~3.3 rad/fs and observation strengths up to 5 fs⁻¹.
pub const DEFAULT_DT: f64 = 0.01;

/// Fixed-step integrator selector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntegratorMethod {
    #[default]
    Rk4,
}

/// Integration window and step size.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PropagationConfig {
    pub t_start: f64,
    pub t_end: f64,
    /// Step size in fs.
    pub dt: f64,
    pub method: IntegratorMethod,
}

impl PropagationConfig {
    pub fn new(t_start: f64, t_end: f64, dt: f64) -> Result<Self> {
        if !(t_end > t_start) {
            return Err(Error::InvalidConfig(format!(
                "t_end ({t_end}) must exceed t_start ({t_start})"
            )));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {dt}")));
        }
        Ok(Self {
            t_start,
            t_end,
            dt,
            method: IntegratorMethod::Rk4,
        })
    }

    /// `[0, t_end]` at the default step.
    pub fn until(t_end: f64) -> Self {
        Self::new(0.0, t_end, DEFAULT_DT).expect("positive span")
    }

    /// Same window with a different step.
    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }
}

/// Operator observed by a measurement: a projector or a general Hermitian
/// quantity.
#[derive(Clone, Debug)]
pub enum ObservationOp {
    Projector(Projector),
    Observable(HermitianOperator),
}

impl ObservationOp {
    pub fn dim(&self) -> usize {
        match self {
            ObservationOp::Projector(p) => p.dim(),
            ObservationOp::Observable(a) => a.dim(),
        }
    }

    /// Apply the instantaneous-measurement map for this operator.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        match self {
            ObservationOp::Projector(p) => rho.measure_projector(p),
            ObservationOp::Observable(a) => rho.measure_observable(a, DEFAULT_DEGENERACY_TOL),
        }
    }

    /// Expectation value of the observed operator in the given state.
    pub fn observed_value(&self, rho: &DensityMatrix) -> Result<f64> {
        match self {
            ObservationOp::Projector(p) => rho.expectation_projector(p),
            ObservationOp::Observable(a) => rho.expectation(a),
        }
    }

    fn matrix(&self) -> &DMatrix<C64> {
        match self {
            ObservationOp::Projector(p) => p.matrix(),
            ObservationOp::Observable(a) => a.matrix(),
        }
    }
}

/// One instantaneous observation at a fixed time.
#[derive(Clone, Debug)]
pub struct InstantaneousEvent {
    pub time: f64,
    pub op: ObservationOp,
}

/// One strength window `κ(t) = γ` for `T₁ < t < T₂` of a continuous
/// observation.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ObservationWindow {
    pub t_start: f64,
    pub t_end: f64,
    /// Strength γ ≥ 0 in fs⁻¹.
    pub strength: f64,
}

/// Continuous measurement of a single operator with a piecewise-constant
/// strength schedule.
#[derive(Clone, Debug)]
pub struct ContinuousObservation {
    pub operator: ObservationOp,
    pub windows: Vec<ObservationWindow>,
}

impl ContinuousObservation {
    pub fn new(operator: ObservationOp, windows: Vec<ObservationWindow>) -> Result<Self> {
        for w in &windows {
            if !(w.t_start < w.t_end) {
                return Err(Error::InvalidConfig(format!(
                    "observation window must have T1 < T2, got [{}, {}]",
                    w.t_start, w.t_end
                )));
            }
            if !(w.strength >= 0.0) || !w.strength.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "observation strength must be finite and nonnegative, got {}",
                    w.strength
                )));
            }
        }
        Ok(Self { operator, windows })
    }

    /// Constant-strength observation over the whole window.
    pub fn constant(operator: ObservationOp, strength: f64, t_start: f64, t_end: f64) -> Result<Self> {
        Self::new(
            operator,
            vec![ObservationWindow {
                t_start,
                t_end,
                strength,
            }],
        )
    }
}

/// Record of one instantaneous event during a run: the expectation value of
/// the observed operator just before the kick.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EventRecord {
    pub time: f64,
    pub observed_value: f64,
}

/// Sampled history of a propagation.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub events: Vec<EventRecord>,
}

impl Trajectory {
    /// Populations of every level at every sample, row per sample.
    pub fn populations(&self) -> Vec<Vec<f64>> {
        self.states.iter().map(|s| s.populations()).collect()
    }

    /// Write CSV rows `t, p0..p{n-1} [, Re rho_ij, Im rho_ij ...]` for the
    /// requested coherences.
    pub fn write_csv<W: std::io::Write>(
        &self,
        out: &mut W,
        coherences: &[(usize, usize)],
    ) -> Result<()> {
        let n = self.states.first().map_or(0, |s| s.dim());
        write!(out, "t")?;
        for k in 0..n {
            write!(out, ",p{k}")?;
        }
        for (i, j) in coherences {
            write!(out, ",re_rho_{i}{j},im_rho_{i}{j}")?;
        }
        writeln!(out)?;
        for (t, s) in self.times.iter().zip(&self.states) {
            write!(out, "{t:.6}")?;
            for k in 0..n {
                write!(out, ",{:.12}", s.population(k))?;
            }
            for &(i, j) in coherences {
                let z = s.matrix()[(i, j)];
                write!(out, ",{:.12},{:.12}", z.re, z.im)?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Sampled history of a pure-state propagation.
#[derive(Clone, Debug)]
pub struct PureTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<C64>>,
}

impl PureTrajectory {
    pub fn final_state(&self) -> &DVector<C64> {
        self.states.last().expect("trajectory holds at least the initial state")
    }
}

// ---------------------------------------------------------------------------
// integration core
// ---------------------------------------------------------------------------

/// Continuous-observation dissipator compiled for the inner loop. Operators
/// that are diagonal in the working basis (population projectors, H₀) reduce
/// to an entrywise decay with rate ½κ(a_i − a_j)²; anything else falls back
/// to the dense double commutator.
enum CompiledDissipator {
    Diagonal { gap_sq: Vec<f64> },
    Dense { op: Vec<C64>, op_sq: Vec<C64> },
}

struct CompiledObs {
    dissipator: CompiledDissipator,
    windows: Vec<ObservationWindow>,
}

impl CompiledObs {
    fn strength_at(&self, t: f64) -> f64 {
        // windows are snapped to the step grid; closed interval keeps the
        // final substep of a grid-aligned window inside it
        self.windows
            .iter()
            .filter(|w| t >= w.t_start && t <= w.t_end)
            .map(|w| w.strength)
            .sum()
    }
}

fn is_diagonal(m: &DMatrix<C64>) -> bool {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..n {
            if i != j && m[(i, j)].norm() > 1e-14 {
                return false;
            }
        }
    }
    true
}

fn compile_observation(obs: &ContinuousObservation, n: usize, grid: impl Fn(f64) -> f64) -> CompiledObs {
    let m = obs.operator.matrix();
    let dissipator = if is_diagonal(m) {
        let diag: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
        let mut gap_sq = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let d = diag[i] - diag[j];
                gap_sq[i * n + j] = d * d;
            }
        }
        CompiledDissipator::Diagonal { gap_sq }
    } else {
        let op: Vec<C64> = (0..n * n).map(|k| m[(k / n, k % n)]).collect();
        let sq = m * m;
        let op_sq: Vec<C64> = (0..n * n).map(|k| sq[(k / n, k % n)]).collect();
        CompiledDissipator::Dense { op, op_sq }
    };
    let windows = obs
        .windows
        .iter()
        .map(|w| ObservationWindow {
            t_start: grid(w.t_start),
            t_end: grid(w.t_end),
            strength: w.strength,
        })
        .collect();
    CompiledObs {
        dissipator,
        windows,
    }
}

/// Flat-array right-hand-side evaluator for one system.
struct Engine {
    n: usize,
    energies: Vec<f64>,
    /// Nonzero dipole entries, both orientations.
    dipole_nz: Vec<(usize, usize, f64)>,
    obs: Vec<CompiledObs>,
    check_field: bool,
}

impl Engine {
    fn new(system: &SystemSpec, obs: Vec<CompiledObs>) -> Self {
        let n = system.dim();
        let mut dipole_nz = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = system.dipole_element(i, j);
                if v != 0.0 {
                    dipole_nz.push((i, j, v));
                }
            }
        }
        Self {
            n,
            energies: system.energies.clone(),
            dipole_nz,
            obs,
            check_field: true,
        }
    }

    /// dρ/dt at time `t` with field value `e`: out ← −i[H₀ − μe, ρ] − ½Σκ[A,[A,ρ]].
    fn rhs(&self, t: f64, e: f64, rho: &[C64], out: &mut [C64], scratch: &mut [C64]) {
        let n = self.n;
        for i in 0..n {
            let ei = self.energies[i];
            for j in 0..n {
                let w = ei - self.energies[j];
                let z = rho[i * n + j];
                // −i·w·z
                out[i * n + j] = C64::new(w * z.im, -w * z.re);
            }
        }
        if e != 0.0 {
            // +iE[μ, ρ]
            for &(a, b, m) in &self.dipole_nz {
                let c = e * m;
                for j in 0..n {
                    let z = rho[b * n + j];
                    let t_ = &mut out[a * n + j];
                    t_.re -= c * z.im;
                    t_.im += c * z.re;
                }
                for i in 0..n {
                    let z = rho[i * n + a];
                    let t_ = &mut out[i * n + b];
                    t_.re += c * z.im;
                    t_.im -= c * z.re;
                }
            }
        }
        for obs in &self.obs {
            let kappa = obs.strength_at(t);
            if kappa == 0.0 {
                continue;
            }
            match &obs.dissipator {
                CompiledDissipator::Diagonal { gap_sq } => {
                    for k in 0..n * n {
                        let r = 0.5 * kappa * gap_sq[k];
                        out[k] -= C64::new(r * rho[k].re, r * rho[k].im);
                    }
                }
                CompiledDissipator::Dense { op, op_sq } => {
                    // −½κ(A²ρ + ρA² − 2AρA)
                    let half = 0.5 * kappa;
                    matmul(n, op, rho, scratch); // Aρ
                    for i in 0..n {
                        for j in 0..n {
                            // (AρA)_ij = Σ_k (Aρ)_ik A_kj
                            let mut acc = C64::new(0.0, 0.0);
                            for k in 0..n {
                                acc += scratch[i * n + k] * op[k * n + j];
                            }
                            out[i * n + j] += 2.0 * half * acc;
                        }
                    }
                    matmul(n, op_sq, rho, scratch); // A²ρ
                    for k in 0..n * n {
                        out[k] -= half * scratch[k];
                    }
                    matmul(n, rho, op_sq, scratch); // ρA²
                    for k in 0..n * n {
                        out[k] -= half * scratch[k];
                    }
                }
            }
        }
    }
}

fn matmul(n: usize, a: &[C64], b: &[C64], out: &mut [C64]) {
    for i in 0..n {
        for j in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..n {
                acc += a[i * n + k] * b[k * n + j];
            }
            out[i * n + j] = acc;
        }
    }
}

struct Rk4Buffers {
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    tmp: Vec<C64>,
    scratch: Vec<C64>,
}

impl Rk4Buffers {
    fn new(len: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); len];
        Self {
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            tmp: z.clone(),
            scratch: z,
        }
    }
}

/// One RK4 step of size `h` from time `t`, in place.
fn rk4_step(
    engine: &Engine,
    field: &ControlField,
    t: f64,
    h: f64,
    rho: &mut [C64],
    buf: &mut Rk4Buffers,
) -> Result<()> {
    let th = t + 0.5 * h;
    let te = t + h;
    let e0 = field.evaluate(t);
    let eh = field.evaluate(th);
    let ee = field.evaluate(te);
    if !e0.is_finite() || !eh.is_finite() || !ee.is_finite() {
        return Err(Error::NonFiniteField { time: t });
    }
    let len = rho.len();
    engine.rhs(t, e0, rho, &mut buf.k1, &mut buf.scratch);
    for k in 0..len {
        buf.tmp[k] = rho[k] + 0.5 * h * buf.k1[k];
    }
    engine.rhs(th, eh, &buf.tmp, &mut buf.k2, &mut buf.scratch);
    for k in 0..len {
        buf.tmp[k] = rho[k] + 0.5 * h * buf.k2[k];
    }
    engine.rhs(th, eh, &buf.tmp, &mut buf.k3, &mut buf.scratch);
    for k in 0..len {
        buf.tmp[k] = rho[k] + h * buf.k3[k];
    }
    engine.rhs(te, ee, &buf.tmp, &mut buf.k4, &mut buf.scratch);
    let w = h / 6.0;
    for k in 0..len {
        rho[k] += w * (buf.k1[k] + 2.0 * (buf.k2[k] + buf.k3[k]) + buf.k4[k]);
    }
    Ok(())
}

fn to_flat(m: &DMatrix<C64>) -> Vec<C64> {
    let n = m.nrows();
    (0..n * n).map(|k| m[(k / n, k % n)]).collect()
}

fn to_matrix(n: usize, flat: &[C64]) -> DMatrix<C64> {
    DMatrix::from_fn(n, n, |i, j| flat[i * n + j])
}

fn validate_inputs(
    rho_dim: usize,
    system: &SystemSpec,
    cont_obs: &[ContinuousObservation],
    inst_events: &[InstantaneousEvent],
    config: &PropagationConfig,
) -> Result<()> {
    let n = system.dim();
    if rho_dim != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rho_dim,
        });
    }
    for obs in cont_obs {
        if obs.operator.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: obs.operator.dim(),
            });
        }
    }
    for ev in inst_events {
        if ev.op.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: ev.op.dim(),
            });
        }
        if ev.time < config.t_start - 1e-12 || ev.time > config.t_end + 1e-12 {
            return Err(Error::EventOutOfRange {
                time: ev.time,
                t_start: config.t_start,
                t_end: config.t_end,
            });
        }
    }
    if !(config.t_end > config.t_start) || !(config.dt > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "bad window [{}, {}] with dt {}",
            config.t_start, config.t_end, config.dt
        )));
    }
    Ok(())
}

/// Target number of trajectory samples held in memory.
const MAX_SAMPLES: usize = 2000;

fn integrate(
    rho0: &DensityMatrix,
    system: &SystemSpec,
    field: &ControlField,
    cont_obs: &[ContinuousObservation],
    inst_events: &[InstantaneousEvent],
    config: &PropagationConfig,
    mut on_sample: Option<&mut dyn FnMut(f64, &[C64])>,
    mut on_event: Option<&mut dyn FnMut(EventRecord)>,
) -> Result<Vec<C64>> {
    validate_inputs(rho0.dim(), system, cont_obs, inst_events, config)?;
    let n = system.dim();
    let dt = config.dt;
    let snap = |t: f64| config.t_start + ((t - config.t_start) / dt).round() * dt;
    let compiled: Vec<CompiledObs> = cont_obs
        .iter()
        .map(|o| compile_observation(o, n, snap))
        .collect();
    let engine = Engine::new(system, compiled);
    let mut buf = Rk4Buffers::new(n * n);
    let mut rho = to_flat(rho0.matrix());

    // events ordered by time; ties applied in listed order
    let mut order: Vec<usize> = (0..inst_events.len()).collect();
    order.sort_by(|&a, &b| {
        inst_events[a]
            .time
            .partial_cmp(&inst_events[b].time)
            .expect("event times are finite")
    });

    let total_steps = ((config.t_end - config.t_start) / dt).ceil() as usize;
    let stride = (total_steps / MAX_SAMPLES).max(1);

    if let Some(cb) = on_sample.as_deref_mut() {
        cb(config.t_start, &rho);
    }

    let mut t = config.t_start;
    let mut steps_done: usize = 0;
    let mut apply_event = |ev: &InstantaneousEvent,
                           rho: &mut Vec<C64>,
                           t: f64,
                           on_event: &mut Option<&mut dyn FnMut(EventRecord)>,
                           on_sample: &mut Option<&mut dyn FnMut(f64, &[C64])>|
     -> Result<()> {
        let state = DensityMatrix::from_matrix_unchecked(to_matrix(n, rho));
        let observed = ev.op.observed_value(&state)?;
        let after = ev.op.apply(&state)?;
        *rho = to_flat(after.matrix());
        if let Some(cb) = on_event.as_deref_mut() {
            cb(EventRecord {
                time: t,
                observed_value: observed,
            });
        }
        if let Some(cb) = on_sample.as_deref_mut() {
            cb(t, rho);
        }
        Ok(())
    };

    let mut run_until = |target: f64,
                         t: &mut f64,
                         rho: &mut Vec<C64>,
                         steps_done: &mut usize,
                         on_sample: &mut Option<&mut dyn FnMut(f64, &[C64])>|
     -> Result<()> {
        while target - *t > 1e-9 * dt {
            let h = dt.min(target - *t);
            rk4_step(&engine, field, *t, h, rho, &mut buf)?;
            *t += h;
            *steps_done += 1;
            if let Some(cb) = on_sample.as_deref_mut() {
                if *steps_done % stride == 0 {
                    cb(*t, rho);
                }
            }
        }
        *t = target;
        Ok(())
    };

    for &idx in &order {
        let ev = &inst_events[idx];
        run_until(ev.time.max(config.t_start), &mut t, &mut rho, &mut steps_done, &mut on_sample)?;
        apply_event(ev, &mut rho, t, &mut on_event, &mut on_sample)?;
    }
    run_until(config.t_end, &mut t, &mut rho, &mut steps_done, &mut on_sample)?;

    if let Some(cb) = on_sample.as_deref_mut() {
        if steps_done % stride != 0 {
            cb(t, &rho);
        }
    }
    Ok(rho)
}

/// Propagate a density matrix, returning the final state and the sampled
/// trajectory (including one record per instantaneous event).
pub fn propagate(
    rho0: &DensityMatrix,
    system: &SystemSpec,
    field: &ControlField,
    cont_obs: &[ContinuousObservation],
    inst_events: &[InstantaneousEvent],
    config: &PropagationConfig,
) -> Result<(DensityMatrix, Trajectory)> {
    let n = system.dim();
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut events = Vec::new();
    let mut sampler = |t: f64, rho: &[C64]| {
        times.push(t);
        states.push(DensityMatrix::from_matrix_unchecked(to_matrix(n, rho)));
    };
    let mut recorder = |rec: EventRecord| events.push(rec);
    let rho = integrate(
        rho0,
        system,
        field,
        cont_obs,
        inst_events,
        config,
        Some(&mut sampler),
        Some(&mut recorder),
    )?;
    let mut m = to_matrix(n, &rho);
    rehermitize(&mut m);
    let last = DensityMatrix::from_matrix_unchecked(m);
    if let Some(s) = states.last_mut() {
        *s = last.clone();
    }
    Ok((
        last,
        Trajectory {
            times,
            states,
            events,
        },
    ))
}

/// Propagate without recording a trajectory; the lean path used inside
/// optimization loops. Event records are still collected.
pub fn propagate_final(
    rho0: &DensityMatrix,
    system: &SystemSpec,
    field: &ControlField,
    cont_obs: &[ContinuousObservation],
    inst_events: &[InstantaneousEvent],
    config: &PropagationConfig,
) -> Result<(DensityMatrix, Vec<EventRecord>)> {
    let n = system.dim();
    let mut events = Vec::new();
    let mut recorder = |rec: EventRecord| events.push(rec);
    let rho = integrate(
        rho0,
        system,
        field,
        cont_obs,
        inst_events,
        config,
        None,
        Some(&mut recorder),
    )?;
    let mut m = to_matrix(n, &rho);
    rehermitize(&mut m);
    Ok((DensityMatrix::from_matrix_unchecked(m), events))
}

/// Propagate a pure state under the unitary part only, `iĊ = (H₀ − μE(t))C`.
/// The input must be normalized; the sampled trajectory includes the initial
/// and final states.
pub fn propagate_pure(
    state0: &DVector<C64>,
    system: &SystemSpec,
    field: &ControlField,
    config: &PropagationConfig,
) -> Result<PureTrajectory> {
    let n = system.dim();
    if state0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: state0.len(),
        });
    }
    let norm = state0.norm();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::NotNormalized { norm });
    }
    if !(config.t_end > config.t_start) || !(config.dt > 0.0) {
        return Err(Error::InvalidConfig("bad propagation window".into()));
    }
    let dt = config.dt;
    let energies = &system.energies;
    let mut dipole_nz = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let v = system.dipole_element(i, j);
            if v != 0.0 {
                dipole_nz.push((i, j, v));
            }
        }
    }
    let rhs = |t: f64, c: &[C64], out: &mut [C64]| -> Result<()> {
        let e = field.evaluate(t);
        if !e.is_finite() {
            return Err(Error::NonFiniteField { time: t });
        }
        for i in 0..n {
            let z = c[i];
            let w = energies[i];
            out[i] = C64::new(w * z.im, -w * z.re);
        }
        for &(a, b, m) in &dipole_nz {
            let g = e * m;
            let z = c[b];
            out[a].re -= g * z.im;
            out[a].im += g * z.re;
        }
        Ok(())
    };

    let total_steps = ((config.t_end - config.t_start) / dt).ceil() as usize;
    let stride = (total_steps / MAX_SAMPLES).max(1);
    let mut times = vec![config.t_start];
    let mut states = vec![state0.clone()];
    let mut c: Vec<C64> = state0.iter().copied().collect();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (
        vec![C64::new(0.0, 0.0); n],
        vec![C64::new(0.0, 0.0); n],
        vec![C64::new(0.0, 0.0); n],
        vec![C64::new(0.0, 0.0); n],
        vec![C64::new(0.0, 0.0); n],
    );
    let mut t = config.t_start;
    let mut steps = 0usize;
    while config.t_end - t > 1e-9 * dt {
        let h = dt.min(config.t_end - t);
        rhs(t, &c, &mut k1)?;
        for i in 0..n {
            tmp[i] = c[i] + 0.5 * h * k1[i];
        }
        rhs(t + 0.5 * h, &tmp, &mut k2)?;
        for i in 0..n {
            tmp[i] = c[i] + 0.5 * h * k2[i];
        }
        rhs(t + 0.5 * h, &tmp, &mut k3)?;
        for i in 0..n {
            tmp[i] = c[i] + h * k3[i];
        }
        rhs(t + h, &tmp, &mut k4)?;
        let w = h / 6.0;
        for i in 0..n {
            c[i] += w * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }
        t += h;
        steps += 1;
        if steps % stride == 0 || config.t_end - t <= 1e-9 * dt {
            times.push(t);
            states.push(DVector::from_iterator(n, c.iter().copied()));
        }
    }
    if *times.last().unwrap() < config.t_end {
        times.push(config.t_end);
        states.push(DVector::from_iterator(n, c.iter().copied()));
    }
    Ok(PureTrajectory { times, states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    fn free_system(n: usize, energies: &[f64]) -> SystemSpec {
        SystemSpec {
            name: "test".into(),
            labels: (0..n).map(|k| k.to_string()).collect(),
            energies: energies.to_vec(),
            dipole: vec![0.0; n * n],
            transition_frequencies: vec![],
            initial: 0,
            target: n - 1,
            t_final: 200.0,
            sigma: None,
            alpha: 0.0,
            notes: String::new(),
        }
    }

    #[test]
    fn free_evolution_keeps_populations() {
        let system = models::model1();
        let rho0 = system.initial_state();
        let config = PropagationConfig::new(0.0, 50.0, 0.01).unwrap();
        let (rho, traj) =
            propagate(&rho0, &system, &ControlField::Zero, &[], &[], &config).unwrap();
        assert!((rho.population(0) - 1.0).abs() <= 1e-10);
        for s in &traj.states {
            assert!((s.population(0) - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn constant_observation_dephases_at_known_rate() {
        // H = 0, single continuous observation of A = diag(a0..an) with
        // constant κ: ρ_ij(t) = ρ_ij(0)·exp(−½κ(a_i−a_j)²t)
        let system = free_system(3, &[0.0, 0.0, 0.0]);
        let diag = [0.3, 1.0, 2.2];
        let a = HermitianOperator::from_diagonal(&diag);
        let kappa = 0.35;
        let t_end = 40.0;
        let mut m = DMatrix::from_fn(3, 3, |i, j| if i == j { C64::new(1.0 / 3.0, 0.0) } else { C64::new(0.1, if i < j { 0.05 } else { -0.05 }) });
        rehermitize(&mut m);
        let rho0 = DensityMatrix::new(m.clone()).unwrap();
        let obs = ContinuousObservation::constant(
            ObservationOp::Observable(a),
            kappa,
            0.0,
            t_end,
        )
        .unwrap();
        let config = PropagationConfig::new(0.0, t_end, 0.01).unwrap();
        let (rho, _) =
            propagate(&rho0, &system, &ControlField::Zero, &[obs], &[], &config).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let d = diag[i] - diag[j];
                let expect = m[(i, j)] * (-0.5 * kappa * d * d * t_end).exp();
                let got = rho.matrix()[(i, j)];
                assert!(
                    (got - expect).norm() <= 1e-6,
                    "entry ({i},{j}): got {got}, expected {expect}"
                );
            }
        }
    }

    #[test]
    fn pure_free_evolution_gives_exact_phases() {
        let system = free_system(3, &[0.5, 1.5, 2.5]);
        let mut psi = DVector::zeros(3);
        let amp = (1.0f64 / 3.0).sqrt();
        for i in 0..3 {
            psi[i] = C64::new(amp, 0.0);
        }
        let config = PropagationConfig::new(0.0, 25.0, 0.01).unwrap();
        let traj = propagate_pure(&psi, &system, &ControlField::Zero, &config).unwrap();
        let end = traj.final_state();
        for i in 0..3 {
            let expect = psi[i] * C64::new(0.0, -system.energies[i] * 25.0).exp();
            assert!((end[i] - expect).norm() <= 1e-8);
        }
    }

    #[test]
    fn density_and_pure_propagation_agree() {
        let system = models::model3();
        let field = ControlField::Rectangular(crate::field::RectangularField {
            amplitude: 0.35,
            t_final: 200.0,
        });
        let mut psi = DVector::zeros(3);
        psi[0] = C64::new(1.0, 0.0);
        let config = PropagationConfig::new(0.0, 60.0, 0.01).unwrap();
        let traj = propagate_pure(&psi, &system, &field, &config).unwrap();
        let rho0 = DensityMatrix::pure_state(3, 0);
        let (rho, _) = propagate(&rho0, &system, &field, &[], &[], &config).unwrap();
        let end = traj.final_state();
        for i in 0..3 {
            for j in 0..3 {
                let expect = end[i] * end[j].conj();
                assert!(
                    (rho.matrix()[(i, j)] - expect).norm() <= 1e-6,
                    "entry ({i},{j})"
                );
            }
        }
        let norm_drift = (end.norm() - 1.0).abs();
        assert!(norm_drift <= 1e-8, "norm drift {norm_drift}");
    }

    #[test]
    fn trace_and_hermiticity_drift_bounded() {
        let system = models::model1();
        let field = ControlField::Shaped(crate::field::ShapedField::from_params(
            &system.transition_frequencies,
            &[0.12, 0.1, 0.09, 0.11],
            &[0.0, 1.0, 2.0, 3.0],
            system.sigma.unwrap(),
            system.t_final,
        ));
        let obs = ContinuousObservation::constant(
            ObservationOp::Projector(Projector::basis_state(5, 2)),
            0.4,
            50.0,
            150.0,
        )
        .unwrap();
        let config = PropagationConfig::until(system.t_final);
        let (rho, traj) = propagate(
            &system.initial_state(),
            &system,
            &field,
            &[obs],
            &[],
            &config,
        )
        .unwrap();
        assert!((rho.trace() - C64::new(1.0, 0.0)).norm() <= 1e-8);
        for s in &traj.states {
            assert!((s.trace() - C64::new(1.0, 0.0)).norm() <= 1e-8);
            assert!(s.hermiticity_deviation() <= 1e-8);
        }
    }

    #[test]
    fn purity_nonincreasing_under_commuting_measurement_only() {
        // E = 0 and [H₀, A] = 0: measurement-only evolution
        let system = models::model1();
        let mut m = DMatrix::from_fn(5, 5, |i, j| {
            if i == j {
                C64::new(0.2, 0.0)
            } else {
                C64::new(0.08, 0.01 * (i as f64 - j as f64))
            }
        });
        rehermitize(&mut m);
        let rho0 = DensityMatrix::new(m).unwrap();
        let obs = ContinuousObservation::constant(
            ObservationOp::Observable(system.h0()),
            0.25,
            0.0,
            80.0,
        )
        .unwrap();
        let config = PropagationConfig::new(0.0, 80.0, 0.01).unwrap();
        let (_, traj) =
            propagate(&rho0, &system, &ControlField::Zero, &[obs], &[], &config).unwrap();
        let purities: Vec<f64> = traj.states.iter().map(|s| s.purity()).collect();
        for w in purities.windows(2) {
            assert!(w[1] <= w[0] + 1e-10, "purity increased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn instantaneous_event_applied_at_exact_time() {
        // event at a time that is not a multiple of dt
        let system = models::model1();
        let t_ev = 200.0 / 6.0;
        let ev = InstantaneousEvent {
            time: t_ev,
            op: ObservationOp::Observable(system.dipole_operator()),
        };
        let config = PropagationConfig::until(system.t_final);
        let (rho, records) = propagate_final(
            &system.initial_state(),
            &system,
            &ControlField::Zero,
            &[],
            &[ev],
            &config,
        )
        .unwrap();
        assert_eq!(records.len(), 1);
        assert!((records[0].time - t_ev).abs() <= 1e-9);
        // zero field: populations after the kick stay frozen
        assert!((rho.population(4) - 0.2219).abs() <= 5e-4);
    }

    #[test]
    fn event_outside_range_rejected() {
        let system = models::model1();
        let ev = InstantaneousEvent {
            time: 300.0,
            op: ObservationOp::Projector(Projector::basis_state(5, 0)),
        };
        let config = PropagationConfig::until(200.0);
        let err = propagate_final(
            &system.initial_state(),
            &system,
            &ControlField::Zero,
            &[],
            &[ev],
            &config,
        );
        assert!(matches!(err, Err(Error::EventOutOfRange { .. })));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let system = models::model3();
        let rho0 = DensityMatrix::pure_state(5, 0);
        let config = PropagationConfig::until(10.0);
        assert!(matches!(
            propagate_final(&rho0, &system, &ControlField::Zero, &[], &[], &config),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn halving_dt_changes_final_populations_marginally() {
        let system = models::model1();
        let field = ControlField::Shaped(crate::field::ShapedField::from_params(
            &system.transition_frequencies,
            &[0.1, 0.1, 0.1, 0.1],
            &[0.0, 0.0, 0.0, 0.0],
            30.0,
            200.0,
        ));
        let run = |dt: f64| {
            let config = PropagationConfig::new(0.0, 200.0, dt).unwrap();
            let (rho, _) = propagate_final(
                &system.initial_state(),
                &system,
                &field,
                &[],
                &[],
                &config,
            )
            .unwrap();
            rho.populations()
        };
        let a = run(DEFAULT_DT);
        let b = run(DEFAULT_DT / 2.0);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-6, "dt convergence: {x} vs {y}");
        }
    }

    #[test]
    fn zeno_suppression_grows_with_strength() {
        // continuous observation of the initially populated level suppresses
        // transfer out of it
        let system = models::model3();
        let field = ControlField::Rectangular(crate::field::RectangularField {
            amplitude: 0.2,
            t_final: 200.0,
        });
        let config = PropagationConfig::new(0.0, 100.0, 0.01).unwrap();
        let survival = |kappa: f64| {
            let obs = ContinuousObservation::constant(
                ObservationOp::Projector(Projector::basis_state(3, 0)),
                kappa,
                0.0,
                100.0,
            )
            .unwrap();
            let (rho, _) = propagate_final(
                &system.initial_state(),
                &system,
                &field,
                &[obs],
                &[],
                &config,
            )
            .unwrap();
            rho.population(0)
        };
        let weak = survival(0.1);
        let strong = survival(5.0);
        assert!(
            strong > weak,
            "Zeno survival should grow with strength: {weak} vs {strong}"
        );
    }
}

