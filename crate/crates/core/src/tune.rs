//! Pulse optimisation and crosstalk analysis.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::HBAR;
use crate::evolve::{
    block_fidelity, idle_frame, propagate, propagate_columns, subspace_inputs, ControlSchedule, EvolveError,
    FidelityReport, Segment, Subspace,
};
use crate::gates::{self, GateError, GateOptions, GateReport};
use crate::layout::{build_register, Geometry, LayoutError, Permittivity, RegisterLayout, Scheme};
use crate::linalg::{wrap_phase, CMatrix, C64, ZERO};
use crate::model::{coulomb_energy, enumerate_basis_capped, ConfigurationBasis, ControlValues, ModelError};
use crate::simplex::{clamp_to, nelder_mead, SimplexOptions};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TuneError {
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error(transparent)]
    Evolve(#[from] EvolveError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error("evaluation budget must be at least 1")]
    EmptyBudget,
    #[error("infeasible bounds on parameter {index}: lower {lower} > upper {upper}")]
    InfeasibleBounds { index: usize, lower: f64, upper: f64 },
    #[error("initial parameter {index} = {value} outside its bounds")]
    InitialOutOfBounds { index: usize, value: f64 },
    #[error("objective is not finite at the initial point")]
    NonFiniteStart,
    #[error("{0}")]
    Invalid(alloc::string::String),
}

pub type Result<T> = core::result::Result<T, TuneError>;

pub type ScheduleBuilder<'a> = Box<dyn Fn(&[f64]) -> core::result::Result<ControlSchedule, GateError> + 'a>;

/// Parametrised schedule scored against a target on a subspace.
pub struct OptimizationProblem<'a> {
    pub layout: RegisterLayout,
    pub basis: ConfigurationBasis,
    pub subspace: Subspace,
    pub target: CMatrix,
    pub build: ScheduleBuilder<'a>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub initial: Vec<f64>,
    /// Weight of leakage in the objective.
    pub lambda: f64,
}

impl OptimizationProblem<'_> {
    pub fn check(&self) -> Result<()> {
        let n = self.initial.len();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(TuneError::Invalid(format!(
                "{} parameters but {} lower and {} upper bounds",
                n,
                self.lower.len(),
                self.upper.len()
            )));
        }
        for i in 0..n {
            if !(self.lower[i] <= self.upper[i]) {
                return Err(TuneError::InfeasibleBounds {
                    index: i,
                    lower: self.lower[i],
                    upper: self.upper[i],
                });
            }
            if !(self.lower[i] <= self.initial[i] && self.initial[i] <= self.upper[i]) {
                return Err(TuneError::InitialOutOfBounds {
                    index: i,
                    value: self.initial[i],
                });
            }
        }
        Ok(())
    }

    /// Metrics of the schedule built from `params`, in the idle frame.
    pub fn metrics(&self, params: &[f64]) -> Result<FidelityReport> {
        let schedule = (self.build)(params)?;
        let mut out = propagate_columns(&self.layout, &self.basis, &schedule, &subspace_inputs(&self.subspace))?;
        idle_frame(&self.basis, &mut out, schedule.total_duration());
        let m = out.select(&self.subspace.indices, &(0..self.subspace.len()).collect::<Vec<_>>());
        Ok(block_fidelity(&m, &self.target)?)
    }

    /// `(1 - F_avg) + λ·leakage`, clamped to `[0, 1 + λ]`.
    pub fn objective(&self, params: &[f64]) -> f64 {
        match self.metrics(params) {
            Ok(f) => ((1.0 - f.average_fidelity) + self.lambda * f.leakage).clamp(0.0, 1.0 + self.lambda),
            Err(_) => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerOptions {
    pub restarts: usize,
    /// Finite-difference coordinate refinement after the simplex stages.
    pub refine: bool,
    /// Initial simplex edge as a fraction of each range.
    pub initial_step: f64,
    /// Restart perturbation as a fraction of each range.
    pub restart_spread: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            restarts: 3,
            refine: true,
            initial_step: 0.05,
            restart_spread: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    /// Best objective so far.
    pub objective: f64,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub params: Vec<f64>,
    pub objective: f64,
    pub initial_objective: f64,
    pub evaluations: usize,
    pub trace: Vec<TraceRow>,
}

/// Improvements smaller than this are treated as round-off.
const NOISE_FLOOR: f64 = 1e-14;

struct Tracker<'p, 'a> {
    problem: &'p OptimizationProblem<'a>,
    budget: usize,
    best: (Vec<f64>, f64),
    trace: Vec<TraceRow>,
}

impl Tracker<'_, '_> {
    fn remaining(&self) -> usize {
        self.budget - self.trace.len()
    }

    fn eval(&mut self, x: &[f64]) -> f64 {
        if self.remaining() == 0 {
            return f64::INFINITY;
        }
        let v = self.problem.objective(x);
        if v < self.best.1 - NOISE_FLOOR {
            self.best = (x.to_vec(), v);
        }
        self.trace.push(TraceRow {
            iter: self.trace.len(),
            objective: self.best.1,
            params: self.best.0.clone(),
        });
        v
    }

    fn simplex(&mut self, x0: &[f64], evals: usize, step: f64) {
        let evals = evals.min(self.remaining());
        if evals == 0 {
            return;
        }
        let (lower, upper) = (self.problem.lower.clone(), self.problem.upper.clone());
        let opts = SimplexOptions {
            max_evals: evals,
            initial_step: step,
            f_tol: 1e-16,
            target: 0.0,
        };
        nelder_mead(&mut |x| self.eval(x), x0, &lower, &upper, &opts);
    }

    /// Coordinate descent with shrinking finite steps, down to `1e-6` of each
    /// parameter's scale.
    fn refine(&mut self) {
        let n = self.best.0.len();
        let scale: Vec<f64> = (0..n)
            .map(|i| {
                let r = self.problem.upper[i] - self.problem.lower[i];
                if r > 0.0 && r.is_finite() {
                    r
                } else {
                    self.best.0[i].abs().max(1.0)
                }
            })
            .collect();
        let mut h = 1e-3;
        while h >= 1e-6 && self.remaining() > 0 {
            let mut improved = false;
            for i in 0..n {
                for dir in [1.0, -1.0] {
                    if self.remaining() == 0 {
                        return;
                    }
                    let before = self.best.1;
                    let mut x = self.best.0.clone();
                    x[i] += dir * h * scale[i];
                    clamp_to(&mut x, &self.problem.lower, &self.problem.upper);
                    self.eval(&x);
                    if self.best.1 < before {
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                h *= 0.1;
            }
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

/// Nelder–Mead from the initial point, seeded random restarts around the
/// incumbent, then optional coordinate refinement. Never exceeds `budget`
/// evaluations and never returns anything worse than the start.
pub fn optimize_schedule(
    problem: &OptimizationProblem<'_>,
    budget: usize,
    seed: u64,
    opts: &OptimizerOptions,
) -> Result<OptimizationResult> {
    if budget < 1 {
        return Err(TuneError::EmptyBudget);
    }
    problem.check()?;
    let mut t = Tracker {
        problem,
        budget,
        best: (problem.initial.clone(), f64::INFINITY),
        trace: Vec::with_capacity(budget),
    };
    let initial_objective = t.eval(&problem.initial);
    if !initial_objective.is_finite() {
        return Err(TuneError::NonFiniteStart);
    }
    t.best = (problem.initial.clone(), initial_objective);

    let main = budget / 2;
    t.simplex(&problem.initial, main, opts.initial_step);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let refine_share = if opts.refine { budget / 5 } else { 0 };
    let per_restart = if opts.restarts > 0 {
        t.remaining().saturating_sub(refine_share) / opts.restarts
    } else {
        0
    };
    for _ in 0..opts.restarts {
        let mut x = t.best.0.clone();
        for (i, v) in x.iter_mut().enumerate() {
            let r = problem.upper[i] - problem.lower[i];
            *v += opts.restart_spread * r * (2.0 * uniform(&mut rng) - 1.0);
        }
        clamp_to(&mut x, &problem.lower, &problem.upper);
        t.simplex(&x, per_restart, opts.initial_step * 0.2);
    }
    if opts.refine {
        t.refine();
    }
    Ok(OptimizationResult {
        params: t.best.0.clone(),
        objective: t.best.1,
        initial_objective,
        evaluations: t.trace.len(),
        trace: t.trace,
    })
}

/// Ideal transfer `|1> → i|aux>`, `|aux> → i|1>` on one qutrit; the
/// parameters are `[duration ps, Δ meV]`.
pub fn transfer_benchmark<'a>(start: [f64; 2], gate: &GateOptions) -> Result<OptimizationProblem<'a>> {
    let layout = build_register(Scheme::AuxPerQudit, 1, 3, &Geometry::default())?;
    let basis = enumerate_basis_capped(&layout, gate.basis_cap)?;
    let aux = layout.assigned_auxiliary(0).expect("aux_per_qudit");
    let handle = layout
        .electrodes
        .barrier_between(layout.dot(0, 1), aux)
        .expect("dot |1> reaches its auxiliary")
        .handle;
    let d = basis.len();
    let (i1, ia) = (
        basis.index_of(&[layout.dot(0, 1)]).expect("in basis"),
        basis.index_of(&[aux]).expect("in basis"),
    );
    let mut target = CMatrix::identity(d);
    target[(i1, i1)] = ZERO;
    target[(ia, ia)] = ZERO;
    target[(i1, ia)] = C64::new(0.0, 1.0);
    target[(ia, i1)] = C64::new(0.0, 1.0);
    Ok(OptimizationProblem {
        layout,
        basis,
        subspace: Subspace::full(d),
        target,
        build: Box::new(move |x: &[f64]| {
            Ok(ControlSchedule::new(vec![Segment::new(
                x[0],
                ControlValues::zero().with_barrier(handle, x[1]),
            )]))
        }),
        lower: vec![0.1, 0.01],
        upper: vec![50.0, gate.delta_max],
        initial: start.to_vec(),
        lambda: 1.0,
    })
}

/// Analytic optimum of the transfer benchmark at `Δ`.
pub fn transfer_optimum(delta: f64) -> [f64; 2] {
    [PI * HBAR / (2.0 * delta), delta]
}

/// Two-qutrit controlled-phase benchmark: pulse parameters
/// `[Δ, aux offset, wait, transfer]` of a compiled gate, target `CZ(φ)`.
pub fn phase_gate_benchmark<'a>(
    layout: &'a RegisterLayout,
    report: &'a GateReport,
    start: [f64; 4],
    gate: GateOptions,
) -> Result<OptimizationProblem<'a>> {
    let pulse = report
        .pulse
        .ok_or_else(|| TuneError::Invalid(format!("`{}` report has no pulse skeleton", report.gate)))?;
    let basis = enumerate_basis_capped(layout, gate.basis_cap)?;
    let subspace = Subspace::computational(&basis);
    let phases: Vec<C64> = report.target_phases.iter().map(|&p| crate::linalg::cis(p)).collect();
    let target = gates::embed(&CMatrix::from_diagonal(&phases), &report.participants, layout.qudits, layout.levels);
    let period = 2.0 * PI * HBAR / report.delta_v.unwrap_or(1.0).abs();
    let offset_max = 0.5 * gate.isolation_detuning;
    Ok(OptimizationProblem {
        layout: layout.clone(),
        basis,
        subspace,
        target,
        build: Box::new(move |x: &[f64]| {
            let p = gates::PulseParameters {
                delta: x[0],
                aux_offset: x[1],
                wait: x[2],
                transfer: x[3],
            };
            gates::with_pulse(layout, report, &p, &gate)
        }),
        lower: vec![0.05 * gate.delta_max, -offset_max, 0.0, 0.05],
        upper: vec![gate.delta_max, offset_max, pulse.wait + period, 8.0 * PI * HBAR / gate.delta_max],
        initial: start.to_vec(),
        lambda: 1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrosstalkRow {
    pub s: f64,
    pub spectator: usize,
    /// Conditional phase picked up by the spectator during the wait, from
    /// simulation.
    pub phase_rad: f64,
    /// Same quantity from the closed-form energies.
    pub oracle_phase_rad: f64,
    /// Gate infidelity relative to the same gate with the spectator fully
    /// screened.
    pub infidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrosstalkReport {
    pub rows: Vec<CrosstalkRow>,
}

/// `layout` with screening `s` between every site of each spectator and
/// every site the gate's participants use.
pub fn screened_layout(layout: &RegisterLayout, report: &GateReport, spectators: &[usize], s: f64) -> Result<RegisterLayout> {
    let mut l = layout.clone();
    let mut gate_sites: Vec<usize> = report
        .participants
        .iter()
        .flat_map(|&q| (1..=layout.levels).map(move |lv| layout.dot(q, lv)))
        .collect();
    gate_sites.extend(&report.auxiliaries);
    for &q in spectators {
        let mut own: Vec<usize> = (1..=layout.levels).map(|lv| layout.dot(q, lv)).collect();
        own.extend(layout.auxiliaries_of(q).into_iter().filter(|a| !report.auxiliaries.contains(a)));
        for &a in &own {
            for &b in &gate_sites {
                l.set_screening(a, b, s)?;
            }
        }
    }
    Ok(l)
}

/// Per-spectator residual conditional phase and induced infidelity for each
/// screening value.
pub fn crosstalk_scan(
    layout: &RegisterLayout,
    report: &GateReport,
    screening: &[f64],
    spectators: &[usize],
    opts: &GateOptions,
) -> Result<CrosstalkReport> {
    for q in spectators {
        if report.participants.contains(q) || *q >= layout.qudits {
            return Err(TuneError::Invalid(format!("spectator {q} is not a free qudit")));
        }
    }
    let wait = report
        .pulse
        .map(|p| p.wait)
        .ok_or_else(|| TuneError::Invalid(format!("`{}` report has no wait stage", report.gate)))?;
    let d = layout.levels;

    let reference = {
        let l0 = screened_layout(layout, report, spectators, 0.0)?;
        block(&l0, &report.schedule, opts)?
    };

    let mut rows = Vec::new();
    for &s in screening {
        let ls = screened_layout(layout, report, spectators, s)?;
        let basis = enumerate_basis_capped(&ls, opts.basis_cap)?;
        let u = block(&ls, &report.schedule, opts)?;
        let infidelity = induced_infidelity(&u, &reference);
        let wait_u = propagate(&ls, &basis, &ControlSchedule::new(vec![Segment::idle(wait)]))?;
        for &spec in spectators {
            // Participants parked on |1> or moved; spectator on |1> or |D>;
            // every other qudit on |D>.
            let config = |moved: bool, spectator_level: usize| -> Vec<usize> {
                (0..ls.qudits)
                    .map(|q| {
                        if let Some(i) = report.movers.iter().position(|&m| m == q) {
                            if moved {
                                return report.auxiliaries[i];
                            }
                        }
                        if report.participants.contains(&q) {
                            ls.dot(q, 1)
                        } else if q == spec {
                            ls.dot(q, spectator_level)
                        } else {
                            ls.dot(q, d)
                        }
                    })
                    .collect()
            };
            let corners = [(true, 1), (true, d), (false, 1), (false, d)];
            let signs = [1.0, -1.0, -1.0, 1.0];
            let mut phase = C64::new(1.0, 0.0);
            let mut energy = 0.0;
            for ((moved, lv), sign) in corners.iter().zip(signs) {
                let c = config(*moved, *lv);
                let i = basis.index_of(&c).expect("configuration in basis");
                let z = wait_u.matrix[(i, i)];
                phase *= if sign > 0.0 { z } else { z.conj() };
                energy += sign * coulomb_energy(&ls, &c);
            }
            rows.push(CrosstalkRow {
                s,
                spectator: spec,
                phase_rad: phase.arg(),
                oracle_phase_rad: wrap_phase(-energy * wait / HBAR),
                infidelity: infidelity.max(0.0),
            });
        }
    }
    Ok(CrosstalkReport { rows })
}

/// `1 - |Tr(R†U)|² / (Tr(R†R)·Tr(U†U))`: zero whenever `U` equals the
/// reference, even if the reference itself leaks.
fn induced_infidelity(u: &CMatrix, reference: &CMatrix) -> f64 {
    let mut overlap = ZERO;
    for (a, b) in reference.as_slice().iter().zip(u.as_slice()) {
        overlap += a.conj() * b;
    }
    let norm = reference.norm_sqr() * u.norm_sqr();
    if norm == 0.0 {
        return 0.0;
    }
    (1.0 - overlap.norm_sqr() / norm).max(0.0)
}

fn block(layout: &RegisterLayout, schedule: &ControlSchedule, opts: &GateOptions) -> Result<CMatrix> {
    let basis = enumerate_basis_capped(layout, opts.basis_cap)?;
    let comp = Subspace::computational(&basis);
    let mut out = propagate_columns(layout, &basis, schedule, &subspace_inputs(&comp))?;
    idle_frame(&basis, &mut out, schedule.total_duration());
    Ok(out.select(&comp.indices, &(0..comp.len()).collect::<Vec<_>>()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedupRow {
    pub permittivity: f64,
    pub delta_v: f64,
    pub wait_ps: f64,
    /// Two resonant transfers at `Δ_max`.
    pub transfer_ps: f64,
    pub duration_ps: f64,
    pub max_sequential: u64,
}

/// Nominal phase-gate timing for each uniform relative permittivity.
pub fn permittivity_speedup(
    layout: &RegisterLayout,
    participants: &[usize],
    phi: f64,
    permittivities: &[f64],
    opts: &GateOptions,
) -> Result<Vec<SpeedupRow>> {
    let transfer_ps = 2.0 * PI * HBAR / (2.0 * opts.delta_max);
    permittivities
        .iter()
        .map(|&eps| {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(TuneError::Invalid(format!("permittivity must be positive, got {eps}")));
            }
            let l = layout.clone().with_permittivity(Permittivity::uniform(eps));
            let (wait, dv) = gates::nominal_wait(&l, participants, phi, opts)?;
            let duration = transfer_ps + wait;
            Ok(SpeedupRow {
                permittivity: eps,
                delta_v: dv,
                wait_ps: wait,
                transfer_ps,
                duration_ps: duration,
                max_sequential: gates::coherence_budget(duration, opts.coherence_time)?.max_sequential,
            })
        })
        .collect()
}
