//! Protocol compilation: transfer pulses, auxiliary-mediated phase gates,
//! single-qudit synthesis, parallel merging and coherence budgets.
//!
//! A phase gate is a four-stage skeleton: transfer-in (B-gate on each
//! mover's `|1>`–auxiliary pair, S-gate offset on the auxiliary, isolation
//! detuning on the mover's other dots), an idle wait, an identical
//! transfer-out, and a layer of S-gate pulses fixing single-qudit phases.
//! Electrons that interact strongly detune each other's transfers, so the
//! pulse parameters are calibrated numerically on the participants alone
//! and then replayed on the full register.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::HBAR;
use crate::evolve::{
    block_fidelity, idle_frame, propagate_columns, subspace_inputs, ControlSchedule, EvolveError,
    FidelityReport, Segment, Subspace,
};
use crate::layout::{LayoutError, RegisterLayout, Scheme};
use crate::linalg::{cis, wrap_phase, CMatrix, C64, ONE, ZERO};
use crate::model::{
    coulomb_energy, conditional_energy, enumerate_basis_capped, pair_energy, ConfigurationBasis,
    ControlValues, ModelError,
};
use crate::simplex::{nelder_mead, SimplexOptions};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GateError {
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Evolve(#[from] EvolveError),
    #[error("qudit {0} has no auxiliary dot")]
    NoAuxiliary(usize),
    #[error("collision: qudits {participants:?} share auxiliary {auxiliary}, which holds one electron at a time")]
    Collision { participants: Vec<usize>, auxiliary: usize },
    #[error("interaction too weak: |ΔV| = {delta_v:e} meV is below the floor {floor:e} meV")]
    InteractionTooWeak { delta_v: f64, floor: f64 },
    #[error("invalid participants: {0}")]
    InvalidParticipants(String),
    #[error("no B-gate between sites {0} and {1}")]
    MissingHandle(usize, usize),
    #[error("Δ = {0} meV outside (0, {1}] meV")]
    DeltaOutOfRange(f64, f64),
    #[error("target is not unitary (defect {0:e})")]
    NotUnitary(f64),
    #[error("gate sets overlap on {0}")]
    Overlap(String),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = core::result::Result<T, GateError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GateOptions {
    /// Largest tunnelling amplitude, meV.
    pub delta_max: f64,
    /// S-gate detuning on non-participating levels during transfers, meV.
    pub isolation_detuning: f64,
    /// Coherence time, ps.
    pub coherence_time: f64,
    /// Duration of each S-gate phase layer, ps.
    pub phase_time: f64,
    /// Smallest usable conditional energy, meV.
    pub interaction_floor: f64,
    /// Largest acceptable average-gate infidelity.
    pub tolerance: f64,
    /// Objective evaluations spent on pulse calibration.
    pub calibration_evals: usize,
    pub basis_cap: usize,
}

impl Default for GateOptions {
    fn default() -> Self {
        Self {
            delta_max: 1.0,
            isolation_detuning: 5.0,
            coherence_time: 1.0e4,
            phase_time: 0.5,
            interaction_floor: 1e-6,
            tolerance: 1e-3,
            calibration_evals: 8000,
            basis_cap: crate::model::DEFAULT_BASIS_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GateKind {
    SingleQudit { qudit: usize, target: CMatrix },
    ControlledPhase { participants: Vec<usize>, phi: f64 },
    KPhase { participants: Vec<usize>, phi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateSpec {
    pub kind: GateKind,
    /// Infidelity target.
    pub tolerance: f64,
}

/// Pairwise conditional phase between two participants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairPhase {
    pub a: usize,
    pub b: usize,
    pub phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseParameters {
    pub delta: f64,
    /// Auxiliary S-gate offset during transfers, meV.
    pub aux_offset: f64,
    pub wait: f64,
    pub transfer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub gate: String,
    pub participants: Vec<usize>,
    /// Qudits whose electrons visit an auxiliary.
    pub movers: Vec<usize>,
    pub auxiliaries: Vec<usize>,
    pub schedule: ControlSchedule,
    pub fidelity: FidelityReport,
    pub duration_ps: f64,
    pub budget_fraction: f64,
    pub max_sequential: u64,
    pub tolerance: f64,
    pub meets_tolerance: bool,
    /// Diagonal target phases on the computational states of the
    /// participants (lexicographic level order), rad.
    pub target_phases: Vec<f64>,
    pub target_phi: Option<f64>,
    pub conditional_phase: Option<f64>,
    pub delta_v: Option<f64>,
    pub nominal_wait_ps: Option<f64>,
    pub pulse: Option<PulseParameters>,
    pub pairwise_phases: Vec<PairPhase>,
    pub residual_phase: Option<f64>,
    pub rotations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceBudget {
    pub fraction: f64,
    pub max_sequential: u64,
}

pub fn coherence_budget(duration: f64, coherence_time: f64) -> Result<CoherenceBudget> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(GateError::Invalid(format!("duration must be positive, got {duration}")));
    }
    if !(coherence_time > 0.0) {
        return Err(GateError::Invalid(format!("coherence time must be positive, got {coherence_time}")));
    }
    Ok(CoherenceBudget {
        fraction: duration / coherence_time,
        max_sequential: libm::floor(coherence_time / duration) as u64,
    })
}

fn budget_or_unbounded(duration: f64, t_coh: f64) -> CoherenceBudget {
    coherence_budget(duration, t_coh).unwrap_or(CoherenceBudget {
        fraction: 0.0,
        max_sequential: u64::MAX,
    })
}

/// Resonant transfer of `qudit` from dot `|from_level>` to `to_site`:
/// one segment of length `πħ/(2Δ)`.
pub fn transfer_pulse(
    layout: &RegisterLayout,
    qudit: usize,
    from_level: usize,
    to_site: usize,
    delta: f64,
    opts: &GateOptions,
) -> Result<Segment> {
    if qudit >= layout.qudits || from_level < 1 || from_level > layout.levels {
        return Err(GateError::InvalidParticipants(format!("no level {from_level} on qudit {qudit}")));
    }
    if !(delta > 0.0 && delta <= opts.delta_max) {
        return Err(GateError::DeltaOutOfRange(delta, opts.delta_max));
    }
    let from = layout.dot(qudit, from_level);
    let gate = layout
        .electrodes
        .barrier_between(from, to_site)
        .ok_or(GateError::MissingHandle(from, to_site))?;
    Ok(Segment::new(
        PI * HBAR / (2.0 * delta),
        ControlValues::zero().with_barrier(gate.handle, delta),
    ))
}

/// Which electrons move where during a phase gate.
#[derive(Debug, Clone, PartialEq)]
struct Plan {
    participants: Vec<usize>,
    movers: Vec<usize>,
    auxiliaries: Vec<usize>,
}

fn check_participants(layout: &RegisterLayout, participants: &[usize]) -> Result<()> {
    if participants.len() < 2 {
        return Err(GateError::InvalidParticipants("phase gates need at least two qudits".into()));
    }
    for w in participants.windows(2) {
        if w[1] != w[0] + 1 {
            return Err(GateError::InvalidParticipants(format!(
                "participants {participants:?} are not adjacent qudits in increasing order"
            )));
        }
    }
    if *participants.last().expect("non-empty") >= layout.qudits {
        return Err(GateError::InvalidParticipants(format!(
            "register has only {} qudits",
            layout.qudits
        )));
    }
    Ok(())
}

fn plan(layout: &RegisterLayout, participants: &[usize]) -> Result<Plan> {
    check_participants(layout, participants)?;
    match layout.scheme {
        Scheme::AlwaysOn => Err(GateError::NoAuxiliary(participants[0])),
        Scheme::AuxPerQudit => {
            let auxiliaries = participants
                .iter()
                .map(|&q| layout.assigned_auxiliary(q).ok_or(GateError::NoAuxiliary(q)))
                .collect::<Result<Vec<_>>>()?;
            Ok(Plan {
                participants: participants.to_vec(),
                movers: participants.to_vec(),
                auxiliaries,
            })
        }
        Scheme::SharedAux => {
            let set: BTreeSet<usize> = participants.iter().copied().collect();
            if participants.len() == 2 {
                let common = layout
                    .auxiliaries_of(participants[0])
                    .into_iter()
                    .find(|a| layout.owners_of(*a).contains(&participants[1]));
                return match common {
                    Some(aux) => Err(GateError::Collision {
                        participants: participants.to_vec(),
                        auxiliary: aux,
                    }),
                    None => Err(GateError::InvalidParticipants(format!(
                        "qudits {participants:?} share no auxiliary"
                    ))),
                };
            }
            let hub = layout
                .auxiliaries()
                .find(|s| layout.owners_of(s.id).iter().copied().collect::<BTreeSet<_>>() == set)
                .map(|s| s.id);
            let Some(aux) = hub else {
                let aux = layout.assigned_auxiliary(participants[0]).ok_or(GateError::NoAuxiliary(participants[0]))?;
                return Err(GateError::Collision {
                    participants: participants.to_vec(),
                    auxiliary: aux,
                });
            };
            // The auxiliary holds a single electron, so one participant
            // carries the interaction for the whole group.
            let site = &layout.sites[aux];
            let mediator = participants
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    let da = site.distance(&layout.sites[layout.dot(a, 1)]);
                    let db = site.distance(&layout.sites[layout.dot(b, 1)]);
                    da.total_cmp(&db).then(a.cmp(&b))
                })
                .expect("non-empty");
            Ok(Plan {
                participants: participants.to_vec(),
                movers: vec![mediator],
                auxiliaries: vec![aux],
            })
        }
    }
}

/// Level tuples (1-based) of the `D^k` computational states of `k` qudits in
/// lexicographic order.
pub fn level_tuples(k: usize, d: usize) -> Vec<Vec<usize>> {
    let total = d.pow(k as u32);
    (0..total)
        .map(|mut n| {
            let mut t = vec![0; k];
            for slot in t.iter_mut().rev() {
                *slot = n % d + 1;
                n /= d;
            }
            t
        })
        .collect()
}

fn tuple_index(levels: &[usize], d: usize) -> usize {
    levels.iter().fold(0, |acc, &l| acc * d + (l - 1))
}

/// `θ(all |1>) - Σ_i θ(only i at |1>) + (k-1)·θ(none at |1>)`, every
/// non-`|1>` participant at `reference`.
pub fn conditional_phase_of(theta: &[f64], k: usize, d: usize, reference: usize) -> f64 {
    let at = |ones: &[bool]| {
        let t: Vec<usize> = ones.iter().map(|&o| if o { 1 } else { reference }).collect();
        theta[tuple_index(&t, d)]
    };
    let mut c = at(&vec![true; k]) + (k as f64 - 1.0) * at(&vec![false; k]);
    for i in 0..k {
        let mut ones = vec![false; k];
        ones[i] = true;
        c -= at(&ones);
    }
    c
}

/// Two-body conditional phase of participants `i`, `j` with everyone else at
/// `reference`.
fn pair_phase_of(theta: &[f64], k: usize, d: usize, i: usize, j: usize, reference: usize) -> f64 {
    let at = |a: bool, b: bool| {
        let t: Vec<usize> = (0..k)
            .map(|q| if (q == i && a) || (q == j && b) { 1 } else { reference })
            .collect();
        theta[tuple_index(&t, d)]
    };
    at(true, true) - at(true, false) - at(false, true) + at(false, false)
}

/// Full inclusion–exclusion over all participants.
fn k_body_phase_of(theta: &[f64], k: usize, d: usize, reference: usize) -> f64 {
    let mut total = 0.0;
    for mask in 0u32..(1 << k) {
        let t: Vec<usize> = (0..k).map(|q| if mask & (1 << q) != 0 { 1 } else { reference }).collect();
        let sign = if (k - mask.count_ones() as usize) % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * theta[tuple_index(&t, d)];
    }
    total
}

/// Energy change among the participants (sub-register numbering) when the
/// movers sitting on `|1>` step onto their auxiliaries.
fn mover_energy_shift(sub: &RegisterLayout, sub_plan: &Plan, levels: &[usize]) -> f64 {
    let parked: Vec<usize> = levels.iter().enumerate().map(|(q, &l)| sub.dot(q, l)).collect();
    let mut moved = parked.clone();
    for (m, &aux) in sub_plan.movers.iter().zip(&sub_plan.auxiliaries) {
        if levels[*m] == 1 {
            moved[*m] = aux;
        }
    }
    coulomb_energy(sub, &moved) - coulomb_energy(sub, &parked)
}

fn wrap_positive(theta: f64) -> f64 {
    let t = wrap_phase(theta);
    if t < 0.0 {
        t + 2.0 * PI
    } else {
        t
    }
}

/// Skeleton schedule on `layout` for `plan`; `phases[q][l-1]` are the
/// single-qudit corrections (one entry per participant), or empty for none.
fn skeleton(
    layout: &RegisterLayout,
    plan: &Plan,
    p: &PulseParameters,
    phases: &[Vec<f64>],
    opts: &GateOptions,
) -> Result<ControlSchedule> {
    let mut transfer = ControlValues::zero();
    for (&m, &aux) in plan.movers.iter().zip(&plan.auxiliaries) {
        let d1 = layout.dot(m, 1);
        let gate = layout.electrodes.barrier_between(d1, aux).ok_or(GateError::MissingHandle(d1, aux))?;
        transfer = transfer.with_barrier(gate.handle, p.delta);
        transfer = transfer.with_shift(aux, p.aux_offset);
        for l in 2..=layout.levels {
            transfer = transfer.with_shift(layout.dot(m, l), opts.isolation_detuning);
        }
    }
    let mut s = ControlSchedule::new(vec![
        Segment::new(p.transfer, transfer.clone()),
        Segment::idle(p.wait),
        Segment::new(p.transfer, transfer),
    ]);
    if !phases.is_empty() {
        s.push(phase_layer(layout, &plan.participants, phases, opts.phase_time));
    }
    Ok(s)
}

/// S-gate pulses imprinting `exp(i·phases[q][l-1])` on level `l` of each
/// listed qudit.
fn phase_layer(layout: &RegisterLayout, qudits: &[usize], phases: &[Vec<f64>], t: f64) -> Segment {
    let mut c = ControlValues::zero();
    for (&q, ph) in qudits.iter().zip(phases) {
        for (i, &p) in ph.iter().enumerate() {
            let p = wrap_phase(p);
            if p != 0.0 {
                c = c.with_shift(layout.dot(q, i + 1), -p * HBAR / t);
            }
        }
    }
    Segment::new(t, c)
}

struct Calibration<'a> {
    layout: &'a RegisterLayout,
    basis: ConfigurationBasis,
    plan: Plan,
    comp: Subspace,
    tuples: Vec<Vec<usize>>,
    target: Vec<f64>,
    opts: &'a GateOptions,
}

impl Calibration<'_> {
    /// Restricted block in the idle frame, without corrections.
    fn block(&self, schedule: &ControlSchedule) -> Result<CMatrix> {
        let mut out = propagate_columns(self.layout, &self.basis, schedule, &subspace_inputs(&self.comp))?;
        idle_frame(&self.basis, &mut out, schedule.total_duration());
        Ok(out.select(&self.comp.indices, &(0..self.comp.len()).collect::<Vec<_>>()))
    }

    /// Best single-qudit phase corrections and the resulting metrics.
    fn score(&self, p: &PulseParameters) -> Result<(FidelityReport, Vec<Vec<f64>>)> {
        let s = skeleton(self.layout, &self.plan, p, &[], self.opts)?;
        let m = self.block(&s)?;
        let k = self.plan.participants.len();
        let d = self.layout.levels;
        let diag: Vec<C64> = (0..m.rows()).map(|i| m[(i, i)] * cis(-self.target[i])).collect();
        let phases = fit_local_phases(&diag, &self.tuples, k, d);
        let corrected = CMatrix::from_fn(m.rows(), m.cols(), |r, c| {
            let ph: f64 = self.tuples[r].iter().enumerate().map(|(q, &l)| phases[q][l - 1]).sum();
            m[(r, c)] * cis(ph)
        });
        let target = diagonal_target(&self.target);
        Ok((block_fidelity(&corrected, &target)?, phases))
    }
}

fn diagonal_target(phases: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&phases.iter().map(|&p| cis(p)).collect::<Vec<_>>())
}

/// Per-qudit level phases `p` maximising `|Σ_c w_c·exp(i Σ_q p_q(c_q))|`,
/// by alternating exact maximisation over one qudit at a time.
fn fit_local_phases(w: &[C64], tuples: &[Vec<usize>], k: usize, d: usize) -> Vec<Vec<f64>> {
    let mut p = vec![vec![0.0; d]; k];
    // current[c] = exp(i Σ_q p_q(c_q)), kept in step with p
    let mut current = vec![ONE; w.len()];
    let mut acc = vec![ZERO; d];
    for _ in 0..100 {
        let mut change: f64 = 0.0;
        for q in 0..k {
            acc.iter_mut().for_each(|a| *a = ZERO);
            let undo: Vec<C64> = p[q].iter().map(|&x| cis(-x)).collect();
            for (c, t) in tuples.iter().enumerate() {
                let l = t[q] - 1;
                acc[l] += w[c] * current[c] * undo[l];
            }
            let mut step = vec![ONE; d];
            for l in 0..d {
                if acc[l].norm() > 0.0 {
                    let new = -acc[l].arg();
                    let delta = wrap_phase(new - p[q][l]);
                    change = change.max(delta.abs());
                    p[q][l] = new;
                    step[l] = cis(delta);
                }
            }
            for (c, t) in tuples.iter().enumerate() {
                current[c] *= step[t[q] - 1];
            }
        }
        if change < 1e-12 {
            break;
        }
    }
    p
}

/// Inputs for an auxiliary-mediated phase gate.
struct PhaseProblem {
    plan: Plan,
    sub: RegisterLayout,
    sub_plan: Plan,
    target: Vec<f64>,
    delta_v: f64,
    nominal_wait: f64,
}

fn phase_problem(layout: &RegisterLayout, participants: &[usize], phi: f64, strict: bool, opts: &GateOptions) -> Result<PhaseProblem> {
    let plan = plan(layout, participants)?;
    let k = participants.len();
    let d = layout.levels;
    let aux_owners: Vec<(usize, Vec<usize>)> = plan
        .movers
        .iter()
        .zip(&plan.auxiliaries)
        .map(|(&m, &a)| (a, vec![m]))
        .collect();
    let sub = layout.restrict(participants, &aux_owners)?;
    let sub_plan = Plan {
        participants: (0..k).collect(),
        movers: plan.movers.iter().map(|m| m - participants[0]).collect(),
        auxiliaries: (0..plan.movers.len()).map(|j| k * d + j).collect(),
    };
    let tuples = level_tuples(k, d);
    let shifts: Vec<f64> = tuples.iter().map(|t| mover_energy_shift(&sub, &sub_plan, t)).collect();
    let delta_v = conditional_phase_of(&shifts, k, d, 2);
    if !(delta_v.abs() >= opts.interaction_floor) {
        return Err(GateError::InteractionTooWeak {
            delta_v,
            floor: opts.interaction_floor,
        });
    }
    let lambda = wrap_positive(-phi * delta_v.signum()) / delta_v.abs();
    let target = if strict {
        tuples
            .iter()
            .map(|t| if t.iter().all(|&l| l == 1) { wrap_phase(phi) } else { 0.0 })
            .collect()
    } else {
        shifts.iter().map(|e| -lambda * e).collect()
    };
    Ok(PhaseProblem {
        plan,
        sub,
        sub_plan,
        target,
        delta_v,
        nominal_wait: lambda * HBAR,
    })
}

const LONG_WAIT_PERIODS: usize = 12;

fn calibrate(problem: &PhaseProblem, opts: &GateOptions) -> Result<(PulseParameters, Vec<Vec<f64>>, f64)> {
    let basis = enumerate_basis_capped(&problem.sub, opts.basis_cap)?;
    let comp = Subspace::computational(&basis);
    let k = problem.sub_plan.participants.len();
    let cal = Calibration {
        layout: &problem.sub,
        tuples: level_tuples(k, problem.sub.levels),
        basis,
        plan: problem.sub_plan.clone(),
        comp,
        target: problem.target.clone(),
        opts,
    };
    let dm = opts.delta_max;
    let period = 2.0 * PI * HBAR / problem.delta_v.abs();
    let offset_max = 0.5 * opts.isolation_detuning;
    let lower = [0.05 * dm, -offset_max, 0.0, 0.05];
    let upper = [dm, offset_max, problem.nominal_wait + (LONG_WAIT_PERIODS as f64 + 0.5) * period, 8.0 * PI * HBAR / dm];
    let params = |x: &[f64]| PulseParameters {
        delta: x[0],
        aux_offset: x[1],
        wait: x[2],
        transfer: x[3],
    };
    let mut objective = |x: &[f64]| cal.score(&params(x)).map_or(f64::INFINITY, |(f, _)| 1.0 - f.average_fidelity);

    let mut starts = Vec::new();
    for &delta in &[0.5 * dm, 0.8 * dm, dm] {
        for &eps in &[0.0, 0.25 * dm, -0.25 * dm] {
            for j in 0..4 {
                let wait = problem.nominal_wait + j as f64 * period / 4.0;
                let transfer = PI * HBAR / libm::sqrt(eps * eps + 4.0 * delta * delta);
                starts.push([delta, eps, wait, transfer]);
            }
        }
    }
    let per_start = (opts.calibration_evals / starts.len()).max(20);
    let simplex = SimplexOptions {
        max_evals: per_start,
        initial_step: 0.05,
        f_tol: 1e-15,
        target: 1e-12,
    };
    let mut best: Option<(Vec<f64>, f64)> = None;
    for x0 in &starts {
        let m = nelder_mead(&mut objective, x0, &lower, &upper, &simplex);
        if best.as_ref().is_none_or(|(_, f)| m.f < *f) {
            best = Some((m.x, m.f));
        }
        if best.as_ref().is_some_and(|(_, f)| *f <= simplex.target) {
            break;
        }
    }
    // Long waits let the transfer leakage of different spectator
    // configurations realign; only worth trying when short waits fail.
    if best.as_ref().is_some_and(|(_, f)| *f > 0.5 * opts.tolerance) {
        let mut long = Vec::new();
        for &delta in &[0.85 * dm, dm] {
            for &eps in &[0.0, -0.125 * dm] {
                for j in 1..=LONG_WAIT_PERIODS {
                    let wait = problem.nominal_wait + j as f64 * period;
                    let transfer = PI * HBAR / libm::sqrt(eps * eps + 4.0 * delta * delta);
                    long.push([delta, eps, wait, transfer]);
                }
            }
        }
        let per_long = (opts.calibration_evals / long.len()).max(20);
        for x0 in &long {
            let m = nelder_mead(&mut objective, x0, &lower, &upper, &SimplexOptions { max_evals: per_long, ..simplex });
            if best.as_ref().is_none_or(|(_, f)| m.f < *f) {
                best = Some((m.x, m.f));
            }
        }
    }
    let (x, _) = best.expect("at least one start");
    // Polish the winner with the remaining budget.
    let polish = SimplexOptions {
        max_evals: opts.calibration_evals / 4,
        initial_step: 0.002,
        ..simplex
    };
    let m = nelder_mead(&mut objective, &x, &lower, &upper, &polish);
    let p = params(&m.x);
    let (f, phases) = cal.score(&p)?;
    Ok((p, phases, 1.0 - f.average_fidelity))
}

/// Simulates `schedule` on the full register and compares the
/// computational block (idle frame) with `target` on the participants and
/// identity elsewhere.
pub fn verify(
    layout: &RegisterLayout,
    schedule: &ControlSchedule,
    participants: &[usize],
    target: &CMatrix,
    opts: &GateOptions,
) -> Result<(FidelityReport, CMatrix, ConfigurationBasis)> {
    let basis = enumerate_basis_capped(layout, opts.basis_cap)?;
    let comp = Subspace::computational(&basis);
    let mut out = propagate_columns(layout, &basis, schedule, &subspace_inputs(&comp))?;
    idle_frame(&basis, &mut out, schedule.total_duration());
    let m = out.select(&comp.indices, &(0..comp.len()).collect::<Vec<_>>());
    let full = embed(target, participants, layout.qudits, layout.levels);
    Ok((block_fidelity(&m, &full)?, m, basis))
}

/// `target` on the participants tensored with identity on the rest, in the
/// lexicographic computational order of the whole register.
pub fn embed(target: &CMatrix, participants: &[usize], n: usize, d: usize) -> CMatrix {
    let tuples = level_tuples(n, d);
    let sub = |t: &[usize]| tuple_index(&participants.iter().map(|&q| t[q]).collect::<Vec<_>>(), d);
    CMatrix::from_fn(tuples.len(), tuples.len(), |r, c| {
        let (tr, tc) = (&tuples[r], &tuples[c]);
        let spectators_equal = (0..n).filter(|q| !participants.contains(q)).all(|q| tr[q] == tc[q]);
        if spectators_equal {
            target[(sub(tr), sub(tc))]
        } else {
            ZERO
        }
    })
}

/// Diagonal phases of the participants' computational states taken from a
/// simulated block, spectators at `|spectator_level>`.
fn realized_phases(m: &CMatrix, participants: &[usize], n: usize, d: usize, spectator_level: usize) -> Vec<f64> {
    level_tuples(participants.len(), d)
        .iter()
        .map(|t| {
            let mut full = vec![spectator_level; n];
            for (&q, &l) in participants.iter().zip(t) {
                full[q] = l;
            }
            let i = tuple_index(&full, d);
            m[(i, i)].arg()
        })
        .collect()
}

fn compile_phase(layout: &RegisterLayout, participants: &[usize], phi: f64, strict: bool, opts: &GateOptions) -> Result<GateReport> {
    let problem = phase_problem(layout, participants, phi, strict, opts)?;
    let k = participants.len();
    let d = layout.levels;
    let (pulse, phases) = if wrap_phase(phi) == 0.0 {
        let zero = PulseParameters {
            delta: opts.delta_max,
            aux_offset: 0.0,
            wait: 0.0,
            transfer: 0.0,
        };
        (zero, vec![vec![0.0; d]; k])
    } else {
        let (p, ph, _) = calibrate(&problem, opts)?;
        (p, ph)
    };
    let mut schedule = skeleton(layout, &problem.plan, &pulse, &phases, opts)?;
    if wrap_phase(phi) == 0.0 {
        schedule.segments[3].duration = 0.0;
        schedule.segments[3].controls = ControlValues::zero();
    }
    let target = diagonal_target(&problem.target);
    let (fidelity, m, _) = verify(layout, &schedule, participants, &target, opts)?;

    let spectator = 2.min(d);
    let mut theta = realized_phases(&m, participants, layout.qudits, d, spectator);
    let g = fidelity.global_phase;
    theta.iter_mut().for_each(|t| *t = wrap_phase(*t - g));
    let conditional = wrap_phase(conditional_phase_of(&theta, k, d, 2));
    let mut pairwise = Vec::new();
    for i in 0..k {
        for j in (i + 1)..k {
            pairwise.push(PairPhase {
                a: participants[i],
                b: participants[j],
                phase: wrap_phase(pair_phase_of(&theta, k, d, i, j, 2)),
            });
        }
    }
    let residual = wrap_phase(k_body_phase_of(&theta, k, d, 2) - if k == 2 { conditional } else { 0.0 });

    let duration = schedule.total_duration();
    let budget = budget_or_unbounded(duration, opts.coherence_time);
    let infidelity = 1.0 - fidelity.average_fidelity;
    Ok(GateReport {
        gate: if strict { "controlled_phase" } else { "k_phase" }.to_string(),
        participants: participants.to_vec(),
        movers: problem.plan.movers.clone(),
        auxiliaries: problem.plan.auxiliaries.clone(),
        schedule,
        fidelity,
        duration_ps: duration,
        budget_fraction: budget.fraction,
        max_sequential: budget.max_sequential,
        tolerance: opts.tolerance,
        meets_tolerance: infidelity <= opts.tolerance,
        target_phases: problem.target,
        target_phi: Some(wrap_phase(phi)),
        conditional_phase: Some(conditional),
        delta_v: Some(problem.delta_v),
        nominal_wait_ps: Some(problem.nominal_wait),
        pulse: Some(pulse),
        pairwise_phases: pairwise,
        residual_phase: Some(residual),
        rotations: 0,
    })
}

/// Controlled phase `φ` on the all-`|1>` state of the participants.
pub fn compile_controlled_phase(layout: &RegisterLayout, participants: &[usize], phi: f64, opts: &GateOptions) -> Result<GateReport> {
    compile_phase(layout, participants, phi, true, opts)
}

/// Phase gate whose conditional phase on the all-`|1>` configuration is `φ`,
/// with the diagonal pattern the pairwise interaction naturally produces.
/// The report lists the pairwise phases and the k-body residual.
pub fn compile_k_phase(layout: &RegisterLayout, participants: &[usize], phi: f64, opts: &GateOptions) -> Result<GateReport> {
    // With two participants the natural pattern is the controlled phase.
    compile_phase(layout, participants, phi, participants.len() == 2, opts)
}

/// The report's phase-gate schedule with different pulse parameters; the
/// single-qudit correction layer is kept as compiled.
pub fn with_pulse(layout: &RegisterLayout, report: &GateReport, pulse: &PulseParameters, opts: &GateOptions) -> Result<ControlSchedule> {
    if report.pulse.is_none() || report.schedule.len() != 4 {
        return Err(GateError::Invalid(format!("`{}` report has no pulse skeleton", report.gate)));
    }
    let plan = Plan {
        participants: report.participants.clone(),
        movers: report.movers.clone(),
        auxiliaries: report.auxiliaries.clone(),
    };
    let mut s = skeleton(layout, &plan, pulse, &[], opts)?;
    s.push(report.schedule.segments[3].clone());
    Ok(s)
}

/// Nominal wait `t = λħ` and conditional energy for a phase gate, without
/// calibration.
pub fn nominal_wait(layout: &RegisterLayout, participants: &[usize], phi: f64, opts: &GateOptions) -> Result<(f64, f64)> {
    let p = phase_problem(layout, participants, phi, false, opts)?;
    Ok((p.nominal_wait, p.delta_v))
}

/// A rotation `L·X(angle)·R` on levels `(level, level+1)`, where
/// `X(a) = [[cos a, i sin a], [i sin a, cos a]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelRotation {
    pub level: usize,
    pub angle: f64,
    pub left: [f64; 2],
    pub right: [f64; 2],
}

/// Givens elimination with adjacent-level rotations:
/// `U = G_1†·…·G_m†·Λ`. Returns the `G_i†` (in that order) and `Λ`.
pub fn givens_decomposition(u: &CMatrix) -> (Vec<(usize, [[C64; 2]; 2])>, Vec<C64>) {
    let d = u.rows();
    let mut w = u.clone();
    let mut ops = Vec::new();
    for c in 0..d.saturating_sub(1) {
        for r in ((c + 1)..d).rev() {
            let (a, b) = (w[(r - 1, c)], w[(r, c)]);
            if b.norm() < 1e-14 {
                continue;
            }
            let n = libm::hypot(a.norm(), b.norm());
            let g = [[a.conj() / n, b.conj() / n], [-b / n, a / n]];
            for col in 0..d {
                let (x, y) = (w[(r - 1, col)], w[(r, col)]);
                w[(r - 1, col)] = g[0][0] * x + g[0][1] * y;
                w[(r, col)] = g[1][0] * x + g[1][1] * y;
            }
            let gd = [[g[0][0].conj(), g[1][0].conj()], [g[0][1].conj(), g[1][1].conj()]];
            ops.push((r - 1, gd));
        }
    }
    let lambda = (0..d).map(|i| w[(i, i)]).collect();
    (ops, lambda)
}

fn two_level(level: usize, w: &[[C64; 2]; 2]) -> TwoLevelRotation {
    let c = w[0][0].norm();
    let s = w[0][1].norm();
    if s < 1e-15 {
        return TwoLevelRotation {
            level,
            angle: 0.0,
            left: [w[0][0].arg(), w[1][1].arg()],
            right: [0.0, 0.0],
        };
    }
    let alpha1 = if c < 1e-15 { 0.0 } else { w[0][0].arg() };
    TwoLevelRotation {
        level,
        angle: libm::atan2(s, c),
        left: [alpha1, w[1][0].arg() - PI / 2.0],
        right: [0.0, w[0][1].arg() - PI / 2.0 - alpha1],
    }
}

/// Arbitrary `D×D` unitary on one qudit from B-gate pulses at `Δ_max` on
/// adjacent levels and S-gate phase layers.
pub fn synthesize_single_qudit(layout: &RegisterLayout, qudit: usize, target: &CMatrix, opts: &GateOptions) -> Result<GateReport> {
    let d = layout.levels;
    if qudit >= layout.qudits {
        return Err(GateError::InvalidParticipants(format!("no qudit {qudit}")));
    }
    if target.rows() != d || target.cols() != d {
        return Err(GateError::Invalid(format!("target must be {d}×{d}")));
    }
    let defect = target.unitarity_defect();
    if !(defect <= 1e-10) {
        return Err(GateError::NotUnitary(defect));
    }
    let (ops, lambda) = givens_decomposition(target);
    let rotations: Vec<TwoLevelRotation> = ops.iter().map(|(l, w)| two_level(*l, w)).collect();

    let mut schedule = ControlSchedule::default();
    let mut layer: Vec<f64> = lambda.iter().map(|z| z.arg()).collect();
    let flush = |layer: &mut Vec<f64>, schedule: &mut ControlSchedule| {
        if layer.iter().any(|&p| wrap_phase(p).abs() > 1e-15) {
            schedule.push(phase_layer(layout, &[qudit], &[layer.clone()], opts.phase_time));
        }
        layer.iter_mut().for_each(|p| *p = 0.0);
    };
    // Time order is Λ, then G_m†, …, G_1†.
    for rot in rotations.iter().rev() {
        if rot.angle == 0.0 {
            layer[rot.level] += rot.left[0];
            layer[rot.level + 1] += rot.left[1];
            continue;
        }
        layer[rot.level] += rot.right[0];
        layer[rot.level + 1] += rot.right[1];
        flush(&mut layer, &mut schedule);
        let (a, b) = (layout.dot(qudit, rot.level + 1), layout.dot(qudit, rot.level + 2));
        let gate = layout.electrodes.barrier_between(a, b).ok_or(GateError::MissingHandle(a, b))?;
        schedule.push(Segment::new(
            rot.angle * HBAR / opts.delta_max,
            ControlValues::zero().with_barrier(gate.handle, opts.delta_max),
        ));
        layer[rot.level] += rot.left[0];
        layer[rot.level + 1] += rot.left[1];
    }
    flush(&mut layer, &mut schedule);
    if schedule.is_empty() {
        schedule.push(Segment::idle(0.0));
    }

    let (fidelity, _, _) = verify(layout, &schedule, &[qudit], target, opts)?;
    let duration = schedule.total_duration();
    let budget = budget_or_unbounded(duration, opts.coherence_time);
    Ok(GateReport {
        gate: "single_qudit".into(),
        participants: vec![qudit],
        movers: Vec::new(),
        auxiliaries: Vec::new(),
        schedule,
        fidelity,
        duration_ps: duration,
        budget_fraction: budget.fraction,
        max_sequential: budget.max_sequential,
        tolerance: opts.tolerance,
        meets_tolerance: 1.0 - fidelity.average_fidelity <= opts.tolerance,
        target_phases: Vec::new(),
        target_phi: None,
        conditional_phase: None,
        delta_v: None,
        nominal_wait_ps: None,
        pulse: None,
        pairwise_phases: Vec::new(),
        residual_phase: None,
        rotations: rotations.iter().filter(|r| r.angle != 0.0).count(),
    })
}

pub fn compile(layout: &RegisterLayout, spec: &GateSpec, opts: &GateOptions) -> Result<GateReport> {
    let opts = GateOptions {
        tolerance: spec.tolerance,
        ..*opts
    };
    match &spec.kind {
        GateKind::SingleQudit { qudit, target } => synthesize_single_qudit(layout, *qudit, target, &opts),
        GateKind::ControlledPhase { participants, phi } => compile_controlled_phase(layout, participants, *phi, &opts),
        GateKind::KPhase { participants, phi } => compile_k_phase(layout, participants, *phi, &opts),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelSchedule {
    pub schedule: ControlSchedule,
    /// Upper bound on the infidelity added by Coulomb coupling between the
    /// merged gates.
    pub crosstalk_bound: f64,
}

/// Runs gates on disjoint qudit sets at the same time. Segments are cut at
/// the union of all stage boundaries; a finished gate contributes zero
/// controls.
pub fn schedule_parallel(layout: &RegisterLayout, reports: &[&GateReport]) -> Result<ParallelSchedule> {
    for (i, a) in reports.iter().enumerate() {
        for b in &reports[i + 1..] {
            if let Some(q) = a.participants.iter().find(|q| b.participants.contains(q)) {
                return Err(GateError::Overlap(format!("qudit {q}")));
            }
            if let Some(x) = a.auxiliaries.iter().find(|x| b.auxiliaries.contains(x)) {
                return Err(GateError::Overlap(format!("auxiliary {x}")));
            }
        }
    }
    let active: Vec<&GateReport> = reports.iter().copied().filter(|r| r.duration_ps > 0.0).collect();
    if active.is_empty() {
        let schedule = reports
            .first()
            .map(|r| r.schedule.clone())
            .unwrap_or_else(|| ControlSchedule::new(vec![Segment::idle(0.0)]));
        return Ok(ParallelSchedule {
            schedule,
            crosstalk_bound: 0.0,
        });
    }
    if active.len() == 1 {
        return Ok(ParallelSchedule {
            schedule: active[0].schedule.clone(),
            crosstalk_bound: 0.0,
        });
    }

    let mut cuts: Vec<f64> = vec![0.0];
    for r in &active {
        let mut t = 0.0;
        for s in &r.schedule.segments {
            t += s.duration;
            cuts.push(t);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));

    let controls_at = |r: &GateReport, t: f64| -> ControlValues {
        let mut start = 0.0;
        for s in &r.schedule.segments {
            let end = start + s.duration;
            if t >= start && t < end {
                return s.controls.clone();
            }
            start = end;
        }
        ControlValues::zero()
    };
    let mut schedule = ControlSchedule::default();
    for w in cuts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let c = active.iter().fold(ControlValues::zero(), |acc, r| acc.merged(&controls_at(r, mid)));
        schedule.push(Segment::new(w[1] - w[0], c));
    }

    let sites_of = |r: &GateReport| -> Vec<Vec<usize>> {
        r.participants
            .iter()
            .map(|&q| {
                let mut s: Vec<usize> = (1..=layout.levels).map(|l| layout.dot(q, l)).collect();
                if let Some(i) = r.movers.iter().position(|&m| m == q) {
                    s.push(r.auxiliaries[i]);
                }
                s
            })
            .collect()
    };
    let mut spread = 0.0;
    for (i, a) in active.iter().enumerate() {
        for b in &active[i + 1..] {
            for qa in sites_of(a) {
                for qb in sites_of(b) {
                    let mut worst: f64 = 0.0;
                    for &x in &qa {
                        for &y in &qb {
                            worst = worst.max(pair_energy(layout, x, y));
                        }
                    }
                    spread += 2.0 * worst;
                }
            }
        }
    }
    let phase = spread * schedule.total_duration() / HBAR;
    Ok(ParallelSchedule {
        schedule,
        crosstalk_bound: (phase * phase).min(1.0),
    })
}

/// Conditional energy of the participants between two placements, expressed
/// through explicit sites (used by the switching analysis).
pub fn conditional_energy_between(layout: &RegisterLayout, active: &[usize], reference: &[usize]) -> Result<f64> {
    Ok(conditional_energy(layout, active, reference)?)
}

/// Identity helper for targets.
pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d)
}

/// `exp(i·phi)` on the all-`|1>` state of `k` qudits with `d` levels.
pub fn controlled_phase_target(k: usize, d: usize, phi: f64) -> CMatrix {
    let n = d.pow(k as u32);
    let mut diag = vec![ONE; n];
    diag[0] = cis(phi);
    CMatrix::from_diagonal(&diag)
}
