//! Piecewise-constant propagation and gate metrics.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::HBAR;
use crate::layout::RegisterLayout;
use crate::linalg::{cis, CMatrix, SymEigen, C64, ZERO};
use crate::model::{build_hamiltonian, ConfigurationBasis, ControlValues, HamiltonianModel, ModelError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("segment {0} has an invalid duration {1}")]
    InvalidDuration(usize, f64),
    #[error("schedule has no segments")]
    EmptySchedule,
    #[error("projector is not an idempotent diagonal 0/1 matrix")]
    NotAProjector,
    #[error("state norm {0} differs from 1")]
    NotNormalized(f64),
}

pub type Result<T> = core::result::Result<T, EvolveError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    /// ps
    pub duration: f64,
    #[serde(default)]
    pub controls: ControlValues,
}

impl Segment {
    pub fn new(duration: f64, controls: ControlValues) -> Self {
        Self { duration, controls }
    }

    pub fn idle(duration: f64) -> Self {
        Self::new(duration, ControlValues::zero())
    }
}

/// Segments applied in order. Zero-length segments are allowed so that a
/// protocol keeps its shape when a stage vanishes (e.g. a zero-phase wait).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSchedule {
    pub segments: Vec<Segment>,
}

impl ControlSchedule {
    pub fn new(segments: Vec<Segment>) -> Self {
        Self { segments }
    }

    pub fn push(&mut self, segment: Segment) {
        self.segments.push(segment);
    }

    pub fn extend(&mut self, other: &ControlSchedule) {
        self.segments.extend(other.segments.iter().cloned());
    }

    pub fn then(mut self, other: &ControlSchedule) -> Self {
        self.extend(other);
        self
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn validate(&self, layout: &RegisterLayout, delta_max: f64) -> Result<()> {
        if self.segments.is_empty() {
            return Err(EvolveError::EmptySchedule);
        }
        for (i, s) in self.segments.iter().enumerate() {
            if !(s.duration.is_finite() && s.duration >= 0.0) {
                return Err(EvolveError::InvalidDuration(i, s.duration));
            }
            s.controls.validate(layout, delta_max)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Propagator {
    pub matrix: CMatrix,
}

impl Propagator {
    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub amplitudes: Vec<C64>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        let n = norm(&amplitudes);
        if (n - 1.0).abs() > 1e-9 {
            return Err(EvolveError::NotNormalized(n));
        }
        Ok(Self { amplitudes })
    }

    pub fn basis_state(dim: usize, index: usize) -> Self {
        let mut amplitudes = vec![ZERO; dim];
        amplitudes[index] = C64::new(1.0, 0.0);
        Self { amplitudes }
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }
}

fn norm(v: &[C64]) -> f64 {
    libm::sqrt(v.iter().map(|z| z.norm_sqr()).sum())
}

/// Computational subspace given by basis indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subspace {
    pub dim: usize,
    pub indices: Vec<usize>,
}

impl Subspace {
    pub fn new(dim: usize, indices: Vec<usize>) -> Self {
        debug_assert!(indices.iter().all(|&i| i < dim));
        Self { dim, indices }
    }

    pub fn computational(basis: &ConfigurationBasis) -> Self {
        Self::new(basis.len(), basis.computational_indices())
    }

    pub fn full(dim: usize) -> Self {
        Self::new(dim, (0..dim).collect())
    }

    /// Accepts only projectors diagonal in the configuration basis.
    pub fn from_projector(p: &CMatrix) -> Result<Self> {
        if !p.is_square() {
            return Err(EvolveError::NotAProjector);
        }
        let sq = p * p;
        if sq.max_abs_diff(p) > 1e-12 {
            return Err(EvolveError::NotAProjector);
        }
        let mut indices = Vec::new();
        for r in 0..p.rows() {
            for c in 0..p.cols() {
                let v = p[(r, c)];
                if r != c && v.norm() > 1e-12 {
                    return Err(EvolveError::NotAProjector);
                }
            }
            if (p[(r, r)] - C64::new(1.0, 0.0)).norm() < 1e-12 {
                indices.push(r);
            }
        }
        Ok(Self::new(p.rows(), indices))
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn projector(&self) -> CMatrix {
        let mut p = CMatrix::zeros(self.dim, self.dim);
        for &i in &self.indices {
            p[(i, i)] = C64::new(1.0, 0.0);
        }
        p
    }
}

/// `exp(-iHt/ħ)` stored per connected block of the coupling graph.
struct SegmentExp {
    phases: Vec<C64>,
    blocks: Vec<(Vec<usize>, CMatrix)>,
}

impl SegmentExp {
    fn new(h: &HamiltonianModel, t: f64) -> Self {
        let n = h.dim();
        let tau = t / HBAR;
        let phases = h.diagonal.iter().map(|&e| cis(-e * tau)).collect();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for c in &h.couplings {
            let (a, b) = (find(&mut parent, c.from), find(&mut parent, c.to));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let root: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut local = vec![0; n];
        for i in 0..n {
            local[i] = members[root[i]].len();
            members[root[i]].push(i);
        }
        let mut matrices: Vec<Vec<f64>> = members
            .iter()
            .map(|idx| {
                let m = idx.len();
                let mut a = vec![0.0; if m > 1 { m * m } else { 0 }];
                if m > 1 {
                    for (k, &i) in idx.iter().enumerate() {
                        a[k * m + k] = h.diagonal[i];
                    }
                }
                a
            })
            .collect();
        for c in &h.couplings {
            let r = root[c.from];
            let m = members[r].len();
            let (i, j) = (local[c.from], local[c.to]);
            matrices[r][i * m + j] += c.value;
            matrices[r][j * m + i] += c.value;
        }
        let blocks = members
            .into_iter()
            .zip(matrices)
            .filter(|(idx, _)| idx.len() > 1)
            .map(|(idx, a)| {
                let e = SymEigen::new(idx.len(), &a).exp_i(tau);
                (idx, e)
            })
            .collect();
        Self { phases, blocks }
    }

    /// `state <- E · state` for a `dim × m` matrix.
    fn apply(&self, state: &mut CMatrix) {
        let cols = state.cols();
        let mut in_block = vec![false; self.phases.len()];
        for (idx, _) in &self.blocks {
            for &i in idx {
                in_block[i] = true;
            }
        }
        for (r, &ph) in self.phases.iter().enumerate() {
            if !in_block[r] {
                state.row_mut(r).iter_mut().for_each(|z| *z *= ph);
            }
        }
        let mut buf = Vec::new();
        for (idx, e) in &self.blocks {
            let m = idx.len();
            buf.clear();
            buf.resize(m * cols, ZERO);
            for (k, &i) in idx.iter().enumerate() {
                let row = state.row(i);
                for kk in 0..m {
                    let w = e[(kk, k)];
                    if w == ZERO {
                        continue;
                    }
                    let out = &mut buf[kk * cols..(kk + 1) * cols];
                    for (o, v) in out.iter_mut().zip(row) {
                        *o += w * v;
                    }
                }
            }
            for (kk, &j) in idx.iter().enumerate() {
                state.row_mut(j).copy_from_slice(&buf[kk * cols..(kk + 1) * cols]);
            }
        }
    }
}

/// Product of segment exponentials, first segment applied first.
pub fn propagate_models(models: &[(HamiltonianModel, f64)]) -> Propagator {
    let n = models.first().map_or(0, |(h, _)| h.dim());
    let mut u = CMatrix::identity(n);
    for (h, t) in models {
        SegmentExp::new(h, *t).apply(&mut u);
    }
    Propagator { matrix: u }
}

fn segment_models(
    layout: &RegisterLayout,
    basis: &ConfigurationBasis,
    schedule: &ControlSchedule,
) -> Result<Vec<(HamiltonianModel, f64)>> {
    schedule.validate(layout, f64::INFINITY)?;
    schedule
        .segments
        .iter()
        .map(|s| Ok((build_hamiltonian(layout, basis, &s.controls)?, s.duration)))
        .collect()
}

/// `U = Π_k exp(-i H_k t_k / ħ)`, later segments to the left.
pub fn propagate(
    layout: &RegisterLayout,
    basis: &ConfigurationBasis,
    schedule: &ControlSchedule,
) -> Result<Propagator> {
    Ok(propagate_models(&segment_models(layout, basis, schedule)?))
}

/// Evolves the columns of `states` (`dim × m`) through the schedule; cheaper
/// than building the full propagator when only a few inputs matter.
pub fn propagate_columns(
    layout: &RegisterLayout,
    basis: &ConfigurationBasis,
    schedule: &ControlSchedule,
    states: &CMatrix,
) -> Result<CMatrix> {
    if states.rows() != basis.len() {
        return Err(EvolveError::DimensionMismatch {
            expected: basis.len(),
            got: states.rows(),
        });
    }
    let mut out = states.clone();
    for (h, t) in segment_models(layout, basis, schedule)? {
        SegmentExp::new(&h, t).apply(&mut out);
    }
    Ok(out)
}

/// `dim × len` matrix whose columns are the subspace basis states.
pub fn subspace_inputs(subspace: &Subspace) -> CMatrix {
    let mut m = CMatrix::zeros(subspace.dim, subspace.len());
    for (c, &i) in subspace.indices.iter().enumerate() {
        m[(i, c)] = C64::new(1.0, 0.0);
    }
    m
}

/// Moves an evolved block into the interaction frame of the idle register:
/// row `r` is multiplied by `exp(+i V_r T / ħ)`, `V` the static Coulomb
/// energies. Removes the always-present electrostatic phases so that a gate
/// is judged only on what its controls do.
pub fn idle_frame(basis: &ConfigurationBasis, evolved: &mut CMatrix, total_time: f64) {
    for (r, &v) in basis.coulomb.iter().enumerate() {
        let ph = cis(v * total_time / HBAR);
        evolved.row_mut(r).iter_mut().for_each(|z| *z *= ph);
    }
}

pub fn evolve_state(psi: &StateVector, u: &Propagator) -> Result<StateVector> {
    if psi.dim() != u.dim() {
        return Err(EvolveError::DimensionMismatch {
            expected: u.dim(),
            got: psi.dim(),
        });
    }
    Ok(StateVector {
        amplitudes: u.matrix.mul_vec(&psi.amplitudes),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub process_fidelity: f64,
    pub average_fidelity: f64,
    pub leakage: f64,
    /// Phase of `Tr(target† M)`, the global phase that was factored out.
    pub global_phase: f64,
}

/// `P U P` on the subspace, from a full propagator.
pub fn restrict(u: &CMatrix, subspace: &Subspace) -> CMatrix {
    u.select(&subspace.indices, &subspace.indices)
}

/// Metrics of the restricted block `m` against `target` (both `d × d`).
pub fn block_fidelity(m: &CMatrix, target: &CMatrix) -> Result<FidelityReport> {
    let d = m.rows();
    if target.rows() != d || target.cols() != d || m.cols() != d {
        return Err(EvolveError::DimensionMismatch {
            expected: d,
            got: target.rows(),
        });
    }
    let mut overlap = ZERO;
    for r in 0..d {
        for c in 0..d {
            overlap += target[(r, c)].conj() * m[(r, c)];
        }
    }
    let df = d as f64;
    let kept = m.norm_sqr();
    let process = overlap.norm_sqr() / (df * df);
    Ok(FidelityReport {
        process_fidelity: process,
        average_fidelity: (df * process + kept / df) / (df + 1.0),
        leakage: (1.0 - kept / df).max(0.0),
        global_phase: overlap.arg(),
    })
}

pub fn gate_fidelity(u: &Propagator, target: &CMatrix, subspace: &Subspace) -> Result<FidelityReport> {
    if subspace.dim != u.dim() {
        return Err(EvolveError::DimensionMismatch {
            expected: u.dim(),
            got: subspace.dim,
        });
    }
    block_fidelity(&restrict(&u.matrix, subspace), target)
}

/// Variant taking a projector matrix; rejects anything that is not one.
pub fn gate_fidelity_with_projector(u: &Propagator, target: &CMatrix, projector: &CMatrix) -> Result<FidelityReport> {
    gate_fidelity(u, target, &Subspace::from_projector(projector)?)
}

pub fn leakage_profile(psi: &StateVector, subspace: &Subspace) -> Result<f64> {
    if psi.dim() != subspace.dim {
        return Err(EvolveError::DimensionMismatch {
            expected: subspace.dim,
            got: psi.dim(),
        });
    }
    let inside: f64 = subspace.indices.iter().map(|&i| psi.amplitudes[i].norm_sqr()).sum();
    Ok((1.0 - inside).clamp(0.0, 1.0))
}
