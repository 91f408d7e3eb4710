//! Configuration basis and Hamiltonian assembly.
//!
//! A configuration records, for each qudit, the site its electron occupies.
//! The Hamiltonian is real symmetric in this basis: on-site shifts and pair
//! Coulomb energies on the diagonal, `-Δ` between configurations related by
//! one hop across a B-gated pair.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::COULOMB_K;
use crate::layout::{LayoutError, RegisterLayout};
use crate::linalg::{CMatrix, C64};

pub const DEFAULT_BASIS_CAP: usize = 65_536;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error("basis has more than {cap} configurations")]
    BasisTooLarge { cap: usize },
    #[error("unknown {kind} handle {handle}")]
    UnknownHandle { kind: &'static str, handle: usize },
    #[error("invalid control value on {kind} handle {handle}: {value}")]
    InvalidControl {
        kind: &'static str,
        handle: usize,
        value: f64,
    },
    #[error("qudit {0} has no auxiliary")]
    NoAuxiliary(usize),
    #[error("qudits {0} and {1} would both occupy site {2}")]
    Collision(usize, usize, usize),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = core::result::Result<T, ModelError>;

/// Occupied site of each qudit's electron.
pub type Configuration = Vec<usize>;

/// Pair Coulomb energy in meV between two sites, including screening and
/// permittivity.
pub fn pair_energy(layout: &RegisterLayout, a: usize, b: usize) -> f64 {
    let (sa, sb) = (&layout.sites[a], &layout.sites[b]);
    let s = layout.screening.get(a, b);
    if s == 0.0 {
        return 0.0;
    }
    let eps = layout.permittivity.between(sa.is_auxiliary(), sb.is_auxiliary());
    s * COULOMB_K / (eps * sa.distance(sb))
}

/// Σ over unordered electron pairs of the pair energy.
pub fn coulomb_energy(layout: &RegisterLayout, config: &[usize]) -> f64 {
    let mut e = 0.0;
    for (i, &a) in config.iter().enumerate() {
        for &b in &config[i + 1..] {
            e += pair_energy(layout, a, b);
        }
    }
    e
}

/// A legal single-electron hop between basis states `from < to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hop {
    pub from: usize,
    pub to: usize,
    pub handle: usize,
    pub qudit: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigurationBasis {
    /// Sites available to each qudit: its dots by level, then its auxiliaries.
    pub options: Vec<Vec<usize>>,
    pub configs: Vec<Configuration>,
    pub coulomb: Vec<f64>,
    pub hops: Vec<Hop>,
    index: BTreeMap<Configuration, usize>,
    levels: usize,
}

pub fn enumerate_basis(layout: &RegisterLayout) -> Result<ConfigurationBasis> {
    enumerate_basis_capped(layout, DEFAULT_BASIS_CAP)
}

/// Lexicographic enumeration (qudit 0 most significant, options in the
/// order dots-by-level then auxiliaries by id), skipping any configuration
/// that puts two electrons on one site.
pub fn enumerate_basis_capped(layout: &RegisterLayout, cap: usize) -> Result<ConfigurationBasis> {
    let n = layout.qudits;
    let options: Vec<Vec<usize>> = (0..n)
        .map(|q| {
            let mut o: Vec<usize> = (1..=layout.levels).map(|l| layout.dot(q, l)).collect();
            o.extend(layout.auxiliaries_of(q));
            o
        })
        .collect();

    let mut configs = Vec::new();
    let mut counter = vec![0usize; n];
    let mut current: Configuration = options.iter().map(|o| o[0]).collect();
    'outer: loop {
        let distinct = (0..n).all(|i| !current[i + 1..].contains(&current[i]));
        if distinct {
            if configs.len() == cap {
                return Err(ModelError::BasisTooLarge { cap });
            }
            configs.push(current.clone());
        }
        let mut q = n;
        loop {
            if q == 0 {
                break 'outer;
            }
            q -= 1;
            counter[q] += 1;
            if counter[q] < options[q].len() {
                current[q] = options[q][counter[q]];
                break;
            }
            counter[q] = 0;
            current[q] = options[q][0];
        }
    }

    let index: BTreeMap<Configuration, usize> =
        configs.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
    let coulomb = configs.iter().map(|c| coulomb_energy(layout, c)).collect();

    let mut hops = Vec::new();
    for (i, config) in configs.iter().enumerate() {
        for (q, &site) in config.iter().enumerate() {
            for gate in &layout.electrodes.barrier {
                let other = match gate.sites {
                    [a, b] if a == site => b,
                    [a, b] if b == site => a,
                    _ => continue,
                };
                if !options[q].contains(&other) || config.contains(&other) {
                    continue;
                }
                let mut next = config.clone();
                next[q] = other;
                let j = index[&next];
                if i < j {
                    hops.push(Hop {
                        from: i,
                        to: j,
                        handle: gate.handle,
                        qudit: q,
                    });
                }
            }
        }
    }

    Ok(ConfigurationBasis {
        options,
        configs,
        coulomb,
        hops,
        index,
        levels: layout.levels,
    })
}

impl ConfigurationBasis {
    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn qudits(&self) -> usize {
        self.options.len()
    }

    pub fn index_of(&self, config: &[usize]) -> Option<usize> {
        self.index.get(config).copied()
    }

    /// Index of the computational state with 1-based `levels` per qudit.
    pub fn index_of_levels(&self, levels: &[usize]) -> Option<usize> {
        if levels.len() != self.qudits() {
            return None;
        }
        let mut config = Vec::with_capacity(levels.len());
        for (q, &l) in levels.iter().enumerate() {
            if l < 1 || l > self.levels {
                return None;
            }
            config.push(self.options[q][l - 1]);
        }
        self.index_of(&config)
    }

    /// Level tuple of a basis state, `None` if any electron is on an auxiliary.
    pub fn levels_of(&self, index: usize) -> Option<Vec<usize>> {
        let config = &self.configs[index];
        config
            .iter()
            .enumerate()
            .map(|(q, &site)| {
                self.options[q][..self.levels]
                    .iter()
                    .position(|&s| s == site)
                    .map(|p| p + 1)
            })
            .collect()
    }

    /// Basis indices of all computational states, in lexicographic level
    /// order (which is also basis order).
    pub fn computational_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.levels_of(i).is_some()).collect()
    }
}

/// Tunnelling amplitudes (B handles) and on-site shifts (S handles), meV.
/// Handles that are absent are zero.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlValues {
    pub barrier: BTreeMap<usize, f64>,
    pub shift: BTreeMap<usize, f64>,
}

impl ControlValues {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn with_barrier(mut self, handle: usize, delta: f64) -> Self {
        self.barrier.insert(handle, delta);
        self
    }

    pub fn with_shift(mut self, handle: usize, energy: f64) -> Self {
        self.shift.insert(handle, energy);
        self
    }

    pub fn delta(&self, handle: usize) -> f64 {
        self.barrier.get(&handle).copied().unwrap_or(0.0)
    }

    pub fn energy(&self, handle: usize) -> f64 {
        self.shift.get(&handle).copied().unwrap_or(0.0)
    }

    /// Handle-wise sum; used when merging schedules that act on disjoint
    /// electrodes.
    pub fn merged(&self, other: &ControlValues) -> ControlValues {
        let mut out = self.clone();
        for (&h, &v) in &other.barrier {
            *out.barrier.entry(h).or_insert(0.0) += v;
        }
        for (&h, &v) in &other.shift {
            *out.shift.entry(h).or_insert(0.0) += v;
        }
        out
    }

    /// Checks that every handle exists and every value is finite, with
    /// `0 <= Δ <= delta_max`.
    pub fn validate(&self, layout: &RegisterLayout, delta_max: f64) -> Result<()> {
        for (&handle, &value) in &self.barrier {
            if handle >= layout.electrodes.barrier.len() {
                return Err(ModelError::UnknownHandle {
                    kind: "B-gate",
                    handle,
                });
            }
            if !value.is_finite() || value < 0.0 || value > delta_max {
                return Err(ModelError::InvalidControl {
                    kind: "B-gate",
                    handle,
                    value,
                });
            }
        }
        for (&handle, &value) in &self.shift {
            if layout.electrodes.shift_for(handle).is_none() {
                return Err(ModelError::UnknownHandle {
                    kind: "S-gate",
                    handle,
                });
            }
            if !value.is_finite() {
                return Err(ModelError::InvalidControl {
                    kind: "S-gate",
                    handle,
                    value,
                });
            }
        }
        Ok(())
    }
}

/// One nonzero off-diagonal element pair `H[from,to] = H[to,from] = value`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub from: usize,
    pub to: usize,
    pub value: f64,
    pub handle: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianModel {
    /// On-site plus Coulomb energy per configuration.
    pub diagonal: Vec<f64>,
    /// Coulomb part of the diagonal.
    pub coulomb: Vec<f64>,
    pub couplings: Vec<Coupling>,
}

/// Assembles `H` for fixed controls. Δ is only checked for sign and
/// finiteness here; upper limits are a compiler concern.
pub fn build_hamiltonian(
    layout: &RegisterLayout,
    basis: &ConfigurationBasis,
    controls: &ControlValues,
) -> Result<HamiltonianModel> {
    controls.validate(layout, f64::INFINITY)?;
    let mut site_shift = vec![0.0; layout.site_count()];
    for (&handle, &e) in &controls.shift {
        let gate = layout.electrodes.shift_for(handle).expect("validated");
        site_shift[gate.site] += e;
    }
    let diagonal = basis
        .configs
        .iter()
        .zip(&basis.coulomb)
        .map(|(c, v)| v + c.iter().map(|&s| site_shift[s]).sum::<f64>())
        .collect();
    let couplings = basis
        .hops
        .iter()
        .filter_map(|h| {
            let d = controls.delta(h.handle);
            (d != 0.0).then_some(Coupling {
                from: h.from,
                to: h.to,
                value: -d,
                handle: h.handle,
            })
        })
        .collect();
    Ok(HamiltonianModel {
        diagonal,
        coulomb: basis.coulomb.clone(),
        couplings,
    })
}

impl HamiltonianModel {
    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim(), self.dim());
        for (i, &d) in self.diagonal.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        for c in &self.couplings {
            m[(c.from, c.to)] += C64::new(c.value, 0.0);
            m[(c.to, c.from)] += C64::new(c.value, 0.0);
        }
        m
    }

    /// `-H`; evolving under it undoes evolution under `H`.
    pub fn negated(&self) -> Self {
        Self {
            diagonal: self.diagonal.iter().map(|x| -x).collect(),
            coulomb: self.coulomb.iter().map(|x| -x).collect(),
            couplings: self
                .couplings
                .iter()
                .map(|c| Coupling {
                    value: -c.value,
                    ..*c
                })
                .collect(),
        }
    }

    /// Nonzero entries as `(row, col, value)` in row-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, C64)> {
        let m = self.dense();
        let mut out = Vec::new();
        for r in 0..m.rows() {
            for c in 0..m.cols() {
                if m[(r, c)] != C64::new(0.0, 0.0) {
                    out.push((r, c, m[(r, c)]));
                }
            }
        }
        out
    }
}

/// Where a participant's electron sits in a term of the conditional energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// The qudit's assigned (nearest) auxiliary.
    Auxiliary,
    /// Dot hosting `|level>`.
    Level(usize),
}

pub fn placement_site(layout: &RegisterLayout, qudit: usize, p: Placement) -> Result<usize> {
    if qudit >= layout.qudits {
        return Err(ModelError::Invalid(format!("no qudit {qudit}")));
    }
    match p {
        Placement::Auxiliary => layout
            .assigned_auxiliary(qudit)
            .ok_or(ModelError::NoAuxiliary(qudit)),
        Placement::Level(l) if (1..=layout.levels).contains(&l) => Ok(layout.dot(qudit, l)),
        Placement::Level(l) => Err(ModelError::Invalid(format!("no level {l}"))),
    }
}

/// Inclusion–exclusion `Σ_S (-1)^(k-|S|) E(S active, rest reference)` over
/// subsets of participants, with `E` the Coulomb energy among participants
/// only. Zero for a single participant.
pub fn conditional_energy(layout: &RegisterLayout, active: &[usize], reference: &[usize]) -> Result<f64> {
    let k = active.len();
    if reference.len() != k {
        return Err(ModelError::Invalid("placement lists differ in length".into()));
    }
    if k > 20 {
        return Err(ModelError::Invalid(format!("{k} participants is too many")));
    }
    let mut total = 0.0;
    let mut config = vec![0; k];
    for mask in 0u32..(1 << k) {
        for i in 0..k {
            config[i] = if mask & (1 << i) != 0 { active[i] } else { reference[i] };
        }
        for i in 0..k {
            if let Some(j) = config[i + 1..].iter().position(|&s| s == config[i]) {
                return Err(ModelError::Collision(i, i + 1 + j, config[i]));
            }
        }
        let sign = if (k - mask.count_ones() as usize) % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * coulomb_energy(layout, &config);
    }
    Ok(total)
}

/// Conditional energy of `participants` between `active` and `reference`
/// placements. For two qudits: `V(a,a) - V(a,r) - V(r,a) + V(r,r)`.
pub fn differential_phase_rate(
    layout: &RegisterLayout,
    participants: &[usize],
    active: Placement,
    reference: Placement,
) -> Result<f64> {
    let act = participants
        .iter()
        .map(|&q| placement_site(layout, q, active))
        .collect::<Result<Vec<_>>>()?;
    let refs = participants
        .iter()
        .map(|&q| placement_site(layout, q, reference))
        .collect::<Result<Vec<_>>>()?;
    for &q in participants {
        if layout.assigned_auxiliary(q).is_none() {
            return Err(ModelError::NoAuxiliary(q));
        }
    }
    conditional_energy(layout, &act, &refs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{build_register, Geometry, Scheme};

    fn setup(scheme: Scheme, n: usize, d: usize) -> (RegisterLayout, ConfigurationBasis) {
        let l = build_register(scheme, n, d, &Geometry::default()).unwrap();
        let b = enumerate_basis(&l).unwrap();
        (l, b)
    }

    #[test]
    fn basis_sizes() {
        assert_eq!(setup(Scheme::AlwaysOn, 2, 3).1.len(), 9);
        assert_eq!(setup(Scheme::AuxPerQudit, 2, 3).1.len(), 16);
        assert_eq!(setup(Scheme::SharedAux, 2, 3).1.len(), 15);
    }

    #[test]
    fn cap_is_enforced() {
        let l = build_register(Scheme::AuxPerQudit, 3, 3, &Geometry::default()).unwrap();
        assert_eq!(
            enumerate_basis_capped(&l, 63),
            Err(ModelError::BasisTooLarge { cap: 63 })
        );
        assert_eq!(enumerate_basis_capped(&l, 64).unwrap().len(), 64);
    }

    #[test]
    fn single_qutrit_coupling() {
        let (l, b) = setup(Scheme::AlwaysOn, 1, 3);
        let c = ControlValues::zero().with_barrier(0, 0.1);
        let h = build_hamiltonian(&l, &b, &c).unwrap().dense();
        assert_eq!(h[(0, 1)], C64::new(-0.1, 0.0));
        assert_eq!(h[(1, 0)], C64::new(-0.1, 0.0));
        assert_eq!(h[(1, 2)], C64::new(0.0, 0.0));
        assert!((h.norm_sqr() - 0.02).abs() < 1e-15);
    }

    #[test]
    fn unknown_handle_rejected() {
        let (l, b) = setup(Scheme::AlwaysOn, 1, 3);
        let c = ControlValues::zero().with_barrier(7, 0.1);
        assert!(matches!(
            build_hamiltonian(&l, &b, &c),
            Err(ModelError::UnknownHandle { .. })
        ));
        let c = ControlValues::zero().with_shift(3, 0.1);
        assert!(build_hamiltonian(&l, &b, &c).is_err());
    }

    #[test]
    fn levels_round_trip() {
        let (_, b) = setup(Scheme::SharedAux, 3, 3);
        let comp = b.computational_indices();
        assert_eq!(comp.len(), 27);
        for (n, &i) in comp.iter().enumerate() {
            let lv = b.levels_of(i).unwrap();
            assert_eq!(b.index_of_levels(&lv), Some(i));
            let expected = [n / 9 + 1, (n / 3) % 3 + 1, n % 3 + 1];
            assert_eq!(lv, expected);
        }
    }

    #[test]
    fn single_participant_has_no_conditional_energy() {
        let (l, _) = setup(Scheme::AuxPerQudit, 2, 3);
        let v = differential_phase_rate(&l, &[0], Placement::Auxiliary, Placement::Level(2)).unwrap();
        assert_eq!(v, 0.0);
        let (l, _) = setup(Scheme::AlwaysOn, 2, 3);
        assert_eq!(
            differential_phase_rate(&l, &[0, 1], Placement::Level(1), Placement::Level(2)),
            Err(ModelError::NoAuxiliary(0))
        );
    }
}
