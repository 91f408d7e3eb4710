//! Register geometries for the three architectures.
//!
//! Qudits sit at a fixed horizontal pitch and alternate above and below a
//! centre line. Dot `|1>` of every qudit faces the centre line; higher levels
//! extend away from it. Auxiliary dots, when present, sit on the centre line:
//! one under each qudit (`aux_per_qudit`) or one per pair of qudits,
//! horizontally offset so that it is enclosed by four qudits (`shared_aux`).
//!
//! Site ids: qudit dots first (`q·D + level - 1`), then auxiliaries.

pub mod dimension;

pub use dimension::{
    dimension_scan, hilbert_dim_integer, hilbert_log_dim, optimal_qudit_size, DimensionReport,
    DimensionRow, OptimalSize,
};

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::SILICON_PERMITTIVITY;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LayoutError {
    #[error("invalid register parameters: {0}")]
    InvalidParameters(String),
    #[error("site {0} does not exist")]
    UnknownSite(usize),
    #[error("sites {0} and {1} would coincide")]
    CoincidentSites(usize, usize),
    #[error("screening factor {0} outside [0, 1]")]
    InvalidScreening(f64),
}

pub type Result<T> = core::result::Result<T, LayoutError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// No auxiliaries; permanent interaction between facing `|1>` dots.
    AlwaysOn,
    /// One auxiliary dot per qudit.
    AuxPerQudit,
    /// One auxiliary per two qudits, each shared by up to four qudits.
    SharedAux,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::AlwaysOn, Scheme::SharedAux, Scheme::AuxPerQudit];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::AlwaysOn => "always_on",
            Scheme::AuxPerQudit => "aux_per_qudit",
            Scheme::SharedAux => "shared_aux",
        }
    }

    /// Number of auxiliaries needed by a register of `qudits` qudits.
    pub fn auxiliary_count(self, qudits: usize) -> usize {
        match self {
            Scheme::AlwaysOn => 0,
            Scheme::AuxPerQudit => qudits,
            Scheme::SharedAux => qudits.div_ceil(2),
        }
    }
}

impl core::fmt::Display for Scheme {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for Scheme {
    type Err = LayoutError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "always_on" => Ok(Scheme::AlwaysOn),
            "aux_per_qudit" => Ok(Scheme::AuxPerQudit),
            "shared_aux" => Ok(Scheme::SharedAux),
            other => Err(LayoutError::InvalidParameters(format!("unknown scheme `{other}`"))),
        }
    }
}

/// Spacings in nm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Geometry {
    /// Distance between neighbouring dots of one qudit.
    pub dot_spacing: f64,
    /// Distance from dot `|1>` to the centre line carrying the auxiliaries.
    pub aux_gap: f64,
    /// Horizontal distance between consecutive qudits; equals the
    /// auxiliary-to-auxiliary distance in `aux_per_qudit`.
    pub pitch: f64,
    /// Vertical distance between the `|1>` dots of upper and lower qudits
    /// in the always-on arrangement.
    pub stagger: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            dot_spacing: 20.0,
            aux_gap: 20.0,
            pitch: 20.0,
            stagger: 30.0,
        }
    }
}

impl Geometry {
    fn validate(&self) -> Result<()> {
        let fields = [
            ("dot_spacing", self.dot_spacing),
            ("aux_gap", self.aux_gap),
            ("pitch", self.pitch),
            ("stagger", self.stagger),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(LayoutError::InvalidParameters(format!(
                    "spacing `{name}` must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Relative permittivity of the two material regions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Permittivity {
    pub substrate: f64,
    /// Region around the auxiliary dots.
    pub auxiliary: f64,
}

impl Default for Permittivity {
    fn default() -> Self {
        Self::uniform(SILICON_PERMITTIVITY)
    }
}

impl Permittivity {
    pub fn uniform(eps: f64) -> Self {
        Self {
            substrate: eps,
            auxiliary: eps,
        }
    }

    /// Effective permittivity between two sites: the mean of their regions.
    pub fn between(&self, a_is_aux: bool, b_is_aux: bool) -> f64 {
        let region = |aux| if aux { self.auxiliary } else { self.substrate };
        0.5 * (region(a_is_aux) + region(b_is_aux))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SiteKind {
    /// Dot hosting state `|level>` (1-based) of `qudit`.
    QuditDot { qudit: usize, level: usize },
    /// Auxiliary dot reachable from dot `|1>` of each owner.
    Auxiliary { owners: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DotSite {
    pub id: usize,
    /// Position in nm.
    pub position: [f64; 3],
    pub kind: SiteKind,
}

impl DotSite {
    pub fn is_auxiliary(&self) -> bool {
        matches!(self.kind, SiteKind::Auxiliary { .. })
    }

    /// Auxiliaries and `|1>` dots face the centre line; deeper dots sit
    /// behind the trenches.
    pub fn is_exposed(&self) -> bool {
        match self.kind {
            SiteKind::Auxiliary { .. } => true,
            SiteKind::QuditDot { level, .. } => level == 1,
        }
    }

    pub fn distance(&self, other: &DotSite) -> f64 {
        distance(&self.position, &other.position)
    }
}

pub(crate) fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    libm::sqrt(d)
}

/// B-gate: controls tunnelling between two sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BarrierGate {
    pub handle: usize,
    pub sites: [usize; 2],
}

/// S-gate: shifts the on-site energy of one site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftGate {
    pub handle: usize,
    pub site: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ElectrodeMap {
    pub barrier: Vec<BarrierGate>,
    pub shift: Vec<ShiftGate>,
}

impl ElectrodeMap {
    pub fn barrier_between(&self, a: usize, b: usize) -> Option<&BarrierGate> {
        self.barrier
            .iter()
            .find(|g| g.sites == [a, b] || g.sites == [b, a])
    }

    pub fn shift_for(&self, site: usize) -> Option<&ShiftGate> {
        self.shift.iter().find(|g| g.site == site)
    }
}

/// Symmetric pairwise screening factors `s_ij ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningMatrix {
    n: usize,
    values: Vec<f64>,
}

impl ScreeningMatrix {
    pub fn filled(n: usize, s: f64) -> Self {
        Self {
            n,
            values: alloc::vec![s; n * n],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.n + b]
    }

    pub fn set(&mut self, a: usize, b: usize, s: f64) -> Result<()> {
        if a >= self.n {
            return Err(LayoutError::UnknownSite(a));
        }
        if b >= self.n {
            return Err(LayoutError::UnknownSite(b));
        }
        if !(0.0..=1.0).contains(&s) {
            return Err(LayoutError::InvalidScreening(s));
        }
        self.values[a * self.n + b] = s;
        self.values[b * self.n + a] = s;
        Ok(())
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|a| (0..self.n).all(|b| self.get(a, b) == self.get(b, a)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegisterLayout {
    pub scheme: Scheme,
    pub qudits: usize,
    pub levels: usize,
    pub geometry: Geometry,
    pub sites: Vec<DotSite>,
    pub electrodes: ElectrodeMap,
    pub screening: ScreeningMatrix,
    pub permittivity: Permittivity,
    /// Screening applied to every inter-qudit pair that involves a dot
    /// behind the trenches (any level above `|1>`).
    pub trench_screening: f64,
}

/// Builds the register for `scheme` with `qudits` qudits of `levels` dots.
///
/// Screening defaults to ideal trenches (`trench_screening = 0`): exposed
/// sites (auxiliaries and `|1>` dots) interact without attenuation, every
/// other inter-qudit pair is fully screened. Use
/// [`RegisterLayout::with_trench_screening`] for bare `1/r`.
pub fn build_register(
    scheme: Scheme,
    qudits: usize,
    levels: usize,
    geometry: &Geometry,
) -> Result<RegisterLayout> {
    if qudits < 1 {
        return Err(LayoutError::InvalidParameters("at least one qudit is required".into()));
    }
    if levels < 2 {
        return Err(LayoutError::InvalidParameters(format!(
            "qudits need at least two levels, got {levels}"
        )));
    }
    if scheme == Scheme::SharedAux && qudits < 2 {
        return Err(LayoutError::InvalidParameters(
            "shared_aux needs at least two qudits to share an auxiliary".into(),
        ));
    }
    geometry.validate()?;

    let side = |q: usize| if q % 2 == 0 { 1.0 } else { -1.0 };
    let x_of = |q: usize| q as f64 * geometry.pitch;
    let first_dot_offset = match scheme {
        Scheme::AlwaysOn => 0.5 * geometry.stagger,
        Scheme::AuxPerQudit | Scheme::SharedAux => geometry.aux_gap,
    };

    let mut sites = Vec::with_capacity(qudits * levels + scheme.auxiliary_count(qudits));
    for q in 0..qudits {
        for level in 1..=levels {
            let y = side(q) * (first_dot_offset + (level - 1) as f64 * geometry.dot_spacing);
            sites.push(DotSite {
                id: sites.len(),
                position: [x_of(q), y, 0.0],
                kind: SiteKind::QuditDot { qudit: q, level },
            });
        }
    }
    match scheme {
        Scheme::AlwaysOn => {}
        Scheme::AuxPerQudit => {
            for q in 0..qudits {
                sites.push(DotSite {
                    id: sites.len(),
                    position: [x_of(q), 0.0, 0.0],
                    kind: SiteKind::Auxiliary { owners: alloc::vec![q] },
                });
            }
        }
        Scheme::SharedAux => {
            // Auxiliary j sits between qudits 2j+1 and 2j+2; its four nearest
            // qudits are 2j..=2j+3, clipped at the register edge.
            for j in 0..scheme.auxiliary_count(qudits) {
                let owners: Vec<usize> = (2 * j..2 * j + 4).filter(|&q| q < qudits).collect();
                sites.push(DotSite {
                    id: sites.len(),
                    position: [(2 * j) as f64 * geometry.pitch + 1.5 * geometry.pitch, 0.0, 0.0],
                    kind: SiteKind::Auxiliary { owners },
                });
            }
        }
    }

    let mut electrodes = ElectrodeMap::default();
    for q in 0..qudits {
        for level in 1..levels {
            let a = q * levels + level - 1;
            electrodes.barrier.push(BarrierGate {
                handle: electrodes.barrier.len(),
                sites: [a, a + 1],
            });
        }
    }
    for site in &sites {
        if let SiteKind::Auxiliary { owners } = &site.kind {
            for &q in owners {
                electrodes.barrier.push(BarrierGate {
                    handle: electrodes.barrier.len(),
                    sites: [q * levels, site.id],
                });
            }
        }
    }
    for site in &sites {
        electrodes.shift.push(ShiftGate {
            handle: site.id,
            site: site.id,
        });
    }

    let n = sites.len();
    let mut layout = RegisterLayout {
        scheme,
        qudits,
        levels,
        geometry: *geometry,
        sites,
        electrodes,
        screening: ScreeningMatrix::filled(n, 1.0),
        permittivity: Permittivity::default(),
        trench_screening: 0.0,
    };
    layout.reset_screening();
    layout.check_distinct_positions()?;
    Ok(layout)
}

impl RegisterLayout {
    /// Closed-form site count for a scheme.
    pub fn expected_site_count(scheme: Scheme, qudits: usize, levels: usize) -> usize {
        qudits * levels + scheme.auxiliary_count(qudits)
    }

    pub fn site_count(&self) -> usize {
        self.sites.len()
    }

    pub fn dot(&self, qudit: usize, level: usize) -> usize {
        debug_assert!(qudit < self.qudits && (1..=self.levels).contains(&level));
        qudit * self.levels + level - 1
    }

    pub fn auxiliaries(&self) -> impl Iterator<Item = &DotSite> {
        self.sites.iter().filter(|s| s.is_auxiliary())
    }

    /// Auxiliary sites reachable by `qudit`, in id order.
    pub fn auxiliaries_of(&self, qudit: usize) -> Vec<usize> {
        self.sites
            .iter()
            .filter_map(|s| match &s.kind {
                SiteKind::Auxiliary { owners } if owners.contains(&qudit) => Some(s.id),
                _ => None,
            })
            .collect()
    }

    /// The auxiliary a qudit uses by default: the nearest one to its `|1>`
    /// dot, lowest id on ties.
    pub fn assigned_auxiliary(&self, qudit: usize) -> Option<usize> {
        let d1 = &self.sites[self.dot(qudit, 1)];
        self.auxiliaries_of(qudit).into_iter().min_by(|&a, &b| {
            let da = d1.distance(&self.sites[a]);
            let db = d1.distance(&self.sites[b]);
            da.partial_cmp(&db).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b))
        })
    }

    pub fn owners_of(&self, site: usize) -> &[usize] {
        match &self.sites[site].kind {
            SiteKind::Auxiliary { owners } => owners,
            SiteKind::QuditDot { .. } => &[],
        }
    }

    /// Qudit owning a dot, `None` for auxiliaries.
    pub fn qudit_of(&self, site: usize) -> Option<usize> {
        match self.sites[site].kind {
            SiteKind::QuditDot { qudit, .. } => Some(qudit),
            SiteKind::Auxiliary { .. } => None,
        }
    }

    pub fn with_permittivity(mut self, permittivity: Permittivity) -> Self {
        self.permittivity = permittivity;
        self
    }

    /// Sets the trench factor and rebuilds the default screening matrix,
    /// discarding earlier per-pair overrides.
    pub fn with_trench_screening(mut self, s: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&s) {
            return Err(LayoutError::InvalidScreening(s));
        }
        self.trench_screening = s;
        self.reset_screening();
        Ok(self)
    }

    pub fn set_screening(&mut self, a: usize, b: usize, s: f64) -> Result<()> {
        self.screening.set(a, b, s)
    }

    /// Moves a site. Used to explore custom geometries.
    pub fn set_position(&mut self, site: usize, position: [f64; 3]) -> Result<()> {
        if site >= self.sites.len() {
            return Err(LayoutError::UnknownSite(site));
        }
        if position.iter().any(|x| !x.is_finite()) {
            return Err(LayoutError::InvalidParameters("non-finite position".into()));
        }
        let old = self.sites[site].position;
        self.sites[site].position = position;
        if let Err(e) = self.check_distinct_positions() {
            self.sites[site].position = old;
            return Err(e);
        }
        Ok(())
    }

    /// Sub-register made of `qudits` (renumbered `0..`) and the listed
    /// auxiliaries, each reachable only from the given owners. Positions,
    /// screening and permittivity carry over unchanged.
    pub fn restrict(&self, qudits: &[usize], auxiliaries: &[(usize, Vec<usize>)]) -> Result<RegisterLayout> {
        let d = self.levels;
        let mut old_ids = Vec::new();
        let mut sites = Vec::new();
        for (new_q, &q) in qudits.iter().enumerate() {
            if q >= self.qudits {
                return Err(LayoutError::InvalidParameters(format!("no qudit {q}")));
            }
            for level in 1..=d {
                let old = self.dot(q, level);
                old_ids.push(old);
                sites.push(DotSite {
                    id: sites.len(),
                    position: self.sites[old].position,
                    kind: SiteKind::QuditDot { qudit: new_q, level },
                });
            }
        }
        for (aux, owners) in auxiliaries {
            if !self.sites.get(*aux).is_some_and(DotSite::is_auxiliary) {
                return Err(LayoutError::UnknownSite(*aux));
            }
            let mut new_owners = Vec::new();
            for o in owners {
                match qudits.iter().position(|q| q == o) {
                    Some(i) if self.owners_of(*aux).contains(o) => new_owners.push(i),
                    _ => {
                        return Err(LayoutError::InvalidParameters(format!(
                            "qudit {o} cannot reach auxiliary {aux}"
                        )))
                    }
                }
            }
            old_ids.push(*aux);
            sites.push(DotSite {
                id: sites.len(),
                position: self.sites[*aux].position,
                kind: SiteKind::Auxiliary { owners: new_owners },
            });
        }
        let mut electrodes = ElectrodeMap::default();
        for q in 0..qudits.len() {
            for level in 1..d {
                let a = q * d + level - 1;
                electrodes.barrier.push(BarrierGate { handle: electrodes.barrier.len(), sites: [a, a + 1] });
            }
        }
        for site in &sites {
            if let SiteKind::Auxiliary { owners } = &site.kind {
                for &q in owners {
                    electrodes.barrier.push(BarrierGate { handle: electrodes.barrier.len(), sites: [q * d, site.id] });
                }
            }
        }
        for site in &sites {
            electrodes.shift.push(ShiftGate { handle: site.id, site: site.id });
        }
        let n = sites.len();
        let mut screening = ScreeningMatrix::filled(n, 1.0);
        for a in 0..n {
            for b in 0..n {
                screening.values[a * n + b] = self.screening.get(old_ids[a], old_ids[b]);
            }
        }
        Ok(RegisterLayout {
            scheme: self.scheme,
            qudits: qudits.len(),
            levels: d,
            geometry: self.geometry,
            sites,
            electrodes,
            screening,
            permittivity: self.permittivity,
            trench_screening: self.trench_screening,
        })
    }

    fn reset_screening(&mut self) {
        let n = self.sites.len();
        let mut m = ScreeningMatrix::filled(n, 1.0);
        for a in 0..n {
            for b in (a + 1)..n {
                let (sa, sb) = (&self.sites[a], &self.sites[b]);
                let same_qudit = matches!((self.qudit_of(a), self.qudit_of(b)), (Some(x), Some(y)) if x == y);
                let s = if same_qudit || (sa.is_exposed() && sb.is_exposed()) {
                    1.0
                } else {
                    self.trench_screening
                };
                m.values[a * n + b] = s;
                m.values[b * n + a] = s;
            }
        }
        self.screening = m;
    }

    fn check_distinct_positions(&self) -> Result<()> {
        for (i, a) in self.sites.iter().enumerate() {
            for b in &self.sites[i + 1..] {
                if a.distance(b) <= 1e-9 {
                    return Err(LayoutError::CoincidentSites(a.id, b.id));
                }
            }
        }
        Ok(())
    }

    /// Checks every structural invariant of the layout.
    pub fn validate(&self) -> Result<()> {
        let expected = Self::expected_site_count(self.scheme, self.qudits, self.levels);
        if self.sites.len() != expected {
            return Err(LayoutError::InvalidParameters(format!(
                "{} sites, expected {expected}",
                self.sites.len()
            )));
        }
        self.check_distinct_positions()?;
        for site in &self.sites {
            match &site.kind {
                SiteKind::QuditDot { qudit, level } => {
                    if *qudit >= self.qudits || *level < 1 || *level > self.levels {
                        return Err(LayoutError::InvalidParameters(format!(
                            "site {} has no valid owner",
                            site.id
                        )));
                    }
                    if *level < self.levels
                        && self
                            .electrodes
                            .barrier_between(site.id, site.id + 1)
                            .is_none()
                    {
                        return Err(LayoutError::InvalidParameters(format!(
                            "missing B-gate after site {}",
                            site.id
                        )));
                    }
                }
                SiteKind::Auxiliary { owners } => {
                    let max = match self.scheme {
                        Scheme::AlwaysOn => 0,
                        Scheme::AuxPerQudit => 1,
                        Scheme::SharedAux => 4,
                    };
                    if owners.is_empty() || owners.len() > max {
                        return Err(LayoutError::InvalidParameters(format!(
                            "auxiliary {} has {} owners",
                            site.id,
                            owners.len()
                        )));
                    }
                    for &q in owners {
                        if self
                            .electrodes
                            .barrier_between(self.dot(q, 1), site.id)
                            .is_none()
                        {
                            return Err(LayoutError::InvalidParameters(format!(
                                "missing B-gate between qudit {q} and auxiliary {}",
                                site.id
                            )));
                        }
                    }
                }
            }
        }
        if !self.screening.is_symmetric() {
            return Err(LayoutError::InvalidParameters("screening is not symmetric".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout(scheme: Scheme, n: usize, d: usize) -> RegisterLayout {
        build_register(scheme, n, d, &Geometry::default()).unwrap()
    }

    #[test]
    fn always_on_counts() {
        let l = layout(Scheme::AlwaysOn, 2, 3);
        assert_eq!(l.site_count(), 6);
        assert_eq!(l.electrodes.barrier.len(), 4);
        assert_eq!(l.electrodes.shift.len(), 6);
        let l = layout(Scheme::AlwaysOn, 1, 5);
        assert_eq!((l.site_count(), l.electrodes.barrier.len(), l.electrodes.shift.len()), (5, 4, 5));
    }

    #[test]
    fn aux_per_qudit_links_level_one_to_own_auxiliary() {
        let l = layout(Scheme::AuxPerQudit, 2, 3);
        assert_eq!(l.site_count(), 8);
        for q in 0..2 {
            let aux = l.assigned_auxiliary(q).unwrap();
            assert_eq!(l.owners_of(aux), &[q]);
            assert!(l.electrodes.barrier_between(l.dot(q, 1), aux).is_some());
            assert!(l.electrodes.barrier_between(l.dot(q, 2), aux).is_none());
        }
        let l = layout(Scheme::AuxPerQudit, 3, 3);
        assert_eq!((l.site_count(), l.auxiliaries().count()), (12, 3));
    }

    #[test]
    fn shared_aux_owned_by_four_nearest() {
        let l = layout(Scheme::SharedAux, 4, 3);
        assert_eq!(l.site_count(), 14);
        let auxes: Vec<_> = l.auxiliaries().map(|s| s.id).collect();
        assert_eq!(auxes.len(), 2);
        assert_eq!(l.owners_of(auxes[0]), &[0, 1, 2, 3]);
        assert_eq!(l.owners_of(auxes[1]), &[2, 3]);
        // ownership agrees with geometric proximity
        let aux = &l.sites[auxes[0]];
        let mut by_distance: Vec<(f64, usize)> = (0..4)
            .map(|q| (aux.distance(&l.sites[l.dot(q, 1)]), q))
            .collect();
        by_distance.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(by_distance[1].0 < by_distance[2].0);
    }

    #[test]
    fn staggered_sides() {
        let l = layout(Scheme::AuxPerQudit, 3, 3);
        let y = |q| l.sites[l.dot(q, 1)].position[1];
        assert!(y(0) > 0.0 && y(1) < 0.0 && y(2) > 0.0);
        for aux in l.auxiliaries() {
            assert_eq!(aux.position[1], 0.0);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let g = Geometry::default();
        assert!(build_register(Scheme::SharedAux, 1, 3, &g).is_err());
        assert!(build_register(Scheme::AlwaysOn, 0, 3, &g).is_err());
        assert!(build_register(Scheme::AlwaysOn, 2, 1, &g).is_err());
        let bad = Geometry { pitch: -1.0, ..g };
        assert!(build_register(Scheme::AlwaysOn, 2, 3, &bad).is_err());
    }

    #[test]
    fn default_screening_uses_exposure() {
        let l = layout(Scheme::AuxPerQudit, 2, 3);
        let aux0 = l.assigned_auxiliary(0).unwrap();
        let aux1 = l.assigned_auxiliary(1).unwrap();
        assert_eq!(l.screening.get(aux0, aux1), 1.0);
        assert_eq!(l.screening.get(l.dot(0, 1), l.dot(1, 1)), 1.0);
        assert_eq!(l.screening.get(l.dot(0, 2), l.dot(1, 1)), 0.0);
        let bare = l.with_trench_screening(1.0).unwrap();
        assert_eq!(bare.screening.get(bare.dot(0, 2), bare.dot(1, 1)), 1.0);
    }

    #[test]
    fn site_counts_match_closed_form() {
        for scheme in Scheme::ALL {
            for n in 1..=20 {
                for d in 2..=6 {
                    match build_register(scheme, n, d, &Geometry::default()) {
                        Ok(l) => {
                            assert_eq!(l.site_count(), RegisterLayout::expected_site_count(scheme, n, d));
                            l.validate().unwrap();
                        }
                        Err(_) => assert!(scheme == Scheme::SharedAux && n == 1),
                    }
                }
            }
        }
    }
}
