//! Unit system: nm, meV, ps.

use serde::{Deserialize, Serialize};

/// Reduced Planck constant in meV·ps.
pub const HBAR: f64 = 0.658_211_956_9;

/// Coulomb constant e²/(4πε₀) in meV·nm.
pub const COULOMB_K: f64 = 1439.96;

/// Relative permittivity of silicon.
pub const SILICON_PERMITTIVITY: f64 = 11.7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub coulomb_k: f64,
    pub default_permittivity: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            hbar: HBAR,
            coulomb_k: COULOMB_K,
            default_permittivity: SILICON_PERMITTIVITY,
        }
    }
}
