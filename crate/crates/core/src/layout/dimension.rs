use alloc::format;
use alloc::vec::Vec;
use core::ops::RangeInclusive;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use super::{LayoutError, Result, Scheme};

fn check(k: usize, d: usize) -> Result<()> {
    if k < 1 {
        return Err(LayoutError::InvalidParameters("K must be at least 1".into()));
    }
    if d < 2 {
        return Err(LayoutError::InvalidParameters(format!("D must be at least 2, got {d}")));
    }
    Ok(())
}

/// Sites consumed per qudit, on average.
fn sites_per_qudit(scheme: Scheme, d: usize) -> f64 {
    match scheme {
        Scheme::AlwaysOn => d as f64,
        Scheme::AuxPerQudit => d as f64 + 1.0,
        Scheme::SharedAux => d as f64 + 0.5,
    }
}

/// `log10` of the continuous register dimension `D^(K/c)`.
///
/// `log10 D` is evaluated as `log2(D)·log10(2)` so that powers of two are
/// exact multiples of one constant and `2^(K/2) = 4^(K/4)` holds bit-for-bit.
pub fn hilbert_log_dim(k: usize, d: usize, scheme: Scheme) -> Result<f64> {
    check(k, d)?;
    let log10_d = libm::log2(d as f64) * core::f64::consts::LOG10_2;
    Ok(k as f64 / sites_per_qudit(scheme, d) * log10_d)
}

/// Number of whole qudits that fit in `k` sites.
pub fn whole_qudits(k: usize, d: usize, scheme: Scheme) -> usize {
    match scheme {
        Scheme::AlwaysOn => k / d,
        Scheme::AuxPerQudit => k / (d + 1),
        Scheme::SharedAux => {
            let mut m = k / d;
            while m > 0 && m * d + m.div_ceil(2) > k {
                m -= 1;
            }
            m
        }
    }
}

/// Exact dimension `D^m` of a register built from whole qudits.
pub fn hilbert_dim_integer(k: usize, d: usize, scheme: Scheme) -> Result<BigUint> {
    check(k, d)?;
    let m = whole_qudits(k, d, scheme);
    Ok(BigUint::from(d).pow(m as u32))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalSize {
    pub d: usize,
    pub log10_dim: f64,
    /// Another `D` in the range reached the same value.
    pub tied: bool,
}

/// Maximising `D`; ties go to the smaller `D`.
pub fn optimal_qudit_size(
    k: usize,
    scheme: Scheme,
    d_range: RangeInclusive<usize>,
) -> Result<OptimalSize> {
    if d_range.is_empty() {
        return Err(LayoutError::InvalidParameters("empty D range".into()));
    }
    let mut best: Option<OptimalSize> = None;
    for d in d_range {
        let v = hilbert_log_dim(k, d, scheme)?;
        match &mut best {
            None => {
                best = Some(OptimalSize {
                    d,
                    log10_dim: v,
                    tied: false,
                })
            }
            Some(b) if v > b.log10_dim => {
                *b = OptimalSize {
                    d,
                    log10_dim: v,
                    tied: false,
                }
            }
            Some(b) if v == b.log10_dim => b.tied = true,
            _ => {}
        }
    }
    Ok(best.expect("non-empty range"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionRow {
    pub scheme: Scheme,
    pub d: usize,
    pub k: usize,
    pub log10_dim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub k: usize,
    pub rows: Vec<DimensionRow>,
    pub argmax: Vec<(Scheme, OptimalSize)>,
}

impl DimensionReport {
    pub fn argmax_of(&self, scheme: Scheme) -> Option<usize> {
        self.argmax.iter().find(|(s, _)| *s == scheme).map(|(_, o)| o.d)
    }
}

/// Table over every scheme and every `D` in range, in [`Scheme::ALL`] order.
pub fn dimension_scan(k: usize, d_range: RangeInclusive<usize>) -> Result<DimensionReport> {
    if d_range.is_empty() {
        return Err(LayoutError::InvalidParameters("empty D range".into()));
    }
    let mut rows = Vec::new();
    let mut argmax = Vec::new();
    for scheme in Scheme::ALL {
        for d in d_range.clone() {
            rows.push(DimensionRow {
                scheme,
                d,
                k,
                log10_dim: hilbert_log_dim(k, d, scheme)?,
            });
        }
        argmax.push((scheme, optimal_qudit_size(k, scheme, d_range.clone())?));
    }
    Ok(DimensionReport { k, rows, argmax })
}
