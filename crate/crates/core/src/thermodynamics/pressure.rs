use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::potential::{decode, Potential, SymbolTable};
use crate::coding::{TruncatedAlphabet, DEFAULT_ENUMERATION_CAP};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PressureEstimate {
    /// `P_j = (1/j) log Z_j` for `j = 1..=n`.
    pub depth_values: Vec<f64>,
    /// `log Z_n - log Z_{n-1}`.
    pub extrapolated: f64,
    pub error_est: f64,
    pub truncation: u64,
    pub memory: usize,
}

/// Cylinder sums `Z_j = sum_{|w| = j} exp(sup_[w] S_j psi)` on the `M`-truncated
/// alphabet. The sup over a cylinder is exact for the tabulated potential: the
/// last `k` windows are maximised over all extensions of the word.
pub fn pressure_cylinder_sum(
    potential: &Potential,
    alphabet: &TruncatedAlphabet,
    depth: usize,
    memory: usize,
) -> Result<PressureEstimate> {
    let table = potential.tabulate(alphabet, memory)?;
    let mut estimate = table_pressure(&table, depth)?;
    estimate.truncation = alphabet.max_digit();
    Ok(estimate)
}

/// `pressure_cylinder_sum` for an already tabulated potential.
pub fn table_pressure(table: &SymbolTable, depth: usize) -> Result<PressureEstimate> {
    if depth == 0 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    let base = table.base();
    let requested = (base as f64).powi(depth as i32);
    if requested > DEFAULT_ENUMERATION_CAP as f64 {
        return Err(Error::EnumerationCap {
            requested,
            cap: DEFAULT_ENUMERATION_CAP,
        });
    }
    let k = table.memory();
    let tails = tail_sups(table);
    let mut log_z = Vec::with_capacity(depth);
    for n in 1..=depth {
        let lz = log_cylinder_sum(table, &tails, n);
        if n == 1 && !lz.is_finite() {
            return Err(Error::SummabilityFailure(lz));
        }
        log_z.push(lz);
    }
    let depth_values: Vec<f64> = log_z
        .iter()
        .enumerate()
        .map(|(i, lz)| lz / (i + 1) as f64)
        .collect();
    let extrapolated = if depth >= 2 {
        log_z[depth - 1] - log_z[depth - 2]
    } else {
        log_z[0]
    };
    Ok(PressureEstimate {
        error_est: (depth_values[depth - 1] - extrapolated).abs(),
        depth_values,
        extrapolated,
        truncation: table
            .symbols()
            .iter()
            .map(|s| s.m().get().max(s.n().get()))
            .max()
            .unwrap_or(0),
        memory: k,
    })
}

/// `tails[u]` = max over `e` of the sum of the `k` windows of `u e` that start
/// in `u`, for every `k`-word `u`.
fn tail_sups(table: &SymbolTable) -> Vec<f64> {
    let base = table.base();
    let k = table.memory();
    let count = base.pow(k as u32);
    (0..count)
        .into_par_iter()
        .map(|u| {
            let mut word = vec![0usize; 2 * k];
            decode(u, base, &mut word[..k]);
            (0..count)
                .map(|e| {
                    decode(e, base, &mut word[k..]);
                    (0..k)
                        .map(|j| table.value(&word[j..j + k + 1]))
                        .sum::<f64>()
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

fn log_cylinder_sum(table: &SymbolTable, tails: &[f64], n: usize) -> f64 {
    let base = table.base();
    let k = table.memory();
    let words = base.pow(n as u32);
    let sup_sum = |word: &mut Vec<usize>| -> f64 {
        if n >= k {
            let inner: f64 = (0..n - k).map(|j| table.value(&word[j..j + k + 1])).sum();
            let tail = word[n - k..n].iter().fold(0, |acc, &i| acc * base + i);
            inner + tails[tail]
        } else {
            let exts = base.pow(k as u32);
            (0..exts)
                .map(|e| {
                    decode(e, base, &mut word[n..]);
                    (0..n)
                        .map(|j| table.value(&word[j..j + k + 1]))
                        .sum::<f64>()
                })
                .fold(f64::NEG_INFINITY, f64::max)
        }
    };
    let chunk = 4096;
    let parts: Vec<(f64, f64)> = (0..words.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let mut word = vec![0usize; n + k];
            let values: Vec<f64> = (c * chunk..((c + 1) * chunk).min(words))
                .map(|r| {
                    decode(r, base, &mut word[..n]);
                    sup_sum(&mut word)
                })
                .collect();
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                return (max, 0.0);
            }
            (max, values.iter().map(|v| (v - max).exp()).sum())
        })
        .collect();
    let max = parts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let total: f64 = parts
        .iter()
        .filter(|p| p.0 > f64::NEG_INFINITY)
        .map(|p| p.1 * (p.0 - max).exp())
        .sum();
    max + total.ln()
}
