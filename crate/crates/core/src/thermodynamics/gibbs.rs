use std::collections::VecDeque;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::potential::{decode, Potential, SymbolTable};
use crate::coding::{PairSymbol, TruncatedAlphabet, DEFAULT_ENUMERATION_CAP};
use crate::error::{Error, Result};

const POWER_TOL: f64 = 1e-13;
const POWER_MAX_ITER: usize = 200_000;

/// Stationary Markov approximation of the Gibbs state of a tabulated potential.
///
/// States are words of length `L = max(k, 1)`; the state `x_0 ... x_{L-1}`
/// moves to `x_1 ... x_{L-1} y` with weight `exp(psi(x_0 ... x_{L-1} y))`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GibbsApprox {
    table: SymbolTable,
    state_len: usize,
    /// `transitions[a * base + y]`, probability of appending `y` in state `a`.
    transitions: Vec<f64>,
    /// `reversed[b * base + x]`, probability that state `b` was preceded by `x`.
    reversed: Vec<f64>,
    stationary: Vec<f64>,
    log_pressure: f64,
    gibbs_constant_hat: f64,
    gibbs_depth: usize,
}

/// Serializable summary of a `GibbsApprox`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GibbsSummary {
    pub truncation: Option<u64>,
    pub memory: usize,
    pub states: usize,
    pub log_pressure: f64,
    pub gibbs_constant_hat: f64,
    pub gibbs_depth: usize,
    pub max_row_error: f64,
}

/// Builds the Gibbs chain of `potential` on the `M`-truncated alphabet.
pub fn gibbs_markov(
    potential: &Potential,
    alphabet: &TruncatedAlphabet,
    memory: usize,
) -> Result<GibbsApprox> {
    GibbsApprox::from_table(potential.tabulate(alphabet, memory)?.with_memory(memory))
}

impl GibbsApprox {
    pub fn from_table(table: SymbolTable) -> Result<Self> {
        let k = table.memory();
        let depth = k + 4;
        Self::with_gibbs_depth(table, depth)
    }

    /// Like `from_table`, estimating the Gibbs constant over words of depth at
    /// most `depth` (reduced if the enumeration would exceed the cap).
    pub fn with_gibbs_depth(table: SymbolTable, depth: usize) -> Result<Self> {
        let base = table.base();
        let k = table.memory();
        let state_len = k.max(1);
        let states = base.pow(state_len as u32);
        let shift = table
            .values()
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(f64::NEG_INFINITY, f64::max);
        let drop = base.pow((state_len - k) as u32);
        let weights: Vec<f64> = (0..states * base)
            .map(|r| (table.values()[r / drop] - shift).exp())
            .collect();

        check_primitive(&weights, base, states)?;
        let (lambda, right) = perron_right(&weights, base, states);
        let left = perron_left(&weights, base, states);

        let succ = |a: usize, y: usize| (a % (states / base)) * base + y;
        let mut transitions = vec![0.0; states * base];
        for a in 0..states {
            let mut row = 0.0;
            for y in 0..base {
                let p = weights[a * base + y] * right[succ(a, y)] / (lambda * right[a]);
                transitions[a * base + y] = p;
                row += p;
            }
            for y in 0..base {
                transitions[a * base + y] /= row;
            }
        }
        let mut stationary: Vec<f64> = left.iter().zip(&right).map(|(l, r)| l * r).collect();
        let total: f64 = stationary.iter().sum();
        stationary.iter_mut().for_each(|p| *p /= total);

        let high = states / base;
        let mut reversed = vec![0.0; states * base];
        for b in 0..states {
            if stationary[b] == 0.0 {
                continue;
            }
            let y = b % base;
            let mut row = 0.0;
            for x in 0..base {
                let a = x * high + b / base;
                let q = stationary[a] * transitions[a * base + y] / stationary[b];
                reversed[b * base + x] = q;
                row += q;
            }
            for x in 0..base {
                reversed[b * base + x] /= row;
            }
        }

        let mut g = GibbsApprox {
            table,
            state_len,
            transitions,
            reversed,
            stationary,
            log_pressure: lambda.ln() + shift,
            gibbs_constant_hat: f64::NAN,
            gibbs_depth: 0,
        };
        let affordable = (1..=depth)
            .take_while(|&n| (base as f64).powi((n + k) as i32) <= DEFAULT_ENUMERATION_CAP as f64)
            .last()
            .unwrap_or(1);
        g.gibbs_depth = affordable;
        g.gibbs_constant_hat = g.gibbs_constant(affordable)?;
        Ok(g)
    }

    pub fn table(&self) -> &SymbolTable {
        &self.table
    }

    pub fn symbols(&self) -> &[PairSymbol] {
        self.table.symbols()
    }

    pub fn base(&self) -> usize {
        self.table.base()
    }

    pub fn memory(&self) -> usize {
        self.table.memory()
    }

    pub fn state_len(&self) -> usize {
        self.state_len
    }

    pub fn states(&self) -> usize {
        self.stationary.len()
    }

    pub fn log_pressure(&self) -> f64 {
        self.log_pressure
    }

    pub fn gibbs_constant_hat(&self) -> f64 {
        self.gibbs_constant_hat
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    pub fn transition(&self, state: usize, symbol: usize) -> f64 {
        self.transitions[state * self.base() + symbol]
    }

    pub fn successor(&self, state: usize, symbol: usize) -> usize {
        (state % (self.states() / self.base())) * self.base() + symbol
    }

    pub fn summary(&self) -> GibbsSummary {
        let base = self.base();
        let max_row_error = (0..self.states())
            .map(|a| {
                (self.transitions[a * base..(a + 1) * base]
                    .iter()
                    .sum::<f64>()
                    - 1.0)
                    .abs()
            })
            .fold(0.0, f64::max);
        let truncation = self
            .symbols()
            .iter()
            .map(|s| s.m().get().max(s.n().get()))
            .max();
        GibbsSummary {
            truncation,
            memory: self.memory(),
            states: self.states(),
            log_pressure: self.log_pressure,
            gibbs_constant_hat: self.gibbs_constant_hat,
            gibbs_depth: self.gibbs_depth,
            max_row_error,
        }
    }

    /// `mu[w]` for a word of symbol indices.
    pub fn cylinder_mass(&self, word: &[usize]) -> f64 {
        let base = self.base();
        let l = self.state_len;
        if word.len() <= l {
            let block = base.pow((l - word.len()) as u32);
            let start = word.iter().fold(0, |acc, &i| acc * base + i) * block;
            return self.stationary[start..start + block].iter().sum();
        }
        let mut state = word[..l].iter().fold(0, |acc, &i| acc * base + i);
        let mut mass = self.stationary[state];
        for &y in &word[l..] {
            mass *= self.transition(state, y);
            state = self.successor(state, y);
        }
        mass
    }

    /// `S_n psi` on the word `w e`, summing the `n = |w|` windows starting in `w`.
    pub fn birkhoff_sum(&self, word: &[usize], n: usize) -> f64 {
        let width = self.memory() + 1;
        (0..n).map(|j| self.table.value(&word[j..j + width])).sum()
    }

    /// Max over words `w` with `|w| <= depth` and extensions `e` of length `k`
    /// of `max(ratio, 1/ratio)`, where `ratio = mu[w] / exp(S_n psi(w e) - nP)`.
    /// Words of zero mass are skipped.
    pub fn gibbs_constant(&self, depth: usize) -> Result<f64> {
        let mut c: f64 = 1.0;
        for n in 1..=depth {
            c = c.max(self.gibbs_extremes(n)?.1);
        }
        Ok(c)
    }

    /// Smallest and largest `max(ratio, 1/ratio)` over depth-`n` words, with the
    /// extremal ratios themselves in the first slot as `(min, max)`.
    pub fn gibbs_ratio_range(&self, n: usize) -> Result<(f64, f64)> {
        Ok(self.gibbs_extremes(n)?.0)
    }

    fn gibbs_extremes(&self, n: usize) -> Result<((f64, f64), f64)> {
        let base = self.base();
        let k = self.memory();
        let total = (base as f64).powi((n + k) as i32);
        if total > DEFAULT_ENUMERATION_CAP as f64 {
            return Err(Error::EnumerationCap {
                requested: total,
                cap: DEFAULT_ENUMERATION_CAP,
            });
        }
        let words = base.pow(n as u32);
        let exts = base.pow(k as u32);
        let p = self.log_pressure;
        let (lo, hi) = (0..words)
            .into_par_iter()
            .map(|r| {
                let mut word = vec![0usize; n + k];
                decode(r, base, &mut word[..n]);
                let mass = self.cylinder_mass(&word[..n]);
                if mass == 0.0 {
                    return (f64::INFINITY, 0.0);
                }
                let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
                for e in 0..exts {
                    decode(e, base, &mut word[n..]);
                    let s = self.birkhoff_sum(&word, n);
                    if s == f64::NEG_INFINITY {
                        continue;
                    }
                    let ratio = (mass.ln() - s + n as f64 * p).exp();
                    lo = lo.min(ratio);
                    hi = hi.max(ratio);
                }
                (lo, hi)
            })
            .reduce(|| (f64::INFINITY, 0.0), |a, b| (a.0.min(b.0), a.1.max(b.1)));
        Ok(((lo, hi), hi.max(1.0 / lo)))
    }

    /// `int psi dmu` of a table potential with this chain's symbols.
    pub fn integral(&self, table: &SymbolTable) -> f64 {
        let width = table.memory() + 1;
        let base = self.base();
        let mut word = vec![0usize; width];
        (0..base.pow(width as u32))
            .map(|r| {
                decode(r, base, &mut word);
                let mass = self.cylinder_mass(&word);
                if mass == 0.0 {
                    0.0
                } else {
                    mass * table.value(&word)
                }
            })
            .sum()
    }

    /// Draws a state from the stationary law.
    pub fn sample_state<R: Rng>(&self, rng: &mut R) -> usize {
        pick(&self.stationary, rng.gen::<f64>())
    }

    pub fn sample_next<R: Rng>(&self, rng: &mut R, state: usize) -> usize {
        let base = self.base();
        pick(
            &self.transitions[state * base..(state + 1) * base],
            rng.gen::<f64>(),
        )
    }

    pub fn sample_prev<R: Rng>(&self, rng: &mut R, state: usize) -> usize {
        let base = self.base();
        pick(
            &self.reversed[state * base..(state + 1) * base],
            rng.gen::<f64>(),
        )
    }

    /// Fills `out` with a stationary forward path of symbol indices.
    pub fn sample_forward<R: Rng>(&self, rng: &mut R, out: &mut [usize]) {
        let l = self.state_len;
        let base = self.base();
        let mut state = self.sample_state(rng);
        let mut prefix = vec![0; l];
        decode(state, base, &mut prefix);
        for (slot, &x) in out.iter_mut().zip(&prefix) {
            *slot = x;
        }
        for slot in out.iter_mut().skip(l) {
            let y = self.sample_next(rng, state);
            *slot = y;
            state = self.successor(state, y);
        }
    }

    /// Fills `past` with `eta_-1, eta_-2, ...` from the reversed chain, given
    /// the leading state of the forward path.
    pub fn sample_past<R: Rng>(&self, rng: &mut R, forward_state: usize, past: &mut [usize]) {
        let high = self.states() / self.base();
        let mut state = forward_state;
        for slot in past.iter_mut() {
            let x = self.sample_prev(rng, state);
            *slot = x;
            state = x * high + state / self.base();
        }
    }

    /// Leading state of a forward path.
    pub fn state_of(&self, forward: &[usize]) -> usize {
        forward[..self.state_len]
            .iter()
            .fold(0, |acc, &i| acc * self.base() + i)
    }
}

fn pick(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return i;
        }
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

/// Requires the transition graph to be strongly connected and aperiodic.
fn check_primitive(weights: &[f64], base: usize, states: usize) -> Result<()> {
    let high = states / base;
    let bfs = |forward: bool| -> Vec<Option<usize>> {
        let mut level = vec![None; states];
        level[0] = Some(0);
        let mut queue = VecDeque::from([0usize]);
        while let Some(a) = queue.pop_front() {
            let d = level[a].unwrap();
            for z in 0..base {
                let (next, w) = if forward {
                    ((a % high) * base + z, weights[a * base + z])
                } else {
                    let prev = z * high + a / base;
                    (prev, weights[prev * base + a % base])
                };
                if w > 0.0 && level[next].is_none() {
                    level[next] = Some(d + 1);
                    queue.push_back(next);
                }
            }
        }
        level
    };
    let forward = bfs(true);
    if forward.iter().any(Option::is_none) || bfs(false).iter().any(Option::is_none) {
        return Err(Error::NonPrimitive(
            "transition graph is not strongly connected".into(),
        ));
    }
    let mut period = 0usize;
    for a in 0..states {
        for y in 0..base {
            if weights[a * base + y] > 0.0 {
                let b = (a % high) * base + y;
                let diff = (forward[a].unwrap() + 1).abs_diff(forward[b].unwrap());
                period = gcd(period, diff);
            }
        }
    }
    if period != 1 {
        return Err(Error::NonPrimitive(format!(
            "transition graph has period {period}"
        )));
    }
    Ok(())
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Perron eigenvalue and right eigenvector (unit 1-norm) by power iteration.
pub(crate) fn perron_right(weights: &[f64], base: usize, states: usize) -> (f64, Vec<f64>) {
    let high = states / base;
    let mut r = vec![1.0 / states as f64; states];
    let mut next = vec![0.0; states];
    let mut lambda = 1.0;
    for _ in 0..POWER_MAX_ITER {
        next.par_iter_mut().enumerate().for_each(|(a, slot)| {
            let succ0 = (a % high) * base;
            *slot = (0..base)
                .map(|y| weights[a * base + y] * r[succ0 + y])
                .sum();
        });
        let norm: f64 = next.iter().sum();
        // Averaging with the previous iterate damps any periodic component.
        let mut change: f64 = 0.0;
        for (old, new) in r.iter_mut().zip(&next) {
            let v = 0.5 * (*old + new / norm);
            change = change.max((v - *old).abs() / v.max(f64::MIN_POSITIVE));
            *old = v;
        }
        lambda = norm;
        if change < POWER_TOL {
            break;
        }
    }
    let norm: f64 = r.iter().sum();
    r.iter_mut().for_each(|v| *v /= norm);
    (lambda, r)
}

pub(crate) fn perron_left(weights: &[f64], base: usize, states: usize) -> Vec<f64> {
    let high = states / base;
    let mut l = vec![1.0 / states as f64; states];
    let mut next = vec![0.0; states];
    for _ in 0..POWER_MAX_ITER {
        next.par_iter_mut().enumerate().for_each(|(b, slot)| {
            let y = b % base;
            *slot = (0..base)
                .map(|x| {
                    let a = x * high + b / base;
                    l[a] * weights[a * base + y]
                })
                .sum();
        });
        let norm: f64 = next.iter().sum();
        let mut change: f64 = 0.0;
        for (old, new) in l.iter_mut().zip(&next) {
            let v = 0.5 * (*old + new / norm);
            change = change.max((v - *old).abs() / v.max(f64::MIN_POSITIVE));
            *old = v;
        }
        if change < POWER_TOL {
            break;
        }
    }
    l
}

/// `log` of the Perron eigenvalue of a table's transfer matrix, without
/// building the chain.
pub fn log_pressure(table: &SymbolTable) -> Result<f64> {
    let base = table.base();
    let k = table.memory();
    let state_len = k.max(1);
    let states = base.pow(state_len as u32);
    let shift = table
        .values()
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    let drop = base.pow((state_len - k) as u32);
    let weights: Vec<f64> = (0..states * base)
        .map(|r| (table.values()[r / drop] - shift).exp())
        .collect();
    check_primitive(&weights, base, states)?;
    Ok(perron_right(&weights, base, states).0.ln() + shift)
}

/// Entropy rate `-sum_a pi(a) sum_b p(a -> b) log p(a -> b)` of the chain.
pub fn entropy(g: &GibbsApprox) -> f64 {
    let base = g.base();
    (0..g.states())
        .map(|a| {
            let row: f64 = (0..base)
                .map(|y| {
                    let p = g.transition(a, y);
                    if p > 0.0 {
                        -p * p.ln()
                    } else {
                        0.0
                    }
                })
                .sum();
            g.stationary()[a] * row
        })
        .sum()
}

/// Entropy-rate estimate `H_n - H_{n-1}` of a digit marginal, with the gap
/// `|(H_n - H_{n-1}) - (H_{n-1} - H_{n-2})|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalEntropy {
    pub value: f64,
    pub gap: f64,
    pub depth: usize,
}

/// Entropy of the push-forward of the chain under the digit projection
/// `which` (1 or 2), from exact masses of digit cylinders up to depth `n`.
pub fn marginal_entropy(g: &GibbsApprox, which: u8, depth: usize) -> Result<MarginalEntropy> {
    let coord = crate::coding::Coordinate::from_index(which)?;
    if depth < 2 {
        return Err(Error::InvalidArgument(
            "marginal entropy needs depth >= 2".into(),
        ));
    }
    let base = g.base();
    let digit_of: Vec<u64> = g
        .symbols()
        .iter()
        .map(|s| s.coordinate(coord).get())
        .collect();
    let mut digits: Vec<u64> = digit_of.clone();
    digits.sort();
    digits.dedup();
    let nd = digits.len() as f64;
    if nd.powi(depth as i32) * g.states() as f64 > 1e10 {
        return Err(Error::EnumerationCap {
            requested: nd.powi(depth as i32),
            cap: DEFAULT_ENUMERATION_CAP,
        });
    }
    let group: Vec<Vec<usize>> = digits
        .iter()
        .map(|d| (0..base).filter(|&i| digit_of[i] == *d).collect())
        .collect();

    // H[j] accumulates -sum m log m over digit words of length j + 1.
    let start: Vec<f64> = g.stationary().to_vec();
    let entropies = (0..group.len())
        .into_par_iter()
        .map(|first| {
            let mut h = vec![0.0; depth];
            let mut state_digits = vec![0usize; g.state_len()];
            let alpha: Vec<f64> = start
                .iter()
                .enumerate()
                .map(|(a, &p)| {
                    decode(a, base, &mut state_digits);
                    if group[first].contains(&state_digits[0]) {
                        p
                    } else {
                        0.0
                    }
                })
                .collect();
            descend(g, &group, alpha, 1, depth, &mut h);
            h
        })
        .reduce(
            || vec![0.0; depth],
            |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect(),
        );

    let rate = |n: usize| entropies[n - 1] - if n >= 2 { entropies[n - 2] } else { 0.0 };
    let value = rate(depth);
    Ok(MarginalEntropy {
        value,
        gap: (value - rate(depth - 1)).abs(),
        depth,
    })
}

/// `alpha[a]` is the mass of paths matching the digit word read so far (of
/// length `len`) and ending, for `len >= L`, in state `a`; for shorter words
/// `alpha` is the stationary mass of states whose first `len` digits match.
fn descend(
    g: &GibbsApprox,
    group: &[Vec<usize>],
    alpha: Vec<f64>,
    len: usize,
    depth: usize,
    h: &mut [f64],
) {
    let mass: f64 = alpha.iter().sum();
    if mass <= 0.0 {
        return;
    }
    h[len - 1] -= mass * mass.ln();
    if len == depth {
        return;
    }
    let base = g.base();
    let l = g.state_len();
    for members in group {
        let next = if len < l {
            let mut digits = vec![0usize; l];
            alpha
                .iter()
                .enumerate()
                .map(|(a, &p)| {
                    decode(a, base, &mut digits);
                    if p > 0.0 && members.contains(&digits[len]) {
                        p
                    } else {
                        0.0
                    }
                })
                .collect()
        } else {
            let mut next = vec![0.0; alpha.len()];
            for (a, &p) in alpha.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                for &y in members {
                    next[g.successor(a, y)] += p * g.transition(a, y);
                }
            }
            next
        };
        descend(g, group, next, len + 1, depth, h);
    }
}
