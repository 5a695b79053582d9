use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coding::{PairSymbol, TruncatedAlphabet};
use crate::error::{Error, Result};
use crate::smale::{pi2_hat_buffer, SmaleSystem, DEFAULT_ENCLOSURE_DEPTH};

/// A one-sided potential depending on the first `memory + 1` symbols.
///
/// `values` is indexed by the lexicographic rank of a `(memory + 1)`-word over
/// `symbols`. Entries of `-inf` mark forbidden words.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolTable {
    symbols: Vec<PairSymbol>,
    memory: usize,
    values: Vec<f64>,
}

impl SymbolTable {
    pub fn new(symbols: Vec<PairSymbol>, memory: usize, values: Vec<f64>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::InvalidArgument(
                "a table needs at least one symbol".into(),
            ));
        }
        let mut sorted = symbols.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != symbols.len() {
            return Err(Error::InvalidArgument(
                "table symbols must be distinct".into(),
            ));
        }
        let expected = (symbols.len() as f64).powi(memory as i32 + 1);
        if values.len() as f64 != expected {
            return Err(Error::InvalidArgument(format!(
                "table of memory {memory} over {} symbols needs {expected} values, got {}",
                symbols.len(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| v.is_nan() || **v == f64::INFINITY) {
            return Err(Error::InvalidArgument(format!(
                "table value {v} is not allowed"
            )));
        }
        if values.iter().all(|v| *v == f64::NEG_INFINITY) {
            return Err(Error::InvalidArgument("every word is forbidden".into()));
        }
        Ok(SymbolTable {
            symbols,
            memory,
            values,
        })
    }

    /// A memory-0 table from one value per symbol.
    pub fn bernoulli(symbols: Vec<PairSymbol>, values: Vec<f64>) -> Result<Self> {
        Self::new(symbols, 0, values)
    }

    /// `log p` for a Bernoulli measure with the given weights (normalised here).
    pub fn from_weights(symbols: Vec<PairSymbol>, weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| *w < 0.0) || !(total > 0.0) {
            return Err(Error::InvalidArgument(
                "weights must be nonnegative with positive sum".into(),
            ));
        }
        Self::bernoulli(symbols, weights.iter().map(|w| (w / total).ln()).collect())
    }

    pub fn symbols(&self) -> &[PairSymbol] {
        &self.symbols
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn base(&self) -> usize {
        self.symbols.len()
    }

    /// Value on the `(memory + 1)`-word given by symbol indices.
    pub fn value(&self, word: &[usize]) -> f64 {
        self.values[rank(word, self.base())]
    }

    pub fn scaled(&self, s: f64) -> SymbolTable {
        let values = self
            .values
            .iter()
            .map(|&v| if v == f64::NEG_INFINITY { v } else { s * v })
            .collect();
        SymbolTable {
            symbols: self.symbols.clone(),
            memory: self.memory,
            values,
        }
    }

    /// The same potential read as a table of larger memory.
    pub fn with_memory(&self, memory: usize) -> SymbolTable {
        if memory <= self.memory {
            return self.clone();
        }
        let drop = self.base().pow((memory - self.memory) as u32);
        let len = self.base().pow(memory as u32 + 1);
        SymbolTable {
            symbols: self.symbols.clone(),
            memory,
            values: (0..len).map(|r| self.values[r / drop]).collect(),
        }
    }

    /// The restriction to symbols with both digits at most `M`.
    pub fn restricted(&self, alphabet: &TruncatedAlphabet) -> Result<SymbolTable> {
        let keep: Vec<usize> = (0..self.base())
            .filter(|&i| alphabet.contains(self.symbols[i]))
            .collect();
        if keep.len() == self.base() {
            return Ok(self.clone());
        }
        if keep.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "no table symbol has digits at most {}",
                alphabet.max_digit()
            )));
        }
        let width = self.memory + 1;
        let len = keep.len().pow(width as u32);
        let mut word = vec![0usize; width];
        let mut values = Vec::with_capacity(len);
        for r in 0..len {
            decode(r, keep.len(), &mut word);
            let original: Vec<usize> = word.iter().map(|&i| keep[i]).collect();
            values.push(self.value(&original));
        }
        Self::new(
            keep.iter().map(|&i| self.symbols[i]).collect(),
            self.memory,
            values,
        )
    }
}

pub(crate) fn rank(word: &[usize], base: usize) -> usize {
    word.iter().fold(0, |acc, &i| acc * base + i)
}

pub(crate) fn decode(mut r: usize, base: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = r % base;
        r /= base;
    }
}

/// `log|T'|` tabulated over `(memory + 1)`-words.
///
/// A word `x_0 ... x_k` is read as the window `eta_{-a} ... eta_{k-a}` of the
/// periodic two-sided sequence it generates, with `a = k / 2`, and the entry is
/// `log|T'_{eta_0 eta_1 ...}(pi^_2(eta))|`. Centring the window only shifts
/// Birkhoff sums by a coboundary.
#[derive(Clone, Debug, PartialEq)]
pub struct LogDerivativeTable {
    table: SymbolTable,
    tail_bound: f64,
}

impl LogDerivativeTable {
    pub fn new(system: &SmaleSystem, alphabet: &TruncatedAlphabet, memory: usize) -> Result<Self> {
        let symbols = system.alphabet(alphabet);
        if symbols.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "{} has no symbols with digits at most {}",
                system.name(),
                alphabet.max_digit()
            )));
        }
        let base = symbols.len();
        let width = memory + 1;
        let len = (base as f64).powi(width as i32);
        if len > crate::coding::DEFAULT_ENUMERATION_CAP as f64 {
            return Err(Error::EnumerationCap {
                requested: len,
                cap: crate::coding::DEFAULT_ENUMERATION_CAP,
            });
        }
        let constants = system.constants();
        let past = ((13.0 * std::f64::consts::LN_10) / constants.lambda.ln())
            .ceil()
            .clamp(8.0, 400.0) as usize;
        let centre = memory / 2;
        let values = (0..len as usize)
            .into_par_iter()
            .map(|r| {
                let mut word = vec![0usize; width];
                decode(r, base, &mut word);
                let buffer: Vec<PairSymbol> = (0..past + DEFAULT_ENCLOSURE_DEPTH)
                    .map(|i| {
                        let t = (i + centre + width * past) - past;
                        symbols[word[t % width]]
                    })
                    .collect();
                let w = pi2_hat_buffer(system, &buffer, past, DEFAULT_ENCLOSURE_DEPTH)?;
                let map = system.resolve_symbols(&buffer[past..]);
                Ok(map.derivative_mod(w).ln())
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(LogDerivativeTable {
            table: SymbolTable::new(symbols, memory, values)?,
            tail_bound: constants.lambda.powi(-(centre as i32 + 1))
                * constants.distortion
                * system.domain().diameter(),
        })
    }

    pub fn table(&self) -> &SymbolTable {
        &self.table
    }

    pub fn memory(&self) -> usize {
        self.table.memory
    }

    /// `lambda^-(a+1) H diam(Y)`, the reported size of the memory truncation error.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// The tabulated geometric potential `s log|T'|`.
    pub fn potential(&self, s: f64) -> SymbolTable {
        self.table.scaled(s)
    }
}

#[derive(Clone, Debug)]
pub enum Potential {
    Constant(f64),
    /// `s log|T'|`, approximated by a memory-`k` table when tabulated.
    Geometric {
        system: Arc<SmaleSystem>,
        s: f64,
    },
    Table(SymbolTable),
}

impl Potential {
    pub fn geometric(system: Arc<SmaleSystem>, s: f64) -> Result<Self> {
        if !(s >= 0.0) || !s.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "geometric potential needs s >= 0, got {s}"
            )));
        }
        Ok(Potential::Geometric { system, s })
    }

    /// Tabulates the potential over the `M`-truncated alphabet. Geometric
    /// potentials use memory `memory`; tables keep their own memory when larger.
    pub fn tabulate(&self, alphabet: &TruncatedAlphabet, memory: usize) -> Result<SymbolTable> {
        match self {
            Potential::Constant(c) => {
                if !c.is_finite() {
                    return Err(Error::InvalidArgument(format!("constant potential {c}")));
                }
                let symbols = alphabet.symbols();
                let len = symbols.len();
                SymbolTable::new(symbols, 0, vec![*c; len])
            }
            Potential::Geometric { system, s } => {
                Ok(LogDerivativeTable::new(system, alphabet, memory)?.potential(*s))
            }
            Potential::Table(t) => t.restricted(alphabet),
        }
    }
}
