//! Star addition chains: the skeletons of primate fusion sequences.
//!
//! Term `k > 0` of a star chain is `terms[k-1] + terms[j]` for some `j < k`.
//! Because terms are strictly increasing, `j` is determined by the values, so
//! a term sequence has exactly one parent attribution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest target accepted by the enumerator.
pub const MAX_TARGET: u32 = 64;

/// Extra terms allowed beyond the minimal length by default.
pub const DEFAULT_SLACK: usize = 2;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AdditionChain {
    terms: Vec<u32>,
    /// `parents[k-1] = (k-1, j)` for term `k`.
    parents: Vec<(usize, usize)>,
}

impl AdditionChain {
    /// Builds a star chain from its terms, inferring parents.
    pub fn from_terms(terms: Vec<u32>) -> Result<Self> {
        if terms.first() != Some(&1) {
            return Err(Error::InvalidChain("a chain starts at 1".into()));
        }
        let mut parents = Vec::with_capacity(terms.len() - 1);
        for k in 1..terms.len() {
            let diff = terms[k].checked_sub(terms[k - 1]).filter(|&d| d > 0).ok_or_else(|| {
                Error::InvalidChain(format!("terms must increase strictly: {terms:?}"))
            })?;
            let j = terms[..k].iter().position(|&v| v == diff).ok_or_else(|| {
                Error::InvalidChain(format!(
                    "term {} is not its predecessor plus an earlier term",
                    terms[k]
                ))
            })?;
            parents.push((k - 1, j));
        }
        Ok(Self { terms, parents })
    }

    /// Builds a chain from explicit parent pairs and checks it.
    pub fn new(terms: Vec<u32>, parents: Vec<(usize, usize)>) -> Result<Self> {
        let chain = Self { terms, parents };
        chain.validate()?;
        Ok(chain)
    }

    /// The chain `1, 2, ..., n`.
    pub fn linear(n: u32) -> Result<Self> {
        check_target(n)?;
        Self::from_terms((1..=n).collect())
    }

    pub fn terms(&self) -> &[u32] {
        &self.terms
    }

    pub fn parents(&self) -> &[(usize, usize)] {
        &self.parents
    }

    pub fn target(&self) -> u32 {
        *self.terms.last().expect("chains are never empty")
    }

    /// Number of terms, including the initial 1.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of combination steps.
    pub fn steps(&self) -> usize {
        self.parents.len()
    }

    /// Second operand (`j`) of each step.
    pub fn second_parents(&self) -> impl Iterator<Item = usize> + '_ {
        self.parents.iter().map(|&(_, j)| j)
    }

    pub fn validate(&self) -> Result<()> {
        if self.terms.first() != Some(&1) {
            return Err(Error::InvalidChain("a chain starts at 1".into()));
        }
        if self.parents.len() + 1 != self.terms.len() {
            return Err(Error::InvalidChain(format!(
                "{} terms need {} parent pairs, got {}",
                self.terms.len(),
                self.terms.len() - 1,
                self.parents.len()
            )));
        }
        for (idx, &(p, q)) in self.parents.iter().enumerate() {
            let k = idx + 1;
            if self.terms[k] <= self.terms[k - 1] {
                return Err(Error::InvalidChain(format!("terms must increase strictly at {k}")));
            }
            if p != k - 1 {
                return Err(Error::InvalidChain(format!(
                    "term {k} does not use its immediate predecessor"
                )));
            }
            if q >= k {
                return Err(Error::InvalidChain(format!("term {k} has a later parent {q}")));
            }
            if self.terms[p] + self.terms[q] != self.terms[k] {
                return Err(Error::InvalidChain(format!(
                    "term {} != {} + {}",
                    self.terms[k], self.terms[p], self.terms[q]
                )));
            }
        }
        Ok(())
    }

    /// How often each term is consumed when the chain is expanded into a
    /// binary fusion tree (the final term counts once).
    pub fn multiplicities(&self) -> Vec<u64> {
        let mut mult = vec![0u64; self.terms.len()];
        let last = mult.len() - 1;
        mult[last] = 1;
        for k in (1..self.terms.len()).rev() {
            let (p, q) = self.parents[k - 1];
            mult[p] += mult[k];
            mult[q] += mult[k];
        }
        mult
    }

    /// `{1,2,3,5,7}`
    pub fn display_terms(&self) -> String {
        let inner: Vec<String> = self.terms.iter().map(u32::to_string).collect();
        format!("{{{}}}", inner.join(","))
    }
}

fn check_target(n: u32) -> Result<()> {
    if (1..=MAX_TARGET).contains(&n) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "N",
            value: n as f64,
            range: "1 <= N <= 64",
        })
    }
}

/// All star chains for `n` with at most `max_len` terms (default: minimal
/// length plus [`DEFAULT_SLACK`]), sorted by length and then by terms.
pub fn enumerate_star_chains(n: u32, max_len: Option<usize>) -> Result<Vec<AdditionChain>> {
    check_target(n)?;
    let max_len = match max_len {
        Some(l) => l,
        None => minimal_length(n)? + DEFAULT_SLACK,
    };
    let mut out = Vec::new();
    let mut terms = vec![1u32];
    collect(n, max_len, &mut terms, &mut out);
    let mut chains: Vec<AdditionChain> = out
        .into_iter()
        .map(|t| AdditionChain::from_terms(t).expect("enumerated chains are star chains"))
        .collect();
    chains.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.terms.cmp(&b.terms)));
    chains.dedup();
    Ok(chains)
}

fn collect(n: u32, max_len: usize, terms: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    let last = *terms.last().expect("non-empty");
    if last == n {
        out.push(terms.clone());
        return;
    }
    let remaining = max_len.saturating_sub(terms.len());
    // Each step can at most double the last term.
    if remaining == 0 || (last as u64) << remaining.min(63) < n as u64 {
        return;
    }
    for j in 0..terms.len() {
        let next = last + terms[j];
        if next <= n {
            terms.push(next);
            collect(n, max_len, terms, out);
            terms.pop();
        }
    }
}

/// Number of terms in the shortest star chain for `n`.
pub fn minimal_length(n: u32) -> Result<usize> {
    check_target(n)?;
    let mut len = 1;
    loop {
        let mut out = Vec::new();
        collect(n, len, &mut vec![1], &mut out);
        if !out.is_empty() {
            return Ok(len);
        }
        len += 1;
    }
}
