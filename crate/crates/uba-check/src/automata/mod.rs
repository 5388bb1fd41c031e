//! Nondeterministic/unambiguous Büchi automata: representation,
//! parsing and structural operations.
//!
//! States are dense integer indices; all state sets are bit sets keyed
//! by index. Automata are immutable after construction, so every
//! operation here is pure and safe to call concurrently.

mod hoa;
mod unambiguity;

pub use hoa::parse_hoa;
pub use unambiguity::{verify_unambiguous, AmbiguityWitness, UnambiguityReport};

use crate::bitset::BitSet;
use crate::error::{Error, Result};

/// Automaton state index.
pub type StateId = usize;
/// Index into [`Alphabet::symbols`].
pub type SymbolId = usize;

/// Finite input alphabet, optionally structured as the valuations of a
/// set of atomic propositions (symbol `i` is the valuation whose bit
/// `j` gives the truth value of AP `j`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<String>,
    ap_names: Option<Vec<String>>,
}

/// Atomic-proposition count above which eager 2^AP expansion is refused.
pub const MAX_APS: usize = 16;

impl Alphabet {
    /// Plain alphabet from explicit symbol names.
    pub fn plain<S: Into<String>>(symbols: impl IntoIterator<Item = S>) -> Result<Self> {
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        if symbols.len() < 2 {
            return Err(Error::Precondition(format!(
                "alphabet must have at least 2 symbols, got {}",
                symbols.len()
            )));
        }
        for (i, s) in symbols.iter().enumerate() {
            if symbols[..i].contains(s) {
                return Err(Error::Precondition(format!("duplicate symbol `{s}`")));
            }
        }
        Ok(Alphabet { symbols, ap_names: None })
    }

    /// Alphabet of all 2^n valuations of `n` atomic propositions.
    pub fn from_aps<S: Into<String>>(aps: impl IntoIterator<Item = S>) -> Result<Self> {
        let ap_names: Vec<String> = aps.into_iter().map(Into::into).collect();
        if ap_names.is_empty() {
            return Err(Error::Precondition(
                "at least one atomic proposition is required".into(),
            ));
        }
        if ap_names.len() > MAX_APS {
            return Err(Error::Precondition(format!(
                "{} atomic propositions exceed the supported maximum of {MAX_APS}",
                ap_names.len()
            )));
        }
        for (i, s) in ap_names.iter().enumerate() {
            if ap_names[..i].contains(s) {
                return Err(Error::Precondition(format!("duplicate atomic proposition `{s}`")));
            }
        }
        let symbols = (0..1usize << ap_names.len())
            .map(|v| render_valuation(v, &ap_names))
            .collect();
        Ok(Alphabet { symbols, ap_names: Some(ap_names) })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbol_name(&self, s: SymbolId) -> &str {
        &self.symbols[s]
    }

    pub fn symbols(&self) -> impl Iterator<Item = &str> {
        self.symbols.iter().map(String::as_str)
    }

    pub fn ap_names(&self) -> Option<&[String]> {
        self.ap_names.as_deref()
    }

    /// Looks a symbol up by name.
    pub fn symbol_index(&self, name: &str) -> Option<SymbolId> {
        self.symbols.iter().position(|s| s == name)
    }
}

/// Renders an AP valuation bitmask as a conjunction, e.g. `x&!y`.
pub(crate) fn render_valuation(valuation: usize, ap_names: &[String]) -> String {
    ap_names
        .iter()
        .enumerate()
        .map(|(i, ap)| {
            if valuation & (1 << i) != 0 {
                ap.clone()
            } else {
                format!("!{ap}")
            }
        })
        .collect::<Vec<_>>()
        .join("&")
}

/// Nondeterministic Büchi automaton `(Q, Σ, δ, Q0, F)` with
/// state-based acceptance. `delta` is total as a map; the empty
/// successor set is allowed (automata may be incomplete).
#[derive(Debug, Clone, PartialEq)]
pub struct Nba {
    alphabet: Alphabet,
    /// delta[q][a] is the sorted successor list of state q on symbol a.
    delta: Vec<Vec<Vec<StateId>>>,
    initial: BitSet,
    final_states: BitSet,
}

impl Nba {
    pub fn new(
        alphabet: Alphabet,
        num_states: usize,
        transitions: impl IntoIterator<Item = (StateId, SymbolId, StateId)>,
        initial: impl IntoIterator<Item = StateId>,
        final_states: impl IntoIterator<Item = StateId>,
    ) -> Result<Self> {
        let mut delta = vec![vec![Vec::new(); alphabet.len()]; num_states];
        for (src, sym, dst) in transitions {
            if src >= num_states || dst >= num_states {
                return Err(Error::Precondition(format!(
                    "transition ({src}, {sym}, {dst}) references a state >= {num_states}"
                )));
            }
            if sym >= alphabet.len() {
                return Err(Error::Precondition(format!(
                    "transition ({src}, {sym}, {dst}) references an unknown symbol"
                )));
            }
            delta[src][sym].push(dst);
        }
        for row in &mut delta {
            for succs in row {
                succs.sort_unstable();
                succs.dedup();
            }
        }
        let mut init = BitSet::new(num_states);
        for q in initial {
            if q >= num_states {
                return Err(Error::Precondition(format!("initial state {q} out of range")));
            }
            init.insert(q);
        }
        let mut fin = BitSet::new(num_states);
        for q in final_states {
            if q >= num_states {
                return Err(Error::Precondition(format!("final state {q} out of range")));
            }
            fin.insert(q);
        }
        Ok(Nba { alphabet, delta, initial: init, final_states: fin })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn num_states(&self) -> usize {
        self.delta.len()
    }

    pub fn successors(&self, q: StateId, a: SymbolId) -> &[StateId] {
        &self.delta[q][a]
    }

    pub fn initial(&self) -> &BitSet {
        &self.initial
    }

    pub fn final_states(&self) -> &BitSet {
        &self.final_states
    }

    pub fn is_final(&self, q: StateId) -> bool {
        self.final_states.contains(q)
    }

    /// Total number of transitions `Σ_q Σ_a |δ(q,a)|`.
    pub fn num_transitions(&self) -> usize {
        self.delta
            .iter()
            .flat_map(|row| row.iter().map(Vec::len))
            .sum()
    }

    /// One-step successor set `δ(source, a)`.
    pub fn step(&self, source: &BitSet, a: SymbolId) -> BitSet {
        let mut out = BitSet::new(self.num_states());
        for q in source.iter() {
            for &p in &self.delta[q][a] {
                out.insert(p);
            }
        }
        out
    }

    /// Extended transition function `δ(source, word)`; the empty word
    /// is the identity.
    pub fn delta_word(&self, source: &BitSet, word: &[SymbolId]) -> Result<BitSet> {
        let mut cur = source.clone();
        for &a in word {
            if a >= self.alphabet.len() {
                return Err(Error::Precondition(format!("unknown symbol index {a}")));
            }
            cur = self.step(&cur, a);
        }
        Ok(cur)
    }

    /// Restriction to an SCC: the sub-automaton with states `scc`,
    /// transitions intersected with `scc`, initial state `{p}` and the
    /// final states of `scc`. States keep their original indices;
    /// states outside `scc` lose all transitions and markings.
    pub fn restrict_scc(&self, scc: &BitSet, p: StateId) -> Result<Nba> {
        if !scc.contains(p) {
            return Err(Error::Precondition(format!(
                "initial state {p} does not belong to the component"
            )));
        }
        let mut delta = vec![vec![Vec::new(); self.alphabet.len()]; self.num_states()];
        for q in scc.iter() {
            for a in 0..self.alphabet.len() {
                delta[q][a] = self.delta[q][a]
                    .iter()
                    .copied()
                    .filter(|t| scc.contains(*t))
                    .collect();
            }
        }
        let mut final_states = self.final_states.clone();
        final_states.intersect_with(scc);
        Ok(Nba {
            alphabet: self.alphabet.clone(),
            delta,
            initial: BitSet::from_iter(self.num_states(), [p]),
            final_states,
        })
    }

    /// `A[R]`: the same automaton with `R` as initial set.
    pub fn with_initial(&self, initial: &BitSet) -> Result<Nba> {
        let all = BitSet::full(self.num_states());
        if !initial.is_subset(&all) || initial.capacity() > self.num_states() {
            return Err(Error::Precondition(
                "initial set contains states outside the automaton".into(),
            ));
        }
        let mut init = BitSet::new(self.num_states());
        for q in initial.iter() {
            if q >= self.num_states() {
                return Err(Error::Precondition(format!("initial state {q} out of range")));
            }
            init.insert(q);
        }
        Ok(Nba { initial: init, ..self.clone() })
    }

    /// Underlying one-step graph: `q -> p` iff `p ∈ δ(q,a)` for some `a`.
    pub fn adjacency(&self) -> Vec<Vec<StateId>> {
        self.delta
            .iter()
            .map(|row| {
                let mut succs: Vec<StateId> = row.iter().flatten().copied().collect();
                succs.sort_unstable();
                succs.dedup();
                succs
            })
            .collect()
    }

    /// Textual dump, one transition per line (`src symbol -> dst`),
    /// used for golden tests.
    pub fn dump(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        writeln!(out, "states {}", self.num_states()).unwrap();
        writeln!(
            out,
            "initial {}",
            self.initial.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(" ")
        )
        .unwrap();
        writeln!(
            out,
            "final {}",
            self.final_states.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(" ")
        )
        .unwrap();
        for (q, row) in self.delta.iter().enumerate() {
            for (a, succs) in row.iter().enumerate() {
                for &p in succs {
                    writeln!(out, "{q} {} -> {p}", self.alphabet.symbol_name(a)).unwrap();
                }
            }
        }
        out
    }
}
