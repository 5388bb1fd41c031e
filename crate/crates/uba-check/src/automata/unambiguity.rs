//! Ambiguity check via the self-product construction.
//!
//! The automaton is ambiguous iff some word has two distinct accepting
//! runs. We search the product of the automaton with itself over pairs
//! `(p, q)` carrying a "diverged" flag that is set as soon as the two
//! runs differ at some position and can never be unset. The automaton
//! is ambiguous iff some reachable diverged pair lies on a cycle that
//! visits final states in both components (generalized-Büchi
//! nonemptiness with two acceptance sets).

use std::collections::HashMap;

use super::{Nba, StateId, SymbolId};
use crate::bitset::BitSet;

/// Result of [`verify_unambiguous`].
#[derive(Debug, Clone)]
pub struct UnambiguityReport {
    pub unambiguous: bool,
    /// Present iff `unambiguous` is false.
    pub witness: Option<AmbiguityWitness>,
}

/// A lasso word `prefix · cycle^ω` together with two distinct runs,
/// each visiting a final state on the cycle.
#[derive(Debug, Clone)]
pub struct AmbiguityWitness {
    pub prefix: Vec<SymbolId>,
    pub cycle: Vec<SymbolId>,
    /// First run, as states before/after each symbol of `prefix · cycle`
    /// (length `|prefix| + |cycle| + 1`; the last state equals the state
    /// at position `|prefix|`, closing the cycle).
    pub run_a: Vec<StateId>,
    /// Second run, same shape as `run_a`.
    pub run_b: Vec<StateId>,
    prefix_names: Vec<String>,
    cycle_names: Vec<String>,
}

impl AmbiguityWitness {
    pub fn prefix_display(&self) -> String {
        self.prefix_names.join(" ")
    }

    pub fn cycle_display(&self) -> String {
        self.cycle_names.join(" ")
    }
}

// pair-node encoding: ((p * n + q) << 1) | diverged
fn encode(n: usize, p: StateId, q: StateId, diverged: bool) -> u64 {
    (((p * n + q) as u64) << 1) | diverged as u64
}

fn decode(n: usize, id: u64) -> (StateId, StateId, bool) {
    let d = id & 1 == 1;
    let pq = (id >> 1) as usize;
    (pq / n, pq % n, d)
}

/// Checks whether each word has at most one accepting run. Total: never
/// fails, returns a replayable witness when ambiguous.
pub fn verify_unambiguous(nba: &Nba) -> UnambiguityReport {
    let n = nba.num_states();
    if n == 0 || nba.initial().is_empty() {
        return UnambiguityReport { unambiguous: true, witness: None };
    }

    // forward BFS over pair nodes
    let mut visited = BitSet::new(2 * n * n);
    let mut parent: HashMap<u64, (u64, SymbolId)> = HashMap::new();
    let mut queue = std::collections::VecDeque::new();
    let init: Vec<StateId> = nba.initial().iter().collect();
    for &p in &init {
        for &q in &init {
            let id = encode(n, p, q, p != q);
            if !visited.contains(id as usize) {
                visited.insert(id as usize);
                queue.push_back(id);
            }
        }
    }
    let mut order: Vec<u64> = Vec::new();
    while let Some(id) = queue.pop_front() {
        order.push(id);
        let (p, q, d) = decode(n, id);
        for a in 0..nba.alphabet().len() {
            for &p2 in nba.successors(p, a) {
                for &q2 in nba.successors(q, a) {
                    let id2 = encode(n, p2, q2, d || p2 != q2);
                    if !visited.contains(id2 as usize) {
                        visited.insert(id2 as usize);
                        parent.insert(id2, (id, a));
                        queue.push_back(id2);
                    }
                }
            }
        }
    }

    // SCCs of the reachable diverged subgraph (diverged is absorbing,
    // so it is successor-closed within the reachable set)
    let diverged: Vec<u64> = order.iter().copied().filter(|&id| id & 1 == 1).collect();
    if diverged.is_empty() {
        return UnambiguityReport { unambiguous: true, witness: None };
    }
    let local: HashMap<u64, usize> =
        diverged.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let adj: Vec<Vec<usize>> = diverged
        .iter()
        .map(|&id| {
            let (p, q, _) = decode(n, id);
            let mut succs = Vec::new();
            for a in 0..nba.alphabet().len() {
                for &p2 in nba.successors(p, a) {
                    for &q2 in nba.successors(q, a) {
                        let id2 = encode(n, p2, q2, true);
                        if let Some(&j) = local.get(&id2) {
                            succs.push(j);
                        }
                    }
                }
            }
            succs.sort_unstable();
            succs.dedup();
            succs
        })
        .collect();
    let sccs = crate::graph::tarjan_scc(&adj);

    for comp in &sccs {
        let non_trivial =
            comp.len() > 1 || adj[comp[0]].contains(&comp[0]);
        if !non_trivial {
            continue;
        }
        let fa = comp.iter().find(|&&i| nba.is_final(decode(n, diverged[i]).0));
        let fb = comp.iter().find(|&&i| nba.is_final(decode(n, diverged[i]).1));
        if let (Some(&fa), Some(&fb)) = (fa, fb) {
            let witness = build_witness(nba, &diverged, &local, &adj, comp, fa, fb, &parent);
            return UnambiguityReport { unambiguous: false, witness: Some(witness) };
        }
    }
    UnambiguityReport { unambiguous: true, witness: None }
}

/// Shortest path inside the component from `from` to one of `to`,
/// as pair-node local indices (empty when `from ∈ to` and
/// `allow_empty`). Paths are found over the diverged subgraph.
fn bfs_in_component(
    nba: &Nba,
    diverged: &[u64],
    local: &HashMap<u64, usize>,
    comp_set: &BitSet,
    from: usize,
    to: usize,
    allow_empty: bool,
) -> Vec<(usize, SymbolId)> {
    if from == to && allow_empty {
        return Vec::new();
    }
    let n = nba.num_states();
    let mut parent: HashMap<usize, (usize, SymbolId)> = HashMap::new();
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(from);
    let mut seen = BitSet::new(diverged.len());
    // deliberately do not mark `from` as seen so that cycles back to it
    // are found when allow_empty is false
    while let Some(i) = queue.pop_front() {
        let (p, q, _) = decode(n, diverged[i]);
        for a in 0..nba.alphabet().len() {
            for &p2 in nba.successors(p, a) {
                for &q2 in nba.successors(q, a) {
                    let Some(&j) = local.get(&encode(n, p2, q2, true)) else { continue };
                    if !comp_set.contains(j) {
                        continue;
                    }
                    if j == to {
                        // reconstruct
                        let mut path = vec![(j, a)];
                        let mut cur = i;
                        while cur != from {
                            let (prev, sym) = parent[&cur];
                            path.push((cur, sym));
                            cur = prev;
                        }
                        path.reverse();
                        return path;
                    }
                    if !seen.contains(j) && j != from {
                        seen.insert(j);
                        parent.insert(j, (i, a));
                        queue.push_back(j);
                    }
                }
            }
        }
    }
    unreachable!("component is strongly connected");
}

#[allow(clippy::too_many_arguments)]
fn build_witness(
    nba: &Nba,
    diverged: &[u64],
    local: &HashMap<u64, usize>,
    adj: &[Vec<usize>],
    comp: &[usize],
    fa: usize,
    fb: usize,
    parent: &HashMap<u64, (u64, SymbolId)>,
) -> AmbiguityWitness {
    let n = nba.num_states();
    let comp_set = BitSet::from_iter(adj.len(), comp.iter().copied());

    // cycle: fa -> fb -> fa, forced nonempty overall
    let leg1 = bfs_in_component(nba, diverged, local, &comp_set, fa, fb, true);
    let leg2 = bfs_in_component(nba, diverged, local, &comp_set, fb, fa, !leg1.is_empty());
    let mut cycle_steps = leg1;
    cycle_steps.extend(leg2);

    // prefix: replay the forward-BFS parents back to an initial pair
    let entry = diverged[fa];
    let mut prefix_rev: Vec<(u64, SymbolId)> = Vec::new();
    let mut cur = entry;
    while let Some(&(prev, sym)) = parent.get(&cur) {
        prefix_rev.push((cur, sym));
        cur = prev;
    }
    prefix_rev.reverse();

    let (p0, q0, _) = decode(n, cur);
    let mut run_a = vec![p0];
    let mut run_b = vec![q0];
    let mut prefix = Vec::new();
    for &(node, sym) in &prefix_rev {
        let (p, q, _) = decode(n, node);
        run_a.push(p);
        run_b.push(q);
        prefix.push(sym);
    }
    let mut cycle = Vec::new();
    for &(i, sym) in &cycle_steps {
        let (p, q, _) = decode(n, diverged[i]);
        run_a.push(p);
        run_b.push(q);
        cycle.push(sym);
    }

    let name = |w: &[SymbolId]| {
        w.iter().map(|&a| nba.alphabet().symbol_name(a).to_string()).collect::<Vec<_>>()
    };
    AmbiguityWitness {
        prefix_names: name(&prefix),
        cycle_names: name(&cycle),
        prefix,
        cycle,
        run_a,
        run_b,
    }
}
