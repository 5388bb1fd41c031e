//! Pure-cut generation inside a positive bottom SCC of the product,
//! via the extension-search algorithm, plus the two structural
//! shortcuts that bypass it.

use std::collections::HashMap;

use crate::automata::Nba;
use crate::bitset::BitSet;
use crate::error::{Error, Result};
use crate::product::{NodeId, ProductAutomaton};

/// A pure cut: the set `Δ_C(anchor, word)` of component nodes reached
/// from the anchor along `word` (a cycle through the anchor's chain
/// state). All members share the anchor's chain state.
#[derive(Debug, Clone)]
pub struct Cut {
    pub anchor: NodeId,
    /// Cycle word as a sequence of chain states; empty when the anchor
    /// alone is already a cut.
    pub word: Vec<usize>,
    /// Sorted member nodes.
    pub members: Vec<NodeId>,
}

/// Witness that the current frontier can be enlarged: reading `word`
/// from the anchor reaches both the anchor and `partner` (a different
/// automaton state at the same chain state) whose own frontier is
/// nonempty.
#[derive(Debug, Clone)]
pub struct ExtensionWitness {
    pub word: Vec<usize>,
    pub partner: NodeId,
}

/// Counters of one cut generation run.
#[derive(Debug, Clone, Copy, Default)]
pub struct CutStats {
    /// Extensions applied (strict frontier growths).
    pub growth_steps: usize,
    /// Extension searches, including the final unsuccessful one.
    pub searches: usize,
    /// Pair states expanded across all searches.
    pub pairs_explored: usize,
}

/// Precomputed component-local view used by the extension search.
struct ComponentView<'a> {
    prod: &'a ProductAutomaton,
    nodes: &'a [NodeId],
    local: HashMap<NodeId, usize>,
    /// successors of each local node grouped by chain state:
    /// (chain state, local targets)
    succs_by_chain: Vec<Vec<(usize, Vec<usize>)>>,
}

impl<'a> ComponentView<'a> {
    fn new(prod: &'a ProductAutomaton, nodes: &'a [NodeId]) -> Self {
        let local: HashMap<NodeId, usize> =
            nodes.iter().enumerate().map(|(i, &u)| (u, i)).collect();
        let succs_by_chain = nodes
            .iter()
            .map(|&u| {
                let mut by_t: Vec<(usize, Vec<usize>)> = Vec::new();
                for &(v, _) in prod.row(u) {
                    let Some(&lv) = local.get(&v) else { continue };
                    let t = prod.chain_state(v);
                    match by_t.iter_mut().find(|(tt, _)| *tt == t) {
                        Some((_, list)) => list.push(lv),
                        None => by_t.push((t, vec![lv])),
                    }
                }
                by_t.sort_by_key(|&(t, _)| t);
                by_t
            })
            .collect();
        ComponentView { prod, nodes, local, succs_by_chain }
    }

    /// `Δ_C(n, word)` for every component node simultaneously.
    fn step_all(&self, word: &[usize]) -> Vec<BitSet> {
        let n = self.nodes.len();
        let mut reached: Vec<BitSet> =
            (0..n).map(|i| BitSet::from_iter(n, [i])).collect();
        for &t in word {
            reached = reached
                .iter()
                .map(|set| {
                    let mut next = BitSet::new(n);
                    for i in set.iter() {
                        if let Some((_, list)) =
                            self.succs_by_chain[i].iter().find(|&&(tt, _)| tt == t)
                        {
                            for &j in list {
                                next.insert(j);
                            }
                        }
                    }
                    next
                })
                .collect();
        }
        reached
    }
}

/// Searches the shortest extension for `(anchor, z_i)` given the
/// current frontier sets `Δ_C(n, z_i)` (indexed like `component`):
/// BFS over pairs of component nodes from `(anchor, anchor)` along
/// same-chain-symbol steps, accepting a pair `(anchor, v)` whose `v`
/// carries a different automaton state and a nonempty frontier.
pub fn find_extension(
    prod: &ProductAutomaton,
    component: &[NodeId],
    anchor: NodeId,
    frontier_sets: &[BitSet],
) -> Option<ExtensionWitness> {
    let view = ComponentView::new(prod, component);
    find_extension_in(&view, anchor, frontier_sets, &mut 0)
}

fn find_extension_in(
    view: &ComponentView<'_>,
    anchor: NodeId,
    frontier_sets: &[BitSet],
    pairs_explored: &mut usize,
) -> Option<ExtensionWitness> {
    let n = view.nodes.len();
    let a = view.local[&anchor];
    let anchor_state = view.prod.nba_state(anchor);

    let pair = |u: usize, v: usize| u * n + v;
    let mut visited = BitSet::new(n * n);
    let mut parent: HashMap<usize, (usize, usize)> = HashMap::new(); // pair -> (pred pair, chain state)
    let mut queue = std::collections::VecDeque::new();
    visited.insert(pair(a, a));
    queue.push_back(pair(a, a));

    while let Some(pq) = queue.pop_front() {
        *pairs_explored += 1;
        let (u, v) = (pq / n, pq % n);
        // merge-join successor groups on the chain state
        let (su, sv) = (&view.succs_by_chain[u], &view.succs_by_chain[v]);
        let (mut iu, mut iv) = (0, 0);
        while iu < su.len() && iv < sv.len() {
            match su[iu].0.cmp(&sv[iv].0) {
                std::cmp::Ordering::Less => iu += 1,
                std::cmp::Ordering::Greater => iv += 1,
                std::cmp::Ordering::Equal => {
                    let t = su[iu].0;
                    for &u2 in &su[iu].1 {
                        for &v2 in &sv[iv].1 {
                            let id = pair(u2, v2);
                            if visited.contains(id) {
                                continue;
                            }
                            visited.insert(id);
                            parent.insert(id, (pq, t));
                            if u2 == a
                                && view.prod.nba_state(view.nodes[v2]) != anchor_state
                                && !frontier_sets[v2].is_empty()
                            {
                                // reconstruct the word
                                let mut word = Vec::new();
                                let mut cur = id;
                                while let Some(&(prev, sym)) = parent.get(&cur) {
                                    word.push(sym);
                                    cur = prev;
                                }
                                word.reverse();
                                return Some(ExtensionWitness {
                                    word,
                                    partner: view.nodes[v2],
                                });
                            }
                            queue.push_back(id);
                        }
                    }
                    iu += 1;
                    iv += 1;
                }
            }
        }
    }
    None
}

/// Generates a pure cut in a positive bottom SCC: starting from the
/// empty word, repeatedly prepend the shortest extension until none
/// exists. Each step strictly grows the frontier, so the number of
/// growth steps is bounded by the automaton states available at the
/// anchor's chain state; exceeding that bound means the positivity
/// precondition was violated.
pub fn generate_pure_cut(
    prod: &ProductAutomaton,
    component: &[NodeId],
    anchor: NodeId,
) -> Result<(Cut, CutStats)> {
    if !component.contains(&anchor) {
        return Err(Error::Precondition("anchor outside the component".into()));
    }
    let view = ComponentView::new(prod, component);
    let n = component.len();
    let anchor_local = view.local[&anchor];
    let anchor_chain = prod.chain_state(anchor);
    let state_bound = component
        .iter()
        .filter(|&&u| prod.chain_state(u) == anchor_chain)
        .count();

    let mut frontier: Vec<BitSet> = (0..n).map(|i| BitSet::from_iter(n, [i])).collect();
    let mut word: Vec<usize> = Vec::new();
    let mut stats = CutStats::default();

    loop {
        stats.searches += 1;
        let ext = find_extension_in(&view, anchor, &frontier, &mut stats.pairs_explored);
        let Some(ext) = ext else { break };
        stats.growth_steps += 1;
        if stats.growth_steps > state_bound {
            return Err(Error::Precondition(
                "frontier keeps growing past the state bound; \
                 the component is not positive"
                    .into(),
            ));
        }
        debug_assert!(ext.word.len() <= n * n, "extension word too long");

        let before = frontier[anchor_local].len();
        // Q_{i+1}[p] = ∪_{r ∈ Δ_C(p, y)} Q_i[r]
        let reached = view.step_all(&ext.word);
        frontier = reached
            .iter()
            .map(|set| {
                let mut out = BitSet::new(n);
                for r in set.iter() {
                    out.union_with(&frontier[r]);
                }
                out
            })
            .collect();
        let mut new_word = ext.word;
        new_word.extend_from_slice(&word);
        word = new_word;
        debug_assert!(
            frontier[anchor_local].len() > before,
            "extension did not grow the frontier"
        );
    }

    let members: Vec<NodeId> =
        frontier[anchor_local].iter().map(|i| component[i]).collect();
    Ok((Cut { anchor, word, members }, stats))
}

/// Transition-count shortcut for separated automata: the full state
/// set of a strongly connected automaton is a cut iff the transition
/// count equals `|Σ| · |Q|`. Applied to the restriction of the
/// automaton to one SCC (states outside it carry no transitions);
/// returns the carrier state set on success, `None` otherwise (the
/// component may still be positive — fall through to
/// [`generate_pure_cut`]).
pub fn separated_shortcut(nba_scc: &Nba) -> Option<BitSet> {
    let mut carrier = BitSet::new(nba_scc.num_states());
    let mut transitions = 0usize;
    for q in 0..nba_scc.num_states() {
        let mut outgoing = 0usize;
        for a in 0..nba_scc.alphabet().len() {
            outgoing += nba_scc.successors(q, a).len();
        }
        if outgoing > 0 {
            carrier.insert(q);
            transitions += outgoing;
        }
    }
    if carrier.is_empty() || nba_scc.final_states().is_empty() {
        return None;
    }
    (transitions == nba_scc.alphabet().len() * carrier.len()).then_some(carrier)
}

/// True iff every final state carries exactly the universal self-loop
/// (`δ(q,a) = {q}` for all symbols): the language is then a co-safety
/// property and final product nodes have probability 1 outright,
/// making the SCC positivity and cut machinery unnecessary.
pub fn cosafety_shortcut(nba: &Nba) -> bool {
    nba.final_states().iter().all(|q| {
        (0..nba.alphabet().len()).all(|a| nba.successors(q, a) == [q])
    })
}

/// Exact separation check: do all pairs of distinct states have
/// disjoint languages? Decided on the pair graph: `L(p) ∩ L(q) ≠ ∅`
/// iff from `(p,q)` some pair-cycle is reachable that visits final
/// states in both components. States without outgoing transitions have
/// the empty language and never overlap.
///
/// The transition-count criterion of [`separated_shortcut`] is only a
/// cut characterization for separated automata (the full state set of
/// a complete-but-overlapping automaton passes the count without being
/// a cut), so callers must guard it with this check.
pub fn separated(nba: &Nba) -> bool {
    let n = nba.num_states();
    let num_syms = nba.alphabet().len();
    let active: Vec<bool> = (0..n)
        .map(|q| (0..num_syms).any(|a| !nba.successors(q, a).is_empty()))
        .collect();

    // pair graph over all ordered pairs
    let pair = |p: usize, q: usize| p * n + q;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n * n];
    for p in 0..n {
        for q in 0..n {
            let mut succs = Vec::new();
            for a in 0..num_syms {
                for &p2 in nba.successors(p, a) {
                    for &q2 in nba.successors(q, a) {
                        succs.push(pair(p2, q2));
                    }
                }
            }
            succs.sort_unstable();
            succs.dedup();
            adj[pair(p, q)] = succs;
        }
    }

    // pairs lying in a cycle that visits F in both components
    let comps = crate::graph::tarjan_scc(&adj);
    let mut in_good = vec![false; n * n];
    for comp in &comps {
        let non_trivial = comp.len() > 1 || adj[comp[0]].contains(&comp[0]);
        if !non_trivial {
            continue;
        }
        let fa = comp.iter().any(|&id| nba.is_final(id / n));
        let fb = comp.iter().any(|&id| nba.is_final(id % n));
        if fa && fb {
            for &id in comp {
                in_good[id] = true;
            }
        }
    }
    // backward closure: pairs that can reach a good pair
    let mut rev: Vec<Vec<usize>> = vec![Vec::new(); n * n];
    for (u, ss) in adj.iter().enumerate() {
        for &v in ss {
            rev[v].push(u);
        }
    }
    let mut overlap = in_good.clone();
    let mut stack: Vec<usize> = (0..n * n).filter(|&id| overlap[id]).collect();
    while let Some(id) = stack.pop() {
        for &u in &rev[id] {
            if !overlap[u] {
                overlap[u] = true;
                stack.push(u);
            }
        }
    }

    for p in 0..n {
        for q in 0..n {
            if p != q && active[p] && active[q] && overlap[pair(p, q)] {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families;
    use crate::graph;
    use crate::markov::uniform_chain;
    use crate::product::build_product;

    fn uniform_product(nba: &Nba) -> ProductAutomaton {
        let chain = uniform_chain(nba.alphabet()).unwrap();
        build_product(&chain, nba).unwrap()
    }

    fn bottom_component(prod: &ProductAutomaton) -> Vec<NodeId> {
        let (alive, dag) =
            graph::prune_unreachable_and_dead(prod, &BitSet::full(prod.num_nodes()));
        let _ = alive;
        dag.components()
            .iter()
            .enumerate()
            .filter(|(c, _)| dag.is_bottom(*c))
            .map(|(_, comp)| comp.clone())
            .max_by_key(Vec::len)
            .unwrap()
    }

    #[test]
    fn extension_exists_for_complete_automaton_start() {
        let prod = uniform_product(&families::complete_automaton(2));
        let comp = bottom_component(&prod);
        let anchor = comp[0];
        let n = comp.len();
        let frontier: Vec<BitSet> =
            (0..n).map(|i| BitSet::from_iter(n, [i])).collect();
        let ext = find_extension(&prod, &comp, anchor, &frontier);
        let ext = ext.expect("initial extension must exist");
        assert!(ext.word.len() <= n * n);
        // word is a cycle through the anchor's chain state
        assert_eq!(*ext.word.last().unwrap(), prod.chain_state(anchor));
    }

    #[test]
    fn complete_automaton_cut_sizes() {
        for k in [2u32, 5] {
            let prod = uniform_product(&families::complete_automaton(k));
            let comp = bottom_component(&prod);
            let (cut, stats) = generate_pure_cut(&prod, &comp, comp[0]).unwrap();
            assert_eq!(cut.members.len(), 1 << k, "cut size 2^k");
            assert_eq!(stats.growth_steps, 1);
            assert_eq!(stats.searches, 2);
            // all members share the anchor's chain state
            let s = prod.chain_state(cut.anchor);
            assert!(cut.members.iter().all(|&u| prod.chain_state(u) == s));
            assert!(cut.members.contains(&cut.anchor));
        }
    }

    #[test]
    fn fig1_right_cut_pairs_both_states_with_one_chain_state() {
        let prod = uniform_product(&families::fig1_right());
        let comp = bottom_component(&prod);
        let (cut, stats) = generate_pure_cut(&prod, &comp, comp[0]).unwrap();
        assert_eq!(cut.members.len(), 2);
        assert_eq!(stats.growth_steps, 1);
        let s = prod.chain_state(cut.anchor);
        let states: Vec<usize> =
            cut.members.iter().map(|&u| prod.nba_state(u)).collect();
        assert_eq!(states, vec![0, 1]);
        assert!(cut.members.iter().all(|&u| prod.chain_state(u) == s));
        // after the growth step no further extension exists
        // (frontier of the partner emptied out)
    }

    #[test]
    fn blocked_partners_mean_no_extension() {
        let prod = uniform_product(&families::fig1_right());
        let comp = bottom_component(&prod);
        let anchor = comp[0];
        let n = comp.len();
        // frontier where every non-anchor node is already empty
        let frontier: Vec<BitSet> = comp
            .iter()
            .enumerate()
            .map(|(i, &u)| {
                if u == anchor {
                    BitSet::from_iter(n, [i])
                } else {
                    BitSet::new(n)
                }
            })
            .collect();
        assert!(find_extension(&prod, &comp, anchor, &frontier).is_none());
    }

    #[test]
    fn single_node_component_needs_no_extension() {
        // one-state universal automaton over {a,b}: its uniform product
        // has a single-node bottom component per chain state pairing
        let al = crate::automata::Alphabet::plain(["a", "b"]).unwrap();
        let nba =
            crate::automata::Nba::new(al, 1, [(0, 0, 0), (0, 1, 0)], [0], [0]).unwrap();
        let prod = uniform_product(&nba);
        // restrict to the single component
        let (alive, dag) =
            graph::prune_unreachable_and_dead(&prod, &BitSet::full(prod.num_nodes()));
        let _ = alive;
        let comp = dag.components()[0].clone();
        // build an artificial single-node component: a self-loop node
        let self_loop = comp
            .iter()
            .copied()
            .find(|&u| prod.row(u).iter().any(|&(v, _)| v == u))
            .unwrap();
        let single = vec![self_loop];
        let (cut, stats) = generate_pure_cut(&prod, &single, self_loop).unwrap();
        assert_eq!(cut.members, vec![self_loop]);
        assert_eq!(stats.growth_steps, 0);
        assert!(cut.word.is_empty());
    }

    #[test]
    fn separated_shortcut_counts_transitions() {
        // the two-state universal fixture: 4 transitions = 2 symbols * 2 states
        let u = families::fig1_right();
        let carrier = separated_shortcut(&u).expect("full state set is a cut");
        assert_eq!(carrier.len(), 2);

        // guess-countdown automaton: fewer transitions than |Σ|·|Q|
        let (left, _) = families::fig1_left(1);
        assert!(separated_shortcut(&left).is_none());

        // one state, self-loops on every symbol
        let al = crate::automata::Alphabet::plain(["a", "b"]).unwrap();
        let nba =
            crate::automata::Nba::new(al, 1, [(0, 0, 0), (0, 1, 0)], [0], [0]).unwrap();
        let carrier = separated_shortcut(&nba).unwrap();
        assert_eq!(carrier.iter().collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn cosafety_shortcut_detects_true_self_loops() {
        let (left, _) = families::fig1_left(3);
        assert!(cosafety_shortcut(&left));

        // partial transitions on final states
        assert!(!cosafety_shortcut(&families::fig1_right()));

        // no final states: vacuously true
        let al = crate::automata::Alphabet::plain(["a", "b"]).unwrap();
        let nba = crate::automata::Nba::new(al, 1, [(0, 0, 0)], [0], []).unwrap();
        assert!(cosafety_shortcut(&nba));
    }

    #[test]
    fn separation_check_is_exact() {
        // each state of the two-state universal fixture owns one letter
        assert!(separated(&families::fig1_right()));
        // the k=1 hub automaton passes the transition count but its hub
        // language covers the branch languages
        let ca1 = families::complete_automaton(1);
        let carrier = separated_shortcut(&ca1);
        assert!(carrier.is_some(), "count criterion fires on k=1");
        assert!(!separated(&ca1), "but the automaton is not separated");
        // the five-state block automaton is separated: every state's
        // language starts with a distinct letter
        assert!(separated(&families::blw13().0));
    }

    #[test]
    fn growth_is_strict_and_words_are_bounded() {
        for k in 2..=4u32 {
            let prod = uniform_product(&families::complete_automaton(k));
            let comp = bottom_component(&prod);
            let n = comp.len();
            let view_bound = n * n;
            let (cut, _) = generate_pure_cut(&prod, &comp, comp[0]).unwrap();
            assert!(cut.word.len() <= view_bound);
            assert!(!cut.members.is_empty());
        }
    }
}
