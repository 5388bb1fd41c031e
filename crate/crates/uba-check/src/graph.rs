//! SCC decomposition of the product, classification, and the bottom-up
//! preprocessing loop that removes zero states.
//!
//! Removal is implemented by tombstoning nodes in an alive-mask and
//! filtering adjacency against it, never by rebuilding the product, so
//! node indices stay stable for diagnostics.

use crate::bitset::BitSet;
use crate::error::Result;
use crate::product::{NodeId, ProductAutomaton};

/// Component index within an [`SccDag`].
pub type CompId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompStatus {
    Unmarked,
    /// Marked positive by the preprocessing loop.
    Positive,
    /// Removed: trivial, final-free, or non-positive bottom component.
    Removed,
}

/// Condensation of the (alive part of the) product, components in
/// reverse topological order (sinks first).
#[derive(Debug, Clone)]
pub struct SccDag {
    components: Vec<Vec<NodeId>>,
    /// comp_of[node], usize::MAX for dead nodes
    comp_of: Vec<CompId>,
    succs: Vec<Vec<CompId>>,
    preds: Vec<Vec<CompId>>,
    /// number of not-yet-removed successor components
    live_succs: Vec<usize>,
    trivial: Vec<bool>,
    has_final: Vec<bool>,
    status: Vec<CompStatus>,
}

impl SccDag {
    pub fn components(&self) -> &[Vec<NodeId>] {
        &self.components
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    pub fn component_of(&self, u: NodeId) -> Option<CompId> {
        (self.comp_of[u] != usize::MAX).then_some(self.comp_of[u])
    }

    /// A component is trivial iff it contains no internal edge.
    pub fn is_trivial(&self, c: CompId) -> bool {
        self.trivial[c]
    }

    pub fn contains_final(&self, c: CompId) -> bool {
        self.has_final[c]
    }

    pub fn status(&self, c: CompId) -> CompStatus {
        self.status[c]
    }

    /// Bottom: no edge into a surviving component.
    pub fn is_bottom(&self, c: CompId) -> bool {
        self.live_succs[c] == 0
    }

    pub fn dag_successors(&self, c: CompId) -> &[CompId] {
        &self.succs[c]
    }

    /// Removes a component: marks it removed, tombstones its nodes in
    /// `alive` (which deletes all transitions into it, since adjacency
    /// is always filtered by the mask), and updates bottomness of its
    /// predecessors.
    pub fn remove_component(&mut self, c: CompId, alive: &mut BitSet) {
        debug_assert_ne!(self.status[c], CompStatus::Removed);
        self.status[c] = CompStatus::Removed;
        for &u in &self.components[c] {
            alive.remove(u);
        }
        for &p in &self.preds[c] {
            self.live_succs[p] -= 1;
        }
    }

    fn mark_positive(&mut self, c: CompId) {
        debug_assert_eq!(self.status[c], CompStatus::Unmarked);
        self.status[c] = CompStatus::Positive;
    }
}

/// Iterative Tarjan over an adjacency list; components come out in
/// reverse topological order (sinks first).
pub fn tarjan_scc(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut comps: Vec<Vec<usize>> = Vec::new();
    let mut counter = 0usize;

    // explicit DFS stack of (node, next child position)
    let mut call: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        call.push((root, 0));
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut ci)) = call.last_mut() {
            if *ci < adj[v].len() {
                let w = adj[v][*ci];
                *ci += 1;
                if index[w] == usize::MAX {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack underflow");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    comps.push(comp);
                }
            }
        }
    }
    comps
}

/// SCC decomposition of the alive part of the product, with
/// classification fields populated.
pub fn sccs(prod: &ProductAutomaton, alive: &BitSet) -> SccDag {
    let n = prod.num_nodes();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|u| {
            if !alive.contains(u) {
                return Vec::new();
            }
            let mut succs: Vec<usize> = prod
                .row(u)
                .iter()
                .map(|&(v, _)| v)
                .filter(|&v| alive.contains(v))
                .collect();
            succs.sort_unstable();
            succs.dedup();
            succs
        })
        .collect();

    let raw = tarjan_scc(&adj);
    // drop singleton components of dead nodes
    let components: Vec<Vec<usize>> = raw
        .into_iter()
        .filter(|c| c.iter().any(|&u| alive.contains(u)))
        .collect();

    let mut comp_of = vec![usize::MAX; n];
    for (ci, comp) in components.iter().enumerate() {
        for &u in comp {
            comp_of[u] = ci;
        }
    }

    let m = components.len();
    let mut succs: Vec<Vec<CompId>> = vec![Vec::new(); m];
    let mut preds: Vec<Vec<CompId>> = vec![Vec::new(); m];
    let mut trivial = vec![true; m];
    let mut has_final = vec![false; m];
    for (ci, comp) in components.iter().enumerate() {
        for &u in comp {
            if prod.is_final(u) {
                has_final[ci] = true;
            }
            for &v in &adj[u] {
                let cj = comp_of[v];
                if cj == ci {
                    trivial[ci] = false;
                } else {
                    succs[ci].push(cj);
                }
            }
        }
        succs[ci].sort_unstable();
        succs[ci].dedup();
    }
    for (ci, ss) in succs.iter().enumerate() {
        for &cj in ss {
            preds[cj].push(ci);
        }
    }
    let live_succs = succs.iter().map(Vec::len).collect();
    SccDag {
        components,
        comp_of,
        succs,
        preds,
        live_succs,
        trivial,
        has_final,
        status: vec![CompStatus::Unmarked; m],
    }
}

/// Removes nodes unreachable from the initial nodes and nodes with no
/// path to a final node; returns the new alive mask and a fresh DAG.
pub fn prune_unreachable_and_dead(
    prod: &ProductAutomaton,
    alive: &BitSet,
) -> (BitSet, SccDag) {
    let n = prod.num_nodes();

    // forward reachability
    let mut reach = BitSet::new(n);
    let mut queue: Vec<NodeId> = Vec::new();
    for &(u, _) in prod.initial() {
        if alive.contains(u) && !reach.contains(u) {
            reach.insert(u);
            queue.push(u);
        }
    }
    while let Some(u) = queue.pop() {
        for &(v, _) in prod.row(u) {
            if alive.contains(v) && !reach.contains(v) {
                reach.insert(v);
                queue.push(v);
            }
        }
    }

    // backward reachability from final nodes, within `reach`
    let mut rev: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    for u in reach.iter() {
        for &(v, _) in prod.row(u) {
            if reach.contains(v) {
                rev[v].push(u);
            }
        }
    }
    let mut co = BitSet::new(n);
    let mut queue: Vec<NodeId> = Vec::new();
    for u in prod.final_nodes().iter() {
        if reach.contains(u) {
            co.insert(u);
            queue.push(u);
        }
    }
    while let Some(u) = queue.pop() {
        for &v in &rev[u] {
            if !co.contains(v) {
                co.insert(v);
                queue.push(v);
            }
        }
    }

    let dag = sccs(prod, &co);
    (co, dag)
}

/// The bottom-up zero-state removal loop: repeatedly pick an unmarked
/// bottom component; trivial or final-free bottoms are removed together
/// with their incoming transitions, otherwise the positivity callback
/// decides between marking and removal. Removal may expose new bottom
/// components, which are processed in turn. Terminates when every
/// bottom component is marked positive.
///
/// The callback may be invoked concurrently for independent components
/// when `parallel` is set; it must be safe for that.
pub fn preprocess_bsccs<F>(
    dag: &mut SccDag,
    alive: &mut BitSet,
    positivity: F,
    parallel: bool,
) -> Result<()>
where
    F: Fn(CompId) -> Result<bool> + Sync,
{
    loop {
        // cheap cascade: trivial or final-free bottoms
        let mut changed = true;
        while changed {
            changed = false;
            for c in 0..dag.num_components() {
                if dag.status(c) == CompStatus::Unmarked
                    && dag.is_bottom(c)
                    && (dag.is_trivial(c) || !dag.contains_final(c))
                {
                    dag.remove_component(c, alive);
                    changed = true;
                }
            }
        }

        // remaining unmarked bottoms are non-trivial with a final node
        let batch: Vec<CompId> = (0..dag.num_components())
            .filter(|&c| dag.status(c) == CompStatus::Unmarked && dag.is_bottom(c))
            .collect();
        if batch.is_empty() {
            return Ok(());
        }

        let verdicts: Vec<(CompId, bool)> = if parallel {
            use rayon::prelude::*;
            batch
                .par_iter()
                .map(|&c| positivity(c).map(|v| (c, v)))
                .collect::<Result<Vec<_>>>()?
        } else {
            batch
                .iter()
                .map(|&c| positivity(c).map(|v| (c, v)))
                .collect::<Result<Vec<_>>>()?
        };
        for (c, positive) in verdicts {
            if positive {
                dag.mark_positive(c);
            } else {
                dag.remove_component(c, alive);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families;
    use crate::markov::uniform_chain;
    use crate::product::build_product;

    fn product_of(nba: &crate::automata::Nba) -> ProductAutomaton {
        let chain = uniform_chain(nba.alphabet()).unwrap();
        build_product(&chain, nba).unwrap()
    }

    #[test]
    fn blw13_product_is_one_nontrivial_scc() {
        let (nba, chain) = families::blw13();
        let prod = build_product(&chain, &nba).unwrap();
        let dag = sccs(&prod, &BitSet::full(prod.num_nodes()));
        assert_eq!(dag.num_components(), 1);
        assert!(!dag.is_trivial(0));
        assert!(dag.contains_final(0));
        assert!(dag.is_bottom(0));
    }

    #[test]
    fn nearly_complete_product_has_dominant_scc_and_self_loop() {
        let nba = families::nearly_complete_automaton(5);
        let prod = product_of(&nba);
        // 258 nodes total, as for the complete automaton
        assert_eq!(prod.num_nodes(), 258);
        let dag = sccs(&prod, &BitSet::full(prod.num_nodes()));
        let mut sizes: Vec<usize> = dag.components().iter().map(Vec::len).collect();
        sizes.sort_unstable();
        assert_eq!(*sizes.last().unwrap(), 250, "dominant SCC size");
        // exactly one singleton carries a self-loop (the inhibited gadget end)
        let self_loops = dag
            .components()
            .iter()
            .enumerate()
            .filter(|(ci, c)| {
                c.len() == 1 && !dag.is_trivial(*ci)
            })
            .count();
        assert_eq!(self_loops, 1);
    }

    #[test]
    fn empty_product_yields_empty_dag() {
        let nba = families::fig1_right();
        let nba = nba.with_initial(&BitSet::new(2)).unwrap();
        let prod = product_of(&nba);
        let dag = sccs(&prod, &BitSet::new(prod.num_nodes()));
        assert_eq!(dag.num_components(), 0);
    }

    #[test]
    fn prune_removes_branches_that_miss_final() {
        // automaton: 0 -a-> 1 (accepting loop), 0 -b-> 2 (final-free sink)
        let al = crate::automata::Alphabet::plain(["a", "b"]).unwrap();
        let nba = crate::automata::Nba::new(
            al,
            3,
            [(0, 0, 1), (0, 1, 2), (1, 0, 1), (1, 1, 1), (2, 0, 2), (2, 1, 2)],
            [0],
            [1],
        )
        .unwrap();
        let prod = product_of(&nba);
        let (alive, _) = prune_unreachable_and_dead(&prod, &BitSet::full(prod.num_nodes()));
        for u in 0..prod.num_nodes() {
            assert_eq!(alive.contains(u), prod.nba_state(u) != 2);
        }
    }

    #[test]
    fn prune_keeps_complete_automaton_product_whole() {
        let nba = families::complete_automaton(2);
        let prod = product_of(&nba);
        let (alive, _) = prune_unreachable_and_dead(&prod, &BitSet::full(prod.num_nodes()));
        assert_eq!(alive.len(), prod.num_nodes());
    }

    #[test]
    fn fully_dead_product_prunes_to_nothing() {
        // final state unreachable
        let al = crate::automata::Alphabet::plain(["a", "b"]).unwrap();
        let nba = crate::automata::Nba::new(
            al,
            2,
            [(0, 0, 0), (0, 1, 0), (1, 0, 1)],
            [0],
            [1],
        )
        .unwrap();
        let prod = product_of(&nba);
        let (alive, dag) = prune_unreachable_and_dead(&prod, &BitSet::full(prod.num_nodes()));
        assert!(alive.is_empty());
        assert_eq!(dag.num_components(), 0);
    }

    #[test]
    fn preprocess_cascades_and_marks() {
        // node 0 loops (final) and can escape to a final-free loop at 1:
        // removing {1} exposes {0} as a positive bottom component
        let al = crate::automata::Alphabet::plain(["a", "b"]).unwrap();
        let nba = crate::automata::Nba::new(
            al,
            2,
            [(0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 1)],
            [0],
            [0],
        )
        .unwrap();
        let prod = product_of(&nba);
        let (mut alive, _) = prune_unreachable_and_dead(&prod, &BitSet::full(prod.num_nodes()));
        let mut dag = sccs(&prod, &alive);
        let mut asked: Vec<CompId> = Vec::new();
        let asked_cell = std::sync::Mutex::new(&mut asked);
        preprocess_bsccs(
            &mut dag,
            &mut alive,
            |c| {
                asked_cell.lock().unwrap().push(c);
                Ok(true)
            },
            false,
        )
        .unwrap();
        // the final-free component was removed without consulting positivity
        assert_eq!(asked.len(), 1);
        let marked: Vec<CompId> = (0..dag.num_components())
            .filter(|&c| dag.status(c) == CompStatus::Positive)
            .collect();
        assert_eq!(marked.len(), 1);
        assert!(dag.components()[marked[0]]
            .iter()
            .all(|&u| prod.nba_state(u) == 0));
    }

    #[test]
    fn after_preprocess_bottoms_are_positive_nontrivial_final() {
        for nba in [
            families::complete_automaton(3),
            families::nearly_complete_automaton(3),
            families::fig1_right(),
        ] {
            let prod = product_of(&nba);
            let (mut alive, mut dag) =
                prune_unreachable_and_dead(&prod, &BitSet::full(prod.num_nodes()));
            // stand-in positivity: a component is positive iff it never
            // loses mass internally (true for these fixtures' positive
            // components, false for the nearly-complete dominant SCC)
            let prod_ref = &prod;
            let dag_snapshot = dag.clone();
            let alive_snapshot = alive.clone();
            preprocess_bsccs(
                &mut dag,
                &mut alive,
                |c| {
                    let comp = &dag_snapshot.components()[c];
                    let inside =
                        BitSet::from_iter(prod_ref.num_nodes(), comp.iter().copied());
                    Ok(comp.iter().all(|&u| {
                        let m: f64 = prod_ref
                            .row(u)
                            .iter()
                            .filter(|&&(v, _)| inside.contains(v) && alive_snapshot.contains(v))
                            .map(|&(_, w)| w)
                            .sum();
                        m >= 1.0 - 1e-9
                    }))
                },
                false,
            )
            .unwrap();
            for c in 0..dag.num_components() {
                if dag.status(c) != CompStatus::Removed && dag.is_bottom(c) {
                    assert_eq!(dag.status(c), CompStatus::Positive);
                    assert!(!dag.is_trivial(c));
                    assert!(dag.contains_final(c));
                }
            }
        }
    }

    /// Brute-force Kosaraju used as an independent oracle for Tarjan.
    fn kosaraju(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
        let n = adj.len();
        let mut visited = vec![false; n];
        let mut order = Vec::new();
        fn dfs1(v: usize, adj: &[Vec<usize>], visited: &mut [bool], order: &mut Vec<usize>) {
            visited[v] = true;
            for &w in &adj[v] {
                if !visited[w] {
                    dfs1(w, adj, visited, order);
                }
            }
            order.push(v);
        }
        for v in 0..n {
            if !visited[v] {
                dfs1(v, adj, &mut visited, &mut order);
            }
        }
        let mut radj = vec![Vec::new(); n];
        for (v, ss) in adj.iter().enumerate() {
            for &w in ss {
                radj[w].push(v);
            }
        }
        let mut comp = vec![usize::MAX; n];
        let mut ncomp = 0;
        for &v in order.iter().rev() {
            if comp[v] != usize::MAX {
                continue;
            }
            let mut stack = vec![v];
            comp[v] = ncomp;
            while let Some(x) = stack.pop() {
                for &w in &radj[x] {
                    if comp[w] == usize::MAX {
                        comp[w] = ncomp;
                        stack.push(w);
                    }
                }
            }
            ncomp += 1;
        }
        let mut comps = vec![Vec::new(); ncomp];
        for (v, &c) in comp.iter().enumerate() {
            comps[c].push(v);
        }
        comps.iter_mut().for_each(|c| c.sort_unstable());
        comps
    }

    #[test]
    fn tarjan_agrees_with_kosaraju_on_random_graphs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..30 {
            let n = rng.gen_range(1..=500);
            let mut adj = vec![Vec::new(); n];
            let m = rng.gen_range(0..(3 * n));
            for _ in 0..m {
                let u = rng.gen_range(0..n);
                let v = rng.gen_range(0..n);
                adj[u].push(v);
            }
            let mut a: Vec<Vec<usize>> = tarjan_scc(&adj);
            let mut b = kosaraju(&adj);
            a.sort();
            b.sort();
            assert_eq!(a, b);
        }
    }
}
