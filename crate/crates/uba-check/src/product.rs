//! Synchronous product `P = M ⊗ U` of a Markov chain and a Büchi
//! automaton, restricted to its reachable fragment. Edges carry the
//! chain's transition probabilities as weights.

use std::collections::HashMap;

use crate::automata::{Alphabet, Nba, StateId};
use crate::bitset::BitSet;
use crate::error::{Error, Result};
use crate::markov::Dtmc;

/// Index of a product node.
pub type NodeId = usize;

/// The reachable weighted product. Node `⟨s,q⟩` means: the chain is at
/// `s`, the automaton has consumed the label of `s` and is at `q`.
/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct ProductAutomaton {
    /// pairs (chain state, automaton state) in BFS discovery order
    nodes: Vec<(usize, StateId)>,
    /// edges[u] = sorted (target, weight P(s,t)); weight repeats once
    /// per automaton successor of a fixed chain successor t
    edges: Vec<Vec<(NodeId, f64)>>,
    /// initial nodes with their weight ι(s)
    initial: Vec<(NodeId, f64)>,
    final_nodes: BitSet,
}

impl ProductAutomaton {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, u: NodeId) -> (usize, StateId) {
        self.nodes[u]
    }

    pub fn chain_state(&self, u: NodeId) -> usize {
        self.nodes[u].0
    }

    pub fn nba_state(&self, u: NodeId) -> StateId {
        self.nodes[u].1
    }

    /// Outgoing weighted adjacency of a node: the coefficients of its
    /// row in the equation system.
    pub fn node_matrix_row(&self, u: NodeId) -> Result<&[(NodeId, f64)]> {
        self.edges
            .get(u)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Precondition(format!("unknown product node {u}")))
    }

    /// Like [`Self::node_matrix_row`] for callers holding a valid id.
    pub fn row(&self, u: NodeId) -> &[(NodeId, f64)] {
        &self.edges[u]
    }

    /// Initial nodes `⟨s,q⟩` with `ι(s) > 0`, `q ∈ δ(Q0, L(s))`, each
    /// carrying the weight `ι(s)`.
    pub fn initial(&self) -> &[(NodeId, f64)] {
        &self.initial
    }

    pub fn final_nodes(&self) -> &BitSet {
        &self.final_nodes
    }

    pub fn is_final(&self, u: NodeId) -> bool {
        self.final_nodes.contains(u)
    }

    /// The product viewed as an NBA over the alphabet of chain states
    /// (one plain symbol per chain state). Used for structural checks
    /// and for re-verifying unambiguity of products.
    pub fn as_nba(&self, dtmc: &Dtmc) -> Result<Nba> {
        let alphabet = Alphabet::plain(
            (0..dtmc.num_states().max(2)).map(|s| format!("s{s}")),
        )?;
        let transitions = self.edges.iter().enumerate().flat_map(|(u, row)| {
            row.iter().map(move |&(v, _)| (u, self.chain_state(v), v))
        });
        Nba::new(
            alphabet,
            self.num_nodes(),
            transitions,
            self.initial.iter().map(|&(u, _)| u),
            self.final_nodes.iter(),
        )
    }

    /// DOT rendering with `s,q` node labels and weight edge labels.
    pub fn to_dot(&self, dtmc: &Dtmc) -> String {
        use std::fmt::Write;
        let mut out = String::from("digraph product {\n");
        for (u, &(s, q)) in self.nodes.iter().enumerate() {
            let shape = if self.is_final(u) { "box" } else { "ellipse" };
            let _ = writeln!(
                out,
                "  n{u} [label=\"{},{q}\" shape={shape}];",
                dtmc.alphabet().symbol_name(dtmc.label(s)),
            );
        }
        for &(u, w) in &self.initial {
            let _ = writeln!(out, "  i{u} [shape=point]; i{u} -> n{u} [label=\"{w}\"];");
        }
        for (u, row) in self.edges.iter().enumerate() {
            for &(v, w) in row {
                let _ = writeln!(out, "  n{u} -> n{v} [label=\"{w}\"];");
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Builds the reachable product via BFS from the initial nodes
/// `Q0' = {⟨s,q⟩ : ι(s) > 0, q ∈ δ(Q0, L(s))}`, expanding successors
/// in sorted order so node indices are deterministic.
pub fn build_product(dtmc: &Dtmc, nba: &Nba) -> Result<ProductAutomaton> {
    if dtmc.alphabet() != nba.alphabet() {
        return Err(Error::AlphabetMismatch(format!(
            "chain labels range over {} symbols ({:?} APs), automaton over {} symbols ({:?} APs)",
            dtmc.alphabet().len(),
            dtmc.alphabet().ap_names().map(|a| a.len()),
            nba.alphabet().len(),
            nba.alphabet().ap_names().map(|a| a.len()),
        )));
    }

    let mut nodes: Vec<(usize, StateId)> = Vec::new();
    let mut index: HashMap<(usize, StateId), NodeId> = HashMap::new();
    let mut queue = std::collections::VecDeque::new();
    let mut intern = |s: usize, q: StateId, nodes: &mut Vec<(usize, StateId)>,
                      queue: &mut std::collections::VecDeque<NodeId>|
     -> NodeId {
        *index.entry((s, q)).or_insert_with(|| {
            let id = nodes.len();
            nodes.push((s, q));
            queue.push_back(id);
            id
        })
    };

    let mut initial: Vec<(NodeId, f64)> = Vec::new();
    for &(s, iota) in dtmc.initial() {
        let reached = nba.step(nba.initial(), dtmc.label(s));
        for q in reached.iter() {
            let u = intern(s, q, &mut nodes, &mut queue);
            initial.push((u, iota.value()));
        }
    }

    let mut edges: Vec<Vec<(NodeId, f64)>> = Vec::new();
    while let Some(u) = queue.pop_front() {
        let (s, q) = nodes[u];
        let mut row = Vec::new();
        for &(t, p) in dtmc.row(s) {
            for &q2 in nba.successors(q, dtmc.label(t)) {
                let v = intern(t, q2, &mut nodes, &mut queue);
                row.push((v, p.value()));
            }
        }
        debug_assert_eq!(edges.len(), u);
        edges.push(row);
    }

    let mut final_nodes = BitSet::new(nodes.len());
    for (u, &(_, q)) in nodes.iter().enumerate() {
        if nba.is_final(q) {
            final_nodes.insert(u);
        }
    }
    Ok(ProductAutomaton { nodes, edges, initial, final_nodes })
}
