//! Shared helpers for integration tests: seeded random automata and
//! chains.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uba_check::automata::{verify_unambiguous, Alphabet, Nba};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random NBA over the two-valuation alphabet of one AP.
pub fn random_nba(rng: &mut ChaCha8Rng, max_states: usize) -> Nba {
    let n = rng.gen_range(2..=max_states);
    let alphabet = Alphabet::from_aps(["p"]).unwrap();
    let mut transitions = Vec::new();
    for q in 0..n {
        for sym in 0..2usize {
            let fanout = match rng.gen_range(0..100) {
                0..=24 => 0,
                25..=79 => 1,
                _ => 2,
            };
            let mut targets = Vec::new();
            while targets.len() < fanout {
                let t = rng.gen_range(0..n);
                if !targets.contains(&t) {
                    targets.push(t);
                }
            }
            for t in targets {
                transitions.push((q, sym, t));
            }
        }
    }
    let initial: Vec<usize> = if rng.gen_bool(0.3) {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a == b { vec![a] } else { vec![a, b] }
    } else {
        vec![rng.gen_range(0..n)]
    };
    let finals: Vec<usize> = {
        let count = rng.gen_range(1..=3.min(n));
        let mut f = Vec::new();
        while f.len() < count {
            let q = rng.gen_range(0..n);
            if !f.contains(&q) {
                f.push(q);
            }
        }
        f
    };
    Nba::new(alphabet, n, transitions, initial, finals).unwrap()
}

/// Rejection-samples an unambiguous automaton.
pub fn random_uba(rng: &mut ChaCha8Rng, max_states: usize) -> Nba {
    loop {
        let nba = random_nba(rng, max_states);
        if verify_unambiguous(&nba).unambiguous {
            return nba;
        }
    }
}

/// The automaton's one-step graph is strongly connected (single SCC
/// covering every state).
pub fn is_strongly_connected(nba: &Nba) -> bool {
    let adj = nba.adjacency();
    let comps = uba_check::graph::tarjan_scc(&adj);
    comps.len() == 1 && comps[0].len() == nba.num_states()
}
