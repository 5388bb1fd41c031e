//! Built-in benchmark and regression fixture families, available from
//! the CLI via `uba-check gen`.
//!
//! All families construct automata over AP-valuation alphabets so they
//! can be emitted as HOA documents.

use crate::automata::{Alphabet, Nba, StateId};
use crate::error::Result;
use crate::markov::{Dtmc, Prob};

/// `complete k`: a single accepting hub state branches on any bit to
/// 2^k guess states; each guess state leads (on any bit) into a gadget
/// of `k` states that admits exactly one k-bit string and then returns
/// to the hub. Recognizes all infinite bit sequences, unambiguously,
/// with 1 + (k+1)·2^k states.
pub fn complete_automaton(k: u32) -> Nba {
    build_bitstring_automaton(k, false)
}

/// `nearly-complete k`: the same automaton except that the all-zero
/// gadget does not return to the hub — its last state loops on 0
/// instead. Words whose guessed block is all zeros lose their run, so
/// the language misses a bit-block pattern and has measure zero.
pub fn nearly_complete_automaton(k: u32) -> Nba {
    build_bitstring_automaton(k, true)
}

fn build_bitstring_automaton(k: u32, inhibit_zero_gadget: bool) -> Nba {
    assert!(k >= 1 && k <= 16, "k must be in 1..=16");
    let k = k as usize;
    let blocks = 1usize << k;
    let alphabet = Alphabet::from_aps(["p"]).expect("single AP");
    let hub: StateId = 0;
    let branch = |i: usize| -> StateId { 1 + i };
    let gadget = |i: usize, j: usize| -> StateId { 1 + blocks + i * k + (j - 1) };
    let num_states = 1 + (k + 1) * blocks;

    let mut transitions: Vec<(StateId, usize, StateId)> = Vec::new();
    for bit in 0..2 {
        for i in 0..blocks {
            transitions.push((hub, bit, branch(i)));
            transitions.push((branch(i), bit, gadget(i, 1)));
        }
    }
    for i in 0..blocks {
        // bit j of block i, most significant first
        let bit_at = |j: usize| (i >> (k - j)) & 1;
        for j in 1..k {
            transitions.push((gadget(i, j), bit_at(j), gadget(i, j + 1)));
        }
        let last = gadget(i, k);
        if inhibit_zero_gadget && i == 0 {
            transitions.push((last, bit_at(k), last));
        } else {
            transitions.push((last, bit_at(k), hub));
        }
    }
    Nba::new(alphabet, num_states, transitions, [hub], [hub]).expect("valid construction")
}

/// `fig1-right`: the two-state automaton over one AP in which each
/// state admits exactly one letter (state 0 reads `!p`, state 1 reads
/// `p`) and moves to both states on it; both states are initial and
/// accepting. Universal, but no single state accepts almost all words.
pub fn fig1_right() -> Nba {
    let alphabet = Alphabet::from_aps(["p"]).expect("single AP");
    // symbol 0 = !p ("a"), symbol 1 = p ("b")
    Nba::new(
        alphabet,
        2,
        [(0, 0, 0), (0, 0, 1), (1, 1, 0), (1, 1, 1)],
        [0, 1],
        [0, 1],
    )
    .expect("valid construction")
}

/// Symbols of the three-letter alphabet used by `fig1-left` and its
/// companion chain, as valuations of the APs `x`, `y`:
/// `a = x&!y`, `b = !x&y`, `c = !x&!y`. The valuation `x&y` is unused
/// (no chain state carries it).
pub const FIG1_LEFT_A: usize = 0b01;
pub const FIG1_LEFT_B: usize = 0b10;
pub const FIG1_LEFT_C: usize = 0b00;

/// `fig1-left k`: recognizes "`b` eventually occurs, and `a` is read
/// exactly `k` steps before the first `b`" over `{a,b,c}`. A scan state
/// guesses the `a`, a countdown of `k` states checks that the next
/// `k`-th letter is the first `b`, and a final sink with a true
/// self-loop accepts the rest; `k + 2` states in total.
///
/// Returns the automaton together with the chain that makes the three
/// used letters uniform (probability 1/3 each).
pub fn fig1_left(k: u32) -> (Nba, Dtmc) {
    assert!(k >= 1, "k must be at least 1");
    let k = k as usize;
    let alphabet = Alphabet::from_aps(["x", "y"]).expect("two APs");
    let scan: StateId = 0;
    let count = |j: usize| -> StateId { j }; // 1..=k
    let sink: StateId = k + 1;

    let mut transitions: Vec<(StateId, usize, StateId)> = Vec::new();
    transitions.push((scan, FIG1_LEFT_A, scan));
    transitions.push((scan, FIG1_LEFT_C, scan));
    transitions.push((scan, FIG1_LEFT_A, count(1)));
    for j in 1..k {
        transitions.push((count(j), FIG1_LEFT_A, count(j + 1)));
        transitions.push((count(j), FIG1_LEFT_C, count(j + 1)));
    }
    transitions.push((count(k), FIG1_LEFT_B, sink));
    for sym in 0..alphabet.len() {
        transitions.push((sink, sym, sink));
    }
    let nba = Nba::new(alphabet.clone(), k + 2, transitions, [scan], [sink])
        .expect("valid construction");

    let third = Prob::from_ratio(1, 3).unwrap();
    let labels = vec![FIG1_LEFT_A, FIG1_LEFT_B, FIG1_LEFT_C];
    let trans = (0..3).flat_map(|s| (0..3).map(move |t| (s, t, third)));
    let chain = Dtmc::new(alphabet, 3, trans, (0..3).map(|s| (s, third)), labels)
        .expect("valid chain");
    (nba, chain)
}

/// `blw13`: a five-state automaton for the words `((dab) + (dac))^ω`
/// over the four-letter alphabet `{a,b,c,d}` (as valuations of `x`,
/// `y`), paired with the four-state chain that generates exactly those
/// words: from `d` to `a` surely, then to `b` or `c` with probability
/// 1/2 each, and back to `d`.
pub fn blw13() -> (Nba, Dtmc) {
    let alphabet = Alphabet::from_aps(["x", "y"]).expect("two APs");
    let (a, b, c, d) = (0b00, 0b01, 0b10, 0b11);
    // state 0 is the block start (initial, accepting); 1/2 guess the
    // third letter b/c; 3/4 await it
    let nba = Nba::new(
        alphabet.clone(),
        5,
        [
            (0, d, 1),
            (0, d, 2),
            (1, a, 3),
            (2, a, 4),
            (3, b, 0),
            (4, c, 0),
        ],
        [0],
        [0],
    )
    .expect("valid construction");

    let one = Prob::from_ratio(1, 1).unwrap();
    let half = Prob::from_ratio(1, 2).unwrap();
    // chain states: 0 = a, 1 = b, 2 = c, 3 = d
    let chain = Dtmc::new(
        alphabet,
        4,
        [(3, 0, one), (0, 1, half), (0, 2, half), (1, 3, one), (2, 3, one)],
        [(3, one)],
        vec![a, b, c, d],
    )
    .expect("valid chain");
    (nba, chain)
}

/// Renders an automaton over an AP alphabet as a HOA v1 document with
/// state-based Büchi acceptance.
pub fn write_hoa(nba: &Nba, name: &str) -> Result<String> {
    use std::fmt::Write;
    let aps = nba.alphabet().ap_names().ok_or_else(|| {
        crate::error::Error::Precondition(
            "only automata over AP-valuation alphabets can be written as HOA".into(),
        )
    })?;
    let mut out = String::new();
    writeln!(out, "HOA: v1").unwrap();
    writeln!(out, "name: \"{name}\"").unwrap();
    writeln!(out, "States: {}", nba.num_states()).unwrap();
    for q in nba.initial().iter() {
        writeln!(out, "Start: {q}").unwrap();
    }
    write!(out, "AP: {}", aps.len()).unwrap();
    for ap in aps {
        write!(out, " \"{ap}\"").unwrap();
    }
    writeln!(out).unwrap();
    writeln!(out, "acc-name: Buchi").unwrap();
    writeln!(out, "Acceptance: 1 Inf(0)").unwrap();
    writeln!(out, "properties: trans-labels explicit-labels state-acc").unwrap();
    writeln!(out, "--BODY--").unwrap();
    for q in 0..nba.num_states() {
        if nba.is_final(q) {
            writeln!(out, "State: {q} {{0}}").unwrap();
        } else {
            writeln!(out, "State: {q}").unwrap();
        }
        for sym in 0..nba.alphabet().len() {
            let label: String = (0..aps.len())
                .map(|i| {
                    if sym & (1 << i) != 0 {
                        format!("{i}")
                    } else {
                        format!("!{i}")
                    }
                })
                .collect::<Vec<_>>()
                .join("&");
            for &t in nba.successors(q, sym) {
                writeln!(out, "[{label}] {t}").unwrap();
            }
        }
    }
    writeln!(out, "--END--").unwrap();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::{parse_hoa, verify_unambiguous};

    #[test]
    fn complete_automaton_sizes_match_formula() {
        for k in 1..=8u32 {
            let nba = complete_automaton(k);
            assert_eq!(nba.num_states(), 1 + (k as usize + 1) * (1 << k));
            assert_eq!(
                nearly_complete_automaton(k).num_states(),
                nba.num_states()
            );
        }
        // pinned table values
        assert_eq!(complete_automaton(5).num_states(), 193);
        assert_eq!(complete_automaton(6).num_states(), 449);
        assert_eq!(complete_automaton(7).num_states(), 1025);
        assert_eq!(complete_automaton(8).num_states(), 2305);
        assert_eq!(complete_automaton(9).num_states(), 5121);
    }

    #[test]
    fn fig1_right_shape() {
        let nba = fig1_right();
        assert_eq!(nba.num_states(), 2);
        assert_eq!(nba.num_transitions(), 4);
        assert_eq!(nba.successors(0, 0), &[0, 1]);
        assert!(nba.successors(0, 1).is_empty());
    }

    #[test]
    fn generated_fixtures_are_unambiguous() {
        assert!(verify_unambiguous(&fig1_right()).unambiguous);
        assert!(verify_unambiguous(&blw13().0).unambiguous);
        for k in 1..=4 {
            assert!(verify_unambiguous(&complete_automaton(k)).unambiguous);
            assert!(verify_unambiguous(&nearly_complete_automaton(k)).unambiguous);
            assert!(verify_unambiguous(&fig1_left(k).0).unambiguous);
        }
    }

    #[test]
    fn hoa_roundtrip_preserves_families() {
        for nba in [
            fig1_right(),
            complete_automaton(3),
            nearly_complete_automaton(3),
            fig1_left(2).0,
            blw13().0,
        ] {
            let text = write_hoa(&nba, "t").unwrap();
            let back = parse_hoa(&text).unwrap();
            assert_eq!(back.dump(), nba.dump());
        }
    }
}
