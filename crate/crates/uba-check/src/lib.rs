//! Exact probabilistic model checking of finite discrete-time Markov
//! chains against unambiguous Büchi automata.
//!
//! The pipeline builds the weighted synchronous product of the chain
//! and the automaton, classifies its SCCs bottom-up, decides
//! positivity of each bottom SCC spectrally (power iteration on
//! `(I+M)/2`, or a rank computation on `M - I`), normalizes the
//! resulting eigenvector through a generated cut, and closes with a
//! sparse absorbing system for the remaining states. A powerset
//! absorption oracle provides exact rational ground truth for strongly
//! connected inputs.
//!
//! Entry points: [`engine::measure`], [`engine::measure_uniform`],
//! [`engine::almost_universal`], [`engine::powerset_absorption_oracle`].

pub mod automata;
pub mod bitset;
pub mod cuts;
pub mod engine;
mod error;
pub mod families;
pub mod graph;
pub mod linalg;
pub mod markov;
pub mod product;

pub use error::{Error, Result};
