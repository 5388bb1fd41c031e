//! Finite discrete-time Markov chains with AP-valuation state labels.
//!
//! Probabilities entered as fractions `p/q` are kept exactly alongside
//! their double approximation; the main engine runs in doubles while
//! the exact values feed the rational verification oracle.

use num_rational::Rational64;
use num_traits::{One, Signed};

use crate::automata::{Alphabet, SymbolId};
use crate::error::{Error, Result};

/// Tolerance for stochasticity checks on decimal input.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// A probability as parsed: double plus exact value when the input was
/// a fraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prob {
    value: f64,
    exact: Option<Rational64>,
}

impl Prob {
    pub fn from_f64(value: f64) -> Self {
        Prob { value, exact: None }
    }

    pub fn from_ratio(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::Precondition("zero denominator".into()));
        }
        let r = Rational64::new(num, den);
        Ok(Prob { value: *r.numer() as f64 / *r.denom() as f64, exact: Some(r) })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn exact(&self) -> Option<Rational64> {
        self.exact
    }

    fn parse(token: &str) -> Result<Self> {
        if let Some((n, d)) = token.split_once('/') {
            let num: i64 = n.trim().parse().map_err(|_| {
                Error::Precondition(format!("invalid fraction numerator `{n}`"))
            })?;
            let den: i64 = d.trim().parse().map_err(|_| {
                Error::Precondition(format!("invalid fraction denominator `{d}`"))
            })?;
            Prob::from_ratio(num, den)
        } else if let Ok(int) = token.parse::<i64>() {
            Prob::from_ratio(int, 1)
        } else {
            let v: f64 = token
                .parse()
                .map_err(|_| Error::Precondition(format!("invalid probability `{token}`")))?;
            Ok(Prob::from_f64(v))
        }
    }

    fn render(&self) -> String {
        match self.exact {
            Some(r) if !r.is_integer() => format!("{}/{}", r.numer(), r.denom()),
            Some(r) => format!("{}", r.numer()),
            None => format!("{}", self.value),
        }
    }
}

/// Discrete-time Markov chain `(S, P, ι)` with a labeling
/// `L : S -> 2^AP` mapping each state to one alphabet symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct Dtmc {
    alphabet: Alphabet,
    /// rows[s] = sorted list of (target, probability), zeros omitted
    rows: Vec<Vec<(usize, Prob)>>,
    /// initial distribution, zeros omitted
    initial: Vec<(usize, Prob)>,
    /// labels[s] = alphabet symbol of state s
    labels: Vec<SymbolId>,
}

impl Dtmc {
    pub fn new(
        alphabet: Alphabet,
        num_states: usize,
        trans: impl IntoIterator<Item = (usize, usize, Prob)>,
        initial: impl IntoIterator<Item = (usize, Prob)>,
        labels: Vec<SymbolId>,
    ) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, Prob)>> = vec![Vec::new(); num_states];
        for (s, t, p) in trans {
            if s >= num_states || t >= num_states {
                return Err(Error::Dtmc {
                    line: None,
                    msg: format!("transition ({s},{t}) references an unknown state"),
                });
            }
            if p.value() < 0.0 {
                return Err(Error::Dtmc {
                    line: None,
                    msg: format!("negative probability on transition ({s},{t})"),
                });
            }
            if p.value() > 0.0 {
                rows[s].push((t, p));
            }
        }
        let initial: Vec<(usize, Prob)> = initial
            .into_iter()
            .filter(|(_, p)| p.value() != 0.0)
            .collect();
        for &(s, p) in &initial {
            if s >= num_states {
                return Err(Error::Dtmc {
                    line: None,
                    msg: format!("initial state {s} out of range"),
                });
            }
            if p.value() < 0.0 {
                return Err(Error::Dtmc {
                    line: None,
                    msg: format!("negative initial probability on state {s}"),
                });
            }
        }
        if labels.len() != num_states {
            return Err(Error::Dtmc {
                line: None,
                msg: format!("{} labels for {num_states} states", labels.len()),
            });
        }
        for (s, &l) in labels.iter().enumerate() {
            if l >= alphabet.len() {
                return Err(Error::Dtmc {
                    line: None,
                    msg: format!("state {s} labeled with unknown symbol {l}"),
                });
            }
        }
        let chain = Dtmc { alphabet, rows: rows.into_iter().map(sorted_row).collect(), initial, labels };
        chain.validate()?;
        Ok(chain)
    }

    fn validate(&self) -> Result<()> {
        for (s, row) in self.rows.iter().enumerate() {
            check_distribution(row, || format!("row of state {s}"))?;
        }
        check_distribution(&self.initial, || "initial distribution".to_string())?;
        Ok(())
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn num_states(&self) -> usize {
        self.rows.len()
    }

    /// Sorted positive-probability successors of `s`.
    pub fn row(&self, s: usize) -> &[(usize, Prob)] {
        &self.rows[s]
    }

    pub fn initial(&self) -> &[(usize, Prob)] {
        &self.initial
    }

    pub fn label(&self, s: usize) -> SymbolId {
        self.labels[s]
    }

    /// Serializes to the textual DTMC format; `parse_dtmc` of the
    /// output reproduces the chain.
    pub fn serialize(&self) -> String {
        use std::fmt::Write;
        let ap_names: Vec<String> = match self.alphabet.ap_names() {
            Some(aps) => aps.to_vec(),
            None => Vec::new(),
        };
        let mut out = String::new();
        writeln!(out, "dtmc {} {}", self.num_states(), ap_names.len()).unwrap();
        if !ap_names.is_empty() {
            writeln!(out, "ap {}", ap_names.join(" ")).unwrap();
        }
        for &(s, p) in &self.initial {
            writeln!(out, "init {s} {}", p.render()).unwrap();
        }
        for (s, &l) in self.labels.iter().enumerate() {
            let set: Vec<&str> = ap_names
                .iter()
                .enumerate()
                .filter(|(i, _)| l & (1 << i) != 0)
                .map(|(_, n)| n.as_str())
                .collect();
            if set.is_empty() {
                writeln!(out, "label {s} -").unwrap();
            } else {
                writeln!(out, "label {s} {}", set.join(",")).unwrap();
            }
        }
        for (s, row) in self.rows.iter().enumerate() {
            for &(t, p) in row {
                writeln!(out, "trans {s} {t} {}", p.render()).unwrap();
            }
        }
        out
    }
}

fn sorted_row(mut row: Vec<(usize, Prob)>) -> Vec<(usize, Prob)> {
    row.sort_by_key(|&(t, _)| t);
    row
}

/// A distribution must sum to 1: exactly when all entries are exact,
/// within [`ROW_SUM_TOL`] otherwise.
fn check_distribution(
    entries: &[(usize, Prob)],
    what: impl Fn() -> String,
) -> Result<()> {
    if entries.iter().all(|(_, p)| p.exact().is_some()) {
        let sum: Rational64 = entries.iter().map(|(_, p)| p.exact().unwrap()).sum();
        if !sum.is_one() {
            return Err(Error::Dtmc {
                line: None,
                msg: format!("{} sums to {sum}, expected 1", what()),
            });
        }
    } else {
        let sum: f64 = entries.iter().map(|(_, p)| p.value()).sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::Dtmc {
                line: None,
                msg: format!("{} sums to {sum}, expected 1", what()),
            });
        }
    }
    for (_, p) in entries {
        if let Some(e) = p.exact() {
            if e.is_negative() || e > Rational64::one() {
                return Err(Error::Dtmc {
                    line: None,
                    msg: format!("{} has an entry outside [0,1]", what()),
                });
            }
        } else if p.value() < 0.0 || p.value() > 1.0 {
            return Err(Error::Dtmc {
                line: None,
                msg: format!("{} has an entry outside [0,1]", what()),
            });
        }
    }
    Ok(())
}

/// Parses the textual DTMC format:
///
/// ```text
/// dtmc <nstates> <nAPs>
/// ap <name>...
/// init <state> <prob>
/// label <state> <ap,ap,...|->
/// trans <src> <dst> <prob>
/// ```
///
/// `#` starts a comment; probabilities are decimals or fractions `p/q`.
pub fn parse_dtmc(text: &str) -> Result<Dtmc> {
    let err = |line: usize, msg: String| Error::Dtmc { line: Some(line), msg };

    let mut num_states: Option<usize> = None;
    let mut num_aps = 0usize;
    let mut ap_names: Vec<String> = Vec::new();
    let mut inits: Vec<(usize, Prob)> = Vec::new();
    let mut labels: Vec<Option<SymbolId>> = Vec::new();
    let mut trans: Vec<(usize, usize, Prob)> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let kw = it.next().unwrap();
        let rest: Vec<&str> = it.collect();
        match kw {
            "dtmc" => {
                if rest.len() != 2 {
                    return Err(err(lineno, "expected `dtmc <nstates> <nAPs>`".into()));
                }
                let n: usize = rest[0]
                    .parse()
                    .map_err(|_| err(lineno, format!("invalid state count `{}`", rest[0])))?;
                num_aps = rest[1]
                    .parse()
                    .map_err(|_| err(lineno, format!("invalid AP count `{}`", rest[1])))?;
                num_states = Some(n);
                labels = vec![None; n];
            }
            "ap" => {
                ap_names = rest.iter().map(|s| s.to_string()).collect();
                if ap_names.len() != num_aps {
                    return Err(err(
                        lineno,
                        format!("{} AP names declared, header says {num_aps}", ap_names.len()),
                    ));
                }
            }
            "init" | "label" | "trans" => {
                let n = num_states
                    .ok_or_else(|| err(lineno, "missing `dtmc` header line".into()))?;
                let state = |tok: &str| -> Result<usize> {
                    let s: usize = tok
                        .parse()
                        .map_err(|_| err(lineno, format!("invalid state id `{tok}`")))?;
                    if s >= n {
                        return Err(err(lineno, format!("unknown state id {s} (have {n})")));
                    }
                    Ok(s)
                };
                match kw {
                    "init" => {
                        if rest.len() != 2 {
                            return Err(err(lineno, "expected `init <state> <prob>`".into()));
                        }
                        let s = state(rest[0])?;
                        let p =
                            Prob::parse(rest[1]).map_err(|e| err(lineno, e.to_string()))?;
                        if p.value() < 0.0 {
                            return Err(err(
                                lineno,
                                format!("negative initial probability for state {s}"),
                            ));
                        }
                        inits.push((s, p));
                    }
                    "label" => {
                        if rest.len() != 2 {
                            return Err(err(
                                lineno,
                                "expected `label <state> <ap,...|->`".into(),
                            ));
                        }
                        let s = state(rest[0])?;
                        let mut valuation = 0usize;
                        if rest[1] != "-" {
                            for ap in rest[1].split(',') {
                                let i = ap_names
                                    .iter()
                                    .position(|n| n == ap)
                                    .ok_or_else(|| {
                                        err(lineno, format!("unknown atomic proposition `{ap}`"))
                                    })?;
                                valuation |= 1 << i;
                            }
                        }
                        labels[s] = Some(valuation);
                    }
                    "trans" => {
                        if rest.len() != 3 {
                            return Err(err(
                                lineno,
                                "expected `trans <src> <dst> <prob>`".into(),
                            ));
                        }
                        let s = state(rest[0])?;
                        let t = state(rest[1])?;
                        let p =
                            Prob::parse(rest[2]).map_err(|e| err(lineno, e.to_string()))?;
                        if p.value() < 0.0 {
                            return Err(err(
                                lineno,
                                format!("negative probability on transition ({s},{t})"),
                            ));
                        }
                        trans.push((s, t, p));
                    }
                    _ => unreachable!(),
                }
            }
            other => return Err(err(lineno, format!("unknown directive `{other}`"))),
        }
    }

    let n = num_states.ok_or(Error::Dtmc { line: None, msg: "missing `dtmc` header".into() })?;
    if num_aps == 0 {
        return Err(Error::Dtmc {
            line: None,
            msg: "at least one atomic proposition is required".into(),
        });
    }
    let alphabet = Alphabet::from_aps(ap_names)?;
    let labels: Vec<SymbolId> = labels
        .into_iter()
        .enumerate()
        .map(|(s, l)| {
            l.ok_or(Error::Dtmc { line: None, msg: format!("missing label for state {s}") })
        })
        .collect::<Result<_>>()?;
    if n > 0 && inits.is_empty() {
        return Err(Error::Dtmc { line: None, msg: "missing initial distribution".into() });
    }
    Dtmc::new(alphabet, n, trans, inits, labels)
}

/// The chain realizing the uniform measure on `Σ^ω`: one state per
/// symbol, all transition probabilities `1/|Σ|`, uniform initial
/// distribution, each state labeled by its own symbol.
pub fn uniform_chain(alphabet: &Alphabet) -> Result<Dtmc> {
    let n = alphabet.len();
    if n < 2 {
        return Err(Error::Precondition(format!(
            "uniform chain needs an alphabet of at least 2 symbols, got {n}"
        )));
    }
    if n > i64::MAX as usize {
        return Err(Error::Precondition("alphabet too large".into()));
    }
    let p = Prob::from_ratio(1, n as i64)?;
    let trans = (0..n).flat_map(|s| (0..n).map(move |t| (s, t, p)));
    let initial = (0..n).map(|s| (s, p));
    Dtmc::new(alphabet.clone(), n, trans, initial, (0..n).collect())
}
