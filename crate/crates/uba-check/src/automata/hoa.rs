//! Parser for a deliberately small subset of the HOA v1 format:
//! state-based Büchi acceptance (`Acceptance: 1 Inf(0)` / `acc-name:
//! Buchi`), explicit body, edge labels built from `t`, `f`, `!`, `&`,
//! `|`, parentheses, AP indices and label aliases. Implicit edges (one
//! per valuation, in valuation order) are accepted as well. Everything
//! else is rejected loudly.
//!
//! Label expressions are expanded eagerly to the satisfying valuations
//! of the declared APs, so the resulting automaton has the explicit
//! alphabet 2^AP.

use std::collections::HashMap;

use super::{Alphabet, Nba, StateId};
use crate::error::{Error, Result};

pub fn parse_hoa(text: &str) -> Result<Nba> {
    Parser::new(text).parse()
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Header(String),  // identifier followed by ':'
    Ident(String),   // bare identifier (t, f, Inf, state names…)
    Int(u64),
    Quoted(String),
    Alias(String),   // @name
    Body,            // --BODY--
    End,             // --END--
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    LParen,
    RParen,
    Not,
    And,
    Or,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src: src.as_bytes(), pos: 0, line: 1, col: 1 }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::HoaSyntax { line: self.line, col: self.col, msg: msg.into() }
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.src.get(self.pos).copied()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_ws_and_comments(&mut self) -> Result<()> {
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_whitespace() => {
                    self.bump();
                }
                Some(b'/') if self.src.get(self.pos + 1) == Some(&b'*') => {
                    self.bump();
                    self.bump();
                    let mut depth = 1usize;
                    while depth > 0 {
                        match self.bump() {
                            Some(b'*') if self.peek() == Some(b'/') => {
                                self.bump();
                                depth -= 1;
                            }
                            Some(b'/') if self.peek() == Some(b'*') => {
                                self.bump();
                                depth += 1;
                            }
                            Some(_) => {}
                            None => return Err(self.err("unterminated comment")),
                        }
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn next_tok(&mut self) -> Result<Option<(Tok, usize, usize)>> {
        self.skip_ws_and_comments()?;
        let (line, col) = (self.line, self.col);
        let Some(c) = self.peek() else { return Ok(None) };
        let tok = match c {
            b'[' => {
                self.bump();
                Tok::LBracket
            }
            b']' => {
                self.bump();
                Tok::RBracket
            }
            b'{' => {
                self.bump();
                Tok::LBrace
            }
            b'}' => {
                self.bump();
                Tok::RBrace
            }
            b'(' => {
                self.bump();
                Tok::LParen
            }
            b')' => {
                self.bump();
                Tok::RParen
            }
            b'!' => {
                self.bump();
                Tok::Not
            }
            b'&' => {
                self.bump();
                Tok::And
            }
            b'|' => {
                self.bump();
                Tok::Or
            }
            b'"' => {
                self.bump();
                let mut s = String::new();
                loop {
                    match self.bump() {
                        Some(b'"') => break,
                        Some(b'\\') => {
                            let e = self.bump().ok_or_else(|| self.err("unterminated string"))?;
                            s.push(e as char);
                        }
                        Some(c) => s.push(c as char),
                        None => return Err(self.err("unterminated string")),
                    }
                }
                Tok::Quoted(s)
            }
            b'@' => {
                self.bump();
                let name = self.lex_ident_body();
                if name.is_empty() {
                    return Err(self.err("empty alias name after '@'"));
                }
                Tok::Alias(name)
            }
            b'-' if self.src[self.pos..].starts_with(b"--BODY--") => {
                for _ in 0..8 {
                    self.bump();
                }
                Tok::Body
            }
            b'-' if self.src[self.pos..].starts_with(b"--END--") => {
                for _ in 0..7 {
                    self.bump();
                }
                Tok::End
            }
            b'0'..=b'9' => {
                let mut v: u64 = 0;
                while let Some(d @ b'0'..=b'9') = self.peek() {
                    self.bump();
                    v = v
                        .checked_mul(10)
                        .and_then(|v| v.checked_add((d - b'0') as u64))
                        .ok_or_else(|| self.err("integer overflow"))?;
                }
                Tok::Int(v)
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let name = self.lex_ident_body();
                if self.peek() == Some(b':') {
                    self.bump();
                    Tok::Header(name)
                } else {
                    Tok::Ident(name)
                }
            }
            c => return Err(self.err(format!("unexpected character `{}`", c as char))),
        };
        Ok(Some((tok, line, col)))
    }

    fn lex_ident_body(&mut self) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == b'_' || c == b'-' {
                // identifiers like `acc-name` and `all-of` carry '-'
                if c == b'-' && self.src[self.pos..].starts_with(b"--") {
                    break;
                }
                self.bump();
                s.push(c as char);
            } else {
                break;
            }
        }
        s
    }
}

/// Boolean label expression over AP indices.
#[derive(Debug, Clone)]
enum LabelExpr {
    True,
    False,
    Ap(usize),
    Not(Box<LabelExpr>),
    And(Box<LabelExpr>, Box<LabelExpr>),
    Or(Box<LabelExpr>, Box<LabelExpr>),
}

impl LabelExpr {
    fn eval(&self, valuation: usize) -> bool {
        match self {
            LabelExpr::True => true,
            LabelExpr::False => false,
            LabelExpr::Ap(i) => valuation & (1 << i) != 0,
            LabelExpr::Not(e) => !e.eval(valuation),
            LabelExpr::And(a, b) => a.eval(valuation) && b.eval(valuation),
            LabelExpr::Or(a, b) => a.eval(valuation) || b.eval(valuation),
        }
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    lookahead: Option<(Tok, usize, usize)>,
    aliases: HashMap<String, LabelExpr>,
    num_aps: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser { lexer: Lexer::new(text), lookahead: None, aliases: HashMap::new(), num_aps: 0 }
    }

    fn peek(&mut self) -> Result<Option<&Tok>> {
        if self.lookahead.is_none() {
            self.lookahead = self.lexer.next_tok()?;
        }
        Ok(self.lookahead.as_ref().map(|(t, _, _)| t))
    }

    fn next(&mut self) -> Result<Option<(Tok, usize, usize)>> {
        if let Some(t) = self.lookahead.take() {
            return Ok(Some(t));
        }
        self.lexer.next_tok()
    }

    fn err_at(&self, line: usize, col: usize, msg: impl Into<String>) -> Error {
        Error::HoaSyntax { line, col, msg: msg.into() }
    }

    fn err_here(&mut self, msg: impl Into<String>) -> Error {
        let (line, col) = self
            .lookahead
            .as_ref()
            .map(|&(_, l, c)| (l, c))
            .unwrap_or((self.lexer.line, self.lexer.col));
        self.err_at(line, col, msg)
    }

    fn expect_int(&mut self, what: &str) -> Result<u64> {
        match self.next()? {
            Some((Tok::Int(v), _, _)) => Ok(v),
            Some((t, l, c)) => Err(self.err_at(l, c, format!("expected {what}, found {t:?}"))),
            None => Err(self.err_here(format!("expected {what}, found end of input"))),
        }
    }

    fn parse(mut self) -> Result<Nba> {
        // format version
        match self.next()? {
            Some((Tok::Header(h), l, c)) if h == "HOA" => match self.next()? {
                Some((Tok::Ident(v), _, _)) if v == "v1" => {}
                _ => return Err(self.err_at(l, c, "expected `HOA: v1`")),
            },
            Some((_, l, c)) => return Err(self.err_at(l, c, "document must start with `HOA: v1`")),
            None => return Err(self.err_here("empty document")),
        }

        let mut num_states: Option<usize> = None;
        let mut start: Vec<StateId> = Vec::new();
        let mut ap_names: Option<Vec<String>> = None;
        let mut acceptance_ok = false;
        let mut acc_name_buchi = false;

        loop {
            let Some((tok, line, col)) = self.next()? else {
                return Err(self.err_here("missing --BODY--"));
            };
            match tok {
                Tok::Body => break,
                Tok::Header(h) => match h.as_str() {
                    "States" => num_states = Some(self.expect_int("state count")? as usize),
                    "Start" => {
                        let q = self.expect_int("start state")? as StateId;
                        if matches!(self.peek()?, Some(Tok::And)) {
                            return Err(Error::UnsupportedHoaFeature(
                                "conjunctive start states (alternation)".into(),
                            ));
                        }
                        start.push(q);
                    }
                    "AP" => {
                        let n = self.expect_int("AP count")? as usize;
                        let mut names = Vec::with_capacity(n);
                        for _ in 0..n {
                            match self.next()? {
                                Some((Tok::Quoted(s), _, _)) => names.push(s),
                                Some((_, l, c)) => {
                                    return Err(self.err_at(l, c, "expected quoted AP name"))
                                }
                                None => return Err(self.err_here("expected quoted AP name")),
                            }
                        }
                        ap_names = Some(names);
                    }
                    "Alias" => {
                        let name = match self.next()? {
                            Some((Tok::Alias(a), _, _)) => a,
                            Some((_, l, c)) => {
                                return Err(self.err_at(l, c, "expected @name after Alias:"))
                            }
                            None => return Err(self.err_here("expected @name after Alias:")),
                        };
                        let expr = self.parse_label_expr()?;
                        self.aliases.insert(name, expr);
                    }
                    "Acceptance" => {
                        let sets = self.expect_int("acceptance set count")?;
                        let cond = self.read_acceptance_cond()?;
                        if sets != 1 || cond != "Inf(0)" {
                            return Err(Error::UnsupportedAcceptance(format!("{sets} {cond}")));
                        }
                        acceptance_ok = true;
                    }
                    "acc-name" => {
                        let mut words = Vec::new();
                        while let Some(Tok::Ident(_)) | Some(Tok::Int(_)) = self.peek()? {
                            match self.next()?.unwrap().0 {
                                Tok::Ident(w) => words.push(w),
                                Tok::Int(v) => words.push(v.to_string()),
                                _ => unreachable!(),
                            }
                        }
                        let name = words.join(" ");
                        if name == "Buchi" {
                            acc_name_buchi = true;
                        } else {
                            return Err(Error::UnsupportedAcceptance(name));
                        }
                    }
                    // informational headers: consume their arguments
                    "name" | "tool" | "owner" | "properties" => {
                        while matches!(
                            self.peek()?,
                            Some(Tok::Ident(_)) | Some(Tok::Quoted(_)) | Some(Tok::Int(_))
                        ) {
                            self.next()?;
                        }
                    }
                    other => {
                        return Err(Error::UnsupportedHoaFeature(format!("header `{other}:`")))
                    }
                },
                t => {
                    return Err(self.err_at(line, col, format!("unexpected token {t:?} in header")))
                }
            }
        }

        if !acceptance_ok && !acc_name_buchi {
            return Err(Error::UnsupportedAcceptance("(none declared)".into()));
        }
        let ap_names = ap_names.ok_or_else(|| {
            Error::UnsupportedHoaFeature("missing AP: header (AP-less automata)".into())
        })?;
        let alphabet = Alphabet::from_aps(ap_names)?;
        self.num_aps = alphabet.ap_names().map(|a| a.len()).unwrap_or(0);
        let num_symbols = alphabet.len();

        let num_states = match num_states {
            Some(n) => n,
            None => return Err(Error::UnsupportedHoaFeature("missing States: header".into())),
        };
        for &q in &start {
            if q >= num_states {
                return Err(self.err_here(format!("start state {q} out of range")));
            }
        }

        // body
        let mut transitions: Vec<(StateId, usize, StateId)> = Vec::new();
        let mut final_states: Vec<StateId> = Vec::new();
        let mut seen = vec![false; num_states];
        loop {
            match self.next()? {
                Some((Tok::End, _, _)) => break,
                Some((Tok::Header(h), line, col)) if h == "State" => {
                    if matches!(self.peek()?, Some(Tok::LBracket)) {
                        return Err(Error::UnsupportedHoaFeature(
                            "state labels (state-labelled automata)".into(),
                        ));
                    }
                    let q = self.expect_int("state number")? as StateId;
                    if q >= num_states {
                        return Err(self.err_at(line, col, format!("state {q} out of range")));
                    }
                    if seen[q] {
                        return Err(self.err_at(line, col, format!("state {q} defined twice")));
                    }
                    seen[q] = true;
                    if let Some(Tok::Quoted(_)) = self.peek()? {
                        self.next()?; // state name, ignored
                    }
                    if let Some(Tok::LBrace) = self.peek()? {
                        if self.read_acc_sig()? {
                            final_states.push(q);
                        }
                    }
                    // edges until the next State:/--END--
                    let mut implicit_index = 0usize;
                    let mut saw_explicit = false;
                    let mut saw_implicit = false;
                    loop {
                        match self.peek()? {
                            Some(Tok::Header(h)) if h == "State" => break,
                            Some(Tok::End) | None => break,
                            Some(Tok::LBracket) => {
                                self.next()?;
                                saw_explicit = true;
                                if saw_implicit {
                                    return Err(self.err_here(
                                        "mixed implicit and explicit edges in one state",
                                    ));
                                }
                                let expr = self.parse_label_expr()?;
                                match self.next()? {
                                    Some((Tok::RBracket, _, _)) => {}
                                    _ => return Err(self.err_here("expected `]`")),
                                }
                                let dst = self.expect_int("edge target")? as StateId;
                                if dst >= num_states {
                                    return Err(
                                        self.err_here(format!("edge target {dst} out of range"))
                                    );
                                }
                                if matches!(self.peek()?, Some(Tok::And)) {
                                    return Err(Error::UnsupportedHoaFeature(
                                        "conjunctive edge targets (alternation)".into(),
                                    ));
                                }
                                if matches!(self.peek()?, Some(Tok::LBrace)) {
                                    return Err(Error::UnsupportedHoaFeature(
                                        "transition-based acceptance marks".into(),
                                    ));
                                }
                                for v in 0..num_symbols {
                                    if expr.eval(v) {
                                        transitions.push((q, v, dst));
                                    }
                                }
                            }
                            Some(Tok::Int(_)) => {
                                saw_implicit = true;
                                if saw_explicit {
                                    return Err(self.err_here(
                                        "mixed implicit and explicit edges in one state",
                                    ));
                                }
                                let dst = self.expect_int("edge target")? as StateId;
                                if dst >= num_states {
                                    return Err(
                                        self.err_here(format!("edge target {dst} out of range"))
                                    );
                                }
                                if implicit_index >= num_symbols {
                                    return Err(self.err_here(format!(
                                        "more than {num_symbols} implicit edges"
                                    )));
                                }
                                if matches!(self.peek()?, Some(Tok::LBrace)) {
                                    return Err(Error::UnsupportedHoaFeature(
                                        "transition-based acceptance marks".into(),
                                    ));
                                }
                                transitions.push((q, implicit_index, dst));
                                implicit_index += 1;
                            }
                            _ => {
                                let (t, l, c) = self.next()?.unwrap();
                                return Err(
                                    self.err_at(l, c, format!("unexpected token {t:?} in body"))
                                );
                            }
                        }
                    }
                    if saw_implicit && implicit_index != num_symbols {
                        return Err(self.err_here(format!(
                            "state {q} has {implicit_index} implicit edges, expected {num_symbols}"
                        )));
                    }
                }
                Some((t, l, c)) => {
                    return Err(self.err_at(l, c, format!("unexpected token {t:?} in body")))
                }
                None => return Err(self.err_here("missing --END--")),
            }
        }

        Nba::new(alphabet, num_states, transitions, start, final_states)
    }

    /// Reads the acceptance condition after the set count, normalizing
    /// whitespace, e.g. `Inf ( 0 )` -> `Inf(0)`.
    fn read_acceptance_cond(&mut self) -> Result<String> {
        let mut s = String::new();
        loop {
            match self.peek()? {
                Some(Tok::Ident(_)) | Some(Tok::Int(_)) | Some(Tok::LParen)
                | Some(Tok::RParen) | Some(Tok::And) | Some(Tok::Or) | Some(Tok::Not) => {
                    match self.next()?.unwrap().0 {
                        Tok::Ident(w) => s.push_str(&w),
                        Tok::Int(v) => s.push_str(&v.to_string()),
                        Tok::LParen => s.push('('),
                        Tok::RParen => s.push(')'),
                        Tok::And => s.push('&'),
                        Tok::Or => s.push('|'),
                        Tok::Not => s.push('!'),
                        _ => unreachable!(),
                    }
                }
                _ => return Ok(s),
            }
        }
    }

    /// Reads `{ int* }`; returns true iff set 0 is present.
    fn read_acc_sig(&mut self) -> Result<bool> {
        self.next()?; // consume '{'
        let mut has_zero = false;
        loop {
            match self.next()? {
                Some((Tok::Int(v), _, _)) => {
                    if v == 0 {
                        has_zero = true;
                    } else {
                        return Err(Error::UnsupportedAcceptance(format!(
                            "acceptance set {v} used, but only one Büchi set is supported"
                        )));
                    }
                }
                Some((Tok::RBrace, _, _)) => return Ok(has_zero),
                Some((t, l, c)) => {
                    return Err(self.err_at(l, c, format!("unexpected {t:?} in acceptance sig")))
                }
                None => return Err(self.err_here("unterminated acceptance sig")),
            }
        }
    }

    // expr := and ('|' and)* ; and := not ('&' not)* ; not := '!' not | atom
    fn parse_label_expr(&mut self) -> Result<LabelExpr> {
        let mut lhs = self.parse_label_and()?;
        while matches!(self.peek()?, Some(Tok::Or)) {
            self.next()?;
            let rhs = self.parse_label_and()?;
            lhs = LabelExpr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_label_and(&mut self) -> Result<LabelExpr> {
        let mut lhs = self.parse_label_not()?;
        while matches!(self.peek()?, Some(Tok::And)) {
            self.next()?;
            let rhs = self.parse_label_not()?;
            lhs = LabelExpr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_label_not(&mut self) -> Result<LabelExpr> {
        if matches!(self.peek()?, Some(Tok::Not)) {
            self.next()?;
            return Ok(LabelExpr::Not(Box::new(self.parse_label_not()?)));
        }
        self.parse_label_atom()
    }

    fn parse_label_atom(&mut self) -> Result<LabelExpr> {
        match self.next()? {
            Some((Tok::Int(v), l, c)) => {
                let i = v as usize;
                if i >= self.num_aps && self.num_aps > 0 {
                    return Err(self.err_at(l, c, format!("AP index {i} out of range")));
                }
                Ok(LabelExpr::Ap(i))
            }
            Some((Tok::Ident(w), l, c)) => match w.as_str() {
                "t" => Ok(LabelExpr::True),
                "f" => Ok(LabelExpr::False),
                other => Err(self.err_at(l, c, format!("unexpected `{other}` in label"))),
            },
            Some((Tok::Alias(a), l, c)) => self
                .aliases
                .get(&a)
                .cloned()
                .ok_or_else(|| self.err_at(l, c, format!("unknown alias @{a}"))),
            Some((Tok::LParen, _, _)) => {
                let e = self.parse_label_expr()?;
                match self.next()? {
                    Some((Tok::RParen, _, _)) => Ok(e),
                    _ => Err(self.err_here("expected `)`")),
                }
            }
            Some((t, l, c)) => Err(self.err_at(l, c, format!("unexpected {t:?} in label"))),
            None => Err(self.err_here("unexpected end of input in label")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_universal_automaton() {
        let text = r#"
HOA: v1
States: 1
Start: 0
AP: 1 "p"
acc-name: Buchi
Acceptance: 1 Inf(0)
--BODY--
State: 0 {0}
[t] 0
--END--
"#;
        let nba = parse_hoa(text).unwrap();
        assert_eq!(nba.num_states(), 1);
        assert_eq!(nba.alphabet().len(), 2);
        assert!(nba.is_final(0));
        assert_eq!(nba.successors(0, 0), &[0]);
        assert_eq!(nba.successors(0, 1), &[0]);
    }

    #[test]
    fn parses_fig1_right_document() {
        // q_a = 0 moves on a (= !p) to both states, q_b = 1 on b (= p).
        let text = r#"
HOA: v1
States: 2
Start: 0
Start: 1
AP: 1 "p"
Acceptance: 1 Inf(0)
--BODY--
State: 0 {0}
[!0] 0
[!0] 1
State: 1 {0}
[0] 0
[0] 1
--END--
"#;
        let nba = parse_hoa(text).unwrap();
        assert_eq!(nba.num_states(), 2);
        assert_eq!(nba.successors(0, 0), &[0, 1]);
        assert_eq!(nba.successors(0, 1), &[] as &[usize]); // δ(q_a, b) = ∅
        assert_eq!(nba.successors(1, 1), &[0, 1]);
        assert_eq!(nba.initial().len(), 2);
    }

    #[test]
    fn rejects_generalized_buchi() {
        let text = r#"
HOA: v1
States: 1
Start: 0
AP: 1 "p"
Acceptance: 2 Inf(0)&Inf(1)
--BODY--
State: 0 {0}
[t] 0
--END--
"#;
        match parse_hoa(text) {
            Err(Error::UnsupportedAcceptance(s)) => assert!(s.contains("Inf(0)&Inf(1)")),
            other => panic!("expected unsupported acceptance, got {other:?}"),
        }
    }

    #[test]
    fn implicit_edges_follow_valuation_order() {
        let text = r#"
HOA: v1
States: 2
Start: 0
AP: 1 "p"
Acceptance: 1 Inf(0)
--BODY--
State: 0 {0}
0
1
State: 1
1
1
--END--
"#;
        let nba = parse_hoa(text).unwrap();
        assert_eq!(nba.successors(0, 0), &[0]);
        assert_eq!(nba.successors(0, 1), &[1]);
        assert_eq!(nba.successors(1, 0), &[1]);
    }

    #[test]
    fn aliases_and_expressions_expand() {
        let text = r#"
HOA: v1
States: 1
Start: 0
AP: 2 "x" "y"
Alias: @a 0 & !1
Acceptance: 1 Inf(0)
--BODY--
State: 0 {0}
[@a | (!0 & 1)] 0
--END--
"#;
        let nba = parse_hoa(text).unwrap();
        // satisfying valuations: x&!y (=1) and !x&y (=2)
        assert_eq!(nba.successors(0, 0), &[] as &[usize]);
        assert_eq!(nba.successors(0, 1), &[0]);
        assert_eq!(nba.successors(0, 2), &[0]);
        assert_eq!(nba.successors(0, 3), &[] as &[usize]);
    }

    #[test]
    fn reports_syntax_error_position() {
        let text = "HOA: v1\nStates: ?\n";
        match parse_hoa(text) {
            Err(Error::HoaSyntax { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_transition_acceptance_and_state_labels() {
        let tb = r#"
HOA: v1
States: 1
Start: 0
AP: 1 "p"
Acceptance: 1 Inf(0)
--BODY--
State: 0
[t] 0 {0}
--END--
"#;
        assert!(matches!(parse_hoa(tb), Err(Error::UnsupportedHoaFeature(_))));

        let sl = r#"
HOA: v1
States: 1
Start: 0
AP: 1 "p"
Acceptance: 1 Inf(0)
--BODY--
State: [t] 0 {0}
0
--END--
"#;
        assert!(matches!(parse_hoa(sl), Err(Error::UnsupportedHoaFeature(_))));
    }
}
