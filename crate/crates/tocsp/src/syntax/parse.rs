//! Concrete syntax: lexer and recursive-descent parser for process
//! expressions and specification files.
//!
//! ```text
//! expr     := sum
//! sum      := par ('+' par)*                      right-nested
//! par      := unary ('|[' actions ']|' unary)*    left-nested
//! unary    := 'hide' '{' actions '}' 'in' unary
//!           | 'rename' '{' pairs '}' unary
//!           | 'theta' '{' actions '}' '{' actions '}' '(' expr ')'
//!           | 'psi' '{' actions '}' '(' expr ')'
//!           | 'rec' NAME '{' NAME '=' expr (';' NAME '=' expr)* [';'] '}' ['@' NAME]
//!           | prefixed
//! prefixed := (label '.')* primary
//! primary  := '0' | NAME | '(' expr ')'
//! label    := 'tau' | 't' | action NAME
//! ```
//!
//! Comments run from `--` to the end of the line. A specification file is
//! an `alphabet { ... }` declaration followed by `process NAME = expr`
//! definitions; a definition may refer to earlier ones by name.

use std::collections::BTreeMap;

use super::{
    hide, par, prefix, psi, rec, rename, sum, theta, var, Action, ActionSet, Label, RenameRel,
    Symbol, Term,
};
use crate::Error;

const RESERVED: &[&str] = &[
    "alphabet", "process", "hide", "in", "rename", "theta", "psi", "rec", "tau", "t",
];

/// A parsed specification file.
pub struct SourceFile {
    pub alphabet: ActionSet,
    /// Definitions in file order.
    pub processes: Vec<(Symbol, Term)>,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Zero,
    Dot,
    Plus,
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Semi,
    Eq,
    At,
    ParOpen,
    ParClose,
}

impl std::fmt::Display for Tok {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "'{s}'"),
            Tok::Zero => f.write_str("'0'"),
            Tok::Dot => f.write_str("'.'"),
            Tok::Plus => f.write_str("'+'"),
            Tok::LBrace => f.write_str("'{'"),
            Tok::RBrace => f.write_str("'}'"),
            Tok::LParen => f.write_str("'('"),
            Tok::RParen => f.write_str("')'"),
            Tok::Comma => f.write_str("','"),
            Tok::Semi => f.write_str("';'"),
            Tok::Eq => f.write_str("'='"),
            Tok::At => f.write_str("'@'"),
            Tok::ParOpen => f.write_str("'|['"),
            Tok::ParClose => f.write_str("']|'"),
        }
    }
}

struct Lexed {
    tok: Tok,
    line: usize,
    col: usize,
}

fn parse_err(line: usize, col: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column: col,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Lexed>, Error> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (tl, tc) = (line, col);
        let tok = match c {
            '.' => Tok::Dot,
            '+' => Tok::Plus,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            ';' => Tok::Semi,
            '=' => Tok::Eq,
            '@' => Tok::At,
            '0' => Tok::Zero,
            '|' => {
                if chars.get(i + 1) == Some(&'[') {
                    i += 1;
                    col += 1;
                    Tok::ParOpen
                } else {
                    return Err(parse_err(tl, tc, "expected '[' after '|'"));
                }
            }
            ']' => {
                if chars.get(i + 1) == Some(&'|') {
                    i += 1;
                    col += 1;
                    Tok::ParClose
                } else {
                    return Err(parse_err(tl, tc, "expected '|' after ']'"));
                }
            }
            c if c.is_ascii_alphabetic() => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_ascii_alphanumeric() || chars[i] == '_')
                {
                    i += 1;
                    col += 1;
                }
                let name: String = chars[start..i].iter().collect();
                out.push(Lexed {
                    tok: Tok::Ident(name),
                    line: tl,
                    col: tc,
                });
                continue;
            }
            other => {
                return Err(parse_err(tl, tc, format!("unexpected character '{other}'")));
            }
        };
        i += 1;
        col += 1;
        out.push(Lexed {
            tok,
            line: tl,
            col: tc,
        });
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Lexed>,
    pos: usize,
    alphabet: &'a ActionSet,
    defs: BTreeMap<Symbol, Term>,
    scopes: Vec<Symbol>,
}

impl<'a> Parser<'a> {
    fn new(text: &str, alphabet: &'a ActionSet) -> Result<Parser<'a>, Error> {
        Ok(Parser {
            toks: lex(text)?,
            pos: 0,
            alphabet,
            defs: BTreeMap::new(),
            scopes: Vec::new(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|l| &l.tok)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.pos + 1).map(|l| &l.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map(|l| (l.line, l.col))
            .unwrap_or((1, 1))
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T, Error> {
        let (line, col) = self.here();
        Err(parse_err(line, col, message))
    }

    fn next(&mut self) -> Option<&Tok> {
        let t = self.toks.get(self.pos).map(|l| &l.tok);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), Error> {
        if self.eat(&tok) {
            Ok(())
        } else {
            match self.peek() {
                Some(got) => self.fail(format!("expected {tok}, found {got}")),
                None => self.fail(format!("expected {tok}, found end of input")),
            }
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<String, Error> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            Some(got) => self.fail(format!("expected {what}, found {got}")),
            None => self.fail(format!("expected {what}, found end of input")),
        }
    }

    fn expect_eof(&self) -> Result<(), Error> {
        match self.peek() {
            None => Ok(()),
            Some(got) => self.fail(format!("unexpected {got} after the expression")),
        }
    }

    fn action(&mut self) -> Result<Action, Error> {
        let name = self.expect_ident("an action name")?;
        if !self.alphabet.contains(Action::new(&name)) {
            return self.fail(format!("undeclared action '{name}'"));
        }
        Ok(Action::new(&name))
    }

    /// `a, b, c` (possibly empty), ended by the given closer.
    fn action_list(&mut self, closer: Tok) -> Result<ActionSet, Error> {
        let mut acts = Vec::new();
        if self.peek() != Some(&closer) {
            loop {
                acts.push(self.action()?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(closer)?;
        Ok(acts.into_iter().collect())
    }

    fn rename_pairs(&mut self) -> Result<RenameRel, Error> {
        let mut pairs = Vec::new();
        if self.peek() != Some(&Tok::RBrace) {
            loop {
                self.expect(Tok::LParen)?;
                let a = self.action()?;
                self.expect(Tok::Comma)?;
                let b = self.action()?;
                self.expect(Tok::RParen)?;
                pairs.push((a, b));
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RBrace)?;
        Ok(pairs.into_iter().collect())
    }

    fn parse_sum(&mut self) -> Result<Term, Error> {
        let mut parts = vec![self.parse_par()?];
        while self.eat(&Tok::Plus) {
            parts.push(self.parse_par()?);
        }
        Ok(sum(parts))
    }

    fn parse_par(&mut self) -> Result<Term, Error> {
        let mut t = self.parse_unary()?;
        while self.eat(&Tok::ParOpen) {
            let sync = self.action_list(Tok::ParClose)?;
            let rhs = self.parse_unary()?;
            t = par(sync, t, rhs);
        }
        Ok(t)
    }

    fn parse_unary(&mut self) -> Result<Term, Error> {
        let word = match self.peek() {
            Some(Tok::Ident(s)) => s.as_str(),
            _ => return self.parse_prefixed(),
        };
        match word {
            "hide" => {
                self.pos += 1;
                self.expect(Tok::LBrace)?;
                let set = self.action_list(Tok::RBrace)?;
                match self.peek() {
                    Some(Tok::Ident(kw)) if kw == "in" => {
                        self.pos += 1;
                    }
                    _ => return self.fail("expected 'in' after the hidden actions"),
                }
                Ok(hide(set, self.parse_unary()?))
            }
            "rename" => {
                self.pos += 1;
                self.expect(Tok::LBrace)?;
                let rel = self.rename_pairs()?;
                Ok(rename(rel, self.parse_unary()?))
            }
            "theta" => {
                let at = self.here();
                self.pos += 1;
                self.expect(Tok::LBrace)?;
                let lower = self.action_list(Tok::RBrace)?;
                self.expect(Tok::LBrace)?;
                let upper = self.action_list(Tok::RBrace)?;
                self.expect(Tok::LParen)?;
                let body = self.parse_sum()?;
                self.expect(Tok::RParen)?;
                theta(lower, upper, body).map_err(|e| parse_err(at.0, at.1, e.to_string()))
            }
            "psi" => {
                self.pos += 1;
                self.expect(Tok::LBrace)?;
                let env = self.action_list(Tok::RBrace)?;
                self.expect(Tok::LParen)?;
                let body = self.parse_sum()?;
                self.expect(Tok::RParen)?;
                Ok(psi(env, body))
            }
            "rec" => self.parse_rec(),
            _ => self.parse_prefixed(),
        }
    }

    fn binder_name(&self, name: &str) -> Result<Symbol, Error> {
        if RESERVED.contains(&name) {
            let (line, col) = self.here();
            return Err(parse_err(
                line,
                col,
                format!("'{name}' is reserved and cannot name a variable"),
            ));
        }
        if self.alphabet.contains(Action::new(name)) {
            let (line, col) = self.here();
            return Err(parse_err(
                line,
                col,
                format!("'{name}' is an action and cannot name a variable"),
            ));
        }
        Ok(Symbol::new(name))
    }

    /// Collects the equation names of the `rec` body starting at the
    /// current position (just after `{`), without consuming tokens. The
    /// names must be in scope while the bodies are parsed, even for
    /// forward references.
    fn scan_equation_names(&self) -> Result<Vec<Symbol>, Error> {
        let mut names = Vec::new();
        let mut depth = 1usize;
        let mut expecting = true;
        let mut i = self.pos;
        while let Some(l) = self.toks.get(i) {
            match &l.tok {
                Tok::LBrace => depth += 1,
                Tok::RBrace => {
                    depth -= 1;
                    if depth == 0 {
                        return Ok(names);
                    }
                }
                Tok::Semi if depth == 1 => expecting = true,
                Tok::Ident(n) if expecting && depth == 1 => {
                    match self.toks.get(i + 1).map(|l| &l.tok) {
                        Some(Tok::Eq) => {}
                        _ => {
                            return Err(parse_err(
                                l.line,
                                l.col,
                                format!("expected '=' after equation name '{n}'"),
                            ))
                        }
                    }
                    if RESERVED.contains(&n.as_str()) {
                        return Err(parse_err(
                            l.line,
                            l.col,
                            format!("'{n}' is reserved and cannot name a variable"),
                        ));
                    }
                    if self.alphabet.contains(Action::new(n)) {
                        return Err(parse_err(
                            l.line,
                            l.col,
                            format!("'{n}' is an action and cannot name a variable"),
                        ));
                    }
                    names.push(Symbol::new(n));
                    expecting = false;
                }
                t if expecting && depth == 1 => {
                    return Err(parse_err(l.line, l.col, format!("expected equation name, found {t}")));
                }
                _ => {}
            }
            i += 1;
        }
        let (line, col) = self.here();
        Err(parse_err(line, col, "unterminated recursive specification"))
    }

    fn parse_rec(&mut self) -> Result<Term, Error> {
        let at = self.here();
        self.pos += 1;
        let first = self.expect_ident("a variable after 'rec'")?;
        let first = self.binder_name(&first)?;
        self.expect(Tok::LBrace)?;
        let names = self.scan_equation_names()?;
        let depth = self.scopes.len();
        self.scopes.extend(names.iter().copied());
        let mut equations = Vec::new();
        while self.peek() != Some(&Tok::RBrace) {
            let name = self.expect_ident("an equation name")?;
            self.expect(Tok::Eq)?;
            let body = self.parse_sum()?;
            equations.push((Symbol::new(&name), body));
            if !self.eat(&Tok::Semi) {
                break;
            }
        }
        self.expect(Tok::RBrace)?;
        self.scopes.truncate(depth);
        let dist = if self.eat(&Tok::At) {
            let d = self.expect_ident("a variable after '@'")?;
            Symbol::new(&d)
        } else {
            first
        };
        rec(dist, equations).map_err(|e| parse_err(at.0, at.1, e.to_string()))
    }

    fn parse_prefixed(&mut self) -> Result<Term, Error> {
        let mut labels = Vec::new();
        while let (Some(Tok::Ident(name)), Some(Tok::Dot)) = (self.peek(), self.peek2()) {
            let label = match name.as_str() {
                "tau" => Label::Tau,
                "t" => Label::Timeout,
                n if self.alphabet.contains(Action::new(n)) => Label::act(n),
                n => return self.fail(format!("undeclared action '{n}'")),
            };
            self.pos += 2;
            labels.push(label);
        }
        let mut t = self.parse_primary()?;
        for l in labels.into_iter().rev() {
            t = prefix(l, t);
        }
        Ok(t)
    }

    fn parse_primary(&mut self) -> Result<Term, Error> {
        match self.peek() {
            Some(Tok::Zero) => {
                self.pos += 1;
                Ok(super::nil())
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let t = self.parse_sum()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            Some(Tok::Ident(name)) => {
                if RESERVED.contains(&name.as_str()) {
                    return self.fail(format!("unexpected keyword '{name}'"));
                }
                let sym = Symbol::new(name);
                let name = name.clone();
                self.pos += 1;
                if self.scopes.iter().rev().any(|s| *s == sym) {
                    Ok(var(sym))
                } else if let Some(t) = self.defs.get(&sym) {
                    Ok(*t)
                } else if self.alphabet.contains(Action::new(&name)) {
                    self.pos -= 1;
                    self.fail(format!("action '{name}' used as a process"))
                } else {
                    Ok(var(sym))
                }
            }
            Some(got) => {
                let got = got.clone();
                self.fail(format!("expected a process, found {got}"))
            }
            None => self.fail("expected a process, found end of input"),
        }
    }
}

/// Parses a single process expression over the given alphabet.
///
/// Identifiers that are neither bound by an enclosing `rec` nor actions
/// become free variables, so the result may be open.
pub fn parse_process(text: &str, alphabet: &ActionSet) -> Result<Term, Error> {
    let mut p = Parser::new(text, alphabet)?;
    let t = p.parse_sum()?;
    p.expect_eof()?;
    Ok(t)
}

/// Parses a specification file: an alphabet declaration followed by
/// process definitions, each of which may refer to the ones before it.
pub fn parse_file(text: &str) -> Result<SourceFile, Error> {
    let empty = ActionSet::empty();
    let mut p = Parser::new(text, &empty)?;
    match p.next() {
        Some(Tok::Ident(kw)) if kw == "alphabet" => {}
        _ => {
            p.pos = p.pos.saturating_sub(1);
            return p.fail("a specification file starts with 'alphabet { ... }'");
        }
    }
    p.expect(Tok::LBrace)?;
    let mut names: Vec<Action> = Vec::new();
    if p.peek() != Some(&Tok::RBrace) {
        loop {
            let at = p.here();
            let n = p.expect_ident("an action name")?;
            if RESERVED.contains(&n.as_str()) {
                return Err(parse_err(
                    at.0,
                    at.1,
                    format!("'{n}' is reserved and cannot be declared as an action"),
                ));
            }
            if names.contains(&Action::new(&n)) {
                return Err(parse_err(at.0, at.1, format!("action '{n}' declared twice")));
            }
            names.push(Action::new(&n));
            if !p.eat(&Tok::Comma) {
                break;
            }
        }
    }
    p.expect(Tok::RBrace)?;
    let alphabet: ActionSet = names.into_iter().collect();

    let mut body_parser = Parser {
        toks: std::mem::take(&mut p.toks),
        pos: p.pos,
        alphabet: &alphabet,
        defs: BTreeMap::new(),
        scopes: Vec::new(),
    };
    let mut order = Vec::new();
    loop {
        match body_parser.peek() {
            None => break,
            Some(Tok::Ident(kw)) if kw == "process" => {
                body_parser.pos += 1;
            }
            Some(got) => {
                let got = got.clone();
                return body_parser.fail(format!("expected 'process', found {got}"));
            }
        }
        let at = body_parser.here();
        let raw = body_parser.expect_ident("a process name")?;
        let name = body_parser.binder_name(&raw)?;
        if body_parser.defs.contains_key(&name) {
            return Err(parse_err(at.0, at.1, format!("process '{raw}' defined twice")));
        }
        body_parser.expect(Tok::Eq)?;
        let term = body_parser.parse_sum()?;
        body_parser.defs.insert(name, term);
        order.push(name);
    }
    let processes = order
        .into_iter()
        .map(|n| (n, body_parser.defs[&n]))
        .collect();
    Ok(SourceFile {
        alphabet,
        processes,
    })
}
