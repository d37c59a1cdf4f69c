//! Hennessy-Milner logic with an environment modality, and the two
//! satisfaction relations it needs.
//!
//! Formulas are finite conjunctions, negation, action diamonds (`<a>`,
//! `<tau>`) and an environment diamond `<{a,b}>` asserting a time-out.
//! Because a time-out fires only while the environment lets nothing else
//! proceed, the environment diamond is evaluated in two stages: `P ⊨ <X>f`
//! holds when no initial action of `P` lies in `X ∪ {tau}` and some
//! time-out successor satisfies `f` *in environment X*. Satisfaction in an
//! environment, `P ⊨_X f`, restricts action diamonds to actions in `X`,
//! keeps the environment across `<tau>`, and in addition lets any `f` hold
//! once `P` idles under `X` and `P ⊨ f` plainly (the escape clause: an idle
//! process outlives the environment's window). The escape clause is a
//! disjunct next to the structural clauses, not a fallback taken only when
//! they fail to apply.
//!
//! Concrete syntax:
//!
//! ```text
//! formula := unary ('&&' unary)*     flattened into one conjunction
//! unary   := '!' unary | '<' mod '>' unary | primary
//! mod     := 'tau' | action | '{' [action (',' action)*] '}'
//! primary := 'true' | '(' formula ')'
//! ```
//!
//! `true` is the empty conjunction. The time-out label has no action
//! modality; `<t>f` is a parse error. Parenthesised formulas are accepted
//! beyond the minimal grammar so that `&&` and `!` can be combined freely;
//! the printer emits parentheses only where precedence requires them.

use std::fmt;
use std::rc::Rc;

use crate::sos::{ensure_process, DeriveCtx, InitialSet, DEFAULT_UNFOLD_BUDGET};
use crate::syntax::{Action, ActionSet, Label, Term};
use crate::Error;

/// A formula of the logic.
///
/// `DiamAct` carries a visible action or `tau`, never the time-out; build
/// formulas through [`diam_act`] to keep that invariant checked.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    /// Finite conjunction; empty means truth.
    Conj(Vec<Formula>),
    Neg(Box<Formula>),
    /// `<a>f` or `<tau>f`.
    DiamAct(Label, Box<Formula>),
    /// `<{a,b}>f`: idle under the environment, then time out into `f`.
    DiamEnv(ActionSet, Box<Formula>),
}

impl Formula {
    /// Modal depth: the deepest nesting of diamonds of either kind.
    pub fn depth(&self) -> usize {
        match self {
            Formula::Conj(items) => items.iter().map(Formula::depth).max().unwrap_or(0),
            Formula::Neg(f) => f.depth(),
            Formula::DiamAct(_, f) | Formula::DiamEnv(_, f) => 1 + f.depth(),
        }
    }
}

/// Truth, the empty conjunction.
pub fn tt() -> Formula {
    Formula::Conj(Vec::new())
}

pub fn conj(items: Vec<Formula>) -> Formula {
    Formula::Conj(items)
}

pub fn neg(f: Formula) -> Formula {
    Formula::Neg(Box::new(f))
}

/// `<a>f` or `<tau>f`. The time-out label is rejected: a time-out is
/// observable only through the environment diamond.
pub fn diam_act(label: Label, f: Formula) -> Result<Formula, Error> {
    if label == Label::Timeout {
        return Err(Error::InvalidTerm(
            "the time-out has no action modality; use an environment diamond like <{a}>".into(),
        ));
    }
    Ok(Formula::DiamAct(label, Box::new(f)))
}

/// `<{..}>f` over the given environment.
pub fn diam_env(env: ActionSet, f: Formula) -> Formula {
    Formula::DiamEnv(env, Box::new(f))
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, false)
    }
}

impl Formula {
    /// `operand` is true when the formula sits under `!`, a diamond, or
    /// beside `&&`, where a multi-part conjunction needs parentheses.
    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, operand: bool) -> fmt::Result {
        match self {
            Formula::Conj(items) if items.is_empty() => f.write_str("true"),
            Formula::Conj(items) if items.len() == 1 => items[0].fmt_prec(f, operand),
            Formula::Conj(items) => {
                if operand {
                    f.write_str("(")?;
                }
                for (i, g) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" && ")?;
                    }
                    g.fmt_prec(f, true)?;
                }
                if operand {
                    f.write_str(")")?;
                }
                Ok(())
            }
            Formula::Neg(g) => {
                f.write_str("!")?;
                g.fmt_prec(f, true)
            }
            Formula::DiamAct(l, g) => {
                write!(f, "<{l}>")?;
                g.fmt_prec(f, true)
            }
            Formula::DiamEnv(x, g) => {
                write!(f, "<{x}>")?;
                g.fmt_prec(f, true)
            }
        }
    }
}

struct FormulaParser<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
    alphabet: &'a ActionSet,
}

impl<'a> FormulaParser<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, Error> {
        Err(Error::Parse {
            line: self.line,
            column: self.col,
            message: message.into(),
        })
    }

    fn bump(&mut self) {
        if self.chars[self.pos] == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        self.pos += 1;
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.bump();
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), Error> {
        if self.eat(c) {
            Ok(())
        } else {
            match self.peek() {
                Some(got) => self.err(format!("expected '{c}', found '{got}'")),
                None => self.err(format!("expected '{c}', found end of input")),
            }
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, Error> {
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() => {}
            Some(got) => return self.err(format!("expected {what}, found '{got}'")),
            None => return self.err(format!("expected {what}, found end of input")),
        }
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_alphanumeric() || c == '_')
        {
            self.bump();
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn action(&mut self) -> Result<Action, Error> {
        let name = self.ident("an action name")?;
        if !self.alphabet.contains(Action::new(&name)) {
            return self.err(format!("undeclared action '{name}'"));
        }
        Ok(Action::new(&name))
    }

    fn formula(&mut self) -> Result<Formula, Error> {
        let first = self.unary()?;
        self.skip_ws();
        if self.peek() != Some('&') {
            return Ok(first);
        }
        let mut items = vec![first];
        loop {
            self.skip_ws();
            if self.peek() != Some('&') {
                return Ok(Formula::Conj(items));
            }
            self.bump();
            self.expect('&')?;
            items.push(self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Formula, Error> {
        self.skip_ws();
        match self.peek() {
            Some('!') => {
                self.bump();
                Ok(neg(self.unary()?))
            }
            Some('<') => {
                self.bump();
                self.modality()
            }
            Some('(') => {
                self.bump();
                let f = self.formula()?;
                self.skip_ws();
                self.expect(')')?;
                Ok(f)
            }
            _ => {
                let word = self.ident("a formula")?;
                if word == "true" {
                    Ok(tt())
                } else {
                    self.err(format!("expected a formula, found '{word}'"))
                }
            }
        }
    }

    fn modality(&mut self) -> Result<Formula, Error> {
        self.skip_ws();
        if self.eat('{') {
            let mut acts = Vec::new();
            self.skip_ws();
            if self.peek() != Some('}') {
                loop {
                    acts.push(self.action()?);
                    self.skip_ws();
                    if !self.eat(',') {
                        break;
                    }
                    self.skip_ws();
                }
            }
            self.expect('}')?;
            self.skip_ws();
            self.expect('>')?;
            return Ok(diam_env(acts.into_iter().collect(), self.unary()?));
        }
        let name = self.ident("an action, 'tau', or '{'")?;
        let label = match name.as_str() {
            "t" => {
                return self.err(
                    "the time-out has no action modality; use an environment diamond like <{a}>",
                )
            }
            "tau" => Label::Tau,
            n if self.alphabet.contains(Action::new(n)) => Label::act(n),
            n => return self.err(format!("undeclared action '{n}'")),
        };
        self.skip_ws();
        self.expect('>')?;
        Ok(Formula::DiamAct(label, Box::new(self.unary()?)))
    }
}

/// Parses a formula over the given alphabet.
pub fn parse_formula(text: &str, alphabet: &ActionSet) -> Result<Formula, Error> {
    let mut p = FormulaParser {
        chars: text.chars().collect(),
        pos: 0,
        line: 1,
        col: 1,
        alphabet,
    };
    let f = p.formula()?;
    p.skip_ws();
    match p.peek() {
        None => Ok(f),
        Some(got) => p.err(format!("unexpected '{got}' after the formula")),
    }
}

/// Each derivation query gets the full unfold budget, as in exploration;
/// the context's memo tables make repeat visits free.
fn inits(ctx: &mut DeriveCtx, p: Term) -> Result<Rc<InitialSet>, Error> {
    ctx.reset_budget();
    ctx.initials(p)
}

fn steps(ctx: &mut DeriveCtx, p: Term) -> Result<Rc<Vec<(Label, Term)>>, Error> {
    ctx.reset_budget();
    ctx.transitions(p)
}

/// Plain satisfaction. Both relations recurse into strictly smaller
/// formulas except for the escape clause, which switches from `eval_env`
/// to `eval` on the same formula; since `eval` re-enters `eval_env` only
/// on subformulas, the recursion terminates.
fn eval(ctx: &mut DeriveCtx, p: Term, f: &Formula) -> Result<bool, Error> {
    match f {
        Formula::Conj(items) => {
            for g in items {
                if !eval(ctx, p, g)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Formula::Neg(g) => Ok(!eval(ctx, p, g)?),
        Formula::DiamAct(l, g) => {
            let succs = steps(ctx, p)?;
            for &(m, q) in succs.iter() {
                if m == *l && eval(ctx, q, g)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        Formula::DiamEnv(x, g) => {
            if !inits(ctx, p)?.idles_under(x) {
                return Ok(false);
            }
            let succs = steps(ctx, p)?;
            for &(m, q) in succs.iter() {
                if m == Label::Timeout && eval_env(ctx, q, x, g)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
    }
}

/// Satisfaction in an environment: the structural clause for the formula's
/// head connective, or the escape clause once the process idles.
fn eval_env(ctx: &mut DeriveCtx, p: Term, x: &ActionSet, f: &Formula) -> Result<bool, Error> {
    let structural = match f {
        Formula::Conj(items) => {
            let mut all = true;
            for g in items {
                if !eval_env(ctx, p, x, g)? {
                    all = false;
                    break;
                }
            }
            all
        }
        Formula::Neg(g) => !eval_env(ctx, p, x, g)?,
        Formula::DiamAct(Label::Act(a), g) => {
            if x.contains(*a) {
                let succs = steps(ctx, p)?;
                let mut found = false;
                for &(m, q) in succs.iter() {
                    // The continuation after a visible action is judged
                    // plainly: performing it ends the environment's window.
                    if m == Label::Act(*a) && eval(ctx, q, g)? {
                        found = true;
                        break;
                    }
                }
                found
            } else {
                false
            }
        }
        Formula::DiamAct(Label::Tau, g) => {
            let succs = steps(ctx, p)?;
            let mut found = false;
            for &(m, q) in succs.iter() {
                if m == Label::Tau && eval_env(ctx, q, x, g)? {
                    found = true;
                    break;
                }
            }
            found
        }
        // Unreachable through the constructors; a time-out step never
        // matches an action diamond.
        Formula::DiamAct(Label::Timeout, _) => false,
        // No structural clause: a nested environment diamond holds only
        // through the escape below.
        Formula::DiamEnv(..) => false,
    };
    if structural {
        return Ok(true);
    }
    if inits(ctx, p)?.idles_under(x) {
        eval(ctx, p, f)
    } else {
        Ok(false)
    }
}

/// Like [`eval_env`] but without the escape clause anywhere in the
/// environment-indexed part (plain subevaluations are unchanged). Used by
/// the equivalence checkers to prefer witness formulas whose replay stays
/// within the structural clauses; a heuristic, not a semantics.
fn eval_env_structural(ctx: &mut DeriveCtx, p: Term, x: &ActionSet, f: &Formula) -> Result<bool, Error> {
    match f {
        Formula::Conj(items) => {
            for g in items {
                if !eval_env_structural(ctx, p, x, g)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Formula::Neg(g) => Ok(!eval_env_structural(ctx, p, x, g)?),
        Formula::DiamAct(Label::Act(a), g) => {
            if !x.contains(*a) {
                return Ok(false);
            }
            let succs = steps(ctx, p)?;
            for &(m, q) in succs.iter() {
                if m == Label::Act(*a) && eval(ctx, q, g)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        Formula::DiamAct(Label::Tau, g) => {
            let succs = steps(ctx, p)?;
            for &(m, q) in succs.iter() {
                if m == Label::Tau && eval_env_structural(ctx, q, x, g)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        Formula::DiamAct(Label::Timeout, _) | Formula::DiamEnv(..) => Ok(false),
    }
}

/// Does the replay of `f` on `p` in environment `env` succeed using the
/// structural clauses alone? Implies `sat_env` would succeed too when the
/// formula is negation-free; used only to rank witness candidates.
pub(crate) fn sat_env_structural(
    p: Term,
    env: &ActionSet,
    f: &Formula,
    unfold_budget: u64,
) -> Result<bool, Error> {
    ensure_process(p)?;
    let mut ctx = DeriveCtx::new(unfold_budget);
    eval_env_structural(&mut ctx, p, env, f)
}

/// Does the process satisfy the formula?
pub fn sat(p: Term, f: &Formula) -> Result<bool, Error> {
    sat_with(p, f, DEFAULT_UNFOLD_BUDGET)
}

/// [`sat`] with an explicit unfold budget per derivation query.
pub fn sat_with(p: Term, f: &Formula, unfold_budget: u64) -> Result<bool, Error> {
    ensure_process(p)?;
    let mut ctx = DeriveCtx::new(unfold_budget);
    eval(&mut ctx, p, f)
}

/// Does the process satisfy the formula in the given environment?
pub fn sat_env(p: Term, env: &ActionSet, f: &Formula) -> Result<bool, Error> {
    sat_env_with(p, env, f, DEFAULT_UNFOLD_BUDGET)
}

/// [`sat_env`] with an explicit unfold budget per derivation query.
pub fn sat_env_with(
    p: Term,
    env: &ActionSet,
    f: &Formula,
    unfold_budget: u64,
) -> Result<bool, Error> {
    ensure_process(p)?;
    let mut ctx = DeriveCtx::new(unfold_budget);
    eval_env(&mut ctx, p, env, f)
}
